"""
结果输出

CSV 与 JSON 两种格式，数字一律取最短往返表示（repr），CSV 用 "," 分隔、"." 作小数点、
"\\n" 换行，与区域设置无关；未定义的条件概率写作 "undefined"。
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from utils.config import OutputFormat
from utils.logger import logger

UNDEFINED = "undefined"


def format_number(value: Any) -> Any:
    """float 用 repr；None / NaN 视为未定义"""
    if value is None:
        return UNDEFINED
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return UNDEFINED
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _csv_cell(value: Any) -> Any:
    value = format_number(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def frame_to_csv(frame: pd.DataFrame) -> str:
    """索引（如有名字）作为前几列，表头必有"""
    if any(name is not None for name in frame.index.names):
        frame = frame.reset_index()
    return frame.map(_csv_cell).to_csv(index=False, na_rep=UNDEFINED, lineterminator="\n")


def frame_to_records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    if any(name is not None for name in frame.index.names):
        frame = frame.reset_index()
    return [
        {str(k): format_number(v) for k, v in zip(frame.columns, row)}
        for row in frame.itertuples(index=False, name=None)
    ]


class ReportHandler:
    """把一个或多个命令结果写到 stdout 字符串或 --out 目录"""

    def __init__(self, output_format: OutputFormat = OutputFormat.JSON):
        self.output_format = OutputFormat(output_format)

    def render(self, document: Dict[str, Any]) -> str:
        if self.output_format is OutputFormat.JSON:
            return self.render_json(document)
        return self.render_csv(document)

    @staticmethod
    def _jsonable(value: Any) -> Any:
        if isinstance(value, pd.DataFrame):
            return frame_to_records(value)
        if isinstance(value, pd.Series):
            return frame_to_records(value.to_frame())
        if isinstance(value, dict):
            return {str(k): ReportHandler._jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [ReportHandler._jsonable(v) for v in value]
        return format_number(value)

    def render_json(self, document: Dict[str, Any]) -> str:
        return json.dumps(self._jsonable(document), indent=2, ensure_ascii=False) + "\n"

    def render_csv(self, document: Dict[str, Any]) -> str:
        """每张表一个段落，段首为 "# 表名"，段间空一行"""
        sections = []
        for name, frame in self.tables(document).items():
            sections.append(f"# {name}\n" + frame_to_csv(frame))
        return "\n".join(sections)

    @staticmethod
    def tables(document: Dict[str, Any], prefix: str = "") -> Dict[str, pd.DataFrame]:
        """把文档里所有表（含标量汇总表）展开成 名称 -> DataFrame"""
        found: Dict[str, pd.DataFrame] = {}
        scalars = {}
        for key, value in document.items():
            name = f"{prefix}{key}"
            if isinstance(value, pd.DataFrame):
                found[name] = value
            elif isinstance(value, pd.Series):
                found[name] = value.to_frame()
            elif isinstance(value, dict):
                found.update(ReportHandler.tables(value, prefix=f"{name}."))
            elif isinstance(value, list) and value and isinstance(value[0], dict):
                found[name] = pd.DataFrame(value)
            else:
                scalars[key] = value
        if scalars:
            summary = pd.DataFrame({"key": list(scalars), "value": list(scalars.values())})
            found = {f"{prefix}summary": summary, **found}
        return found

    def write(self, document: Dict[str, Any], out_dir: Optional[str | Path] = None) -> Optional[str]:
        """out_dir 为空时返回文本供写到 stdout；否则写文件并返回 None"""
        if out_dir is None:
            return self.render(document)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if self.output_format is OutputFormat.JSON:
            path = out / f"{document.get('command', 'result')}.json"
            path.write_text(self.render_json(document), encoding="utf-8", newline="\n")
            logger.info(f"结果已写入 {path}")
            return None
        for name, frame in self.tables(document).items():
            path = out / f"{name}.csv"
            path.write_text(frame_to_csv(frame), encoding="utf-8", newline="\n")
            logger.info(f"结果已写入 {path}")
        return None
