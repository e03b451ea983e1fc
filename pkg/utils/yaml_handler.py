import os
from pathlib import Path
from typing import Any, Dict

from ruamel.yaml import YAML
from ruamel.yaml.error import MarkedYAMLError, YAMLError

from utils.logger import logger


def get_yaml_files(directory: str | Path) -> list[Path] | None:
    dir_path = Path(directory)
    if not dir_path.exists() or not dir_path.is_dir():
        logger.error(f"指定的路径 {directory} 不是一个有效的目录")
        return None
    return sorted(dir_path.glob("**/*.yaml"))


class YamlSyntaxError(Exception):
    """解析失败，携带行列位置（从 1 开始）"""

    def __init__(self, path: str, line: int | None, column: int | None, problem: str):
        self.path = path
        self.line = line
        self.column = column
        self.problem = problem
        super().__init__(f"{path}:{line}:{column}: {problem}")


class YamlHandler:
    """YAML 1.2 读写，JSON 文件同样可以直接解析"""

    def __init__(self):
        self.yaml = YAML(typ="safe")

    def load_yaml(self, file_path: str | Path) -> Any:
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"YAML文件不存在: {file_path}")

        with open(file_path, "r", encoding="utf-8") as f:
            return self.load_text(f.read(), str(file_path))

    def load_text(self, text: str, source: str = "<string>") -> Any:
        try:
            return self.yaml.load(text)
        except MarkedYAMLError as e:
            mark = e.problem_mark or e.context_mark
            line = mark.line + 1 if mark is not None else None
            column = mark.column + 1 if mark is not None else None
            raise YamlSyntaxError(source, line, column, str(e.problem or e)) from e
        except YAMLError as e:
            raise YamlSyntaxError(source, None, None, str(e)) from e

    def load_yaml_dir(self, file_path: str | Path) -> Dict[str, Any]:
        """合并目录下所有 YAML：列表拼接，字典合并"""
        yaml_files = get_yaml_files(file_path)
        result: Dict[str, Any] = {}
        if not yaml_files:
            return result
        for yaml_file in yaml_files:
            yaml_data = self.load_yaml(yaml_file)
            if not isinstance(yaml_data, dict):
                continue
            for key, value in yaml_data.items():
                if key not in result:
                    result[key] = (
                        list(value)
                        if isinstance(value, list)
                        else dict(value) if isinstance(value, dict) else value
                    )
                elif isinstance(result[key], list) and isinstance(value, list):
                    result[key] += value
                elif isinstance(result[key], dict) and isinstance(value, dict):
                    result[key].update(value)
                else:
                    logger.warning(f"键 {key} 在 {yaml_file} 中重复定义，保留首个值")
        return result

    def save_to_yaml(self, data_dict, output_dir, filename):
        """
        将字典写入 YAML 文件。

        Args:
            data_dict: 要写入的字典。
            output_dir: 输出目录的路径。
            filename: YAML 文件的名称（不含扩展名）。
        """
        writer = YAML(typ="safe")
        writer.default_flow_style = False
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        filepath = Path(output_dir) / f"{filename}.yaml"

        with open(filepath, "w", encoding="utf-8") as f:
            writer.dump(data_dict, f)
        return filepath
