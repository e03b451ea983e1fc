"""
装置定义文件

JSON 语法（YAML 1.2 的子集，由 ruamel.yaml 解析，错误带行列号），结构：

    {
      "format_version": 1,
      "dimension": 2,
      "preparation": {"up": [[0.5, 0], [0, 0]], ...},
      "measurement": {"plus": [[0.5, 0.5], [0.5, 0.5]], ...},
      "evolution": {"matrix": [[0, [0, -1]], [[0, 1], 0]], "t_p": 0, "t_m": 1},
      "scenario": {"rho_g": ..., "a_basis": [[...], ...], "b_basis": [[...], ...]}
    }

矩阵按行给出，元素为实数或 [实部, 虚部]。给出 scenario 时 preparation / measurement 可省略，
此时由 Belinfante 场景推出。
"""

import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from constants import DEVICE_FILE_VERSION, MAX_DIMENSION
from src.device_model import DeviceOperatorSet, Role, build_device
from src.errors import DeviceFileSyntaxError, SchemaError
from src.evolution import EvolutionContext, evolution_context
from src.scenarios import BelinfanteScenario, belinfante_build, belinfante_scenario
from utils.config import Config, Tolerances
from utils.logger import logger
from utils.yaml_handler import YamlHandler, YamlSyntaxError


def _check_entry(value: Any) -> Any:
    if isinstance(value, (bool, str)):
        raise ValueError("matrix entries must be numbers or [re, im] pairs")
    if isinstance(value, list) and any(isinstance(v, (bool, str)) for v in value):
        raise ValueError("matrix entries must be numbers or [re, im] pairs")
    return value


def _string_keys(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): v for k, v in value.items()}
    return value


Entry = Annotated[Union[float, Tuple[float, float]], BeforeValidator(_check_entry)]
Rows = List[List[Entry]]
LabeledRows = Annotated[Dict[str, Rows], BeforeValidator(_string_keys)]


def to_array(rows: Rows) -> np.ndarray:
    return np.array(
        [[complex(*e) if isinstance(e, tuple) else complex(e) for e in row] for row in rows],
        dtype=np.complex128,
    )


def _shape_problem(rows: Rows, dim: int) -> Optional[str]:
    if len(rows) != dim or any(len(row) != dim for row in rows):
        return f"expected a {dim}x{dim} matrix"
    return None


def _device(role: Role, labeled: Dict[str, Rows], tol: Optional[Tolerances]) -> DeviceOperatorSet:
    return build_device(role, [(label, to_array(rows)) for label, rows in labeled.items()], tol)


class EvolutionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    matrix: Rows
    t_p: float = 0.0
    t_m: float = 0.0


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho_g: Rows
    a_basis: Rows
    b_basis: Rows


class DeviceFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: Literal[1]
    dimension: int = Field(ge=1, le=MAX_DIMENSION)
    preparation: Optional[LabeledRows] = None
    measurement: Optional[LabeledRows] = None
    evolution: Optional[EvolutionSpec] = None
    scenario: Optional[ScenarioSpec] = None

    @model_validator(mode="after")
    def _dimensions(self) -> "DeviceFile":
        if self.scenario is None and (self.preparation is None or self.measurement is None):
            raise ValueError("preparation and measurement are required without a scenario")
        d = self.dimension
        for section in ("preparation", "measurement"):
            for label, rows in (getattr(self, section) or {}).items():
                if problem := _shape_problem(rows, d):
                    raise ValueError(f"{section}.{label}: {problem}")
        if self.evolution is not None and (problem := _shape_problem(self.evolution.matrix, d)):
            raise ValueError(f"evolution.matrix: {problem}")
        if self.scenario is not None:
            for name in ("rho_g", "a_basis", "b_basis"):
                if problem := _shape_problem(getattr(self.scenario, name), d):
                    raise ValueError(f"scenario.{name}: {problem}")
        return self

    # ------------------------------------------------------------ 领域对象
    def belinfante(self, tol: Optional[Tolerances] = None) -> Optional[BelinfanteScenario]:
        if self.scenario is None:
            return None
        return belinfante_scenario(
            to_array(self.scenario.rho_g),
            to_array(self.scenario.a_basis),
            to_array(self.scenario.b_basis),
            tol,
        )

    def devices(
        self, tol: Optional[Tolerances] = None
    ) -> Tuple[DeviceOperatorSet, DeviceOperatorSet]:
        derived = None
        if self.preparation is None or self.measurement is None:
            derived = belinfante_build(self.belinfante(tol), tol)
        prep = (
            _device(Role.PREPARATION, self.preparation, tol)
            if self.preparation is not None
            else derived[0]
        )
        meas = (
            _device(Role.MEASUREMENT, self.measurement, tol)
            if self.measurement is not None
            else derived[1]
        )
        return prep, meas

    def evolution_context(self, tol: Optional[Tolerances] = None) -> Optional[EvolutionContext]:
        if self.evolution is None:
            return None
        return evolution_context(
            to_array(self.evolution.matrix), self.evolution.t_p, self.evolution.t_m, tol
        )


_SECTIONS = {"evolution": EvolutionSpec, "scenario": ScenarioSpec}


def _drop_unknown_keys(data: Dict[str, Any]) -> Dict[str, Any]:
    """宽松模式：未知键只告警"""
    kept = {}
    for key, value in data.items():
        if key not in DeviceFile.model_fields:
            logger.warning(f"忽略未知字段 '{key}'")
            continue
        model = _SECTIONS.get(key)
        if model is not None and isinstance(value, dict):
            for inner in [k for k in value if k not in model.model_fields]:
                logger.warning(f"忽略未知字段 '{key}.{inner}'")
            value = {k: v for k, v in value.items() if k in model.model_fields}
        kept[key] = value
    return kept


def _schema_error(e: ValidationError) -> SchemaError:
    first = e.errors()[0]
    field = ".".join(str(part) for part in first["loc"]) or "<root>"
    problem = first["msg"]
    if first["type"] == "extra_forbidden":
        problem = "unknown key (use --lenient to ignore)"
    return SchemaError(field, problem)


def load_device_data(data: Any, lenient: Optional[bool] = None) -> DeviceFile:
    if lenient is None:
        lenient = Config().lenient
    if not isinstance(data, dict):
        raise SchemaError("<root>", "device file must contain an object")
    if lenient:
        data = _drop_unknown_keys(data)
    try:
        return DeviceFile.model_validate(data)
    except ValidationError as e:
        raise _schema_error(e) from e


def parse_device_file(path: str | Path, lenient: Optional[bool] = None) -> DeviceFile:
    logger.debug(f"读取装置文件 {path}")
    try:
        data = YamlHandler().load_yaml(path)
    except YamlSyntaxError as e:
        raise DeviceFileSyntaxError(e.path, e.line, e.column, e.problem) from e
    except (FileNotFoundError, OSError, UnicodeDecodeError) as e:
        raise DeviceFileSyntaxError(str(path), None, None, str(e)) from e
    return load_device_data(data, lenient)


def emit_device_file(device_file: DeviceFile) -> str:
    """规范化输出：键按模型字段顺序，浮点数取最短往返表示"""
    data = device_file.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def device_file_from_devices(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet
) -> DeviceFile:
    def rows(matrix) -> list:
        return [
            [float(z.real) if z.imag == 0 else (float(z.real), float(z.imag)) for z in row]
            for row in np.asarray(matrix)
        ]

    return DeviceFile(
        format_version=DEVICE_FILE_VERSION,
        dimension=prep.dim,
        preparation={label: rows(op.matrix) for label, op in prep.items()},
        measurement={label: rows(op.matrix) for label, op in meas.items()},
    )
