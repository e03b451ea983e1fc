# config.py
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat
from pydantic_settings import BaseSettings, SettingsConfigDict

import constants
from src.utils import singleton
from utils.logger import logger
from utils.yaml_handler import YamlHandler

SETTINGS_FILE = Path(__file__).resolve().parent.parent / "config" / "settings.yaml"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class Tolerances(BaseModel):
    """数值容差集合，所有公开运算都接受 ``tol`` 参数"""

    model_config = ConfigDict(frozen=True)

    herm: PositiveFloat = constants.TOL_HERM
    psd: PositiveFloat = constants.TOL_PSD
    unitary: PositiveFloat = constants.TOL_UNITARY
    prop: PositiveFloat = constants.TOL_PROP
    denom: PositiveFloat = constants.TOL_DENOM
    clamp: PositiveFloat = constants.TOL_CLAMP
    pom: PositiveFloat = constants.TOL_POM
    density: PositiveFloat = constants.TOL_DENSITY
    orthonormal: PositiveFloat = constants.TOL_ORTHONORMAL
    cross_check: PositiveFloat = constants.TOL_CROSS_CHECK


DEFAULT_TOLERANCES = Tolerances()


def resolve_tol(tol: Optional[Tolerances]) -> Tolerances:
    return DEFAULT_TOLERANCES if tol is None else tol


def _load_file_defaults(path: Path) -> Dict[str, Any]:
    """读取 settings.yaml，环境变量已设置的键不覆盖"""
    if not path.exists():
        return {}
    try:
        data = YamlHandler().load_yaml(path) or {}
    except Exception as e:
        logger.error(f"Failed to load config: {str(e)}")
        raise ValueError(f"Configuration error: {str(e)}")
    if not isinstance(data, dict):
        raise ValueError(f"Configuration error: {path} must contain a mapping")
    return {
        key: value
        for key, value in data.items()
        if f"RETRODICT_{key.upper()}" not in os.environ
    }


@singleton
class Config(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="RETRODICT_", case_sensitive=False)

    threads: int = Field(default=constants.DEFAULT_THREADS, ge=1)
    chunks: int = Field(default=1, ge=1)
    log_level: str = "WARNING"
    lenient: bool = False
    output_format: OutputFormat = OutputFormat.JSON
    test_dir: str = "test_data/checks"
    golden_dir: str = "tests/golden"
    tolerances: Tolerances = DEFAULT_TOLERANCES

    def __init__(self, **kwargs):
        defaults = _load_file_defaults(SETTINGS_FILE)
        super().__init__(**{**defaults, **kwargs})
        logger.debug(
            f"配置已加载: threads={self.threads}, chunks={self.chunks}, "
            f"test_dir={self.test_dir}"
        )


class DirPath:
    def __init__(self):
        self.base_dir = Path(__file__).resolve().parent.parent
        self.test_dir = self.base_dir / Config().test_dir
        self.golden_dir = self.base_dir / Config().golden_dir
