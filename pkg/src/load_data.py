from pathlib import Path
from typing import Any, Dict

from src.utils import singleton
from utils.config import DirPath
from utils.yaml_handler import YamlHandler


class LoadData:
    """读取校验用例目录：cases / data / devices"""

    def __init__(self, dir):
        self.test_data_dir = Path(dir)

        self.yaml_data = self._load_yaml_data()

    def _load_yaml_data(self) -> Dict[str, Any]:
        self.yaml = YamlHandler()

        return {
            "test_cases": self.yaml.load_yaml_dir(self.test_data_dir / "cases").get(
                "test_cases", []
            ),
            "test_data": self.yaml.load_yaml_dir(self.test_data_dir / "data").get(
                "test_data", {}
            ),
            "devices": self.yaml.load_yaml_dir(self.test_data_dir / "devices").get(
                "devices", {}
            ),
        }

    def return_data(self):
        return self.yaml_data


@singleton
def check_data() -> Dict[str, Any]:
    """整个会话共用一份校验数据"""
    return LoadData(DirPath().test_dir).return_data()
