import types
from pathlib import Path

import numpy as np
import pytest
from _pytest.python import Module

from src.device_model import Role, build_device
from src.load_data import check_data
from src.operator_core import basis_ket, projector
from src.runner import TestCaseGenerator
from src.scenarios import MINUS, PLUS
from utils.config import DEFAULT_TOLERANCES
from utils.logger import logger
from utils.yaml_handler import YamlHandler


@pytest.fixture(scope="session")
def tol():
    """默认容差"""
    return DEFAULT_TOLERANCES


@pytest.fixture()
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture()
def spin_half_prep(tol):
    return build_device(
        Role.PREPARATION,
        {
            "up": projector(basis_ket(2, 0)).scaled(0.5),
            "down": projector(basis_ket(2, 1)).scaled(0.5),
        },
        tol,
    )


@pytest.fixture()
def biased_pair(tol):
    """Λ = {0.6|0⟩⟨0|, 0.4|1⟩⟨1|}，Γ = {|+⟩⟨+|, |−⟩⟨−|}"""
    prep = build_device(
        Role.PREPARATION,
        {
            "1": projector(basis_ket(2, 0)).scaled(0.6),
            "2": projector(basis_ket(2, 1)).scaled(0.4),
        },
        tol,
    )
    meas = build_device(Role.MEASUREMENT, {"1": projector(PLUS), "2": projector(MINUS)}, tol)
    return prep, meas


@pytest.fixture()
def tiny_prior_pair(tol):
    """Λ = {|0⟩⟨0|, 1e-10·|1⟩⟨1|}，第二个制备事件的迹远小于半正定容差"""
    prep = build_device(
        Role.PREPARATION,
        {
            "1": projector(basis_ket(2, 0)),
            "2": projector(basis_ket(2, 1)).scaled(1e-10),
        },
        tol,
    )
    meas = build_device(Role.MEASUREMENT, {"1": projector(PLUS), "2": projector(MINUS)}, tol)
    return prep, meas


def pytest_addoption(parser):
    parser.addoption(
        "--record-golden",
        action="store_true",
        default=False,
        help="重新记录 tests/golden 下的模拟基准计数",
    )


@pytest.fixture(scope="session")
def record_golden(request) -> bool:
    return bool(request.config.getoption("--record-golden"))


def pytest_collect_file(file_path: Path, parent):  # noqa
    if file_path.suffix != ".yaml" or file_path.parent.name != "cases":
        return None
    test_data = YamlHandler().load_yaml(file_path)
    if not isinstance(test_data, dict) or "test_cases" not in test_data:
        return None
    py_module, module = create_py_module(
        file_path, parent, test_data["test_cases"], check_data()
    )
    py_module._getobj = lambda: module  # 返回 pytest 模块对象
    return py_module


def create_py_module(file_path: Path, parent, test_cases, datas):
    """创建并生成 py 模块"""
    py_module = Module.from_parent(parent, path=file_path)
    module = types.ModuleType(file_path.stem)  # 动态创建 module
    TestCaseGenerator(module=module, test_cases=test_cases, datas=datas).generate()
    return py_module, module


def pytest_generate_tests(metafunc):  # noqa
    """YAML 用例的参数化"""
    func_name = metafunc.function.__name__
    params_data = getattr(metafunc.module, f"{func_name}_data", None)

    if not params_data:
        return

    if not isinstance(params_data, list):
        params_data = [params_data]

    ids = [
        value.get("description", f"用例{i + 1}") for i, value in enumerate(params_data)
    ]

    metafunc.parametrize(
        "value",
        params_data,
        ids=ids,
        scope="function",
    )


def pytest_collection_modifyitems(items) -> None:
    # 用例名称中文显示
    for item in items:
        item.name = item.name.encode().decode("unicode-escape")
        item._nodeid = item._nodeid.encode().decode("unicode-escape")
    logger.debug(f"共收集 {len(items)} 个用例")
