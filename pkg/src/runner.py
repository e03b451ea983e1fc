import types
from inspect import Parameter, Signature

import pytest

from src.test_case_executor import CaseExecutor
from utils.logger import logger

_DEFAULT_FIXTURES = ["value", "tol"]


def build_test_signature(fixtures: list) -> Signature:
    if not isinstance(fixtures, list):
        raise ValueError("fixtures 必须是列表类型")
    conflict = set(fixtures) & set(_DEFAULT_FIXTURES)
    if conflict:
        conflict_fixtures_str = ", ".join(conflict)
        raise ValueError(
            f"禁止覆盖默认 fixtures: {conflict_fixtures_str}。 默认 fixtures 包括: {', '.join(_DEFAULT_FIXTURES)}"
        )
    parameters = [
        Parameter(name, Parameter.POSITIONAL_OR_KEYWORD)
        for name in _DEFAULT_FIXTURES + fixtures
    ]
    return Signature(parameters)


class TestCaseGenerator:
    """把 YAML 用例转换成动态模块里的 test_ 函数，数据由 pytest_generate_tests 参数化"""

    __test__ = False

    def __init__(self, module: types.ModuleType, test_cases, datas):
        self.datas = datas
        self.test_cases = test_cases
        self.test_data = self.datas.get("test_data", {})
        self.devices = self.datas.get("devices", {})
        self.module: types.ModuleType = module

    def generate(self) -> None:
        if not isinstance(self.test_cases, list):
            raise ValueError(
                f"'test_cases' 数据格式错误，期望列表类型，但实际为: {type(self.test_cases)}"
            )

        for case in self.test_cases:
            if not isinstance(case, dict):
                logger.warning(f"发现非字典类型的用例数据: {case}，已跳过该用例")
                continue
            try:
                test_func = self._create_test_function(case)
                setattr(self.module, test_func.__name__, test_func)
            except ValueError as e:
                logger.warning(f"生成用例函数失败，原因: {e}。用例数据: {case}，已跳过该用例")
                continue

    def _create_test_function(self, case: dict):
        try:
            case_name = case["name"]
        except KeyError:
            raise ValueError("用例数据缺少 'name' 字段，请检查用例定义")

        fixtures = case.get("fixtures", [])
        case_data = self.test_data.get(case_name, {})
        case_data = (
            [case_data]
            if isinstance(case_data, dict) and case_data
            else case_data if isinstance(case_data, list) else []
        )
        if not case_data:
            raise ValueError(f"用例 {case_name} 没有对应的测试数据")
        setattr(self.module, f"{case_name}_data", case_data)

        devices = self.devices

        def _test_function_wrapper_for_case(value, tol, **kwargs):
            CaseExecutor(value, devices).execute_test_case(tol)

        marked_func = _test_function_wrapper_for_case
        for marker in case.get("markers", []):
            marked_func = getattr(pytest.mark, marker)(marked_func)

        marked_func.__name__ = case_name
        marked_func.__doc__ = case.get("description", "")
        marked_func.__signature__ = build_test_signature(fixtures)
        return marked_func
