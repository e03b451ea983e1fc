"""异常定义，每一类错误对应一个命令行退出码"""

from typing import Sequence

from constants import (
    EXIT_CROSS_CHECK,
    EXIT_DEGENERATE,
    EXIT_SCHEMA,
    EXIT_SIMULATION,
    EXIT_SYNTAX,
    EXIT_UNEXPECTED,
    EXIT_VALIDATION,
)


class RetrodictError(Exception):
    exit_code = EXIT_UNEXPECTED


# ---------------------------------------------------------------- operator-core
class OperatorError(RetrodictError):
    exit_code = EXIT_VALIDATION


class MalformedMatrix(OperatorError):
    pass


class NonFiniteEntry(OperatorError):
    pass


class DimensionTooLarge(OperatorError):
    def __init__(self, dim: int, cap: int):
        self.dim = dim
        self.cap = cap
        super().__init__(f"dimension {dim} exceeds the cap of {cap}")


class DimensionMismatch(OperatorError):
    def __init__(self, expected: int, actual: int, what: str = "operator"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} has dimension {actual}, expected {expected}")


class NotHermitian(OperatorError):
    def __init__(self, defect: float):
        self.defect = defect
        super().__init__(f"matrix is not Hermitian (defect {defect:.3g})")


class NotUnitary(OperatorError):
    def __init__(self, defect: float):
        self.defect = defect
        super().__init__(f"matrix is not unitary (defect {defect:.3g})")


class EigenFailure(OperatorError):
    pass


# ---------------------------------------------------------------- device-model
class DeviceError(RetrodictError):
    exit_code = EXIT_VALIDATION


class NotPsd(DeviceError):
    def __init__(self, label: str, min_eigenvalue: float):
        self.label = label
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"operator '{label}' is not non-negative definite "
            f"(min eigenvalue {min_eigenvalue:.6g})"
        )


class EmptyDevice(DeviceError):
    def __init__(self):
        super().__init__("a device needs at least one operator")


class DuplicateLabel(DeviceError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"duplicate event label '{label}'")


class ReservedLabel(DeviceError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"label '{label}' is reserved for the null measurement outcome")


class UnknownLabel(DeviceError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"no operator with label '{label}'")


class ZeroTotal(DeviceError):
    def __init__(self, trace: float):
        self.trace = trace
        super().__init__(f"device operators sum to zero (trace {trace:.3g})")


class ZeroTraceOperator(DeviceError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"operator '{label}' has zero trace and no density operator")


class BiasedDevice(DeviceError):
    def __init__(self, role: str, defect: float):
        self.role = role
        self.defect = defect
        super().__init__(
            f"{role} device is biased (operator sum is not proportional to the "
            f"identity, defect {defect:.3g})"
        )


class RoleMismatch(DeviceError):
    def __init__(self, expected: str, actual: str):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected a {expected} device, got a {actual} device")


class InvalidDensity(DeviceError):
    pass


class InvalidPom(DeviceError):
    pass


# ---------------------------------------------------------------- probability
class ProbabilityError(RetrodictError):
    exit_code = EXIT_DEGENERATE


class DegeneratePair(ProbabilityError):
    def __init__(self, denominator: float):
        self.denominator = denominator
        super().__init__(
            f"devices never produce a recordable combined event "
            f"(Tr(ΛΓ) = {denominator:.3g})"
        )


class InternalNumericalError(ProbabilityError):
    exit_code = EXIT_UNEXPECTED


class UndefinedConditional(ProbabilityError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"conditioning event '{label}' has zero probability")


# ---------------------------------------------------------------- scenarios
class ScenarioError(RetrodictError):
    exit_code = EXIT_VALIDATION


class DegenerateScenario(ScenarioError):
    pass


class NotOrthonormal(ScenarioError):
    def __init__(self, name: str, defect: float):
        self.name = name
        self.defect = defect
        super().__init__(f"basis '{name}' is not orthonormal (defect {defect:.3g})")


# ---------------------------------------------------------------- simulation
class SimulationError(RetrodictError):
    exit_code = EXIT_SIMULATION


class InvalidTrialCount(SimulationError):
    pass


class EmptyKeptSet(SimulationError):
    def __init__(self, n_trials: int):
        self.n_trials = n_trials
        super().__init__(f"all {n_trials} trials produced the null outcome")


# ---------------------------------------------------------------- cli-io
class DeviceFileError(RetrodictError):
    exit_code = EXIT_SCHEMA


class DeviceFileSyntaxError(DeviceFileError):
    exit_code = EXIT_SYNTAX

    def __init__(self, path: str, line: int | None, column: int | None, problem: str):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {problem}")


class SchemaError(DeviceFileError):
    def __init__(self, field: str, problem: str):
        self.field = field
        super().__init__(f"field '{field}': {problem}")


class CrossCheckFailed(RetrodictError):
    exit_code = EXIT_CROSS_CHECK

    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        super().__init__(f"cross-checks failed: {', '.join(self.names)}")
