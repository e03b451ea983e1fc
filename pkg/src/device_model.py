"""
制备 / 测量装置模型

装置由一组带标签的非负定算符描述（制备装置算符 PDO 记作 Λ_i，测量装置算符 MDO 记作 Γ_j），
本模块负责校验、求和、偏置分类，并导出密度算符和 POM。
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from constants import NULL_LABEL
from src.errors import (
    BiasedDevice,
    DimensionMismatch,
    DuplicateLabel,
    EmptyDevice,
    InvalidDensity,
    InvalidPom,
    NotPsd,
    ReservedLabel,
    RoleMismatch,
    UnknownLabel,
    ZeroTotal,
    ZeroTraceOperator,
)
from src.operator_core import (
    HermitianOperator,
    eigenvalues,
    identity,
    identity_defect,
    max_entry_norm,
    operator_sum,
    proportionality_to_identity,
    psd_check,
    psd_threshold,
    trace,
    trace_pair,
    validate_hermitian,
)
from utils.config import Tolerances, resolve_tol
from utils.logger import logger


class Role(str, Enum):
    PREPARATION = "preparation"
    MEASUREMENT = "measurement"


Label = Union[str, int]
LabeledMatrices = Union[
    Mapping[Label, Union[ArrayLike, HermitianOperator]],
    Sequence[Tuple[Label, Union[ArrayLike, HermitianOperator]]],
]


class _LabeledOperators:
    labels: Tuple[str, ...]

    def index(self, label: Label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise UnknownLabel(str(label)) from None

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class DeviceOperatorSet(_LabeledOperators):
    role: Role
    labels: Tuple[str, ...]
    operators: Tuple[HermitianOperator, ...]
    dim: int
    total: HermitianOperator
    normalization_factor: float = 1.0

    def operator(self, label: Label) -> HermitianOperator:
        return self.operators[self.index(label)]

    def items(self) -> Iterator[Tuple[str, HermitianOperator]]:
        return zip(self.labels, self.operators)

    def scaled(self, factor: float, tol: Optional[Tolerances] = None) -> "DeviceOperatorSet":
        """全体算符乘同一常数后重新构造（测量装置会再次归一化）"""
        return build_device(
            self.role,
            [(label, op.matrix * factor) for label, op in self.items()],
            tol,
        )

    def __repr__(self) -> str:
        return f"DeviceOperatorSet({self.role.value}, dim={self.dim}, labels={list(self.labels)})"


@dataclass(frozen=True)
class BiasReport:
    role: Role
    is_unbiased: bool
    gamma: Optional[float]
    defect: float


@dataclass(frozen=True, eq=False)
class DensityOperator:
    op: HermitianOperator

    @property
    def matrix(self):
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim


@dataclass(frozen=True, eq=False)
class Pom(_LabeledOperators):
    labels: Tuple[str, ...]
    elements: Tuple[HermitianOperator, ...]
    dim: int

    def element(self, label: Label) -> HermitianOperator:
        return self.elements[self.index(label)]

    def items(self) -> Iterator[Tuple[str, HermitianOperator]]:
        return zip(self.labels, self.elements)


# ---------------------------------------------------------------- 构造与校验
def _pairs(labeled_matrices: LabeledMatrices):
    if isinstance(labeled_matrices, Mapping):
        return list(labeled_matrices.items())
    return list(labeled_matrices)


def _as_operator(value, tol: Tolerances) -> HermitianOperator:
    if isinstance(value, HermitianOperator):
        return value
    return validate_hermitian(value, tol)


def _require_psd(label: str, op: HermitianOperator, tol: Tolerances) -> None:
    min_eig = psd_check(op)
    if min_eig < psd_threshold(op, tol):
        raise NotPsd(label, min_eig)


def build_device(
    role: Role | str,
    labeled_matrices: LabeledMatrices,
    tol: Optional[Tolerances] = None,
) -> DeviceOperatorSet:
    """校验并构造装置；测量装置按公共因子 max(1, λ_max(Γ)) 缩放，使 1 - Γ 非负定"""
    tol = resolve_tol(tol)
    role = Role(role)
    pairs = _pairs(labeled_matrices)
    if not pairs:
        raise EmptyDevice()

    labels: list[str] = []
    operators: list[HermitianOperator] = []
    for raw_label, value in pairs:
        label = str(raw_label)
        if label in labels:
            raise DuplicateLabel(label)
        if role is Role.MEASUREMENT and label == NULL_LABEL:
            raise ReservedLabel(label)
        try:
            op = _as_operator(value, tol)
        except Exception as e:
            e.add_note(f"while validating {role.value} operator '{label}'")
            raise
        if operators and op.dim != operators[0].dim:
            raise DimensionMismatch(operators[0].dim, op.dim, f"operator '{label}'")
        _require_psd(label, op, tol)
        labels.append(label)
        operators.append(op)

    total = operator_sum(operators)
    total_trace = trace(total, tol)
    if total_trace <= tol.psd:
        raise ZeroTotal(total_trace)

    factor = 1.0
    if role is Role.MEASUREMENT:
        largest = float(eigenvalues(total)[-1])
        # 舍入误差内的 λ_max 视为已满足约定
        if largest > 1.0 + tol.psd:
            factor = largest
            logger.info(f"测量装置算符整体除以 {factor:.6g}，保证 1 - Γ 非负定")
            operators = [op.scaled(1.0 / factor) for op in operators]
            total = operator_sum(operators)

    device = DeviceOperatorSet(
        role=role,
        labels=tuple(labels),
        operators=tuple(operators),
        dim=operators[0].dim,
        total=total,
        normalization_factor=factor,
    )
    logger.debug(f"构造装置 {device}, 归一化因子 {factor:.6g}")
    return device


def density_operator(
    m: ArrayLike | HermitianOperator, tol: Optional[Tolerances] = None
) -> DensityOperator:
    """校验外部给定的密度算符：非负定且单位迹"""
    tol = resolve_tol(tol)
    op = _as_operator(m, tol)
    min_eig = psd_check(op)
    if min_eig < psd_threshold(op, tol):
        raise InvalidDensity(f"density operator has negative eigenvalue {min_eig:.6g}")
    tr = trace(op, tol)
    if abs(tr - 1.0) > tol.density:
        raise InvalidDensity(f"density operator has trace {tr!r}, expected 1")
    return DensityOperator(op)


def build_pom(
    labeled_matrices: LabeledMatrices, tol: Optional[Tolerances] = None
) -> Pom:
    """校验 POM：每个元素非负定，总和为单位算符"""
    tol = resolve_tol(tol)
    pairs = _pairs(labeled_matrices)
    if not pairs:
        raise InvalidPom("a POM needs at least one element")
    labels = [str(label) for label, _ in pairs]
    if len(set(labels)) != len(labels):
        raise InvalidPom(f"duplicate POM labels in {labels}")
    elements = [_as_operator(value, tol) for _, value in pairs]
    dim = elements[0].dim
    for label, element in zip(labels, elements):
        if element.dim != dim:
            raise DimensionMismatch(dim, element.dim, f"POM element '{label}'")
        min_eig = psd_check(element)
        if min_eig < psd_threshold(element, tol):
            raise InvalidPom(
                f"POM element '{label}' has negative eigenvalue {min_eig:.6g}"
            )
    defect = max_entry_norm(operator_sum(elements).matrix - identity(dim).matrix)
    if defect > tol.pom:
        raise InvalidPom(f"POM elements do not sum to the identity (defect {defect:.3g})")
    return Pom(tuple(labels), tuple(elements), dim)


def _require_role(dev: DeviceOperatorSet, role: Role) -> None:
    if dev.role is not role:
        raise RoleMismatch(role.value, dev.role.value)


# ---------------------------------------------------------------- 偏置
def classify_bias(
    dev: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> BiasReport:
    """装置无偏当且仅当算符之和正比于单位算符（单一全局常数）"""
    gamma = proportionality_to_identity(dev.total, tol)
    return BiasReport(
        role=dev.role,
        is_unbiased=gamma is not None,
        gamma=gamma,
        defect=identity_defect(dev.total),
    )


def _require_unbiased(dev: DeviceOperatorSet, tol: Optional[Tolerances]) -> float:
    report = classify_bias(dev, tol)
    if not report.is_unbiased:
        raise BiasedDevice(dev.role.value, report.defect)
    return report.gamma


# ---------------------------------------------------------------- 导出量
def has_density(dev: DeviceOperatorSet, label: Label, tol: Optional[Tolerances] = None) -> bool:
    """Tr D_a 超过 tol.psd · Tr D 时才有密度算符 D_a / Tr D_a"""
    tol = resolve_tol(tol)
    return trace(dev.operator(label), tol) > tol.psd * trace(dev.total, tol)


def _normalized(dev: DeviceOperatorSet, label: Label, tol: Tolerances) -> DensityOperator:
    if not has_density(dev, label, tol):
        raise ZeroTraceOperator(str(label))
    op = dev.operator(label)
    return DensityOperator(op.scaled(1.0 / trace(op, tol)))


def pdo_to_density(
    dev: DeviceOperatorSet, label: Label, tol: Optional[Tolerances] = None
) -> DensityOperator:
    """ρ_i = Λ_i / Tr Λ_i"""
    _require_role(dev, Role.PREPARATION)
    return _normalized(dev, label, resolve_tol(tol))


def retr_density(
    dev: DeviceOperatorSet, label: Label, tol: Optional[Tolerances] = None
) -> DensityOperator:
    """回溯密度算符 ρ_j^retr = Γ_j / Tr Γ_j"""
    _require_role(dev, Role.MEASUREMENT)
    return _normalized(dev, label, resolve_tol(tol))


def a_priori_distribution(
    dev: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> pd.Series:
    """P^Λ(i) = Tr Λ_i / Tr Λ，按插入顺序索引"""
    _require_role(dev, Role.PREPARATION)
    traces = np.array([max(0.0, trace(op, tol)) for op in dev.operators])
    return pd.Series(
        traces / traces.sum(), index=pd.Index(dev.labels, name="i"), name="P(i)"
    )


def mixture_state(
    dev: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> DensityOperator:
    """ρ = Λ / Tr Λ"""
    _require_role(dev, Role.PREPARATION)
    return DensityOperator(dev.total.scaled(1.0 / trace(dev.total, tol)))


def mdo_to_pom(dev: DeviceOperatorSet, tol: Optional[Tolerances] = None) -> Pom:
    """无偏测量装置：Π_j = Γ_j / γ"""
    _require_role(dev, Role.MEASUREMENT)
    gamma = _require_unbiased(dev, tol)
    return build_pom([(label, op.scaled(1.0 / gamma)) for label, op in dev.items()], tol)


def preparation_pom(dev: DeviceOperatorSet, tol: Optional[Tolerances] = None) -> Pom:
    """无偏制备装置：Ξ_i = Λ_i / γ_prep，γ_prep = Tr Λ / d"""
    _require_role(dev, Role.PREPARATION)
    gamma = _require_unbiased(dev, tol)
    return build_pom([(label, op.scaled(1.0 / gamma)) for label, op in dev.items()], tol)


def device_from_pom(
    pom: Pom, role: Role | str, weight: float = 1.0, tol: Optional[Tolerances] = None
) -> DeviceOperatorSet:
    """由 POM 元素乘以同一权重构造无偏装置"""
    return build_device(
        role, [(label, element.matrix * weight) for label, element in pom.items()], tol
    )


def event_weighted_traces(
    dev: DeviceOperatorSet,
    elements: Sequence[HermitianOperator],
    tol: Optional[Tolerances] = None,
) -> NDArray[np.float64]:
    """
    [a, k] = (Tr D_a / Tr D) · Tr(ρ_a E_k)，ρ_a = D_a / Tr D_a

    没有密度算符的事件（迹在舍入阈值以内）直接取 Tr(D_a E_k) / Tr D，两式在数学上相同。
    """
    tol = resolve_tol(tol)
    total = trace(dev.total, tol)
    weights = np.zeros((len(dev), len(elements)))
    for a, (label, op) in enumerate(dev.items()):
        tr = trace(op, tol)
        if tr <= 0.0:
            continue
        if has_density(dev, label, tol):
            rho = _normalized(dev, label, tol).op
            weights[a] = [(tr / total) * trace_pair(rho, el, tol) for el in elements]
        else:
            weights[a] = [trace_pair(op, el, tol) / total for el in elements]
    return np.maximum(weights, 0.0)
