"""
典型场景

- 自旋 1/2 无偏制备，以及只制备 |up⟩ / |+⟩ 的有偏变体
- 能量截断的有偏制备（只能制备最低的若干能级）
- Belinfante 的 von Neumann 测量链：混乱态 ρ_g 经 A 基测量完成制备，再做 B 基测量
- 扩展测量装置：加入空结果 Π_0 = 1 - Γ，用常规检测公设重新推出联合概率
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from constants import NULL_LABEL
from src.device_model import (
    DensityOperator,
    DeviceOperatorSet,
    Pom,
    Role,
    _require_role,
    build_device,
    build_pom,
    classify_bias,
    density_operator,
    event_weighted_traces,
)
from src.errors import (
    CrossCheckFailed,
    DegeneratePair,
    DegenerateScenario,
    NotOrthonormal,
)
from src.operator_core import (
    HermitianOperator,
    basis_ket,
    identity,
    max_entry_norm,
    projector,
    proportionality_to_identity,
    trace,
    trace_pair,
    validate_hermitian,
)
from src.probability_engine import (
    ConditionalTable,
    GivenAxis,
    conditional_from_traces,
    joint,
    retrodictive,
)
from utils.config import Tolerances, resolve_tol
from utils.logger import logger

IFF_DEVIATION_LIMIT = 1e-9

UP = basis_ket(2, 0)
DOWN = basis_ket(2, 1)
PLUS = (UP + DOWN) / np.sqrt(2.0)
MINUS = (UP - DOWN) / np.sqrt(2.0)
for _ket in (UP, DOWN, PLUS, MINUS):
    _ket.setflags(write=False)


# ---------------------------------------------------------------- 自旋 1/2
@dataclass(frozen=True, eq=False)
class SpinHalfScenario:
    prep: DeviceOperatorSet

    @staticmethod
    def expected_up(gamma_j: ArrayLike, tol: Optional[Tolerances] = None) -> float:
        """闭式 ⟨up|ρ_j^retr|up⟩，ρ_j^retr = Γ_j / Tr Γ_j"""
        op = validate_hermitian(gamma_j, tol)
        return float((UP.conj() @ op.matrix @ UP).real / trace(op, tol))

    def retrodict_up(self, gamma_j: ArrayLike, tol: Optional[Tolerances] = None) -> float:
        """把 Γ_j 当作单事件测量装置，用一般回溯公式求 P(up|j)"""
        meas = build_device(Role.MEASUREMENT, {"1": gamma_j}, tol)
        return retrodictive(joint(self.prep, meas, tol), tol).prob("up", "1")


def spin_half_scenario(tol: Optional[Tolerances] = None) -> SpinHalfScenario:
    """各以 1/2 概率制备 up 或 down"""
    prep = build_device(
        Role.PREPARATION,
        {"up": projector(UP).scaled(0.5), "down": projector(DOWN).scaled(0.5)},
        tol,
    )
    return SpinHalfScenario(prep)


def spin_half_biased_scenario(tol: Optional[Tolerances] = None) -> DeviceOperatorSet:
    """只制备 up 或 (up+down)/√2，各 1/2：Λ 不正比于单位算符"""
    return build_device(
        Role.PREPARATION,
        {"up": projector(UP).scaled(0.5), "plus": projector(PLUS).scaled(0.5)},
        tol,
    )


def truncated_preparation_scenario(
    dim: int,
    n_levels: int,
    weights: Optional[Sequence[float]] = None,
    tol: Optional[Tolerances] = None,
) -> DeviceOperatorSet:
    """能量受限：只能制备 |0⟩..|n_levels-1⟩，n_levels < dim 时必然有偏"""
    if not 1 <= n_levels <= dim:
        raise DegenerateScenario(f"n_levels must lie in [1, {dim}], got {n_levels}")
    if weights is None:
        weights = [1.0 / n_levels] * n_levels
    if len(weights) != n_levels:
        raise DegenerateScenario(f"expected {n_levels} weights, got {len(weights)}")
    return build_device(
        Role.PREPARATION,
        [(str(n), projector(basis_ket(dim, n)).scaled(w)) for n, w in enumerate(weights)],
        tol,
    )


# ---------------------------------------------------------------- Belinfante
@dataclass(frozen=True, eq=False)
class BelinfanteScenario:
    rho_g: DensityOperator
    a_basis: NDArray[np.complex128]  # 列向量 |a_i⟩
    b_basis: NDArray[np.complex128]  # 列向量 |b_j⟩
    dim: int
    a_labels: Tuple[str, ...]
    b_labels: Tuple[str, ...]

    @property
    def a_projectors(self) -> Tuple[HermitianOperator, ...]:
        return tuple(projector(self.a_basis[:, i], normalize=False) for i in range(self.dim))

    @property
    def b_projectors(self) -> Tuple[HermitianOperator, ...]:
        return tuple(projector(self.b_basis[:, j], normalize=False) for j in range(self.dim))

    def overlaps(self) -> NDArray[np.float64]:
        """|⟨a_i|b_j⟩|²，行 i 列 j"""
        return np.abs(self.a_basis.conj().T @ self.b_basis) ** 2


@dataclass(frozen=True)
class BelinfanteIffReport:
    deviation: float
    rho_g_proportional: bool
    prep_unbiased: bool
    consistent: bool


def _basis_matrix(name: str, vectors: ArrayLike, dim: int, tol: Tolerances) -> np.ndarray:
    vecs = np.asarray(vectors, dtype=np.complex128)
    if vecs.ndim != 2 or vecs.shape != (dim, dim):
        raise NotOrthonormal(name, float("inf"))
    columns = vecs.T
    defect = max_entry_norm(columns.conj().T @ columns - np.eye(dim))
    if defect > tol.orthonormal:
        raise NotOrthonormal(name, defect)
    columns = np.array(columns)
    columns.setflags(write=False)
    return columns


def belinfante_scenario(
    rho_g: ArrayLike | DensityOperator,
    a_basis: ArrayLike,
    b_basis: ArrayLike,
    tol: Optional[Tolerances] = None,
) -> BelinfanteScenario:
    """a_basis / b_basis 每行一个单位向量，只校验正交归一，不做重新正交化"""
    tol = resolve_tol(tol)
    rho = rho_g if isinstance(rho_g, DensityOperator) else density_operator(rho_g, tol)
    dim = rho.dim
    labels = tuple(str(k + 1) for k in range(dim))
    return BelinfanteScenario(
        rho_g=rho,
        a_basis=_basis_matrix("a_basis", a_basis, dim, tol),
        b_basis=_basis_matrix("b_basis", b_basis, dim, tol),
        dim=dim,
        a_labels=labels,
        b_labels=labels,
    )


def garbled_weights(s: BelinfanteScenario, tol: Optional[Tolerances] = None) -> NDArray[np.float64]:
    """Tr(ρ_g Π_i^a)"""
    return np.array([max(0.0, trace_pair(s.rho_g.op, p, tol)) for p in s.a_projectors])


def belinfante_build(
    s: BelinfanteScenario, tol: Optional[Tolerances] = None
) -> Tuple[DeviceOperatorSet, DeviceOperatorSet]:
    """Λ_i = Tr(ρ_g Π_i^a)|a_i⟩⟨a_i|，Γ_j = |b_j⟩⟨b_j|"""
    tol = resolve_tol(tol)
    weights = garbled_weights(s, tol)
    if np.all(weights <= tol.denom):
        raise DegenerateScenario("every garbled weight Tr(ρ_g Π_i^a) vanishes")
    prep = build_device(
        Role.PREPARATION,
        [(label, p.scaled(w)) for label, p, w in zip(s.a_labels, s.a_projectors, weights)],
        tol,
    )
    meas = build_device(Role.MEASUREMENT, list(zip(s.b_labels, s.b_projectors)), tol)
    return prep, meas


def belinfante_closed_form(
    s: BelinfanteScenario, tol: Optional[Tolerances] = None
) -> ConditionalTable:
    """P(i|j) = w_i |⟨a_i|b_j⟩|² / Σ_i w_i |⟨a_i|b_j⟩|²"""
    tol = resolve_tol(tol)
    numerators = (garbled_weights(s, tol)[:, None] * s.overlaps()).T
    return conditional_from_traces(
        GivenAxis.GIVEN_MEAS,
        s.b_labels,
        s.a_labels,
        numerators,
        numerators.sum(axis=1),
        tol.denom,
    )


def belinfante_retrodictive(
    s: BelinfanteScenario, tol: Optional[Tolerances] = None
) -> ConditionalTable:
    """一般回溯公式的结果；与闭式不一致时报错"""
    tol = resolve_tol(tol)
    prep, meas = belinfante_build(s, tol)
    generic = retrodictive(joint(prep, meas, tol), tol)
    deviation = generic.max_deviation(belinfante_closed_form(s, tol))
    logger.debug(f"Belinfante 闭式与一般公式的偏差 {deviation:.3g}")
    if deviation > tol.cross_check:
        raise CrossCheckFailed(["belinfante closed form"])
    return generic


def belinfante_iff_check(
    s: BelinfanteScenario, tol: Optional[Tolerances] = None
) -> BelinfanteIffReport:
    """比较回溯概率与 |⟨a_i|b_j⟩|²，并判断 ρ_g 是否正比于单位算符"""
    tol = resolve_tol(tol)
    table = belinfante_retrodictive(s, tol)
    overlaps = s.overlaps()
    deviation = 0.0
    for b, j in enumerate(s.b_labels):
        if table.is_defined(j):
            deviation = max(deviation, float(np.max(np.abs(table.row(j) - overlaps[:, b]))))
    proportional = proportionality_to_identity(s.rho_g.op, tol) is not None
    prep, _ = belinfante_build(s, tol)
    report = BelinfanteIffReport(
        deviation=deviation,
        rho_g_proportional=proportional,
        prep_unbiased=classify_bias(prep, tol).is_unbiased,
        consistent=(deviation <= IFF_DEVIATION_LIMIT) == proportional,
    )
    if not report.consistent:
        logger.warning(
            f"Belinfante 判定不一致: 偏差 {deviation:.3g}, ρ_g 正比于 1: {proportional}"
        )
    return report


# ---------------------------------------------------------------- 扩展测量装置
@dataclass(frozen=True, eq=False)
class ExtendedMeasurementDevice:
    base: DeviceOperatorSet
    pom: Pom

    @property
    def null_element(self) -> HermitianOperator:
        return self.pom.element(NULL_LABEL)


def appendix_extend(
    meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> ExtendedMeasurementDevice:
    """Π_0 = 1 - Γ 放在首位，其余 Π_j = Γ_j"""
    _require_role(meas, Role.MEASUREMENT)
    null = identity(meas.dim) - meas.total
    pom = build_pom([(NULL_LABEL, null)] + list(meas.items()), tol)
    return ExtendedMeasurementDevice(meas, pom)


def conventional_joint(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> NDArray[np.float64]:
    """
    只用常规检测公设推出的联合概率

    P(k|i) = Tr(ρ_i Π_k)，P(i,k) = P(k|i) P^Λ(i)，去掉 k = 0 后在剩余样本空间里重新归一化。
    """
    tol = resolve_tol(tol)
    extended = appendix_extend(meas, tol)
    restricted = event_weighted_traces(prep, [extended.pom.element(j) for j in meas.labels], tol)
    kept = float(restricted.sum())
    if kept <= tol.denom:
        raise DegeneratePair(kept)
    return restricted / kept


def appendix_equivalence(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> float:
    """常规公设路径与对称公设 joint() 的最大逐项偏差"""
    return float(np.max(np.abs(conventional_joint(prep, meas, tol) - joint(prep, meas, tol).p)))


def null_outcome_mass(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> float:
    """Σ_i P^Λ(i) Tr(ρ_i Π_0)，即空结果被丢弃的概率"""
    tol = resolve_tol(tol)
    null = appendix_extend(meas, tol).null_element
    return float(event_weighted_traces(prep, [null], tol).sum())
