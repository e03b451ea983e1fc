"""
制备时刻 t_p 与测量时刻 t_m 之间的幺正演化

两条回溯路径分别实现、互不调用：
- retrodictive_evolved: 把 Λ_i 向前演化到 t_m 再与 ρ_j^retr 求迹
- retrodictive_backward: 把 ρ_j^retr 向后演化到 t_p 再与 Λ_i 求迹
两者一致说明“坍缩时刻”的选取是任意的。
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.device_model import (
    DensityOperator,
    DeviceOperatorSet,
    Pom,
    Role,
    _require_role,
    build_pom,
)
from src.errors import OperatorError
from src.operator_core import (
    UnitaryMap,
    adjoint,
    compose_unitaries,
    conjugate_by,
    identity,
    operator_sum,
    require_same_dim,
    trace,
    trace_pair,
    validate_unitary,
)
from src.probability_engine import (
    ConditionalTable,
    GivenAxis,
    clamp_negative,
    conditional_from_traces,
)
from utils.config import Tolerances, resolve_tol
from utils.logger import logger


@dataclass(frozen=True, eq=False)
class EvolutionContext:
    u: UnitaryMap
    t_p: float = 0.0
    t_m: float = 0.0

    def __post_init__(self):
        if self.t_p > self.t_m:
            raise OperatorError(f"preparation time {self.t_p} is after measurement time {self.t_m}")

    @property
    def dim(self) -> int:
        return self.u.dim


def evolution_context(
    matrix, t_p: float = 0.0, t_m: float = 0.0, tol: Optional[Tolerances] = None
) -> EvolutionContext:
    return EvolutionContext(validate_unitary(matrix, tol), float(t_p), float(t_m))


def identity_context(dim: int) -> EvolutionContext:
    return EvolutionContext(validate_unitary(identity(dim).matrix))


def compose(
    later: EvolutionContext, earlier: EvolutionContext, tol: Optional[Tolerances] = None
) -> EvolutionContext:
    """先 earlier 后 later：U = U_later · U_earlier"""
    return EvolutionContext(
        compose_unitaries(later.u, earlier.u, tol),
        t_p=earlier.t_p,
        t_m=max(later.t_m, earlier.t_m),
    )


def evolve_pdo(ctx: EvolutionContext, prep: DeviceOperatorSet) -> DeviceOperatorSet:
    """Λ_i(t_m) = U Λ_i U†，迹与偏置分类不变"""
    _require_role(prep, Role.PREPARATION)
    require_same_dim(prep.total, ctx.u, "evolution operator")
    operators = tuple(conjugate_by(ctx.u, op) for op in prep.operators)
    return DeviceOperatorSet(
        role=prep.role,
        labels=prep.labels,
        operators=operators,
        dim=prep.dim,
        total=operator_sum(operators),
        normalization_factor=prep.normalization_factor,
    )


def _retr_states(meas: DeviceOperatorSet, tol: Tolerances):
    """迹为正的 Γ_j 都有 ρ_j^retr；返回 {j: (ρ_j^retr, Tr Γ_j)}"""
    states = {}
    for j, op in meas.items():
        tr = trace(op, tol)
        if tr > 0.0:
            states[j] = (DensityOperator(op.scaled(1.0 / tr)), tr)
        else:
            logger.debug(f"测量事件 {j} 的 MDO 迹为零，回溯行未定义")
    return states


def _table(prep, meas, numerators, tol: Tolerances) -> ConditionalTable:
    """numerators[j, i] = Tr(U Λ_i U† Γ_j)，未定义判据与 Tr(ΛΓ_j) 的判据相同"""
    scale = trace(prep.total, tol) * trace(meas.total, tol)
    numerators = clamp_negative(numerators, tol.clamp * scale)
    return conditional_from_traces(
        GivenAxis.GIVEN_MEAS,
        meas.labels,
        prep.labels,
        numerators,
        numerators.sum(axis=1),
        tol.denom * scale,
    )


def retrodictive_evolved(
    ctx: EvolutionContext,
    prep: DeviceOperatorSet,
    meas: DeviceOperatorSet,
    tol: Optional[Tolerances] = None,
) -> ConditionalTable:
    """P(i|j) = Tr(U Λ_i U† ρ_j^retr) / Tr(U Λ U† ρ_j^retr)"""
    tol = resolve_tol(tol)
    require_same_dim(prep.total, meas.total, "measurement device")
    forward = [conjugate_by(ctx.u, op) for op in prep.operators]
    states = _retr_states(meas, tol)
    numerators = np.zeros((len(meas), len(prep)))
    for b, j in enumerate(meas.labels):
        if j not in states:
            continue
        rho, tr = states[j]
        numerators[b] = [tr * trace_pair(op, rho.op, tol) for op in forward]
    return _table(prep, meas, numerators, tol)


def backward_retr_state(ctx: EvolutionContext, rho: DensityOperator) -> DensityOperator:
    """ρ_j^retr(t_p) = U† ρ_j^retr U"""
    return DensityOperator(conjugate_by(adjoint(ctx.u), rho.op))


def retrodictive_backward(
    ctx: EvolutionContext,
    prep: DeviceOperatorSet,
    meas: DeviceOperatorSet,
    tol: Optional[Tolerances] = None,
) -> ConditionalTable:
    """P(i|j) = Tr[Λ_i ρ_j^retr(t_p)] / Tr[Λ ρ_j^retr(t_p)]"""
    tol = resolve_tol(tol)
    require_same_dim(prep.total, meas.total, "measurement device")
    states = _retr_states(meas, tol)
    numerators = np.zeros((len(meas), len(prep)))
    for b, j in enumerate(meas.labels):
        if j not in states:
            continue
        rho, tr = states[j]
        backward = backward_retr_state(ctx, rho).op
        numerators[b] = [tr * trace_pair(op, backward, tol) for op in prep.operators]
    return _table(prep, meas, numerators, tol)


def heisenberg_pom(
    ctx: EvolutionContext, pom: Pom, tol: Optional[Tolerances] = None
) -> Pom:
    """U† Π_j U：测量事件紧接在 t_p 之后发生的等效测量装置"""
    require_same_dim(pom, ctx.u, "evolution operator")
    u_dagger = adjoint(ctx.u)
    return build_pom([(label, conjugate_by(u_dagger, el)) for label, el in pom.items()], tol)


def collapse_time_deviation(
    ctx: EvolutionContext,
    prep: DeviceOperatorSet,
    meas: DeviceOperatorSet,
    tol: Optional[Tolerances] = None,
) -> float:
    return retrodictive_evolved(ctx, prep, meas, tol).max_deviation(
        retrodictive_backward(ctx, prep, meas, tol)
    )
