"""
对称概率公设及其导出概率

联合概率 P(i,j) = Tr(Λ_i Γ_j) / Tr(ΛΓ)，以及边缘、预测条件概率 P(j|i)、回溯条件概率 P(i|j)
和无偏装置下的约化形式。未定义的条件行是显式标记的数据，不会填 NaN。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from src.device_model import (
    DensityOperator,
    DeviceOperatorSet,
    Label,
    Pom,
    Role,
    _require_role,
    event_weighted_traces,
    mdo_to_pom,
    preparation_pom,
)
from src.errors import (
    DegeneratePair,
    InternalNumericalError,
    UndefinedConditional,
)
from src.operator_core import require_same_dim, trace, trace_pair, trace_pair_matrix
from utils.config import Tolerances, resolve_tol
from utils.logger import logger


class GivenAxis(str, Enum):
    GIVEN_PREP = "given_prep"
    GIVEN_MEAS = "given_meas"


@dataclass(frozen=True, eq=False)
class JointDistribution:
    prep_labels: Tuple[str, ...]
    meas_labels: Tuple[str, ...]
    p: NDArray[np.float64]
    denominator: float
    raw: NDArray[np.float64]
    scale: float

    def prob(self, i: Label, j: Label) -> float:
        return float(self.p[self.prep_labels.index(str(i)), self.meas_labels.index(str(j))])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.p,
            index=pd.Index(self.prep_labels, name="i"),
            columns=pd.Index(self.meas_labels, name="j"),
        )


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """
    条件概率表

    given_axis=GIVEN_PREP 时每行是 P(j|i)，given_labels 为 i；
    given_axis=GIVEN_MEAS 时每行是 P(i|j)，given_labels 为 j。
    """

    given_axis: GivenAxis
    given_labels: Tuple[str, ...]
    outcome_labels: Tuple[str, ...]
    rows: Dict[str, NDArray[np.float64]] = field(repr=False)
    undefined_rows: FrozenSet[str] = frozenset()

    def is_defined(self, given: Label) -> bool:
        return str(given) in self.rows

    def row(self, given: Label) -> NDArray[np.float64]:
        given = str(given)
        if given not in self.rows:
            raise UndefinedConditional(given)
        return self.rows[given]

    def prob(self, outcome: Label, given: Label) -> float:
        """P(outcome | given)"""
        return float(self.row(given)[self.outcome_labels.index(str(outcome))])

    def max_deviation(self, other: "ConditionalTable") -> float:
        """两张表在共同定义行上的最大差；定义域不同视为无穷大"""
        if (
            self.given_labels != other.given_labels
            or self.outcome_labels != other.outcome_labels
            or self.undefined_rows != other.undefined_rows
        ):
            return float("inf")
        deviations = [
            float(np.max(np.abs(self.rows[label] - other.rows[label])))
            for label in self.rows
        ]
        return max(deviations, default=0.0)

    def to_frame(self) -> pd.DataFrame:
        """行是给定事件；未定义行的值为 None"""
        data = [
            list(self.rows[label]) if label in self.rows else [None] * len(self.outcome_labels)
            for label in self.given_labels
        ]
        given_name, outcome_name = ("i", "j") if self.given_axis is GivenAxis.GIVEN_PREP else ("j", "i")
        return pd.DataFrame(
            data,
            index=pd.Index(self.given_labels, name=given_name),
            columns=pd.Index(self.outcome_labels, name=outcome_name),
            dtype=object,
        )


def conditional_from_traces(
    given_axis: GivenAxis,
    given_labels: Sequence[str],
    outcome_labels: Sequence[str],
    numerators: NDArray[np.float64],
    denominators: NDArray[np.float64],
    threshold: float,
) -> ConditionalTable:
    """numerators[g, o] / denominators[g]，分母不超过阈值的行标记为未定义"""
    rows: Dict[str, NDArray[np.float64]] = {}
    undefined = set()
    for g, label in enumerate(given_labels):
        if denominators[g] <= threshold:
            undefined.add(label)
            continue
        row = np.array(numerators[g] / denominators[g], dtype=np.float64)
        row.setflags(write=False)
        rows[label] = row
    if undefined:
        logger.debug(f"条件概率未定义的事件: {sorted(undefined)}")
    return ConditionalTable(
        given_axis=given_axis,
        given_labels=tuple(given_labels),
        outcome_labels=tuple(outcome_labels),
        rows=rows,
        undefined_rows=frozenset(undefined),
    )


def clamp_negative(
    values: NDArray[np.float64], limit: float, what: str = "trace"
) -> NDArray[np.float64]:
    """[-limit, 0) 的舍入负值截断为 0；更负的值说明有非正定算符漏过校验"""
    worst = float(np.min(values)) if values.size else 0.0
    if worst < -limit:
        raise InternalNumericalError(
            f"{what} value {worst:.3g} is below the rounding limit {-limit:.3g}"
        )
    if worst < 0:
        logger.debug(f"截断舍入负值 {worst:.3g}")
    return np.where(values < 0, 0.0, values)


def _trace_scale(prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Tolerances) -> float:
    return trace(prep.total, tol) * trace(meas.total, tol)


# ---------------------------------------------------------------- 联合与边缘
def joint(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> JointDistribution:
    """P(i,j) = Tr(Λ_i Γ_j) / Tr(ΛΓ)，原始迹只归一化一次"""
    tol = resolve_tol(tol)
    _require_role(prep, Role.PREPARATION)
    _require_role(meas, Role.MEASUREMENT)
    require_same_dim(prep.total, meas.total, "measurement device")

    scale = _trace_scale(prep, meas, tol)
    raw = trace_pair_matrix(prep.operators, meas.operators, tol)
    raw = clamp_negative(raw, tol.clamp * scale)
    denominator = float(raw.sum())
    if denominator <= tol.denom * scale:
        raise DegeneratePair(denominator)

    p = raw / denominator
    p.setflags(write=False)
    raw.setflags(write=False)
    return JointDistribution(
        prep_labels=prep.labels,
        meas_labels=meas.labels,
        p=p,
        denominator=denominator,
        raw=raw,
        scale=scale,
    )


def marginal_prep(jd: JointDistribution) -> pd.Series:
    """P(i) = Σ_j P(i,j)"""
    return pd.Series(jd.p.sum(axis=1), index=pd.Index(jd.prep_labels, name="i"), name="P(i)")


def marginal_meas(jd: JointDistribution) -> pd.Series:
    """P(j) = Σ_i P(i,j)"""
    return pd.Series(jd.p.sum(axis=0), index=pd.Index(jd.meas_labels, name="j"), name="P(j)")


def marginal_prep_direct(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> pd.Series:
    """Tr(Λ_i Γ) / Tr(ΛΓ)，直接由装置之和计算"""
    values = np.array([trace_pair(op, meas.total, tol) for op in prep.operators])
    return pd.Series(
        values / trace_pair(prep.total, meas.total, tol),
        index=pd.Index(prep.labels, name="i"),
        name="P(i)",
    )


def marginal_meas_direct(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> pd.Series:
    """Tr(Λ Γ_j) / Tr(ΛΓ)"""
    values = np.array([trace_pair(prep.total, op, tol) for op in meas.operators])
    return pd.Series(
        values / trace_pair(prep.total, meas.total, tol),
        index=pd.Index(meas.labels, name="j"),
        name="P(j)",
    )


# ---------------------------------------------------------------- 条件概率
def predictive(jd: JointDistribution, tol: Optional[Tolerances] = None) -> ConditionalTable:
    """P(j|i) = Tr(Λ_i Γ_j) / Tr(Λ_i Γ)"""
    tol = resolve_tol(tol)
    return conditional_from_traces(
        GivenAxis.GIVEN_PREP,
        jd.prep_labels,
        jd.meas_labels,
        jd.raw,
        jd.raw.sum(axis=1),
        tol.denom * jd.scale,
    )


def retrodictive(jd: JointDistribution, tol: Optional[Tolerances] = None) -> ConditionalTable:
    """P(i|j) = Tr(Λ_i Γ_j) / Tr(Λ Γ_j)"""
    tol = resolve_tol(tol)
    return conditional_from_traces(
        GivenAxis.GIVEN_MEAS,
        jd.meas_labels,
        jd.prep_labels,
        jd.raw.T,
        jd.raw.sum(axis=0),
        tol.denom * jd.scale,
    )


def bayes_deviation(jd: JointDistribution, tol: Optional[Tolerances] = None) -> float:
    """max |P(i,j) - P(i)P(j|i)| 与 |P(i,j) - P(j)P(i|j)|，只取定义项"""
    p_i = marginal_prep(jd).to_numpy()
    p_j = marginal_meas(jd).to_numpy()
    pred = predictive(jd, tol)
    retr = retrodictive(jd, tol)
    worst = 0.0
    for a, i in enumerate(jd.prep_labels):
        if pred.is_defined(i):
            worst = max(worst, float(np.max(np.abs(jd.p[a] - p_i[a] * pred.row(i)))))
    for b, j in enumerate(jd.meas_labels):
        if retr.is_defined(j):
            worst = max(worst, float(np.max(np.abs(jd.p[:, b] - p_j[b] * retr.row(j)))))
    return worst


# ---------------------------------------------------------------- 无偏约化
def _clamp_unit(value: float, tol: Tolerances) -> float:
    if value < -tol.clamp or value > 1.0 + tol.clamp:
        raise InternalNumericalError(f"probability {value!r} lies outside [0, 1]")
    return min(1.0, max(0.0, value))


def detection_probability(
    rho: DensityOperator, pom: Pom, label: Label, tol: Optional[Tolerances] = None
) -> float:
    """检测理论的标准公设 Tr(ρ Π_j)"""
    tol = resolve_tol(tol)
    require_same_dim(pom, rho, "density operator")
    return _clamp_unit(trace_pair(rho.op, pom.element(label), tol), tol)


def retrodictive_unbiased(
    prep_pom: Pom, rho_retr: DensityOperator, label: Label, tol: Optional[Tolerances] = None
) -> float:
    """无偏制备装置的回溯概率 Tr(Ξ_i ρ_j^retr)"""
    tol = resolve_tol(tol)
    require_same_dim(prep_pom, rho_retr, "retrodictive density operator")
    return _clamp_unit(trace_pair(prep_pom.element(label), rho_retr.op, tol), tol)


def retrodictive_bayes(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> ConditionalTable:
    """
    常规做法：无偏测量装置下用检测公设 Tr(ρ_i Π_j) 加先验 P^Λ(i)，再套 Bayes 定理

    P(i|j) = P^Λ(i) Tr(ρ_i Π_j) / Σ_i' P^Λ(i') Tr(ρ_i' Π_j)
    """
    tol = resolve_tol(tol)
    weighted = event_weighted_traces(prep, mdo_to_pom(meas, tol).elements, tol)
    return conditional_from_traces(
        GivenAxis.GIVEN_MEAS,
        meas.labels,
        prep.labels,
        weighted.T,
        weighted.sum(axis=0),
        tol.denom,
    )


def predictive_bayes(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> ConditionalTable:
    """
    对称情形：无偏制备装置下由回溯公式 Tr(Ξ_i ρ_j^retr) 和 P(j) = Tr Γ_j / Tr Γ 反推预测概率

    P(j|i) = P(j) Tr(Ξ_i ρ_j^retr) / Σ_j' P(j') Tr(Ξ_i ρ_j'^retr)
    """
    tol = resolve_tol(tol)
    weighted = event_weighted_traces(meas, preparation_pom(prep, tol).elements, tol).T
    return conditional_from_traces(
        GivenAxis.GIVEN_PREP,
        prep.labels,
        meas.labels,
        weighted,
        weighted.sum(axis=1),
        tol.denom,
    )
