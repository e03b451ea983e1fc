"""
实验的蒙特卡洛模拟

Alice 按先验分布 P^Λ(i) 选择制备事件，Bob 用扩展 POM（空结果 Π_0 = 1 - Γ 放在首位）
按 P(k|i) = Tr(ρ_i Π_k) 抽取测量结果；k = 0 的记录在统计时丢弃。

试验被切成固定大小的块，第 b 块使用子随机流 seed ⊕ (b · 0x9E3779B97F4A7C15)，
因此任意分片数、任意线程数得到的记录完全相同。
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from constants import (
    NULL_LABEL,
    SEED_MASK,
    SIM_BLOCK_TRIALS,
    SUBSTREAM_MULTIPLIER,
    Z_VARIANCE_FLOOR,
)
from src.device_model import (
    DeviceOperatorSet,
    Role,
    _require_role,
    a_priori_distribution,
    event_weighted_traces,
)
from src.errors import EmptyKeptSet, InvalidTrialCount, SimulationError
from src.operator_core import require_same_dim
from src.probability_engine import joint
from src.scenarios import appendix_extend, null_outcome_mass
from utils.config import Config, Tolerances, resolve_tol
from utils.logger import logger


@dataclass(frozen=True)
class RngSeed:
    seed: int

    def __post_init__(self):
        if not 0 <= self.seed <= SEED_MASK:
            raise SimulationError(f"seed {self.seed} is not a 64-bit unsigned integer")

    def substream(self, block: int) -> int:
        return substream_seed(self.seed, block)


def substream_seed(seed: int, block: int) -> int:
    return (seed ^ ((block * SUBSTREAM_MULTIPLIER) & SEED_MASK)) & SEED_MASK


@dataclass(frozen=True)
class EventRecord:
    trial: int
    i: str
    k: str


@dataclass(frozen=True, eq=False)
class ExperimentLog:
    """prep_index / k_index 逐试验存放标签下标；k_labels[0] 为空结果"""

    seed: RngSeed
    n_trials: int
    prep_labels: Tuple[str, ...]
    k_labels: Tuple[str, ...]
    prep_index: NDArray[np.int64]
    k_index: NDArray[np.int64]

    @property
    def n_discarded(self) -> int:
        return int(np.count_nonzero(self.k_index == 0))

    def records(self) -> Iterator[EventRecord]:
        for trial, (a, k) in enumerate(zip(self.prep_index, self.k_index)):
            yield EventRecord(trial, self.prep_labels[a], self.k_labels[k])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "trial": np.arange(self.n_trials, dtype=np.int64),
                "i": np.asarray(self.prep_labels, dtype=object)[self.prep_index],
                "k": np.asarray(self.k_labels, dtype=object)[self.k_index],
            }
        )


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    prep_labels: Tuple[str, ...]
    meas_labels: Tuple[str, ...]
    counts: NDArray[np.int64]
    kept_total: int
    p_hat: NDArray[np.float64]
    p_theory: NDArray[np.float64]
    z: NDArray[np.float64]

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.p_hat - self.p_theory)))

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    def to_frame(self) -> pd.DataFrame:
        """长表：每个 (i, j) 一行"""
        a, b = np.meshgrid(
            np.arange(len(self.prep_labels)), np.arange(len(self.meas_labels)), indexing="ij"
        )
        a, b = a.ravel(), b.ravel()
        return pd.DataFrame(
            {
                "i": [self.prep_labels[x] for x in a],
                "j": [self.meas_labels[y] for y in b],
                "count": self.counts[a, b],
                "p_hat": self.p_hat[a, b],
                "p": self.p_theory[a, b],
                "z": self.z[a, b],
            }
        )


# ---------------------------------------------------------------- 抽样
def _cdf(weights: NDArray[np.float64]) -> NDArray[np.longdouble]:
    cdf = np.cumsum(np.asarray(weights, dtype=np.longdouble))
    return cdf / cdf[-1]


def _inverse_cdf(cdf: NDArray, u: NDArray[np.float64]) -> NDArray[np.int64]:
    """u ∈ (0, 1]，取第一个 cdf ≥ u 的下标，边界处归入较小的下标"""
    index = np.searchsorted(cdf, u.astype(np.longdouble), side="left")
    return np.minimum(index, len(cdf) - 1).astype(np.int64)


def _outcome_cdfs(
    prep: DeviceOperatorSet, pom_elements, tol: Tolerances
) -> NDArray[np.longdouble]:
    """每个制备事件一行 P(k|i) 的累积分布；先验为零的行不会被抽中"""
    weighted = event_weighted_traces(prep, pom_elements, tol)
    cdfs = np.ones(weighted.shape, dtype=np.longdouble)
    for a, row in enumerate(weighted):
        if row.sum() > 0.0:
            cdfs[a] = _cdf(row)
    return cdfs


def _run_block(
    seed: RngSeed,
    block: int,
    size: int,
    prep_cdf: NDArray,
    outcome_cdfs: NDArray,
) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
    rng = np.random.default_rng(seed.substream(block))
    u_prep = 1.0 - rng.random(size)
    u_meas = 1.0 - rng.random(size)
    prep_index = _inverse_cdf(prep_cdf, u_prep)
    # 逐行的 searchsorted(side='left')：统计严格小于 u 的累积值个数
    rows = outcome_cdfs[prep_index]
    k_index = np.count_nonzero(rows < u_meas.astype(np.longdouble)[:, None], axis=1)
    k_index = np.minimum(k_index, outcome_cdfs.shape[1] - 1).astype(np.int64)
    return prep_index, k_index


def _run_chunk(seed, blocks, n_trials, prep_cdf, outcome_cdfs):
    results = []
    for block in blocks:
        start = block * SIM_BLOCK_TRIALS
        size = min(SIM_BLOCK_TRIALS, n_trials - start)
        results.append(_run_block(seed, block, size, prep_cdf, outcome_cdfs))
    logger.debug(f"分片完成: 块 {blocks[0]}..{blocks[-1]}")
    return results


def run_experiment(
    prep: DeviceOperatorSet,
    meas: DeviceOperatorSet,
    n_trials: int,
    seed: int | RngSeed,
    chunks: Optional[int] = None,
    threads: Optional[int] = None,
    tol: Optional[Tolerances] = None,
) -> ExperimentLog:
    """
    模拟 n_trials 次制备 / 测量

    :param chunks: 分片数，默认取配置；分片是连续的块组，不影响结果
    :param threads: 线程数上限，默认取 RETRODICT_THREADS
    """
    tol = resolve_tol(tol)
    if isinstance(n_trials, bool) or not isinstance(n_trials, (int, np.integer)) or n_trials < 1:
        raise InvalidTrialCount(f"n_trials must be a positive integer, got {n_trials!r}")
    n_trials = int(n_trials)
    seed = seed if isinstance(seed, RngSeed) else RngSeed(int(seed))
    _require_role(prep, Role.PREPARATION)
    _require_role(meas, Role.MEASUREMENT)
    require_same_dim(prep.total, meas.total, "measurement device")
    # 设备对必须能产生可记录的联合事件
    joint(prep, meas, tol)

    config = Config()
    chunks = max(1, chunks if chunks is not None else config.chunks)
    threads = max(1, threads if threads is not None else config.threads)

    extended = appendix_extend(meas, tol)
    prior = a_priori_distribution(prep, tol).to_numpy()
    prep_cdf = _cdf(prior)
    outcome_cdfs = _outcome_cdfs(prep, extended.pom.elements, tol)

    n_blocks = -(-n_trials // SIM_BLOCK_TRIALS)
    groups = [list(g) for g in np.array_split(np.arange(n_blocks), min(chunks, n_blocks))]
    groups = [[int(b) for b in g] for g in groups if len(g)]
    logger.info(
        f"开始模拟: {n_trials} 次试验, seed={seed.seed}, {len(groups)} 个分片, 线程上限 {threads}"
    )

    with ThreadPoolExecutor(max_workers=min(threads, len(groups))) as executor:
        futures = [
            executor.submit(_run_chunk, seed, g, n_trials, prep_cdf, outcome_cdfs)
            for g in groups
        ]
        results = [block for future in futures for block in future.result()]

    prep_index = np.concatenate([r[0] for r in results])
    k_index = np.concatenate([r[1] for r in results])
    prep_index.setflags(write=False)
    k_index.setflags(write=False)
    log = ExperimentLog(
        seed=seed,
        n_trials=n_trials,
        prep_labels=prep.labels,
        k_labels=extended.pom.labels,
        prep_index=prep_index,
        k_index=k_index,
    )
    logger.info(f"模拟结束: 丢弃空结果 {log.n_discarded} 次")
    return log


# ---------------------------------------------------------------- 统计
def tabulate(
    log: ExperimentLog,
    prep: DeviceOperatorSet,
    meas: DeviceOperatorSet,
    tol: Optional[Tolerances] = None,
) -> FrequencyTable:
    """丢弃 k = 0，在剩余样本空间里统计频率并与 joint() 比较"""
    if log.prep_labels != prep.labels or log.k_labels != (NULL_LABEL,) + meas.labels:
        raise SimulationError("experiment log was not produced against these devices")
    kept = log.k_index != 0
    kept_total = int(np.count_nonzero(kept))
    if kept_total == 0:
        raise EmptyKeptSet(log.n_trials)

    counts = np.zeros((len(prep), len(meas)), dtype=np.int64)
    np.add.at(counts, (log.prep_index[kept], log.k_index[kept] - 1), 1)
    p_hat = counts / kept_total
    p = np.array(joint(prep, meas, tol).p)
    z = (p_hat - p) * np.sqrt(kept_total / np.maximum(p * (1.0 - p), Z_VARIANCE_FLOOR))
    for arr in (counts, p_hat, z):
        arr.setflags(write=False)
    return FrequencyTable(
        prep_labels=prep.labels,
        meas_labels=meas.labels,
        counts=counts,
        kept_total=kept_total,
        p_hat=p_hat,
        p_theory=p,
        z=z,
    )


def expected_discard_fraction(
    prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> float:
    """空结果的理论占比 Σ_i P^Λ(i) Tr(ρ_i (1 - Γ))"""
    return null_outcome_mass(prep, meas, tol)


def discard_z(
    log: ExperimentLog, prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Optional[Tolerances] = None
) -> float:
    q = expected_discard_fraction(prep, meas, tol)
    observed = log.n_discarded / log.n_trials
    return (observed - q) * np.sqrt(log.n_trials / max(q * (1.0 - q), Z_VARIANCE_FLOOR))
