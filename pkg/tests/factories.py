"""按种子生成随机装置对，供性质测试使用"""

from typing import Tuple

import numpy as np
from scipy import linalg as sla

from src.device_model import DeviceOperatorSet, Role, build_device
from src.operator_core import random_psd


def random_pom(dim: int, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Π_k = S^{-1/2} G_k S^{-1/2}，S = Σ G_k"""
    # 第一个取满秩，保证 S 可逆
    parts = [random_psd(dim, rng).matrix] + [
        random_psd(dim, rng, rank=int(rng.integers(1, dim + 1))).matrix for _ in range(n - 1)
    ]
    w, v = sla.eigh(sum(parts))
    root = v @ np.diag(w ** -0.5) @ v.conj().T
    return [root @ g @ root for g in parts]


def random_device(
    role: Role, dim: int, n: int, rng: np.random.Generator, unbiased: bool = False
) -> DeviceOperatorSet:
    if unbiased:
        weight = float(rng.uniform(0.1, 1.0))
        matrices = [weight * p for p in random_pom(dim, n, rng)]
    else:
        matrices = [
            float(rng.uniform(0.05, 1.0)) * random_psd(dim, rng, rank=int(rng.integers(1, dim + 1))).matrix
            for _ in range(n)
        ]
    return build_device(role, [(str(k + 1), m) for k, m in enumerate(matrices)])


def random_pair(
    seed: int,
    prep_unbiased: bool | None = None,
    meas_unbiased: bool | None = None,
    dims=(2, 3, 4, 5),
) -> Tuple[DeviceOperatorSet, DeviceOperatorSet]:
    """d 与事件数随机；偏置为 None 时随机决定"""
    rng = np.random.default_rng(seed)
    dim = int(rng.choice(dims))
    if prep_unbiased is None:
        prep_unbiased = bool(rng.integers(0, 2))
    if meas_unbiased is None:
        meas_unbiased = bool(rng.integers(0, 2))
    prep = random_device(Role.PREPARATION, dim, int(rng.integers(2, 7)), rng, prep_unbiased)
    meas = random_device(Role.MEASUREMENT, dim, int(rng.integers(2, 7)), rng, meas_unbiased)
    return prep, meas
