"""
有限维复矩阵内核

Hermitian / 半正定 / 幺正校验、迹、共轭变换、特征值查询，以及按种子生成的随机测试算符。
所有值构造后只读，所有函数无副作用。
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg as sla

from constants import MAX_DIMENSION
from src.errors import (
    DimensionMismatch,
    DimensionTooLarge,
    EigenFailure,
    InternalNumericalError,
    MalformedMatrix,
    NonFiniteEntry,
    NotHermitian,
    NotUnitary,
)
from utils.config import Tolerances, resolve_tol
from utils.logger import logger

ComplexMatrix = NDArray[np.complex128]


def _freeze(m: ArrayLike) -> ComplexMatrix:
    frozen = np.array(m, dtype=np.complex128, copy=True)
    frozen.setflags(write=False)
    return frozen


def _hermitian_part(m: np.ndarray) -> np.ndarray:
    # (A + A†)/2 的浮点结果本身精确 Hermitian
    return (m + m.conj().T) / 2


def max_entry_norm(m: ArrayLike) -> float:
    arr = np.asarray(m)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def as_square_matrix(data: ArrayLike) -> ComplexMatrix:
    """把输入转换成 d×d 复矩阵，并检查形状、有限性和维数上限"""
    try:
        m = np.asarray(data, dtype=np.complex128)
    except (TypeError, ValueError) as e:
        raise MalformedMatrix(f"cannot read matrix: {e}") from e
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise MalformedMatrix(f"expected a non-empty square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_DIMENSION:
        raise DimensionTooLarge(m.shape[0], MAX_DIMENSION)
    if not np.all(np.isfinite(m)):
        raise NonFiniteEntry("matrix has NaN or infinite entries")
    return m


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: ComplexMatrix
    hermiticity_defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        require_same_dim(self, other)
        return HermitianOperator(
            _freeze(self.matrix + other.matrix),
            max(self.hermiticity_defect, other.hermiticity_defect),
        )

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        require_same_dim(self, other)
        return HermitianOperator(
            _freeze(self.matrix - other.matrix),
            max(self.hermiticity_defect, other.hermiticity_defect),
        )

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(
            _freeze(self.matrix * float(factor)), self.hermiticity_defect
        )

    def allclose(self, other: "HermitianOperator", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and np.allclose(
            self.matrix, other.matrix, rtol=0.0, atol=atol
        )

    def __repr__(self) -> str:
        return f"HermitianOperator(dim={self.dim}, defect={self.hermiticity_defect:.2g})"


@dataclass(frozen=True, eq=False)
class UnitaryMap:
    matrix: ComplexMatrix
    unitarity_defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self) -> str:
        return f"UnitaryMap(dim={self.dim}, defect={self.unitarity_defect:.2g})"


def require_same_dim(a, b, what: str = "operator") -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(a.dim, b.dim, what)


# ---------------------------------------------------------------- 校验
def hermiticity_defect(m: ArrayLike) -> float:
    arr = np.asarray(m)
    return max_entry_norm(arr - arr.conj().T)


def validate_hermitian(
    m: ArrayLike, tol: Optional[Tolerances] = None
) -> HermitianOperator:
    """缺陷不超过容差时静默对称化，超过则报错"""
    tol = resolve_tol(tol)
    mat = as_square_matrix(m)
    defect = hermiticity_defect(mat)
    if defect > tol.herm:
        raise NotHermitian(defect)
    if defect > 0:
        logger.debug(f"对称化输入矩阵, 缺陷 {defect:.3g}")
    return HermitianOperator(_freeze(_hermitian_part(mat)), defect)


def unitarity_defect(m: ArrayLike) -> float:
    arr = np.asarray(m)
    return max_entry_norm(arr.conj().T @ arr - np.eye(arr.shape[0]))


def validate_unitary(m: ArrayLike, tol: Optional[Tolerances] = None) -> UnitaryMap:
    tol = resolve_tol(tol)
    mat = as_square_matrix(m)
    defect = unitarity_defect(mat)
    if defect > tol.unitary:
        raise NotUnitary(defect)
    return UnitaryMap(_freeze(mat), defect)


# ---------------------------------------------------------------- 谱
def eigenvalues(a: HermitianOperator) -> NDArray[np.float64]:
    """升序特征值，只用 Hermitian 特征求解器"""
    try:
        values = sla.eigvalsh(a.matrix, check_finite=True)
    except (sla.LinAlgError, ValueError) as e:
        raise EigenFailure(f"Hermitian eigensolver failed: {e}") from e
    return values


def spectral_norm(a: HermitianOperator) -> float:
    values = eigenvalues(a)
    return float(max(abs(values[0]), abs(values[-1])))


def psd_check(a: HermitianOperator) -> float:
    """返回最小特征值"""
    return float(eigenvalues(a)[0])


def psd_threshold(a: HermitianOperator, tol: Optional[Tolerances] = None) -> float:
    tol = resolve_tol(tol)
    return -tol.psd * max(1.0, spectral_norm(a))


def is_psd(a: HermitianOperator, tol: Optional[Tolerances] = None) -> bool:
    return psd_check(a) >= psd_threshold(a, tol)


# ---------------------------------------------------------------- 迹
def trace(a: HermitianOperator, tol: Optional[Tolerances] = None) -> float:
    tol = resolve_tol(tol)
    value = np.trace(a.matrix)
    if abs(value.imag) > tol.herm:
        raise NotHermitian(abs(value.imag))
    return float(value.real)


def _imag_limit(tol: Tolerances, scale: float) -> float:
    return tol.herm * max(1.0, scale)


def trace_pair(
    a: HermitianOperator, b: HermitianOperator, tol: Optional[Tolerances] = None
) -> float:
    """Tr(a·b) = Σ a[r,c]·b[c,r]，虚部残差丢弃"""
    tol = resolve_tol(tol)
    require_same_dim(a, b)
    value = np.einsum("rc,cr->", a.matrix, b.matrix)
    scale = np.linalg.norm(a.matrix) * np.linalg.norm(b.matrix)
    if abs(value.imag) > _imag_limit(tol, scale):
        raise InternalNumericalError(
            f"Tr(AB) has imaginary residue {value.imag:.3g} for Hermitian inputs"
        )
    return float(value.real)


def trace_pair_matrix(
    left: Sequence[HermitianOperator],
    right: Sequence[HermitianOperator],
    tol: Optional[Tolerances] = None,
) -> NDArray[np.float64]:
    """批量计算 T[i,j] = Tr(left_i · right_j)"""
    tol = resolve_tol(tol)
    for op in list(left[1:]) + list(right):
        require_same_dim(left[0], op)
    lhs = np.stack([op.matrix for op in left])
    rhs = np.stack([op.matrix for op in right])
    values = np.einsum("irc,jcr->ij", lhs, rhs)
    scale = float(
        np.max(np.linalg.norm(lhs, axis=(1, 2))) * np.max(np.linalg.norm(rhs, axis=(1, 2)))
    )
    residue = float(np.max(np.abs(values.imag)))
    if residue > _imag_limit(tol, scale):
        raise InternalNumericalError(
            f"trace table has imaginary residue {residue:.3g} for Hermitian inputs"
        )
    return np.ascontiguousarray(values.real)


# ---------------------------------------------------------------- 变换
def adjoint(u: UnitaryMap) -> UnitaryMap:
    return UnitaryMap(_freeze(u.matrix.conj().T), u.unitarity_defect)


def compose_unitaries(
    second: UnitaryMap, first: UnitaryMap, tol: Optional[Tolerances] = None
) -> UnitaryMap:
    """先 first 后 second，即 second·first"""
    require_same_dim(second, first, "unitary")
    return validate_unitary(second.matrix @ first.matrix, tol)


def conjugate_by(u: UnitaryMap, a: HermitianOperator) -> HermitianOperator:
    """U·a·U†"""
    require_same_dim(u, a)
    m = u.matrix @ a.matrix @ u.matrix.conj().T
    return HermitianOperator(_freeze(_hermitian_part(m)), a.hermiticity_defect)


def identity_defect(a: HermitianOperator) -> float:
    gamma = np.trace(a.matrix).real / a.dim
    return max_entry_norm(a.matrix - gamma * np.eye(a.dim))


def proportionality_to_identity(
    a: HermitianOperator, tol: Optional[Tolerances] = None
) -> Optional[float]:
    """a ≈ γ·1 时返回 γ = Tr(a)/d，否则返回 None"""
    tol = resolve_tol(tol)
    if identity_defect(a) <= tol.prop * max(1.0, max_entry_norm(a.matrix)):
        return float(np.trace(a.matrix).real / a.dim)
    return None


# ---------------------------------------------------------------- 构造
def identity(dim: int) -> HermitianOperator:
    return HermitianOperator(_freeze(as_square_matrix(np.eye(dim))))


def zero(dim: int) -> HermitianOperator:
    return HermitianOperator(_freeze(as_square_matrix(np.zeros((dim, dim)))))


def diag(*values: float) -> HermitianOperator:
    return HermitianOperator(_freeze(np.diag(np.asarray(values, dtype=np.float64))))


def basis_ket(dim: int, index: int) -> NDArray[np.complex128]:
    vec = np.zeros(dim, dtype=np.complex128)
    vec[index] = 1.0
    return vec


def projector(vector: ArrayLike, normalize: bool = True) -> HermitianOperator:
    """|v⟩⟨v|"""
    vec = np.asarray(vector, dtype=np.complex128).reshape(-1)
    if normalize:
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise MalformedMatrix("cannot build a projector from the zero vector")
        vec = vec / norm
    return HermitianOperator(_freeze(_hermitian_part(np.outer(vec, vec.conj()))))


def operator_sum(ops: Iterable[HermitianOperator]) -> HermitianOperator:
    ops = list(ops)
    total = ops[0]
    for op in ops[1:]:
        total = total + op
    return total


def hadamard() -> UnitaryMap:
    return validate_unitary(np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0))


def random_psd(
    dim: int, seed: int | np.random.Generator, rank: Optional[int] = None
) -> HermitianOperator:
    """G†G / Tr(G†G)，G 为按种子生成的复高斯矩阵"""
    rng = np.random.default_rng(seed)
    rows = dim if rank is None else rank
    g = rng.standard_normal((rows, dim)) + 1j * rng.standard_normal((rows, dim))
    m = g.conj().T @ g
    m = m / np.trace(m).real
    return HermitianOperator(_freeze(_hermitian_part(as_square_matrix(m))))


def random_unitary(
    dim: int, seed: int | np.random.Generator, tol: Optional[Tolerances] = None
) -> UnitaryMap:
    """复高斯矩阵的 QR 正交化，R 对角线相位并入 Q"""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return validate_unitary(q * phases, tol)
