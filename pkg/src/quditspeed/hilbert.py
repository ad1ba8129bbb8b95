"""
Dense linear algebra on the two-qudit Hilbert space.

Basis states are ordered row-major, ``index = d * n1 + n2`` for the product
state ``|n1, n2>``. All operators are plain complex ``numpy`` arrays.
"""

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class SpaceSpec:
    """Two qudits of local dimension ``d_local``."""

    d_local: int
    n_qudits: int = 2

    def __post_init__(self):
        if self.d_local < 2:
            raise ValueError(f"d_local must be >= 2, got {self.d_local}")
        if self.n_qudits != 2:
            raise ValueError("only two-qudit spaces are supported")

    @property
    def dim(self) -> int:
        return self.d_local**2

    @property
    def qubit_indices(self) -> np.ndarray:
        """Indices of |00>, |01>, |10>, |11>, in that order."""
        d = self.d_local
        return np.array([0, 1, d, d + 1])

    def index(self, n1: int, n2: int) -> int:
        return self.d_local * n1 + n2

    def levels(self) -> np.ndarray:
        """``(dim, 2)`` array of the level labels of every basis state."""
        n = np.arange(self.dim)
        return np.stack([n // self.d_local, n % self.d_local], axis=1)

    @classmethod
    def from_dim(cls, dim: int) -> "SpaceSpec":
        d = int(round(np.sqrt(dim)))
        if d * d != dim:
            raise ValueError(f"dimension {dim} is not a square")
        return cls(d)


def ket(n: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[n] = 1.0
    return v


def basis_op(i: int, j: int, d: int) -> np.ndarray:
    """The matrix unit ``|i><j|`` on a ``d``-level system."""
    op = np.zeros((d, d), dtype=complex)
    op[i, j] = 1.0
    return op


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().swapaxes(-1, -2)


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol)


def operator_norm(a: np.ndarray) -> float:
    """Largest singular value of ``a``."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def embed_single(op: np.ndarray, which: int, space: SpaceSpec) -> np.ndarray:
    """Lift a single-qudit operator to the two-qudit space.

    ``which`` is 1 for ``op (x) I`` and 2 for ``I (x) op``.
    """
    op = np.asarray(op)
    d = space.d_local
    if op.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} operator, got shape {op.shape}")
    eye = np.eye(d, dtype=complex)
    if which == 1:
        return np.kron(op, eye)
    if which == 2:
        return np.kron(eye, op)
    raise ValueError(f"qudit index must be 1 or 2, got {which}")


def matrix_exp_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` through the eigendecomposition of a Hermitian ``h``."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol=1e-10 * max(1.0, np.max(np.abs(h), initial=0.0))):
        raise ValueError("matrix_exp_hermitian requires a Hermitian matrix")
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def project_to_qubit(u: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Restrict ``u`` to the two-qubit block (not renormalized)."""
    u = np.asarray(u)
    if u.shape != (space.dim, space.dim):
        raise ValueError(f"expected a {space.dim}x{space.dim} matrix, got {u.shape}")
    q = space.qubit_indices
    return u[np.ix_(q, q)]


def lift_qubit_operator(m4: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Place a 4x4 operator on the qubit block of the full space, zeros elsewhere."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    q = space.qubit_indices
    out[np.ix_(q, q)] = m4
    return out


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (z + dagger(z))
