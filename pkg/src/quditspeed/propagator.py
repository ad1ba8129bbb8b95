"""
Implicit-midpoint (Cayley) propagation of the Schroedinger equation.

Each step of length ``h`` applies

    U <- (I + i h H(t_mid) / 2)^{-1} (I - i h H(t_mid) / 2) U

which is the second-order symplectic Runge-Kutta map for ``dU/dt = -i H U``
and is exactly unitary for Hermitian ``H``. Writing ``A = I + i h H / 2``
the update is ``U <- 2 A^{-1} U - U``, so one LU factorization per step is
all that is needed. The factorizations are kept so the adjoint sweep in
:mod:`quditspeed.grape` can reuse them.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .hilbert import SpaceSpec, operator_norm

DEFAULT_SUBSTEPS = 64


@numba.njit(cache=True)
def _lu_factor(A, piv):
    n = A.shape[0]
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            v = abs(A[i, k])
            if v > best:
                best = v
                p = i
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
        inv = 1.0 / A[k, k]
        for i in range(k + 1, n):
            f = A[i, k] * inv
            A[i, k] = f
            if f != 0:
                for j in range(k + 1, n):
                    A[i, j] -= f * A[k, j]


@numba.njit(cache=True)
def _lu_solve(LU, piv, b):
    # solves A x = b in place, PA = LU
    n = LU.shape[0]
    ncol = b.shape[1]
    for k in range(n):
        p = piv[k]
        if p != k:
            for c in range(ncol):
                tmp = b[k, c]
                b[k, c] = b[p, c]
                b[p, c] = tmp
    for k in range(n):
        for j in range(k):
            f = LU[k, j]
            if f != 0:
                for c in range(ncol):
                    b[k, c] -= f * b[j, c]
    for k in range(n - 1, -1, -1):
        for j in range(k + 1, n):
            f = LU[k, j]
            for c in range(ncol):
                b[k, c] -= f * b[j, c]
        inv = 1.0 / LU[k, k]
        for c in range(ncol):
            b[k, c] *= inv


@numba.njit(cache=True)
def _lu_solve_adjoint(LU, piv, b):
    # solves A^dagger y = b in place; A^dagger = U^dagger L^dagger P
    n = LU.shape[0]
    ncol = b.shape[1]
    for k in range(n):
        for j in range(k):
            f = np.conj(LU[j, k])
            if f != 0:
                for c in range(ncol):
                    b[k, c] -= f * b[j, c]
        inv = 1.0 / np.conj(LU[k, k])
        for c in range(ncol):
            b[k, c] *= inv
    for k in range(n - 1, -1, -1):
        for j in range(k + 1, n):
            f = np.conj(LU[j, k])
            if f != 0:
                for c in range(ncol):
                    b[k, c] -= f * b[j, c]
    for k in range(n - 1, -1, -1):
        p = piv[k]
        if p != k:
            for c in range(ncol):
                tmp = b[k, c]
                b[k, c] = b[p, c]
                b[p, c] = tmp


@numba.njit(cache=True)
def _sweep_structured(Hc, w, pairs, a, U0, keep_lu):
    # H_n = Hc + sum_o (w[n, o] L_o + h.c.), L_o has unit entries at pairs[o]
    N = w.shape[0]
    D = Hc.shape[0]
    C = U0.shape[1]
    n_ops = pairs.shape[0]
    n_pairs = pairs.shape[1]
    U = np.empty((N + 1, D, C), np.complex128)
    U[0] = U0
    if keep_lu:
        LUs = np.empty((N, D, D), np.complex128)
        pivs = np.empty((N, D), np.int64)
    else:
        LUs = np.empty((1, D, D), np.complex128)
        pivs = np.empty((1, D), np.int64)
    A = np.empty((D, D), np.complex128)
    piv = np.empty(D, np.int64)
    b = np.empty((D, C), np.complex128)
    ia = 1j * a
    for n in range(N):
        for i in range(D):
            for j in range(D):
                A[i, j] = ia * Hc[i, j]
            A[i, i] += 1.0
        for o in range(n_ops):
            coef = w[n, o]
            if coef != 0:
                for q in range(n_pairs):
                    r = pairs[o, q, 0]
                    c = pairs[o, q, 1]
                    A[r, c] += ia * coef
                    A[c, r] += ia * np.conj(coef)
        _lu_factor(A, piv)
        for i in range(D):
            for c in range(C):
                b[i, c] = U[n, i, c]
        _lu_solve(A, piv, b)
        for i in range(D):
            for c in range(C):
                U[n + 1, i, c] = 2.0 * b[i, c] - U[n, i, c]
        if keep_lu:
            LUs[n] = A
            pivs[n] = piv
    return U, LUs, pivs


@numba.njit(cache=True)
def _sweep_dense(Hs, a, U_start):
    N = Hs.shape[0]
    D = Hs.shape[1]
    C = U_start.shape[1]
    U = np.empty((N + 1, D, C), np.complex128)
    U[0] = U_start
    A = np.empty((D, D), np.complex128)
    piv = np.empty(D, np.int64)
    b = np.empty((D, C), np.complex128)
    ia = 1j * a
    for n in range(N):
        for i in range(D):
            for j in range(D):
                A[i, j] = ia * Hs[n, i, j]
            A[i, i] += 1.0
        _lu_factor(A, piv)
        for i in range(D):
            for c in range(C):
                b[i, c] = U[n, i, c]
        _lu_solve(A, piv, b)
        for i in range(D):
            for c in range(C):
                U[n + 1, i, c] = 2.0 * b[i, c] - U[n, i, c]
    return U


@dataclass
class PropagationResult:
    """Evolution operator at ``T`` plus sampled populations.

    ``trajectory[s, q, b]`` is the probability of basis state ``b`` at
    ``sample_times[s]`` for the ``q``-th computational initial state
    (|00>, |01>, |10>, |11>).
    """

    u_final: np.ndarray
    trajectory: np.ndarray
    sample_times: np.ndarray


def step_grid(T: float, M: int, substeps_per_segment: int):
    """Step length and step midpoints for ``M * substeps_per_segment`` steps."""
    if substeps_per_segment < 1:
        raise ValueError("substeps_per_segment must be >= 1")
    if M < 1:
        raise ValueError("M must be >= 1")
    n = M * substeps_per_segment
    h = T / n
    return h, (np.arange(n) + 0.5) * h


def _initial_columns(dim: int, columns) -> np.ndarray:
    eye = np.eye(dim, dtype=complex)
    if columns is None:
        return eye
    return np.ascontiguousarray(eye[:, np.asarray(columns)])


def sweep(h_of_t, T: float, M: int, substeps_per_segment: int, columns=None, keep_lu: bool = False,
          chunk: int = 512, factors=None):
    """Run the Cayley sweep and return the full column history.

    Returns ``(U, LUs, pivs, h)`` where ``U[n]`` are the propagated columns
    after ``n`` steps. ``LUs``/``pivs`` are only meaningful for structured
    providers with ``keep_lu=True``. ``factors`` is passed to the
    provider's ``coefficients`` to skip recomputing the carrier phases.
    """
    h, mids = step_grid(T, M, substeps_per_segment)
    a = 0.5 * h
    if getattr(h_of_t, "structured", False):
        U0 = _initial_columns(h_of_t.dim, columns)
        w = np.ascontiguousarray(h_of_t.coefficients(mids, factors=factors))
        pairs = np.ascontiguousarray(h_of_t.op_pairs.astype(np.int64))
        U, LUs, pivs = _sweep_structured(np.ascontiguousarray(h_of_t.coupling), w, pairs, a, U0, keep_lu)
        return U, LUs, pivs, h

    dim = np.asarray(h_of_t(mids[0])).shape[0]
    U0 = _initial_columns(dim, columns)
    blocks = [U0[None]]
    current = U0
    for start in range(0, len(mids), chunk):
        Hs = np.ascontiguousarray(np.array([h_of_t(t) for t in mids[start:start + chunk]], dtype=complex))
        U = _sweep_dense(Hs, a, current)
        blocks.append(U[1:])
        current = np.ascontiguousarray(U[-1])
    return np.concatenate(blocks), None, None, h


def populations(U: np.ndarray, space: SpaceSpec, full_columns: bool) -> np.ndarray:
    """``(n_samples, 4, dim)`` populations for the computational initial states."""
    cols = U[:, :, space.qubit_indices] if full_columns else U
    return np.abs(np.swapaxes(cols, 1, 2)) ** 2


def propagate(h_of_t, T: float, substeps_per_segment: int = DEFAULT_SUBSTEPS, M: int = 40,
              columns=None) -> PropagationResult:
    """Propagate ``dU/dt = -i H(t) U`` from ``0`` to ``T``.

    Parameters
    ----------
    h_of_t : callable or ControlHamiltonian
        Hamiltonian provider. Structured providers (``structured = True``)
        take the fast coefficient path.
    T : float
        Total time.
    substeps_per_segment : int
        Steps per pulse segment; the step is ``T / (M * substeps_per_segment)``.
    M : int
        Number of pulse segments.
    columns : array_like of int, optional
        Propagate only these columns of ``U``. The trajectory is then built
        from them, so they should be the qubit indices.

    Returns
    -------
    PropagationResult
        Sampled at every step boundary.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    U, _, _, h = sweep(h_of_t, T, M, substeps_per_segment, columns=columns)
    dim = U.shape[1]
    space = SpaceSpec.from_dim(dim)
    traj = populations(U, space, full_columns=columns is None)
    times = np.arange(U.shape[0]) * h
    return PropagationResult(u_final=U[-1], trajectory=traj, sample_times=times)


def unitarity_defect(u: np.ndarray) -> float:
    """``||U^dagger U - I||`` in operator norm."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("unitarity_defect needs a square matrix")
    return operator_norm(u.conj().T @ u - np.eye(u.shape[0]))
