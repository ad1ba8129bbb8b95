"""
Gate fidelity, leakage bookkeeping and the penalized loss.
"""

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .hilbert import SpaceSpec

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

#: The 16 two-qubit Pauli operators, ``{I,X,Y,Z} (x) {I,X,Y,Z}``.
PAULIS_2Q = np.array([np.kron(a, b) for a, b in itertools.product((_I, _X, _Y, _Z), repeat=2)])


@dataclass
class FidelityReport:
    f: float
    leak_max: float
    leak_avg: float
    loss: float


@dataclass
class LeakageProfile:
    """Populations averaged over the four computational initial states.

    ``p_k[k]`` is the probability that at least one transmon is in ``|k>``,
    for ``k = 2 .. d_sim - 1``.
    """

    times: np.ndarray
    p01: np.ndarray
    p_k: dict

    def to_csv(self, path) -> None:
        ks = sorted(self.p_k)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "p01"] + [f"p{k}" for k in ks])
            for s, t in enumerate(self.times):
                row = [t, self.p01[s]] + [self.p_k[k][s] for k in ks]
                writer.writerow([format_float(v) for v in row])


def format_float(v) -> str:
    return f"{float(v):.17g}"


def target_iswap() -> np.ndarray:
    """iSWAP with the ``-i`` phases produced by ``exp(-i g (|01><10| + h.c.) pi / 2g)``."""
    u = np.eye(4, dtype=complex)
    u[1, 1] = u[2, 2] = 0
    u[1, 2] = u[2, 1] = -1j
    return u


def average_fidelity(m4: np.ndarray, target: np.ndarray) -> float:
    """Average gate fidelity of the projected operator ``m4`` against ``target``.

    ``F = 1/5 + 1/80 Re sum_j tr(V P_j^dag V^dag M P_j M^dag)`` over the 16
    two-qubit Paulis ``P_j``.
    """
    m4 = np.asarray(m4, dtype=complex)
    v = np.asarray(target, dtype=complex)
    left = v @ PAULIS_2Q.conj().transpose(0, 2, 1) @ v.conj().T
    right = m4 @ PAULIS_2Q @ m4.conj().T
    total = np.einsum("jab,jba->", left, right)
    return float(0.2 + total.real / 80.0)


def fidelity_closed_form(m4: np.ndarray, target: np.ndarray) -> float:
    """Same value as :func:`average_fidelity` via ``1/5 + |tr(V^dag M)|^2 / 20``.

    Uses ``sum_j P_j^dag X P_j = 4 tr(X) I``.
    """
    z = np.trace(np.asarray(target).conj().T @ np.asarray(m4))
    return float(0.2 + abs(z) ** 2 / 20.0)


def outside_mask(space: SpaceSpec, level: int = 3) -> np.ndarray:
    """Basis states with at least one transmon at ``level`` or above."""
    lv = space.levels()
    return np.any(lv >= level, axis=1)


def leakage_series(trajectory: np.ndarray, space: SpaceSpec, level: int = 3) -> np.ndarray:
    """Mean (over initial states) population with some transmon at ``level``+."""
    mask = outside_mask(space, level)
    if not mask.any():
        return np.zeros(trajectory.shape[0])
    return trajectory[:, :, mask].sum(axis=2).mean(axis=1)


def leakage_profile(prop, space: SpaceSpec) -> LeakageProfile:
    traj = prop.trajectory
    lv = space.levels()
    in01 = np.all(lv <= 1, axis=1)
    p01 = traj[:, :, in01].sum(axis=2).mean(axis=1)
    p_k = {}
    for k in range(2, space.d_local):
        has_k = np.any(lv == k, axis=1)
        p_k[k] = traj[:, :, has_k].sum(axis=2).mean(axis=1)
    return LeakageProfile(times=np.asarray(prop.sample_times), p01=p01, p_k=p_k)


def loss(f: float, leak_max: float, leak_avg: float, c_max: float = 1.0, c_avg: float = 1.0) -> float:
    """Infidelity plus weighted leakage penalties."""
    if c_max < 0 or c_avg < 0:
        raise ValueError("penalty weights must be non-negative")
    return (1.0 - f) + c_max * leak_max + c_avg * leak_avg
