"""
Analytic iSWAP constructions that saturate the speed limit.

Each protocol is a :class:`GateSequence`: instantaneous single-qudit gates
around one evolution under a time-independent effective coupling ``H_c``.
For every protocol the evolution time equals ``pi / (2 ||H_c||)``, i.e. the
Mandelstam-Tamm bound for the pair of states exchanged by ``H_c``.

Factors are listed in time order; the sequence unitary is their product with
the first step rightmost.
"""

from dataclasses import dataclass, field

import numpy as np

from .hilbert import SpaceSpec, is_hermitian, kron, matrix_exp_hermitian, operator_norm, project_to_qubit
from .metrics import average_fidelity, target_iswap
from .model import CouplingKind, CouplingSpec, DeviceModel, build_coupling

UNITARY_TOL = 1e-12
BLOCK_TOL = 1e-12

#: Rotation angle that maps ``|0>`` to ``(|0> + sqrt(2)|2>) / sqrt(3)``.
THETA_FOURTONE = 2 * np.arctan(np.sqrt(2.0))


@dataclass
class GateStep:
    unitary: np.ndarray
    label: str
    duration: float = 0.0


@dataclass
class GateSequence:
    """Time-ordered gate steps on two ``d``-level qudits.

    ``coupling`` is the effective Hamiltonian used by the evolution step.
    """

    d: int
    steps: list = field(default_factory=list)
    coupling: np.ndarray | None = None

    def __post_init__(self):
        dim = self.d ** 2
        for s in self.steps:
            u = np.asarray(s.unitary)
            if u.shape != (dim, dim):
                raise ValueError(f"step {s.label!r} has shape {u.shape}, expected {(dim, dim)}")
            if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_TOL * 10:
                raise ValueError(f"step {s.label!r} is not unitary")

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec(self.d)

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.steps))

    @property
    def coupling_duration(self) -> float:
        return self.total_duration

    def product(self) -> np.ndarray:
        u = np.eye(self.d ** 2, dtype=complex)
        for s in self.steps:
            u = s.unitary @ u
        return u

    def replace_step(self, index: int, unitary: np.ndarray) -> "GateSequence":
        steps = list(self.steps)
        old = steps[index]
        steps[index] = GateStep(np.asarray(unitary, dtype=complex), old.label, old.duration)
        return GateSequence(self.d, steps, self.coupling)


@dataclass
class BoundReport:
    j_norm: float
    t_bound: float
    baseline_t_min: float
    unbounded: bool = False


class BlockLeakError(AssertionError):
    """The composed sequence moves amplitude out of the two-qubit block."""


def speed_limit_bound(coupling: np.ndarray, g: float = 1.0) -> BoundReport:
    """Lower bound ``pi / (2 ||H_c||)`` on the iSWAP time under ``coupling``.

    A zero coupling cannot produce the gate at all; the report then carries
    ``t_bound = inf`` and ``unbounded = True``.
    """
    coupling = np.asarray(coupling, dtype=complex)
    if not is_hermitian(coupling):
        raise ValueError("coupling must be Hermitian")
    j = operator_norm(coupling)
    baseline = np.pi / (2 * g)
    if j == 0:
        return BoundReport(j_norm=0.0, t_bound=np.inf, baseline_t_min=baseline, unbounded=True)
    return BoundReport(j_norm=j / g, t_bound=np.pi / (2 * j), baseline_t_min=baseline)


def _complete_unitary(fixed: dict, d: int) -> np.ndarray:
    """Unitary with the given columns; the rest by Gram-Schmidt on the standard basis.

    ``fixed`` maps column index to a normalized vector. Free columns are
    filled in increasing index order from ``|0>, |1>, ...``, skipping basis
    vectors already spanned.
    """
    cols = {k: np.asarray(v, dtype=complex) / np.linalg.norm(v) for k, v in fixed.items()}
    basis = []
    for v in cols.values():
        basis.append(v)
    free = [k for k in range(d) if k not in cols]
    candidates = iter(np.eye(d, dtype=complex))
    for k in free:
        for e in candidates:
            r = e.copy()
            for b in basis:
                r -= np.vdot(b, r) * b
            n = np.linalg.norm(r)
            if n > 1e-9:
                r /= n
                # one re-orthogonalization pass for round-off
                for b in basis:
                    r -= np.vdot(b, r) * b
                r /= np.linalg.norm(r)
                cols[k] = r
                basis.append(r)
                break
    return np.column_stack([cols[k] for k in range(d)])


def _flip(d: int) -> np.ndarray:
    """``|0> <-> |1>`` on one qudit, identity elsewhere."""
    p = np.eye(d, dtype=complex)
    p[[0, 1]] = p[[1, 0]]
    return p


def _evolution(coupling: np.ndarray, t: float, label: str) -> GateStep:
    return GateStep(matrix_exp_hermitian(coupling, t), label, t)


def protocol_baseline(g: float = 1.0) -> GateSequence:
    """Qubit-only iSWAP: ``g (|01><10| + h.c.)`` for ``pi / (2g)``."""
    h = build_coupling(CouplingSpec(CouplingKind.QUBIT_BASELINE), DeviceModel(g=g, d_logical=2, d_sim=2))
    return GateSequence(2, [_evolution(h, np.pi / (2 * g), "exchange")], h)


def ladder_permutation(d: int) -> np.ndarray:
    """Single-qudit permutation with ``|0> -> |d-2>`` and ``|1> -> |d-1>``.

    For ``d >= 4`` these are two disjoint swaps. For ``d = 3`` the swaps
    overlap and the permutation is the cycle ``0 -> 1 -> 2 -> 0``; for
    ``d = 2`` it is the identity.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    image = {0: d - 2, 1: d - 1}
    if d >= 4:
        image[d - 2] = 0
        image[d - 1] = 1
    rest_src = [k for k in range(d) if k not in image]
    rest_dst = [k for k in range(d) if k not in image.values()]
    image.update(zip(rest_src, rest_dst))
    p = np.zeros((d, d), dtype=complex)
    for src, dst in image.items():
        p[dst, src] = 1.0
    return p


def protocol_ladder(d: int, g: float = 1.0) -> GateSequence:
    """Exchange ``|d-2, d-1> <-> |d-1, d-2>`` at the enhanced rate ``g (d-1)``."""
    if d < 2:
        raise ValueError("d must be >= 2")
    h = build_coupling(CouplingSpec(CouplingKind.PARAMETRIC_LADDER, d), DeviceModel(g=g, d_logical=d, d_sim=d))
    p = ladder_permutation(d)
    pp = kron(p, p)
    t = np.pi / (2 * g * (d - 1))
    steps = [GateStep(pp, "P (x) P"), _evolution(h, t, "ladder exchange"), GateStep(pp.conj().T, "(P (x) P)^dag")]
    return GateSequence(d, steps, h)


def collective_state_map(d: int) -> np.ndarray:
    """``V``: ``|0>`` to the uniform superposition of ``|0>, |2>, ..., |d-1>``, ``|1>`` fixed."""
    v = np.zeros(d, dtype=complex)
    v[[0] + list(range(2, d))] = 1.0
    return _complete_unitary({0: v, 1: np.eye(d)[1]}, d)


def protocol_collective(d: int, g: float = 1.0) -> GateSequence:
    """``|11>`` exchanged with ``(d-1)^2`` states at once, dressed by ``V (x) V`` and flips."""
    if d < 3:
        raise ValueError("d must be >= 3")
    h = build_coupling(CouplingSpec(CouplingKind.COLLECTIVE_UNIFORM, d), DeviceModel(g=g, d_logical=d, d_sim=d))
    vv = kron(collective_state_map(d), collective_state_map(d))
    x2 = kron(np.eye(d), _flip(d))
    t = np.pi / (2 * g * (d - 1))
    steps = [GateStep(x2, "X2"), GateStep(vv, "V (x) V"), _evolution(h, t, "collective exchange"),
             GateStep(vv.conj().T, "(V (x) V)^dag"), GateStep(x2, "X2")]
    return GateSequence(d, steps, h)


def fourtone_rotation() -> np.ndarray:
    """y rotation by ``2 arctan(sqrt 2)`` in the ``{|0>, |2>}`` plane of a qutrit."""
    c, s = np.cos(THETA_FOURTONE / 2), np.sin(THETA_FOURTONE / 2)
    u = np.eye(3, dtype=complex)
    u[0, 0], u[0, 2], u[2, 0], u[2, 2] = c, -s, s, c
    return u


def protocol_fourtone(g: float = 1.0) -> GateSequence:
    """Qutrit iSWAP in ``pi / (6g)`` using the four-tone coupling (norm ``3g``)."""
    h = build_coupling(CouplingSpec(CouplingKind.FOUR_TONE), DeviceModel(g=g, d_logical=3, d_sim=3))
    r = fourtone_rotation()
    eye = np.eye(3)
    u1 = kron(r, eye)
    u2 = kron(eye, r)
    x2 = kron(eye, _flip(3))
    t = np.pi / (6 * g)
    steps = [GateStep(x2, "X2"), GateStep(u1, "U1"), GateStep(u2, "U2"), _evolution(h, t, "four-tone exchange"),
             GateStep(u2.conj().T, "U2^dag"), GateStep(u1.conj().T, "U1^dag"), GateStep(x2, "X2")]
    return GateSequence(3, steps, h)


def t_exact(omega_max: float, g: float = 1.0) -> float:
    """Gate time when the single-qutrit rotations are done by separate resonant pulses.

    Two ``pi`` flips plus two ``2 arctan(sqrt 2)`` rotations at Rabi rate
    ``omega_max``, around the ``pi / (6g)`` coupling step.
    """
    if not omega_max > 0:
        raise ValueError("omega_max must be positive")
    return (np.pi + THETA_FOURTONE) / omega_max + np.pi / (6 * g)


def verify_sequence(seq: GateSequence, space: SpaceSpec | None = None, target: np.ndarray | None = None,
                    check_block: bool = True) -> float:
    """Average fidelity of the projected sequence unitary to iSWAP.

    Raises :class:`BlockLeakError` if ``check_block`` and some computational
    state ends with weight outside the two-qubit block.
    """
    space = space or seq.space
    if space.dim != seq.d ** 2:
        raise ValueError(f"sequence acts on d={seq.d}, space has d={space.d_local}")
    u = seq.product()
    q = space.qubit_indices
    if check_block:
        outside = np.ones(space.dim, dtype=bool)
        outside[q] = False
        leak = np.max(np.abs(u[np.ix_(outside, q)]), initial=0.0)
        if leak > BLOCK_TOL:
            raise BlockLeakError(f"sequence leaves the qubit block (max off-block amplitude {leak:.3e})")
    target = target_iswap() if target is None else target
    return average_fidelity(project_to_qubit(u, space), target)


def phase_free_overlap(seq: GateSequence, target: np.ndarray | None = None) -> float:
    """``|tr(P^dag V)| / 4`` with ``P`` the projected product: 1 iff equal up to global phase."""
    target = target_iswap() if target is None else target
    p = project_to_qubit(seq.product(), seq.space)
    return float(abs(np.trace(p.conj().T @ target)) / 4)


def protocol_report(d_values=range(2, 7), g: float = 1.0) -> list:
    """Rows ``(protocol, d, j_norm, t_bound, duration, fidelity)`` for every applicable protocol."""
    rows = []
    builders = [("ladder", 2, protocol_ladder), ("collective", 3, protocol_collective)]
    for d in d_values:
        if d == 2:
            seq = protocol_baseline(g)
            rows.append(_row("baseline", d, seq, g))
        for name, d_min, build in builders:
            if d >= d_min:
                rows.append(_row(name, d, build(d, g), g))
        if d == 3:
            rows.append(_row("fourtone", d, protocol_fourtone(g), g))
    return rows


def _row(name: str, d: int, seq: GateSequence, g: float) -> dict:
    b = speed_limit_bound(seq.coupling, g)
    return {"protocol": name, "d": d, "j_norm": b.j_norm, "t_bound": b.t_bound,
            "duration": seq.coupling_duration, "fidelity": verify_sequence(seq)}
