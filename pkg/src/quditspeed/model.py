"""
Physical model of two driven, coupled transmon qudits.

Everything lives in the rotating frame of the free transmon Hamiltonian, so
the only time dependence is the pulse envelopes and, for off-resonant
transitions (ORT), the phase factors ``exp(+-i delta t)``. Frequencies are in
units of the coupling ``g``; times in units of ``1/g``.

Drive convention: a tone with complex Rabi frequency ``Omega`` acting on the
transition ``|k'-1> <-> |k'>`` of qudit ``j`` contributes

    eta * Omega(t) * exp(+i delta t) |k'-1><k'|  +  h.c.

so the raising operator carries ``conj(Omega) exp(-i delta t)`` with
``delta = carrier - transition frequency``. With ``delta = 0`` and
``eta = 1`` this is exactly ``Omega |k-1><k| + h.c.``.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .hilbert import SpaceSpec, basis_op, embed_single, kron

T_MIN = np.pi / 2  # qubit-only iSWAP time for g = 1


class CouplingKind(str, Enum):
    QUBIT_BASELINE = "qubit_baseline"
    PARAMETRIC_LADDER = "parametric_ladder"
    COLLECTIVE_UNIFORM = "collective_uniform"
    FOUR_TONE = "four_tone"
    CAPACITIVE_RAW = "capacitive_raw"


@dataclass(frozen=True)
class DeviceModel:
    """Parameters of the simulated pair of transmons.

    Attributes
    ----------
    g : float
        Coupling strength; sets the frequency unit.
    alpha : float
        Anharmonicity of each transmon, in units of ``g``.
    delta : float
        Qubit frequency difference ``omega_2 - omega_1``, in units of ``g``.
    d_logical : int
        Dimension of each qudit used for the gate (3 for qutrits).
    d_sim : int
        Number of transmon levels kept in the simulation.
    ort_enabled : bool
        Model off-resonant transitions driven by every tone.
    cross_talk : float
        Extra factor on drive matrix elements of the *other* transmon
        (1.0 means no spatial addressing at all).
    ladder_ratios : bool
        Scale off-resonant matrix elements by ``sqrt(k'/k)`` (harmonic
        ladder). If False every entry has ratio 1.
    drive_scale : float
        Multiplies every drive term, i.e. the Hamiltonian sees
        ``drive_scale * Omega``. 1.0 means ``Omega`` is the Rabi frequency in
        the same (angular) units as ``g``; ``2 pi`` reads amplitudes as
        cyclic frequencies.
    """

    g: float = 1.0
    alpha: float = 10.0
    delta: float = 15.0
    d_logical: int = 3
    d_sim: int = 3
    ort_enabled: bool = False
    cross_talk: float = 1.0
    ladder_ratios: bool = True
    drive_scale: float = 1.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if self.d_logical < 2:
            raise ValueError(f"d_logical must be >= 2, got {self.d_logical}")
        if self.d_sim < self.d_logical:
            raise ValueError(f"d_sim ({self.d_sim}) must be >= d_logical ({self.d_logical})")

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec(self.d_sim)

    @property
    def n_transitions(self) -> int:
        """Driven transitions per qudit (one tone each)."""
        return self.d_logical - 1

    def transition_frequency(self, qudit: int, k: int) -> float:
        """Frequency of ``|k-1> <-> |k>`` on ``qudit`` (1 or 2), qudit 1's 0-1 line at zero."""
        base = 0.0 if qudit == 1 else self.delta
        return self.g * (base - (k - 1) * self.alpha)

    def with_levels(self, d_sim: int) -> "DeviceModel":
        return replace(self, d_sim=d_sim)


@dataclass(frozen=True)
class CouplingSpec:
    kind: CouplingKind
    d: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))


def _embed(op_small: np.ndarray, d_small: int, d_sim: int) -> np.ndarray:
    """Zero-pad a (d_small^2)-dim two-qudit operator into the d_sim^2 space."""
    if d_small == d_sim:
        return op_small
    idx = np.array([d_sim * a + b for a in range(d_small) for b in range(d_small)])
    out = np.zeros((d_sim**2, d_sim**2), dtype=complex)
    out[np.ix_(idx, idx)] = op_small
    return out


def _collective(weights: dict, d: int, g: float) -> np.ndarray:
    """``g * (sum_w w |ab>) <11| + h.c.`` on two d-level qudits."""
    h = np.zeros((d * d, d * d), dtype=complex)
    b = d * 1 + 1
    for (n1, n2), w in weights.items():
        a = d * n1 + n2
        h[a, b] += g * w
        h[b, a] += g * np.conj(w)
    return h


def build_coupling(spec: CouplingSpec, device: DeviceModel) -> np.ndarray:
    """Time-independent coupling Hamiltonian on the ``d_sim^2`` space."""
    d = spec.d if spec.d is not None else device.d_logical
    if d > device.d_sim:
        raise ValueError(f"coupling dimension {d} exceeds d_sim={device.d_sim}")
    g = device.g
    kind = spec.kind

    if kind is CouplingKind.QUBIT_BASELINE:
        h = np.zeros((4, 4), dtype=complex)
        h[1, 2] = h[2, 1] = g
        return _embed(h, 2, device.d_sim)

    if kind is CouplingKind.PARAMETRIC_LADDER:
        if d < 2:
            raise ValueError("parametric ladder needs d >= 2")
        h = np.zeros((d * d, d * d), dtype=complex)
        a = d * (d - 1) + (d - 2)
        b = d * (d - 2) + (d - 1)
        h[a, b] = h[b, a] = g * (d - 1)
        return _embed(h, d, device.d_sim)

    if kind is CouplingKind.COLLECTIVE_UNIFORM:
        if d < 3:
            raise ValueError("collective coupling needs d >= 3")
        levels = [0] + list(range(2, d))
        weights = {(a, b): 1.0 for a in levels for b in levels}
        return _embed(_collective(weights, d, g), d, device.d_sim)

    if kind is CouplingKind.FOUR_TONE:
        if device.d_logical != 3 or d != 3:
            raise ValueError("four-tone coupling is defined for qutrits (d_logical = 3) only")
        s2 = np.sqrt(2.0)
        weights = {(0, 0): 1.0, (0, 2): s2, (2, 0): s2, (2, 2): 2.0}
        return _embed(_collective(weights, 3, g), 3, device.d_sim)

    if kind is CouplingKind.CAPACITIVE_RAW:
        a = np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)
        x = a + a.T
        return _embed(g * kron(x, x), d, device.d_sim)

    raise ValueError(f"unknown coupling kind {kind!r}")


@dataclass
class PulseSet:
    """Piecewise sin^2 drive envelopes.

    ``amplitudes[i, k, m]`` is the peak complex Rabi frequency of the tone on
    qudit ``i + 1`` resonant with ``|k> <-> |k+1>``, in segment ``m`` (all
    zero-based here).
    """

    amplitudes: np.ndarray
    T: float
    omega_max: float

    def __post_init__(self):
        self.amplitudes = np.array(self.amplitudes, dtype=complex)
        if self.amplitudes.ndim != 3 or self.amplitudes.shape[0] != 2:
            raise ValueError(f"amplitudes must have shape (2, n_tones, M), got {self.amplitudes.shape}")
        if self.amplitudes.shape[2] < 1:
            raise ValueError("need at least one segment")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def M(self) -> int:
        return self.amplitudes.shape[2]

    @property
    def tau(self) -> float:
        return self.T / self.M

    @property
    def n_tones(self) -> int:
        return self.amplitudes.shape[1]

    @classmethod
    def zeros(cls, T: float, omega_max: float, M: int = 40, n_tones: int = 2) -> "PulseSet":
        return cls(np.zeros((2, n_tones, M), dtype=complex), T, omega_max)

    def copy(self) -> "PulseSet":
        return PulseSet(self.amplitudes.copy(), self.T, self.omega_max)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "PulseSet":
        return PulseSet(amplitudes, self.T, self.omega_max)

    def with_time(self, T: float) -> "PulseSet":
        return PulseSet(self.amplitudes.copy(), T, self.omega_max)

    def max_amplitude(self) -> float:
        return float(np.max(np.abs(self.amplitudes)))

    def project(self) -> "PulseSet":
        return self.with_amplitudes(clip_amplitudes(self.amplitudes, self.omega_max))


def clip_amplitudes(a: np.ndarray, omega_max: float) -> np.ndarray:
    """Radial projection onto the disc ``|A| <= omega_max``."""
    mag = np.abs(a)
    scale = np.where(mag > omega_max, omega_max / np.maximum(mag, 1e-300), 1.0)
    return a * scale


def envelope(t, tau: float):
    """``sin^2(pi t / tau)``: zero at every segment boundary, one at the centre."""
    return np.sin(np.pi * np.asarray(t) / tau) ** 2


def segment_index(t, tau: float, M: int):
    return np.clip(np.floor(np.asarray(t) / tau).astype(int), 0, M - 1)


def pulse_value(p: PulseSet, i: int, k: int, t: float) -> complex:
    """Rabi frequency of tone ``(i, k)`` at time ``t`` (``i, k`` one-based)."""
    if t < -1e-12 * p.T or t > p.T * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {p.T}]")
    m = int(segment_index(t, p.tau, p.M))
    return complex(p.amplitudes[i - 1, k - 1, m] * np.sin(np.pi * (m - t / p.tau)) ** 2)


@dataclass(frozen=True)
class ToneEntry:
    """One transition driven by one tone.

    ``source`` is the tone ``(i, k)``; it drives ``|k'-1> <-> |k'>`` of
    ``target_qudit`` with detuning ``detuning`` (units of g) and matrix
    element ratio ``ratio``.
    """

    source: tuple
    target_qudit: int
    target_transition: int
    detuning: float
    ratio: float

    @property
    def resonant(self) -> bool:
        return self.source == (self.target_qudit, self.target_transition)


@dataclass(frozen=True)
class ToneTable:
    entries: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def for_tone(self, i: int, k: int) -> list:
        return [e for e in self.entries if e.source == (i, k)]


def build_tone_table(device: DeviceModel) -> ToneTable:
    """Tone table for ``device``.

    With ORT every tone drives every single-photon transition of both
    transmons up to ``|d_sim-2> <-> |d_sim-1>``; without ORT only its own
    resonant transition.
    """
    entries = []
    for i in (1, 2):
        for k in range(1, device.d_logical):
            carrier = device.transition_frequency(i, k)
            if not device.ort_enabled:
                entries.append(ToneEntry((i, k), i, k, 0.0, 1.0))
                continue
            for j in (1, 2):
                for kp in range(1, device.d_sim):
                    det = (carrier - device.transition_frequency(j, kp)) / device.g
                    ratio = np.sqrt(kp / k) if device.ladder_ratios else 1.0
                    if j != i:
                        ratio *= device.cross_talk
                    if (j, kp) == (i, k):
                        det, ratio = 0.0, 1.0
                    entries.append(ToneEntry((i, k), j, kp, float(det), float(ratio)))
    return ToneTable(tuple(entries))


def lowering_pairs(space: SpaceSpec, qudit: int, k: int) -> np.ndarray:
    """``(row, col)`` index pairs of the embedded ``|k-1><k|`` on ``qudit``."""
    d = space.d_local
    n = np.arange(d)
    if qudit == 1:
        return np.stack([d * (k - 1) + n, d * k + n], axis=1)
    return np.stack([d * n + (k - 1), d * n + k], axis=1)


class ControlHamiltonian:
    """Hamiltonian provider ``t -> H(t)`` with the structure exposed.

    The drive part is ``sum_o w_o(t) L_o + h.c.`` with ``L_o`` the embedded
    lowering operators ``|k'-1><k'|`` (one per qudit and transition), which
    lets the propagator and the gradient engine work on coefficient arrays
    instead of dense matrices.
    """

    structured = True

    def __init__(self, device: DeviceModel, coupling: np.ndarray, pulses: PulseSet, tones: ToneTable):
        space = device.space
        if coupling.shape != (space.dim, space.dim):
            raise ValueError(f"coupling has shape {coupling.shape}, expected {(space.dim, space.dim)}")
        if pulses.n_tones != device.n_transitions:
            raise ValueError(f"pulses have {pulses.n_tones} tones per qudit, device expects {device.n_transitions}")
        self.device = device
        self.space = space
        self.coupling = np.asarray(coupling, dtype=complex)
        self.pulses = pulses
        self.tones = tones

        n_lines = device.d_sim - 1
        self.op_keys = [(j, k) for j in (1, 2) for k in range(1, device.d_sim)]
        self.op_pairs = np.stack([lowering_pairs(space, j, k) for j, k in self.op_keys])

        def op_index(j, k):
            return (j - 1) * n_lines + (k - 1)

        self.entry_op = np.array([op_index(e.target_qudit, e.target_transition) for e in tones], dtype=int)
        self.entry_src = np.array([(e.source[0] - 1, e.source[1] - 1) for e in tones], dtype=int).reshape(-1, 2)
        self.entry_ratio = device.drive_scale * np.array([e.ratio for e in tones], dtype=float)
        self.entry_omega = np.array([e.detuning * device.g for e in tones], dtype=float)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def T(self) -> float:
        return self.pulses.T

    def with_pulses(self, pulses: PulseSet) -> "ControlHamiltonian":
        new = object.__new__(ControlHamiltonian)
        new.__dict__.update(self.__dict__)
        new.pulses = pulses
        return new

    def entry_factors(self, times: np.ndarray) -> np.ndarray:
        """``eta_e * sin^2(pi t/tau) * exp(i delta_e t)``, shape ``(len(times), n_entries)``."""
        times = np.asarray(times, dtype=float)
        env = envelope(times, self.pulses.tau)
        return self.entry_ratio * env[:, None] * np.exp(1j * np.multiply.outer(times, self.entry_omega))

    def coefficients(self, times: np.ndarray, factors: np.ndarray | None = None) -> np.ndarray:
        """Lowering-operator coefficients ``w_o(t)``, shape ``(len(times), n_ops)``.

        ``factors`` may carry a precomputed :meth:`entry_factors` for ``times``.
        """
        times = np.asarray(times, dtype=float)
        p = self.pulses
        m = segment_index(times, p.tau, p.M)
        amps = p.amplitudes[self.entry_src[:, 0][None, :], self.entry_src[:, 1][None, :], m[:, None]]
        if factors is None:
            factors = self.entry_factors(times)
        per_entry = factors * amps
        w = np.zeros((len(times), len(self.op_keys)), dtype=complex)
        for e, o in enumerate(self.entry_op):
            w[:, o] += per_entry[:, e]
        return w

    def drive_operator(self, o: int) -> np.ndarray:
        op = np.zeros((self.dim, self.dim), dtype=complex)
        r, c = self.op_pairs[o].T
        op[r, c] = 1.0
        return op

    def __call__(self, t: float) -> np.ndarray:
        w = self.coefficients(np.array([t]))[0]
        h = self.coupling.copy()
        for o, pairs in enumerate(self.op_pairs):
            r, c = pairs.T
            h[r, c] += w[o]
            h[c, r] += np.conj(w[o])
        return h


def assemble_hamiltonian(device: DeviceModel, coupling: np.ndarray, pulses: PulseSet,
                         tones: ToneTable, t: float) -> np.ndarray:
    """Full rotating-frame Hamiltonian H(t) = coupling + drives."""
    space = device.space
    h = np.array(coupling, dtype=complex)
    for e in tones:
        i, k = e.source
        omega = pulse_value(pulses, i, k, t)
        lower = embed_single(basis_op(e.target_transition - 1, e.target_transition, space.d_local),
                             e.target_qudit, space)
        term = device.drive_scale * e.ratio * omega * np.exp(1j * e.detuning * device.g * t) * lower
        h += term + term.conj().T
    return h
