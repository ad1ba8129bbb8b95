"""
GRAPE-style pulse optimization.

The loss is ``1 - F + c_max * max_t P_leak(t) + c_avg * mean_t P_leak(t)``
evaluated on the discretized implicit-midpoint dynamics. Its gradient with
respect to every complex segment amplitude is obtained by reverse
accumulation through the Cayley steps, which is exact for the discrete
dynamics.

For one step ``U_n = C_n U_{n-1}`` with ``C_n = 2 A_n^{-1} - I`` and
``A_n = I + i a H_n`` (``a = h/2``), the backward recursion is

    G_{n-1} = C_n^dag G_n + (direct terms at n-1)
    dL      = Re tr(K_n dH_n),   K_n = -2 i a x_n y_n^dag

with ``x_n = A_n^{-1} U_{n-1} = (U_n + U_{n-1}) / 2`` and
``y_n = A_n^{-dag} G_n``. Gradients are returned packed as complex numbers
``dL/dRe A + i dL/dIm A``.
"""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .hilbert import SpaceSpec, operator_norm
from .metrics import FidelityReport, target_iswap
from .model import (ControlHamiltonian, CouplingSpec, DeviceModel, PulseSet, ToneTable,
                    build_coupling, build_tone_table, clip_amplitudes)
from .propagator import DEFAULT_SUBSTEPS, _lu_solve_adjoint, step_grid, sweep

log = logging.getLogger(__name__)


def t_min(g: float = 1.0) -> float:
    """Qubit-only iSWAP time ``pi / (2 g)``."""
    return np.pi / (2 * g)


@numba.njit(cache=True)
def _adjoint_sweep(LUs, pivs, U, G_final, direct_coef, mask, pairs, a):
    N = LUs.shape[0]
    D = U.shape[1]
    C = U.shape[2]
    n_ops = pairs.shape[0]
    n_pairs = pairs.shape[1]
    out = np.zeros((N, n_ops), np.complex128)
    G = G_final.copy()
    for i in range(D):
        if mask[i]:
            for c in range(C):
                G[i, c] += direct_coef[N] * U[N, i, c]
    y = np.empty((D, C), np.complex128)
    scale = -2j * a
    for n in range(N, 0, -1):
        for i in range(D):
            for c in range(C):
                y[i, c] = G[i, c]
        _lu_solve_adjoint(LUs[n - 1], pivs[n - 1], y)
        for o in range(n_ops):
            t_kl = 0j
            t_kld = 0j
            for q in range(n_pairs):
                r = pairs[o, q, 0]
                cc = pairs[o, q, 1]
                for c in range(C):
                    xr = 0.5 * (U[n, r, c] + U[n - 1, r, c])
                    xc = 0.5 * (U[n, cc, c] + U[n - 1, cc, c])
                    t_kl += xc * np.conj(y[r, c])
                    t_kld += xr * np.conj(y[cc, c])
            # Hermitian part of K contracted with L_o
            out[n - 1, o] = 0.5 * (scale * t_kl + np.conj(scale * t_kld))
        coef = direct_coef[n - 1]
        for i in range(D):
            for c in range(C):
                G[i, c] = 2.0 * y[i, c] - G[i, c]
                if mask[i] and coef != 0:
                    G[i, c] += coef * U[n - 1, i, c]
    return out


@dataclass
class GrapeContext:
    """Everything held fixed while the pulse amplitudes are optimized."""

    device: DeviceModel
    coupling: np.ndarray
    tones: ToneTable
    target: np.ndarray = field(default_factory=target_iswap)
    substeps: int = DEFAULT_SUBSTEPS
    c_max: float = 1.0
    c_avg: float = 1.0

    def __post_init__(self):
        self._factor_cache = {}

    @classmethod
    def build(cls, device: DeviceModel, coupling: CouplingSpec, **kwargs) -> "GrapeContext":
        return cls(device=device, coupling=build_coupling(coupling, device),
                   tones=build_tone_table(device), **kwargs)

    @property
    def space(self) -> SpaceSpec:
        return self.device.space

    @property
    def leak_mask(self) -> np.ndarray:
        """Basis states with a transmon above the logical levels."""
        return np.any(self.space.levels() >= self.device.d_logical, axis=1)

    def hamiltonian(self, pulses: PulseSet) -> ControlHamiltonian:
        return ControlHamiltonian(self.device, self.coupling, pulses, self.tones)

    def factors(self, ham: ControlHamiltonian):
        p = ham.pulses
        key = (p.T, p.M, self.substeps)
        if key not in self._factor_cache:
            _, mids = step_grid(p.T, p.M, self.substeps)
            if len(self._factor_cache) > 8:
                self._factor_cache.clear()
            self._factor_cache[key] = ham.entry_factors(mids)
        return self._factor_cache[key]

    def with_levels(self, d_sim: int) -> "GrapeContext":
        """Same physics on ``d_sim`` transmon levels; the coupling is zero-padded."""
        old = self.device.space
        dev = self.device.with_levels(d_sim)
        new = dev.space
        n = min(old.d_local, d_sim)
        keep = np.array([old.index(a, b) for a in range(n) for b in range(n)])
        put = np.array([new.index(a, b) for a in range(n) for b in range(n)])
        coupling = np.zeros((new.dim, new.dim), dtype=complex)
        coupling[np.ix_(put, put)] = self.coupling[np.ix_(keep, keep)]
        return replace(self, device=dev, coupling=coupling, tones=build_tone_table(dev))


def _forward(pulses: PulseSet, ctx: GrapeContext, keep_lu: bool):
    ham = ctx.hamiltonian(pulses)
    q = ctx.space.qubit_indices
    U, LUs, pivs, h = sweep(ham, pulses.T, pulses.M, ctx.substeps, columns=q, keep_lu=keep_lu,
                            factors=ctx.factors(ham))
    m4 = U[-1][q, :]
    z = np.trace(ctx.target.conj().T @ m4)
    f = float(0.2 + abs(z) ** 2 / 20.0)
    mask = ctx.leak_mask
    if mask.any():
        leak = (np.abs(U[:, mask, :]) ** 2).sum(axis=1).mean(axis=1)
    else:
        leak = np.zeros(U.shape[0])
    leak_max = float(leak.max())
    leak_avg = float(leak.mean())
    value = (1.0 - f) + ctx.c_max * leak_max + ctx.c_avg * leak_avg
    report = FidelityReport(f=f, leak_max=leak_max, leak_avg=leak_avg, loss=value)
    return report, ham, U, LUs, pivs, h, z, leak


def evaluate(pulses: PulseSet, ctx: GrapeContext) -> FidelityReport:
    """Fidelity, leakage and loss of ``pulses``."""
    return _forward(pulses, ctx, keep_lu=False)[0]


def loss_and_gradient(pulses: PulseSet, ctx: GrapeContext):
    """Return ``(report, grad)`` with ``grad`` shaped like the amplitudes."""
    report, ham, U, LUs, pivs, h, z, leak = _forward(pulses, ctx, keep_lu=True)
    q = ctx.space.qubit_indices
    n_samples = U.shape[0]

    # d(1 - F) with F = 1/5 + |tr(V^dag m)|^2 / 20
    G_final = np.zeros((ctx.space.dim, 4), dtype=complex)
    G_final[q, :] = -z * ctx.target / 10.0
    mask = ctx.leak_mask
    coef = np.zeros(n_samples)
    if mask.any():
        coef += 0.5 * ctx.c_avg / n_samples
        # subgradient of the max at its earliest maximizer
        coef[int(np.argmax(leak))] += 0.5 * ctx.c_max

    pairs = np.ascontiguousarray(ham.op_pairs.astype(np.int64))
    t_h = _adjoint_sweep(LUs, pivs, U, G_final, coef, mask, pairs, 0.5 * h)

    per_entry = 2.0 * t_h[:, ham.entry_op] * ctx.factors(ham)
    per_entry = per_entry.reshape(pulses.M, ctx.substeps, -1).sum(axis=1)
    zgrad = np.zeros_like(pulses.amplitudes)
    for e, (i, k) in enumerate(ham.entry_src):
        zgrad[i, k, :] += per_entry[:, e]
    return report, np.conj(zgrad)


def gradient(pulses: PulseSet, ctx: GrapeContext) -> np.ndarray:
    """``dL/dRe A + i dL/dIm A`` for every amplitude (adjoint method)."""
    return loss_and_gradient(pulses, ctx)[1]


def finite_difference_gradient(pulses: PulseSet, ctx, step: float) -> np.ndarray:
    """Central differences on the real and imaginary part of every amplitude.

    ``ctx`` is a :class:`GrapeContext` or any callable ``PulseSet -> float``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if isinstance(ctx, GrapeContext):
        def fn(p):
            return evaluate(p, ctx).loss
    else:
        fn = ctx
    base = pulses.amplitudes
    out = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        for unit in (1.0, 1j):
            plus = base.copy()
            minus = base.copy()
            plus[idx] += unit * step
            minus[idx] -= unit * step
            d = (fn(pulses.with_amplitudes(plus)) - fn(pulses.with_amplitudes(minus))) / (2 * step)
            out[idx] += unit * d
    return out


def relative_error(g: np.ndarray, ref: np.ndarray, floor: float = 1e-6) -> float:
    """Largest component-wise relative error over real and imaginary parts.

    Components smaller than ``floor * max|ref|`` are compared against that
    floor instead of their own size.
    """
    a = np.concatenate([np.real(g).ravel(), np.imag(g).ravel()])
    b = np.concatenate([np.real(ref).ravel(), np.imag(ref).ravel()])
    scale = np.maximum(np.abs(b), floor * np.max(np.abs(b)))
    return float(np.max(np.abs(a - b) / scale))


def convergence_check(pulses: PulseSet, ctx: GrapeContext) -> float:
    """Change in fidelity when the number of substeps is doubled."""
    fine = replace(ctx, substeps=2 * ctx.substeps)
    return abs(evaluate(pulses, fine).f - evaluate(pulses, ctx).f)


def speed_limit_violated(T: float, f: float, coupling: np.ndarray, threshold: float = 0.9999,
                         slack: float = 1e-3) -> bool:
    """True if fidelity ``f >= threshold`` was reported below ``pi / (2 ||H_c||)``."""
    j = operator_norm(coupling)
    if j == 0:
        return False
    return f >= threshold and T < (1 - slack) * np.pi / (2 * j)


# ---------------------------------------------------------------------------
# optimization


@dataclass
class OptimizationConfig:
    """Settings for :func:`optimize`.

    ``T`` is in units of ``T_min = pi / (2 g)``; ``omega_max`` in units of
    ``g``. ``learning_rate`` is the size of the first step of each restart as
    a fraction of ``omega_max`` (the actual step is ``learning_rate *
    omega_max / max |grad|``), halved after ``patience`` iterations without
    a new best loss.
    """

    T: float = 0.45
    omega_max: float = 20.0
    M: int = 40
    learning_rate: float = 0.005
    momentum: float = 0.99
    max_iters: int = 3000
    restarts: int = 20
    seed: int = 0
    target_infidelity: float = 1e-9
    c_max: float = 1.0
    c_avg: float = 1.0
    substeps: int = DEFAULT_SUBSTEPS
    patience: int = 200
    init_scale: float = 0.5
    device: DeviceModel = field(default_factory=DeviceModel)
    coupling: CouplingSpec = field(default_factory=lambda: CouplingSpec("four_tone"))

    def __post_init__(self):
        if isinstance(self.device, dict):
            self.device = DeviceModel(**self.device)
        if isinstance(self.coupling, dict):
            self.coupling = CouplingSpec(**self.coupling)
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.T > 0 or not self.omega_max > 0:
            raise ValueError("T and omega_max must be positive")

    @property
    def gate_time(self) -> float:
        return self.T * t_min(self.device.g)

    def context(self) -> GrapeContext:
        return GrapeContext.build(self.device, self.coupling, substeps=self.substeps,
                                  c_max=self.c_max, c_avg=self.c_avg)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coupling"]["kind"] = self.coupling.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationConfig":
        return cls(**d)


@dataclass
class RestartResult:
    index: int
    best_amplitudes: np.ndarray
    best_report: FidelityReport
    history: list
    iterations: int


@dataclass
class OptimizationRun:
    config: OptimizationConfig
    best_pulses: PulseSet
    best_report: FidelityReport
    restarts: list
    seed_used: int
    iterations_executed: int
    wall_time: float

    @property
    def loss_history(self) -> np.ndarray:
        """Raw loss per iteration of the winning restart."""
        return np.asarray(self.best_restart.history)

    @property
    def best_history(self) -> np.ndarray:
        """Best-so-far loss per iteration of the winning restart."""
        return np.minimum.accumulate(self.loss_history)

    @property
    def best_restart(self) -> RestartResult:
        return min(self.restarts, key=lambda r: (r.best_report.loss, r.index))

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config.to_dict(),
            "seed_used": self.seed_used,
            "iterations_executed": self.iterations_executed,
            "wall_time": self.wall_time,
            "best_report": asdict(self.best_report),
            "best_amplitudes": _pack(self.best_pulses.amplitudes),
            "restarts": [_restart_to_dict(r) for r in self.restarts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationRun":
        config = OptimizationConfig.from_dict(d["config"])
        amps = _unpack(d["best_amplitudes"])
        return cls(
            config=config,
            best_pulses=PulseSet(amps, config.gate_time, config.omega_max),
            best_report=FidelityReport(**d["best_report"]),
            restarts=[_restart_from_dict(r) for r in d["restarts"]],
            seed_used=d["seed_used"],
            iterations_executed=d["iterations_executed"],
            wall_time=d["wall_time"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "OptimizationRun":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _pack(a: np.ndarray) -> dict:
    # json writes floats with repr(), which round-trips exactly
    a = np.asarray(a)
    return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}


def _unpack(d: dict) -> np.ndarray:
    return (np.array(d["re"]) + 1j * np.array(d["im"])).reshape(d["shape"])


def _restart_to_dict(r: RestartResult) -> dict:
    return {"index": r.index, "best_amplitudes": _pack(r.best_amplitudes),
            "best_report": asdict(r.best_report), "history": list(map(float, r.history)),
            "iterations": r.iterations}


def _restart_from_dict(d: dict) -> RestartResult:
    return RestartResult(index=d["index"], best_amplitudes=_unpack(d["best_amplitudes"]),
                         best_report=FidelityReport(**d["best_report"]), history=list(d["history"]),
                         iterations=d["iterations"])


def random_amplitudes(config: OptimizationConfig, index: int) -> np.ndarray:
    """Initial amplitudes of restart ``index``: uniform magnitude and phase."""
    rng = np.random.default_rng([config.seed, index])
    shape = (2, config.device.n_transitions, config.M)
    mag = rng.uniform(0.0, config.init_scale * config.omega_max, size=shape)
    phase = rng.uniform(0.0, 2 * np.pi, size=shape)
    return mag * np.exp(1j * phase)


class Interrupted(Exception):
    """Raised by a callback to stop :func:`optimize`; a checkpoint is written first."""


@dataclass
class _State:
    A: np.ndarray
    v: np.ndarray
    lr: float | None = None
    best_loss: float = np.inf
    best_A: np.ndarray | None = None
    best_report: FidelityReport | None = None
    since: int = 0
    it: int = 0
    history: list = field(default_factory=list)
    done: bool = False

    def to_dict(self) -> dict:
        return {"A": _pack(self.A), "v": _pack(self.v), "lr": self.lr, "best_loss": self.best_loss,
                "best_A": None if self.best_A is None else _pack(self.best_A),
                "best_report": None if self.best_report is None else asdict(self.best_report),
                "since": self.since, "it": self.it, "history": self.history, "done": self.done}

    @classmethod
    def from_dict(cls, d: dict) -> "_State":
        return cls(A=_unpack(d["A"]), v=_unpack(d["v"]), lr=d["lr"], best_loss=d["best_loss"],
                   best_A=None if d["best_A"] is None else _unpack(d["best_A"]),
                   best_report=None if d["best_report"] is None else FidelityReport(**d["best_report"]),
                   since=d["since"], it=d["it"], history=list(d["history"]), done=d["done"])


def _descend(state: _State, ctx: GrapeContext, config: OptimizationConfig, index: int,
             callback=None, on_checkpoint=None, checkpoint_every: int = 100) -> _State:
    """Nesterov-momentum projected gradient descent from ``state``.

    Uses the equivalent form ``v <- mu v + g;  A <- P(A - lr (g + mu v))``
    so that every gradient is taken at a feasible iterate.
    """
    T = config.gate_time
    om = config.omega_max
    mu = config.momentum
    while not state.done:
        if state.it >= config.max_iters:
            state.done = True
            break
        if callback is not None:
            callback(index, state.it, state.best_loss, state.A)
        rep, g = loss_and_gradient(PulseSet(state.A, T, om), ctx)
        if state.lr is None:
            gmax = float(np.max(np.abs(g)))
            state.lr = config.learning_rate * om / gmax if gmax > 0 else config.learning_rate
        state.history.append(rep.loss)
        if rep.loss < state.best_loss:
            state.best_loss = rep.loss
            state.best_A = state.A.copy()
            state.best_report = rep
            state.since = 0
        else:
            state.since += 1
            if state.since >= config.patience:
                state.lr *= 0.5
                state.since = 0
        state.it += 1
        if rep.loss <= config.target_infidelity:
            state.done = True
            break
        state.v = mu * state.v + g
        state.A = clip_amplitudes(state.A - state.lr * (g + mu * state.v), om)
        if on_checkpoint is not None and state.it % checkpoint_every == 0:
            on_checkpoint(index, state)
    return state


def _restart_result(index: int, state: _State) -> RestartResult:
    return RestartResult(index=index, best_amplitudes=state.best_A, best_report=state.best_report,
                         history=state.history, iterations=state.it)


def _run_one(args):
    config, index, A0 = args
    ctx = config.context()
    state = _State(A=clip_amplitudes(A0, config.omega_max), v=np.zeros_like(A0))
    return _restart_result(index, _descend(state, ctx, config, index))


def optimize(config: OptimizationConfig, initial=None, checkpoint=None, resume: bool = False,
             callback=None, threads: int = 1, checkpoint_every: int = 100) -> OptimizationRun:
    """Best-of-restarts Nesterov projected gradient descent.

    Parameters
    ----------
    config : OptimizationConfig
    initial : list of ndarray, optional
        Extra starting amplitudes (warm starts), run before the
        ``config.restarts`` random ones.
    checkpoint : path, optional
        JSON file holding the optimizer state; written every
        ``checkpoint_every`` iterations, after each restart and on
        interruption.
    resume : bool
        Continue from ``checkpoint`` if it exists.
    callback : callable, optional
        ``callback(restart, iteration, best_loss, amplitudes)`` before each
        iteration; it may raise :class:`Interrupted` (or ``KeyboardInterrupt``).
    threads : int
        Worker processes for restarts. Results do not depend on it.
    """
    t0 = time.perf_counter()
    starts = [np.asarray(a, dtype=complex) for a in (initial or [])]
    starts += [random_amplitudes(config, i) for i in range(config.restarts)]

    finished = {}
    current = None
    ckpt = Path(checkpoint) if checkpoint is not None else None
    if resume and ckpt is not None and ckpt.exists():
        saved = json.loads(ckpt.read_text())
        if saved["config"] != config.to_dict():
            raise ValueError("checkpoint was written for a different configuration")
        finished = {r["index"]: _restart_from_dict(r) for r in saved["finished"]}
        if saved["current"] is not None:
            current = (saved["current"]["index"], _State.from_dict(saved["current"]["state"]))

    def write(cur):
        if ckpt is None:
            return
        payload = {"config": config.to_dict(), "finished": [_restart_to_dict(r) for r in finished.values()],
                   "current": None if cur is None else {"index": cur[0], "state": cur[1].to_dict()}}
        tmp = ckpt.with_suffix(ckpt.suffix + ".tmp")
        tmp.write_text(json.dumps(payload))
        os.replace(tmp, ckpt)

    pending = [i for i in range(len(starts)) if i not in finished]
    if threads > 1 and len(pending) > 1 and callback is None:
        jobs = [(config, i, starts[i]) for i in pending]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(_run_one, jobs):
                finished[res.index] = res
                write(None)
    else:
        ctx = config.context()
        for i in pending:
            if current is not None and current[0] == i:
                state = current[1]
            else:
                state = _State(A=clip_amplitudes(starts[i], config.omega_max), v=np.zeros_like(starts[i]))
            try:
                state = _descend(state, ctx, config, i, callback=callback,
                                 on_checkpoint=lambda idx, st: write((idx, st)),
                                 checkpoint_every=checkpoint_every)
            except (Interrupted, KeyboardInterrupt):
                write((i, state))
                raise
            finished[i] = _restart_result(i, state)
            current = None
            write(None)
            log.info("restart %d: loss %.3e after %d iterations", i, state.best_loss, state.it)

    results = [finished[i] for i in sorted(finished)]
    best = min(results, key=lambda r: (r.best_report.loss, r.index))
    return OptimizationRun(
        config=config,
        best_pulses=PulseSet(best.best_amplitudes, config.gate_time, config.omega_max),
        best_report=best.best_report,
        restarts=results,
        seed_used=config.seed,
        iterations_executed=sum(r.iterations for r in results),
        wall_time=time.perf_counter() - t0,
    )


@dataclass
class ScanResult:
    """Best fidelity per gate time and the smallest time reaching the threshold."""

    times: np.ndarray
    fidelities: np.ndarray
    threshold: float
    t_f: float | None
    runs: list
    speed_limit_violations: list

    def to_dict(self) -> dict:
        return {"times": list(map(float, self.times)), "fidelities": list(map(float, self.fidelities)),
                "threshold": self.threshold, "t_f": self.t_f,
                "speed_limit_violations": list(self.speed_limit_violations)}


def scan_min_time(config: OptimizationConfig, fidelity_threshold: float, t_grid, warm_start: bool = True,
                  threads: int = 1, store_dir=None, resume: bool = False,
                  stop_when_reached: bool = False) -> ScanResult:
    """Optimize at each ``T`` of ``t_grid`` (units of T_min, ascending).

    With ``warm_start`` the previous point's best amplitudes are reused as an
    extra start (same array, new segment length) next to the fresh restarts.

    If ``store_dir`` is given, each finished grid point is saved there and
    the point in progress is checkpointed; with ``resume`` saved points are
    loaded instead of recomputed. ``stop_when_reached`` ends the scan at the
    first point meeting the threshold (the curve is then truncated there).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    store = Path(store_dir) if store_dir is not None else None
    if store is not None:
        store.mkdir(parents=True, exist_ok=True)
    coupling = build_coupling(config.coupling, config.device)
    runs, fids, violations = [], [], []
    prev = None
    for n, T in enumerate(t_grid):
        cfg = replace(config, T=float(T))
        point = store / f"point_{n:03d}.json" if store is not None else None
        if resume and point is not None and point.exists():
            run = OptimizationRun.load(point)
            if run.config != cfg:
                raise ValueError(f"{point} was written for a different configuration")
        else:
            initial = [prev] if (warm_start and prev is not None) else None
            ckpt = store / "current.ckpt.json" if store is not None else None
            run = optimize(cfg, initial=initial, threads=threads, checkpoint=ckpt, resume=resume)
            if point is not None:
                run.save(point)
                ckpt.unlink(missing_ok=True)
        runs.append(run)
        fids.append(run.best_report.f)
        prev = run.best_pulses.amplitudes
        if speed_limit_violated(cfg.gate_time, run.best_report.f, coupling, threshold=fidelity_threshold):
            violations.append(float(T))
            log.error("fidelity %.6f at T=%.4f T_min is below the speed limit", run.best_report.f, T)
        log.info("scan T=%.4f T_min: F=%.8f", T, run.best_report.f)
        if stop_when_reached and run.best_report.f >= fidelity_threshold:
            t_grid = t_grid[:n + 1]
            break
    fids = np.array(fids)
    ok = np.nonzero(fids >= fidelity_threshold)[0]
    t_f = float(t_grid[ok[0]]) if len(ok) else None
    return ScanResult(times=t_grid, fidelities=fids, threshold=fidelity_threshold, t_f=t_f, runs=runs,
                      speed_limit_violations=violations)
