"""
Experiment harness.

Usage::

    python -m quditspeed <kind> --config cfg.json --out runs/x [--seed N] [--threads N] [--resume]

``kind`` is one of ``optimize``, ``scan-time``, ``scan-omega``,
``protocol-report``, ``bound``, ``leakage-report``, ``fidelity-vs-nmax`` or
``gradcheck``. The config is a JSON object; frequencies are in units of
``g`` and gate times in units of ``T_min = pi / (2g)``::

    {
      "seed": 0,
      "device": {"alpha": 10, "delta": 15, "d_sim": 4, "ort_enabled": true},
      "coupling": {"kind": "four_tone"},
      "optimization": {"T": 0.55, "omega_max": 40, "restarts": 20},
      "scan": {"t_grid": [0.35, 0.4, 0.45], "threshold": 0.9999},
      "pulses": "runs/ort/run.json",
      "nmax_list": [3, 4, 5, 6, 7, 8, 9]
    }

Every run writes ``config.json`` (the resolved configuration),
``record.json`` (version, timings and the scalar results) and CSV data
files to the output directory.
"""

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .grape import (GrapeContext, OptimizationConfig, OptimizationRun, evaluate, finite_difference_gradient,
                    gradient, optimize, relative_error, scan_min_time, t_min)
from .metrics import format_float, leakage_profile
from .model import CouplingKind, CouplingSpec, DeviceModel, PulseSet, build_coupling, envelope, segment_index
from .propagator import propagate
from .protocols import protocol_report, speed_limit_bound, t_exact

log = logging.getLogger(__name__)

KINDS = ("optimize", "scan-time", "scan-omega", "protocol-report", "bound", "leakage-report",
         "fidelity-vs-nmax", "gradcheck")

DEFAULT_T_GRID = (0.333, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.0)
DEFAULT_OMEGA_GRID = (3.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


@dataclass
class ScanSettings:
    t_grid: list = field(default_factory=lambda: list(DEFAULT_T_GRID))
    omega_grid: list = field(default_factory=lambda: list(DEFAULT_OMEGA_GRID))
    threshold: float = 0.9999
    warm_start: bool = True


@dataclass
class GradcheckSettings:
    n_configs: int = 5
    M: int = 6
    substeps: int = 8
    T: float = 0.5
    # central-difference step relative to Omega_max; smaller steps lose
    # digits to round-off once gradients drop to 1e-3
    step: float = 1e-5
    tolerance: float = 1e-5


@dataclass
class ExperimentConfig:
    kind: str = "optimize"
    seed: int = 0
    out: str | None = None
    device: DeviceModel = field(default_factory=DeviceModel)
    coupling: CouplingSpec = field(default_factory=lambda: CouplingSpec(CouplingKind.FOUR_TONE))
    optimization: dict = field(default_factory=dict)
    scan: ScanSettings = field(default_factory=ScanSettings)
    gradcheck: GradcheckSettings = field(default_factory=GradcheckSettings)
    pulses: str | None = None
    nmax_list: list = field(default_factory=lambda: list(range(3, 10)))
    samples_per_segment: int = 16

    def optimization_config(self) -> OptimizationConfig:
        return OptimizationConfig(**self.optimization, seed=self.seed, device=self.device, coupling=self.coupling)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["coupling"]["kind"] = self.coupling.kind.value
        return d


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{where}.{key}: unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _check_number(value, where: str, positive: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value!r}")


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config tree; errors name the offending field."""
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{key}: unknown field")
    kw = dict(data)
    kind = kw.get("kind", "optimize")
    if kind not in KINDS:
        raise ConfigError(f"kind: must be one of {', '.join(KINDS)}, got {kind!r}")
    if "seed" in kw and (isinstance(kw["seed"], bool) or not isinstance(kw["seed"], int)):
        raise ConfigError(f"seed: expected an integer, got {kw['seed']!r}")
    if "device" in kw:
        for name, value in kw["device"].items() if isinstance(kw["device"], dict) else ():
            if name in ("g", "alpha", "delta", "cross_talk", "drive_scale"):
                _check_number(value, f"device.{name}", positive=name in ("g",))
        kw["device"] = _build(DeviceModel, kw["device"], "device")
    if "coupling" in kw:
        c = kw["coupling"]
        if isinstance(c, dict) and "kind" in c and c["kind"] not in [k.value for k in CouplingKind]:
            raise ConfigError(f"coupling.kind: unknown coupling {c['kind']!r}")
        kw["coupling"] = _build(CouplingSpec, c, "coupling")
    if "optimization" in kw:
        opt = kw["optimization"]
        if not isinstance(opt, dict):
            raise ConfigError("optimization: expected an object")
        allowed = {f.name for f in dataclasses.fields(OptimizationConfig)} - {"seed", "device", "coupling"}
        for key, value in opt.items():
            if key not in allowed:
                raise ConfigError(f"optimization.{key}: unknown field")
            if key in ("T", "omega_max", "learning_rate"):
                _check_number(value, f"optimization.{key}", positive=True)
    if "scan" in kw:
        kw["scan"] = _build(ScanSettings, kw["scan"], "scan")
    if "gradcheck" in kw:
        kw["gradcheck"] = _build(GradcheckSettings, kw["gradcheck"], "gradcheck")
    cfg = ExperimentConfig(**kw)
    try:
        cfg.optimization_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimization: {exc}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)


@dataclass
class RunRecord:
    config: dict
    result: dict
    version: str = __version__
    started: str = ""
    wall_time: float = 0.0

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=1))

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls(**json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# data export


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else ("" if v is None else format_float(v)) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _tone_names(n_tones: int) -> list:
    return [f"q{i + 1}_{k}{k + 1}" for i in range(2) for k in range(n_tones)]


def sample_pulses(pulses: PulseSet, samples_per_segment: int):
    """Times ``m tau + j tau / S`` for ``j < S`` plus ``T``, and ``Omega(t)`` per tone.

    Returns ``(t, values)`` with ``values`` shaped ``(len(t), 2, n_tones)``.
    """
    if samples_per_segment < 2:
        raise ValueError("samples_per_segment must be >= 2")
    n = pulses.M * samples_per_segment
    t = np.arange(n + 1) * (pulses.tau / samples_per_segment)
    t[-1] = pulses.T
    m = segment_index(t, pulses.tau, pulses.M)
    # evaluate the envelope from the in-segment offset to get exact zeros at boundaries
    j = np.arange(n + 1) % samples_per_segment
    j[-1] = 0
    env = np.sin(np.pi * j / samples_per_segment) ** 2
    values = pulses.amplitudes[:, :, m].transpose(2, 0, 1) * env[:, None, None]
    return t, values


def export_pulse_csv(pulses: PulseSet, samples_per_segment: int, path) -> None:
    """CSV with ``t`` and ``Re``/``Im`` of every tone on the sin^2 envelope."""
    t, values = sample_pulses(pulses, samples_per_segment)
    names = _tone_names(pulses.n_tones)
    header = ["t"] + [f"{p}_{n}" for n in names for p in ("re", "im")]
    flat = values.reshape(len(t), -1)
    rows = []
    for s in range(len(t)):
        row = [t[s]]
        for z in flat[s]:
            row += [z.real, z.imag]
        rows.append(row)
    write_csv(path, header, rows)


def read_pulse_csv(path):
    """Inverse of :func:`export_pulse_csv`: ``(t, values)`` with complex values."""
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    t = data[:, 0]
    z = data[:, 1::2] + 1j * data[:, 2::2]
    n_tones = z.shape[1] // 2
    return t, z.reshape(len(t), 2, n_tones)


def pulses_from_csv(path, T: float, omega_max: float, M: int) -> PulseSet:
    """Rebuild amplitudes from the mid-segment samples of an exported pulse CSV."""
    t, z = read_pulse_csv(path)
    tau = T / M
    mids = (np.arange(M) + 0.5) * tau
    idx = [int(np.argmin(np.abs(t - c))) for c in mids]
    if np.max(np.abs(t[idx] - mids)) > 1e-9 * T:
        raise ValueError("CSV has no samples at segment centres (use an even samples_per_segment)")
    amps = z[idx].transpose(1, 2, 0) / envelope(mids, tau)[None, None, :]
    return PulseSet(amps, T, omega_max)


def fidelity_vs_nmax(pulses: PulseSet, device: DeviceModel, nmax_list, coupling: CouplingSpec | None = None,
                     substeps: int | None = None):
    """Fidelity of fixed pulses when each transmon keeps levels ``0 .. n_max``.

    The coupling stays confined to the logical block; the tone table grows
    with the simulated ladder. Returns an ``(n, 2)`` array of ``(n_max, F)``.
    """
    coupling = coupling or CouplingSpec(CouplingKind.FOUR_TONE)
    kwargs = {} if substeps is None else {"substeps": substeps}
    out = []
    for n_max in nmax_list:
        if n_max + 1 < device.d_logical:
            raise ValueError(f"n_max={n_max} is below the logical levels")
        ctx = GrapeContext.build(device.with_levels(n_max + 1), coupling, **kwargs)
        out.append((n_max, evaluate(pulses, ctx).f))
    return np.array(out, dtype=float)


# ---------------------------------------------------------------------------
# experiments


def _load_pulses(cfg: ExperimentConfig):
    if cfg.pulses is None:
        raise ConfigError("pulses: this experiment needs a stored run (path to a run.json)")
    try:
        return OptimizationRun.load(cfg.pulses)
    except OSError as exc:
        raise ConfigError(f"pulses: cannot read {cfg.pulses}: {exc.strerror}") from None


def _run_summary(run: OptimizationRun) -> dict:
    return {"f": run.best_report.f, "infidelity": 1 - run.best_report.f, "loss": run.best_report.loss,
            "leak_max": run.best_report.leak_max, "leak_avg": run.best_report.leak_avg,
            "iterations": run.iterations_executed, "T": run.config.T, "omega_max": run.config.omega_max}


def exp_optimize(cfg, out: Path, threads: int, resume: bool) -> dict:
    oc = cfg.optimization_config()
    run = optimize(oc, checkpoint=out / "checkpoint.json", resume=resume, threads=threads)
    run.save(out / "run.json")
    (out / "checkpoint.json").unlink(missing_ok=True)
    hist = run.loss_history
    write_csv(out / "history.csv", ["iteration", "loss", "best_loss"],
              zip(range(len(hist)), hist, run.best_history))
    export_pulse_csv(run.best_pulses, cfg.samples_per_segment, out / "pulses.csv")
    return _run_summary(run)


def exp_scan_time(cfg, out: Path, threads: int, resume: bool) -> dict:
    oc = cfg.optimization_config()
    scan = scan_min_time(oc, cfg.scan.threshold, cfg.scan.t_grid, warm_start=cfg.scan.warm_start,
                         threads=threads, store_dir=out / "points", resume=resume)
    write_csv(out / "scan_time.csv", ["T_over_Tmin", "fidelity", "infidelity"],
              [(t, f, 1 - f) for t, f in zip(scan.times, scan.fidelities)])
    return {"omega_max": oc.omega_max, **scan.to_dict()}


def exp_scan_omega(cfg, out: Path, threads: int, resume: bool) -> dict:
    base = cfg.optimization_config()
    rows, points = [], []
    for n, om in enumerate(cfg.scan.omega_grid):
        oc = dataclasses.replace(base, omega_max=float(om))
        scan = scan_min_time(oc, cfg.scan.threshold, cfg.scan.t_grid, warm_start=cfg.scan.warm_start,
                             threads=threads, store_dir=out / f"omega_{n:02d}", resume=resume)
        te = t_exact(float(om), cfg.device.g) / t_min(cfg.device.g)
        rows.append((om, scan.t_f, te))
        points.append({"omega_max": float(om), **scan.to_dict(), "t_exact": te})
    write_csv(out / "scan_omega.csv", ["omega_max", "T_F_over_Tmin", "t_exact_over_Tmin"], rows)
    return {"points": points}


def exp_protocol_report(cfg, out: Path, threads: int, resume: bool) -> dict:
    rows = protocol_report(range(2, 7), cfg.device.g)
    keys = ["protocol", "d", "j_norm", "t_bound", "duration", "fidelity"]
    write_csv(out / "protocols.csv", keys, [[r[k] if k != "d" else str(r[k]) for k in keys] for r in rows])
    return {"rows": rows}


def exp_bound(cfg, out: Path, threads: int, resume: bool) -> dict:
    h = build_coupling(cfg.coupling, cfg.device)
    b = speed_limit_bound(h, cfg.device.g)
    write_csv(out / "bound.csv", ["coupling", "J_over_g", "t_bound", "t_bound_over_Tmin"],
              [(cfg.coupling.kind.value, b.j_norm, b.t_bound, b.t_bound / b.baseline_t_min)])
    return {"coupling": cfg.coupling.kind.value, "j_norm": b.j_norm,
            "t_bound": None if b.unbounded else b.t_bound, "unbounded": b.unbounded}


def exp_leakage_report(cfg, out: Path, threads: int, resume: bool) -> dict:
    run = _load_pulses(cfg)
    oc = run.config
    ctx = oc.context()
    prop = propagate(ctx.hamiltonian(run.best_pulses), run.best_pulses.T, oc.substeps, run.best_pulses.M)
    prof = leakage_profile(prop, ctx.space)
    prof.times = prof.times / t_min(oc.device.g)
    prof.to_csv(out / "leakage.csv")
    export_pulse_csv(run.best_pulses, cfg.samples_per_segment, out / "pulses.csv")
    final = {f"p{k}": float(v[-1]) for k, v in prof.p_k.items()}
    return {"p01_final": float(prof.p01[-1]), **{k + "_final": v for k, v in final.items()},
            "f": evaluate(run.best_pulses, ctx).f}


def exp_fidelity_vs_nmax(cfg, out: Path, threads: int, resume: bool) -> dict:
    run = _load_pulses(cfg)
    table = fidelity_vs_nmax(run.best_pulses, run.config.device, cfg.nmax_list, run.config.coupling,
                             substeps=run.config.substeps)
    write_csv(out / "fidelity_vs_nmax.csv", ["n_max", "fidelity"], [(str(int(n)), f) for n, f in table])
    return {"n_max": [int(n) for n in table[:, 0]], "fidelity": table[:, 1].tolist(),
            "drop": float(table[0, 1] - table[-1, 1])}


def gradcheck(settings: GradcheckSettings, seed: int, coupling: CouplingSpec | None = None) -> list:
    """Adjoint vs central differences on random pulses, half of the cases with ORT."""
    coupling = coupling or CouplingSpec(CouplingKind.FOUR_TONE)
    rows = []
    for c in range(settings.n_configs):
        rng = np.random.default_rng([seed, c])
        ort = c % 2 == 1
        device = DeviceModel(d_sim=4 if ort else 3, ort_enabled=ort)
        ctx = GrapeContext.build(device, coupling, substeps=settings.substeps)
        omega = float(rng.uniform(5, 40))
        shape = (2, device.n_transitions, settings.M)
        amps = rng.uniform(0, omega, shape) * np.exp(2j * np.pi * rng.uniform(size=shape))
        p = PulseSet(amps, settings.T * t_min(device.g), omega)
        g = gradient(p, ctx)
        fd = finite_difference_gradient(p, ctx, settings.step * omega)
        err = relative_error(g, fd)
        rows.append({"config": c, "ort": ort, "omega_max": omega, "max_rel_error": err,
                     "passed": bool(err <= settings.tolerance)})
    return rows


def exp_gradcheck(cfg, out: Path, threads: int, resume: bool) -> dict:
    rows = gradcheck(cfg.gradcheck, cfg.seed, cfg.coupling)
    write_csv(out / "gradcheck.csv", ["config", "ort", "omega_max", "max_rel_error", "passed"],
              [(str(r["config"]), str(r["ort"]), r["omega_max"], r["max_rel_error"], str(r["passed"]))
               for r in rows])
    return {"rows": rows, "passed": all(r["passed"] for r in rows),
            "max_rel_error": max(r["max_rel_error"] for r in rows)}


EXPERIMENTS = {
    "optimize": exp_optimize,
    "scan-time": exp_scan_time,
    "scan-omega": exp_scan_omega,
    "protocol-report": exp_protocol_report,
    "bound": exp_bound,
    "leakage-report": exp_leakage_report,
    "fidelity-vs-nmax": exp_fidelity_vs_nmax,
    "gradcheck": exp_gradcheck,
}


def run(cfg: ExperimentConfig, out=None, threads: int = 1, resume: bool = False) -> RunRecord:
    """Run one experiment and persist its record, config snapshot and CSV files."""
    out = Path(out or cfg.out or f"runs/{cfg.kind}")
    out.mkdir(parents=True, exist_ok=True)
    snapshot = cfg.to_dict()
    (out / "config.json").write_text(json.dumps(snapshot, indent=1))
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    result = EXPERIMENTS[cfg.kind](cfg, out, threads, resume)
    record = RunRecord(config=snapshot, result=result, started=started, wall_time=time.perf_counter() - t0)
    record.save(out / "record.json")
    return record


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditspeed", description="Qudit-assisted iSWAP experiments.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", help="JSON config (units of g and T_min)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for restarts")
    parser.add_argument("--resume", action="store_true", help="continue from checkpoints in --out")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg.kind = args.kind
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigError(f"--threads: must be >= 1, got {args.threads}")
        record = run(cfg, args.out, threads=args.threads, resume=args.resume)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 2
    print(json.dumps(record.result, indent=1, default=float))
    if cfg.kind == "gradcheck" and not record.result["passed"]:
        return 1
    return 0
