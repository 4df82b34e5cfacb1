"""Parameter sweeps over the initial amplitude, event detection and output."""
from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import __version__
from .concurrence import RANGE_TOL, X_TOL, max_x_defect, spin_flip_roots, x_concurrence_series
from .core import batch_diagnostics
from .integrator import NumericalAbort, TimeGrid, integrate
from .model import Family, InitialState, ModelParams, ReducedGenerator, initial_density
from .oracle import OracleConfig, oracle_evolve

log = logging.getLogger(__name__)

WORKERS_ENV = "RABIESD_WORKERS"
# fixed batch size keeps reduced-engine arithmetic independent of pool width
REDUCED_CHUNK = 8
DEFAULT_GAMMA = 0.1


class Engine(str, enum.Enum):
    REDUCED = "reduced"
    ORACLE = "oracle"


class ConfigError(ValueError):
    pass


class SweepAbort(RuntimeError):
    def __init__(self, alpha_sq: float, time: float):
        self.alpha_sq = alpha_sq
        self.time = time
        super().__init__(f"numerical abort at alpha_sq={alpha_sq:.6g}, lambda_t={time:.6g}")


@dataclass
class RunConfig:
    """One run or sweep. Frequencies and rates are in units of the coupling."""

    engine: Engine = Engine.REDUCED
    family: Family = Family.PHI
    omega_over_lambda: float = 10.0
    gamma_over_lambda: float = DEFAULT_GAMMA
    alpha_sq: float | None = 0.5
    alpha_sq_count: int | None = None
    beta_phase: float = 0.0
    t_max_lambda: float = 10.0
    dt_lambda: float = 1e-3
    n_max: int = 8
    renormalize_trace: bool = False
    output_path: str = "rabiesd_run"
    omega0_over_lambda: float | None = None
    off_resonance: bool = False
    sample_every: int = 10
    threshold: float = 1e-4
    hold_window: float = 0.5
    time_axis_scale: float = 1.0

    def __post_init__(self):
        try:
            self.engine = Engine(self.engine)
            self.family = Family(self.family)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> "RunConfig":
        if self.alpha_sq_count is None and self.alpha_sq is None:
            raise ConfigError("give alpha_sq or alpha_sq_count")
        if self.alpha_sq_count is not None and self.alpha_sq_count < 1:
            raise ConfigError("alpha_sq_count must be positive")
        if self.alpha_sq_count is None and not 0.0 <= self.alpha_sq <= 1.0:
            raise ConfigError("alpha_sq must lie in [0, 1]")
        if self.omega_over_lambda <= 0:
            raise ConfigError("omega_over_lambda must be positive")
        if self.gamma_over_lambda < 0:
            raise ConfigError("gamma_over_lambda must be non-negative")
        if self.t_max_lambda < 0:
            raise ConfigError("t_max_lambda must be non-negative")
        if self.dt_lambda <= 0:
            raise ConfigError("dt_lambda must be positive")
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be positive")
        if self.time_axis_scale <= 0:
            raise ConfigError("time_axis_scale must be positive")
        if (
            self.omega0_over_lambda is not None
            and self.omega0_over_lambda != self.omega_over_lambda
            and not self.off_resonance
        ):
            raise ConfigError("omega0 differs from omega; pass off_resonance to allow it")
        if self.omega0_over_lambda is not None and self.omega0_over_lambda <= 0:
            raise ConfigError("omega0_over_lambda must be positive")
        return self

    @property
    def params(self) -> ModelParams:
        omega0 = self.omega_over_lambda if self.omega0_over_lambda is None else self.omega0_over_lambda
        return ModelParams(omega0=omega0, omega=self.omega_over_lambda, lam=1.0, gamma=self.gamma_over_lambda)

    def alpha_sq_values(self) -> np.ndarray:
        if self.alpha_sq_count is None:
            return np.array([float(self.alpha_sq)])
        n = self.alpha_sq_count
        if n == 1:
            return np.array([0.5])
        return np.arange(n) / (n - 1)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["engine"] = self.engine.value
        d["family"] = self.family.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ConcurrenceSurface:
    """Concurrence on the (alpha_sq, lambda t) grid, rows indexed by alpha_sq."""

    alpha_sq_values: np.ndarray
    time_values: np.ndarray
    concurrence: np.ndarray
    traces: np.ndarray
    min_eigenvalues: np.ndarray
    hermiticity_defects: np.ndarray
    methods: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def asymmetry(self) -> float:
        """Largest |C(a, t) - C(1 - a, t)| over grids symmetric about 1/2."""
        a = self.alpha_sq_values
        if not np.allclose(a, 1 - a[::-1], atol=1e-12):
            raise ValueError("alpha_sq grid is not symmetric about 1/2")
        return float(np.max(np.abs(self.concurrence - self.concurrence[::-1])))


class Revival(NamedTuple):
    start: float
    peak_time: float
    peak_value: float
    end: float


@dataclass
class EventReport:
    death_time: float | None
    birth_time: float | None
    revivals: list
    terminal_value: float

    def to_dict(self) -> dict:
        return {
            "death_time": self.death_time,
            "birth_time": self.birth_time,
            "revivals": [r._asdict() for r in self.revivals],
            "terminal_value": self.terminal_value,
        }


def detect_events(times, curve, threshold: float = 1e-4, hold_window: float = 0.5) -> EventReport:
    """Find sudden death, sudden birth and revival intervals.

    A death is the first sample that drops to or below ``threshold`` from
    above and stays there for ``hold_window`` (or until the series ends). A
    birth is the first sample above threshold when the curve starts at or
    below it. Revivals are the maximal above-threshold runs after the first
    death.
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(curve, dtype=float)
    if t.shape != c.shape or t.ndim != 1:
        raise ValueError("times and curve must be 1-d arrays of equal length")
    n = len(c)
    if n == 0:
        return EventReport(None, None, [], 0.0)
    above = c > threshold
    above_idx = np.flatnonzero(above)

    def stays_below(i):
        later = above_idx[above_idx > i]
        return later.size == 0 or t[later[0]] - t[i] >= hold_window

    death_i = None
    for i in np.flatnonzero(~above[1:] & above[:-1]) + 1:
        if stays_below(i):
            death_i = int(i)
            break

    birth = None
    if not above[0] and above_idx.size:
        birth = float(t[above_idx[0]])

    revivals = []
    if death_i is not None:
        i = death_i
        while True:
            later = above_idx[above_idx > i]
            if later.size == 0:
                break
            s = int(later[0])
            below_after = np.flatnonzero(~above[s:])
            e = s + int(below_after[0]) if below_after.size else n
            k = s + int(np.argmax(c[s:e]))
            end_t = float(t[e]) if e < n else float(t[-1])
            revivals.append(Revival(float(t[s]), float(t[k]), float(c[k]), end_t))
            i = e
            if e >= n:
                break

    tail = max(1, math.ceil(0.05 * n))
    return EventReport(
        death_time=None if death_i is None else float(t[death_i]),
        birth_time=birth,
        revivals=revivals,
        terminal_value=float(np.mean(c[-tail:])),
    )


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be positive")
        return n
    return os.cpu_count() or 1


def _initial_stack(cfg: RunConfig, alpha_sqs) -> np.ndarray:
    return np.array(
        [initial_density(InitialState.from_alpha_sq(cfg.family, a, cfg.beta_phase)).matrix for a in alpha_sqs]
    )


def _reduced_task(args):
    cfg, alpha_sqs = args
    rho0 = _initial_stack(cfg, alpha_sqs)
    grid = TimeGrid(0.0, cfg.t_max_lambda, cfg.dt_lambda)
    try:
        traj = integrate(ReducedGenerator(cfg.params), rho0, grid, cfg.sample_every)
    except NumericalAbort as exc:
        bad = 0
        if exc.state is not None:
            finite = np.all(np.isfinite(exc.state), axis=(-2, -1))
            bad = int(np.argmin(finite))
        raise SweepAbort(float(alpha_sqs[bad]), exc.time) from None
    # (samples, batch, 4, 4) -> (batch, samples, 4, 4)
    return traj.times, np.swapaxes(traj.states, 0, 1)


def _oracle_task(args):
    cfg, alpha_sq = args
    grid = TimeGrid(0.0, cfg.t_max_lambda, cfg.dt_lambda)
    state = InitialState.from_alpha_sq(cfg.family, alpha_sq, cfg.beta_phase)
    try:
        traj = oracle_evolve(state, OracleConfig(cfg.params, grid, cfg.n_max, cfg.sample_every))
    except NumericalAbort as exc:
        raise SweepAbort(alpha_sq, exc.time) from None
    return traj.times, traj.states[None]


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def evolve_states(cfg: RunConfig, workers: int | None = None):
    """Sampled reduced states for every alpha_sq: ``(times, (n_a, n_t, 4, 4))``."""
    alpha_sqs = cfg.alpha_sq_values()
    if cfg.t_max_lambda == 0:
        return np.zeros(1), _initial_stack(cfg, alpha_sqs)[:, None]
    workers = worker_count() if workers is None else workers
    if cfg.engine is Engine.REDUCED:
        tasks = [(cfg, alpha_sqs[i:i + REDUCED_CHUNK]) for i in range(0, len(alpha_sqs), REDUCED_CHUNK)]
        results = _map(_reduced_task, tasks, workers)
    else:
        results = _map(_oracle_task, [(cfg, a) for a in alpha_sqs], workers)
    times = results[0][0]
    return times, np.concatenate([r[1] for r in results], axis=0)


def concurrence_curve(states: np.ndarray, alpha_sq: float | None = None):
    """Concurrence along one trajectory and the method that produced it.

    Uses the X-state closed form unless the off-X entries exceed tolerance,
    in which case every sample goes through the general construction.
    """
    defect = max_x_defect(states)
    if defect <= X_TOL:
        c = x_concurrence_series(states)
        method = "xform"
    else:
        log.warning("X structure broken (defect %.3e) at alpha_sq=%s; using general concurrence", defect, alpha_sq)
        c = np.array([concurrence_general_unclamped(s) for s in states])
        method = "general"
    over = float(np.max(c)) if c.size else 0.0
    if over > 1 + RANGE_TOL:
        log.warning("concurrence %.6g exceeds 1 at alpha_sq=%s (trace drift); clipped", over, alpha_sq)
    return np.clip(c, 0.0, 1.0), method


def concurrence_general_unclamped(rho) -> float:
    s = spin_flip_roots(rho)
    return max(0.0, float(s[0] - s[1] - s[2] - s[3]))


def run(cfg: RunConfig, workers: int | None = None) -> ConcurrenceSurface:
    cfg.validate()
    alpha_sqs = cfg.alpha_sq_values()
    times, states = evolve_states(cfg, workers)
    traces, defects, mins = batch_diagnostics(states)
    if cfg.renormalize_trace:
        states = states / np.real(traces)[..., None, None]
    rows, methods = [], []
    for a, s in zip(alpha_sqs, states):
        c, m = concurrence_curve(s, a)
        rows.append(c)
        methods.append(m)
    surface = ConcurrenceSurface(
        alpha_sq_values=alpha_sqs,
        time_values=times,
        concurrence=np.array(rows),
        traces=traces,
        min_eigenvalues=mins,
        hermiticity_defects=defects,
        methods=methods,
    )
    surface.summary = diagnostics_summary(surface, cfg)
    return surface


def diagnostics_summary(surface: ConcurrenceSurface, cfg: RunConfig) -> dict:
    drift = np.abs(surface.traces - 1)
    out = {
        "max_trace_drift": float(np.max(drift)),
        "final_trace_min": float(np.min(np.real(surface.traces[:, -1]))),
        "final_trace_max": float(np.max(np.real(surface.traces[:, -1]))),
        "min_eigenvalue": float(np.min(surface.min_eigenvalues)),
        "max_hermiticity_defect": float(np.max(surface.hermiticity_defects)),
        "concurrence_min": float(np.min(surface.concurrence)),
        "concurrence_max": float(np.max(surface.concurrence)),
        "concurrence_methods": sorted(set(surface.methods)),
        "trace_renormalized": cfg.renormalize_trace,
    }
    a = surface.alpha_sq_values
    if len(a) > 1 and np.allclose(a, 1 - a[::-1], atol=1e-12):
        out["alpha_sq_asymmetry"] = surface.asymmetry()
    return out


def surface_events(surface: ConcurrenceSurface, threshold: float = 1e-4, hold_window: float = 0.5) -> list:
    return [detect_events(surface.time_values, row, threshold, hold_window) for row in surface.concurrence]


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def fmt(x: float) -> str:
    return "%.17g" % x


CSV_COLUMNS = ("alpha_sq", "lambda_t", "concurrence", "trace_re", "trace_drift", "min_eigenvalue")


def output_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".csv", ".json"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".csv"), p.with_name(p.name + ".json")


def write_csv(surface: ConcurrenceSurface, path, time_axis_scale: float = 1.0) -> Path:
    """Long-format CSV, one row per (alpha_sq, time) sample.

    ``trace_drift`` is the signed real part of ``Tr rho - 1``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scaled_t = surface.time_values * time_axis_scale
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, a in enumerate(surface.alpha_sq_values):
            tr = np.real(surface.traces[i])
            for j, t in enumerate(scaled_t):
                w.writerow(
                    [fmt(a), fmt(t), fmt(surface.concurrence[i, j]), fmt(tr[j]), fmt(tr[j] - 1.0), fmt(surface.min_eigenvalues[i, j])]
                )
    return path


def read_csv(path) -> dict:
    """Parse a CSV written by :func:`write_csv` into ``{alpha_sq: (t, C)}``."""
    rows: dict[float, tuple[list, list]] = {}
    with open(path, newline="", encoding="ascii") as fh:
        for rec in csv.DictReader(fh):
            ts, cs = rows.setdefault(float(rec["alpha_sq"]), ([], []))
            ts.append(float(rec["lambda_t"]))
            cs.append(float(rec["concurrence"]))
    return {a: (np.array(t), np.array(c)) for a, (t, c) in rows.items()}


def emit(surface: ConcurrenceSurface, reports: Sequence[EventReport], path, cfg: RunConfig, extra: dict | None = None):
    """Write ``<path>.csv`` and ``<path>.json``; return both paths."""
    csv_path, json_path = output_paths(path)
    write_csv(surface, csv_path, cfg.time_axis_scale)
    summary = {
        "version": version_string(),
        "config": cfg.to_dict(),
        "gamma_over_lambda": cfg.gamma_over_lambda,
        "resonant": cfg.params.delta_small == 0,
        "time_axis_scale": cfg.time_axis_scale,
        "diagnostics": surface.summary,
        "trace_drift_report": {
            "max_abs_trace_drift": surface.summary.get("max_trace_drift"),
            "per_alpha_sq_max_abs_drift": [float(x) for x in np.max(np.abs(surface.traces - 1), axis=1)],
            "renormalized": cfg.renormalize_trace,
        },
        "events": [
            {"alpha_sq": float(a), **r.to_dict()} for a, r in zip(surface.alpha_sq_values, reports)
        ],
    }
    if extra:
        summary.update(extra)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return csv_path, json_path


def load_summary_config(json_path) -> RunConfig:
    data = json.loads(Path(json_path).read_text(encoding="utf-8"))
    return RunConfig.from_dict(data["config"])
