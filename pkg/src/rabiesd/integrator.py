"""Fixed-step classical Runge-Kutta propagation of density matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import batch_diagnostics

MAX_STEPS = 10**8

Rhs = Callable[[np.ndarray, float], np.ndarray]


class NumericalAbort(RuntimeError):
    """Raised when the propagated state stops being finite."""

    def __init__(self, time: float, state=None):
        self.time = time
        self.state = state
        super().__init__(f"non-finite state encountered at t={time:.6g}")


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if (self.t_end - self.t_start) / self.dt > MAX_STEPS:
            raise ValueError("too many steps")

    @property
    def n_steps(self) -> int:
        # a span that is not a whole number of steps is covered by one extra,
        # slightly shortened uniform step size
        return max(1, math.ceil((self.t_end - self.t_start) / self.dt - 1e-9))

    @property
    def step(self) -> float:
        """Uniform step actually taken."""
        return (self.t_end - self.t_start) / self.n_steps

    def halved(self) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.step / 2)


@dataclass
class Trajectory:
    """Sampled solution. ``states`` has shape ``(n_samples, ..., d, d)``;
    the diagnostic arrays share its leading (and any batch) axes."""

    times: np.ndarray
    states: np.ndarray
    traces: np.ndarray
    hermiticity_defects: np.ndarray
    min_eigenvalues: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def max_trace_drift(self) -> float:
        return float(np.max(np.abs(self.traces - 1)))

    def map_states(self, fn) -> "Trajectory":
        """New trajectory with ``fn`` applied to the state stack."""
        states = fn(self.states)
        traces, defects, mins = batch_diagnostics(states)
        return Trajectory(self.times, states, traces, defects, mins)


def integrate(rhs: Rhs, rho0, grid: TimeGrid, sample_every: int = 10) -> Trajectory:
    """Propagate ``rho0`` with RK4 over ``grid``.

    Snapshots are taken at ``t_start``, every ``sample_every`` steps, and at
    ``t_end``. The state is never symmetrised or renormalised; diagnostics
    work on copies.

    Raises
    ------
    NumericalAbort
        If a sampled state contains NaN or Inf.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be a positive integer")
    y = np.array(rho0, dtype=complex)
    n = grid.n_steps
    h = grid.step
    t0 = grid.t_start

    sample_steps = list(range(0, n + 1, sample_every))
    if sample_steps[-1] != n:
        sample_steps.append(n)
    states = np.empty((len(sample_steps),) + y.shape, dtype=complex)
    states[0] = y
    k = 1
    # overflow surfaces as the NumericalAbort below, so numpy's warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            t = t0 + i * h
            k1 = rhs(y, t)
            k2 = rhs(y + 0.5 * h * k1, t + 0.5 * h)
            k3 = rhs(y + 0.5 * h * k2, t + 0.5 * h)
            k4 = rhs(y + h * k3, t + h)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if i + 1 == sample_steps[k]:
                if not np.all(np.isfinite(y)):
                    raise NumericalAbort(t0 + (i + 1) * h, y)
                states[k] = y
                k += 1

    times = t0 + h * np.asarray(sample_steps, dtype=float)
    traces, defects, mins = batch_diagnostics(states)
    return Trajectory(times, states, traces, defects, mins)


class ConvergenceResult(NamedTuple):
    value_dt: np.ndarray
    value_dt_half: np.ndarray
    delta: float


def convergence_check(rhs: Rhs, rho0, grid: TimeGrid, observable, sample_every: int = 10) -> ConvergenceResult:
    """Compare an observable between step ``dt`` and ``dt/2`` runs.

    ``observable`` maps one state to a real number. The comparison uses the
    sample times common to both runs.
    """
    coarse = integrate(rhs, rho0, grid, sample_every)
    fine = integrate(rhs, rho0, grid.halved(), 2 * sample_every)
    if not np.allclose(coarse.times, fine.times, rtol=0, atol=1e-9 * max(1.0, abs(grid.t_end))):
        raise AssertionError("sample times of the two runs do not line up")
    a = np.array([observable(s) for s in coarse.states], dtype=float)
    b = np.array([observable(s) for s in fine.states], dtype=float)
    return ConvergenceResult(a, b, float(np.max(np.abs(a - b))))
