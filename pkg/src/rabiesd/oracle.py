"""Brute-force reference dynamics on the full atoms + cavity space.

The joint state evolves under the complete Hamiltonian with both atoms
decaying through a standard Lindblad dissipator; the cavity starts in
vacuum and is traced out afterwards.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .concurrence import x_concurrence_series
from .core import dagger, partial_trace, tensor
from .integrator import TimeGrid, Trajectory, integrate
from .model import (
    InitialState,
    ModelParams,
    atomic_operators,
    full_hamiltonian,
    initial_density,
)

log = logging.getLogger(__name__)

DEFAULT_N_MAX = 8
# below this joint dimension one dense superoperator matvec beats the
# handful of small matrix products the direct form needs
SUPEROPERATOR_MAX_DIM = 8


@dataclass(frozen=True)
class OracleConfig:
    params: ModelParams
    grid: TimeGrid
    n_max: int = DEFAULT_N_MAX
    sample_every: int = 10
    rotating_wave: bool = False

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")


class JointGenerator:
    """Lindblad right-hand side on the joint space.

    Written with the non-Hermitian effective Hamiltonian
    ``H - i (gamma/2) sum_i sigma_i^+ sigma_i^-`` plus the jump terms.
    """

    def __init__(self, params: ModelParams, n_max: int, rotating_wave: bool = False):
        self.hamiltonian = full_hamiltonian(params, n_max, rotating_wave)
        ops = atomic_operators()
        i_f = np.eye(n_max + 1)
        self.jumps = [tensor(ops.sm1, i_f), tensor(ops.sm2, i_f)]
        decay = sum(dagger(j) @ j for j in self.jumps)
        self.gamma = params.gamma
        self.h_eff = self.hamiltonian - 0.5j * params.gamma * decay
        self._h_eff_dag = dagger(self.h_eff)
        self._jumps_dag = [dagger(j) for j in self.jumps]
        self.dim = self.h_eff.shape[0]
        self._superop = self.superoperator() if self.dim <= SUPEROPERATOR_MAX_DIM else None

    def superoperator(self) -> np.ndarray:
        """Matrix acting on row-major ``vec(rho)``, using vec(A X B) = (A kron B^T) vec(X)."""
        eye = np.eye(self.dim)
        sup = -1j * (np.kron(self.h_eff, eye) - np.kron(eye, self._h_eff_dag.T))
        for j, jd in zip(self.jumps, self._jumps_dag):
            sup = sup + self.gamma * np.kron(j, jd.T)
        return sup

    def __call__(self, rho, t: float) -> np.ndarray:
        if self._superop is not None:
            return (self._superop @ rho.reshape(-1)).reshape(rho.shape)
        out = -1j * (self.h_eff @ rho - rho @ self._h_eff_dag)
        if self.gamma:
            for j, jd in zip(self.jumps, self._jumps_dag):
                out += self.gamma * (j @ rho @ jd)
        return out


def joint_initial(state: InitialState, n_max: int) -> np.ndarray:
    vacuum = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    vacuum[0, 0] = 1.0
    return tensor(initial_density(state).matrix, vacuum)


def trace_out_field(states: np.ndarray, n_max: int) -> np.ndarray:
    """Reduce a ``(k, 4(n+1), 4(n+1))`` stack to ``(k, 4, 4)``."""
    return np.stack([partial_trace(s, [4, n_max + 1], keep=0) for s in states])


class OracleResult(NamedTuple):
    reduced: Trajectory
    joint: Trajectory


def oracle_evolve_joint(state: InitialState, cfg: OracleConfig) -> OracleResult:
    rhs = JointGenerator(cfg.params, cfg.n_max, cfg.rotating_wave)
    joint = integrate(rhs, joint_initial(state, cfg.n_max), cfg.grid, cfg.sample_every)
    reduced = joint.map_states(lambda s: trace_out_field(s, cfg.n_max))
    return OracleResult(reduced, joint)


def oracle_evolve(state: InitialState, cfg: OracleConfig) -> Trajectory:
    """Reduced two-atom trajectory of the exact model."""
    return oracle_evolve_joint(state, cfg).reduced


def top_fock_population(joint_states: np.ndarray, n_max: int) -> float:
    """Largest population of the highest retained photon number.

    A truncation warning sign that concurrence alone can miss when the
    entanglement dies before the field has spread over many photons.
    """
    pops = [np.real(partial_trace(s, [4, n_max + 1], keep=1)[n_max, n_max]) for s in joint_states]
    return float(max(pops))


class ConvergenceReport(NamedTuple):
    n_max_used: int
    max_concurrence_shift: float
    converged: bool


def oracle_converged(state: InitialState, cfg: OracleConfig, tol: float = 1e-4) -> ConvergenceReport:
    """Compare concurrence at cutoffs ``n_max`` and ``n_max + 2``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    base = oracle_evolve(state, cfg)
    bigger = oracle_evolve(state, OracleConfig(cfg.params, cfg.grid, cfg.n_max + 2, cfg.sample_every, cfg.rotating_wave))
    shift = float(np.max(np.abs(x_concurrence_series(base.states) - x_concurrence_series(bigger.states))))
    ok = shift <= tol
    if not ok:
        log.warning("Fock cutoff n_max=%d not converged: concurrence shift %.3e > %.3e", cfg.n_max, shift, tol)
    return ConvergenceReport(cfg.n_max, shift, ok)


def find_converged_cutoff(state: InitialState, cfg: OracleConfig, tol: float, n_limit: int = 40) -> ConvergenceReport:
    """Smallest cutoff, stepping by 2 from ``cfg.n_max``, that meets ``tol``."""
    n = cfg.n_max
    report = None
    while n <= n_limit:
        report = oracle_converged(state, OracleConfig(cfg.params, cfg.grid, n, cfg.sample_every, cfg.rotating_wave), tol)
        if report.converged:
            return report
        n += 2
    return report
