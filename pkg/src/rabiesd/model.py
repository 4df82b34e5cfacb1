"""Generators for two identical atoms coupled to one cavity mode.

Holds the reduced atomic master equation with its time-dependent
coefficients, the full atom-cavity Hamiltonian used by the oracle, and the
initial Bell-type states.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    IDENTITY2,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    DensityMatrix,
    basis_ket,
    commutator,
    dagger,
    tensor,
)

SERIES_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Physical constants in units where the coupling sets the scale.

    ``lam`` is the atom-field coupling, ``gamma`` the single-atom decay rate.
    """

    omega0: float
    omega: float
    lam: float = 1.0
    gamma: float = 0.1

    def __post_init__(self):
        for name in ("omega0", "omega", "lam", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        # lam == 0 is the decoupled limit used by the analytic decay checks
        if self.lam < 0:
            raise ValueError("coupling lam must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.omega <= 0 or self.omega0 <= 0:
            raise ValueError("frequencies must be positive")

    @classmethod
    def resonant(cls, omega: float, lam: float = 1.0, gamma: float = 0.1) -> "ModelParams":
        return cls(omega0=omega, omega=omega, lam=lam, gamma=gamma)

    @property
    def delta_big(self) -> float:
        """Sum frequency omega + omega0."""
        return self.omega + self.omega0

    @property
    def delta_small(self) -> float:
        """Detuning omega0 - omega."""
        return self.omega0 - self.omega


class Family(str, enum.Enum):
    PHI = "phi"
    PSI = "psi"


@dataclass(frozen=True)
class InitialState:
    """``Phi``: alpha|eg> + beta|ge>; ``Psi``: alpha|gg> + beta|ee>.

    ``alpha`` is real in [0, 1] and ``beta = sqrt(1 - alpha**2) e^{i beta_phase}``.
    """

    family: Family
    alpha: float
    beta_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def from_alpha_sq(cls, family, alpha_sq: float, beta_phase: float = 0.0) -> "InitialState":
        if not 0.0 <= alpha_sq <= 1.0:
            raise ValueError(f"alpha_sq must lie in [0, 1], got {alpha_sq}")
        return cls(Family(family), math.sqrt(alpha_sq), beta_phase)

    @property
    def beta(self) -> complex:
        mod = math.sqrt(max(0.0, 1.0 - self.alpha**2))
        return mod * cmath.exp(1j * self.beta_phase)

    def ket(self) -> np.ndarray:
        if self.family is Family.PHI:
            first, second = basis_ket("eg"), basis_ket("ge")
        else:
            first, second = basis_ket("gg"), basis_ket("ee")
        return self.alpha * first + self.beta * second


def initial_density(state: InitialState) -> DensityMatrix:
    return DensityMatrix.from_ket(state.ket(), label=f"{state.family.value}(alpha={state.alpha:g})")


class AtomicOperators(NamedTuple):
    sz1: np.ndarray
    sz2: np.ndarray
    sp1: np.ndarray
    sm1: np.ndarray
    sp2: np.ndarray
    sm2: np.ndarray
    collective: np.ndarray


def atomic_operators() -> AtomicOperators:
    """Single-atom operators on the 4-dim two-atom space.

    ``collective`` is the sum of all raising and lowering operators.
    """
    sp1 = tensor(SIGMA_PLUS, IDENTITY2)
    sm1 = tensor(SIGMA_MINUS, IDENTITY2)
    sp2 = tensor(IDENTITY2, SIGMA_PLUS)
    sm2 = tensor(IDENTITY2, SIGMA_MINUS)
    return AtomicOperators(
        sz1=tensor(SIGMA_Z, IDENTITY2),
        sz2=tensor(IDENTITY2, SIGMA_Z),
        sp1=sp1,
        sm1=sm1,
        sp2=sp2,
        sm2=sm2,
        collective=sp1 + sm1 + sp2 + sm2,
    )


def _expm1_i(x: float) -> complex:
    """exp(i x) - 1 without cancellation for small ``x``."""
    s = math.sin(0.5 * x)
    return complex(-2.0 * s * s, math.sin(x))


def coeff_alpha(t: float, delta_big: float) -> complex:
    """(1 - exp(-i D t)) / (i D), the counter-rotating memory coefficient."""
    x = delta_big * t
    if abs(x) < SERIES_THRESHOLD:
        return complex(t, -0.5 * delta_big * t * t)
    return -_expm1_i(-x) / (1j * delta_big)


def coeff_f(t: float, delta_small: float) -> complex:
    """(exp(i d t) - 1) / (i d); tends to ``t`` on resonance."""
    x = delta_small * t
    if abs(x) < SERIES_THRESHOLD:
        return complex(t, 0.5 * delta_small * t * t)
    return _expm1_i(x) / (1j * delta_small)


def lindblad_decay(rho, gamma: float, ops: AtomicOperators | None = None) -> np.ndarray:
    """Independent spontaneous emission of both atoms at rate ``gamma``."""
    ops = ops or atomic_operators()
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for sm, sp in ((ops.sm1, ops.sp1), (ops.sm2, ops.sp2)):
        n = sp @ sm
        out += 2 * sm @ rho @ sp - n @ rho - rho @ n
    return 0.5 * gamma * out


def reduced_rhs(rho, t: float, params: ModelParams) -> np.ndarray:
    """Time derivative of the two-atom density matrix.

    Term order and operator placement follow the reduced non-perturbative
    master equation literally: the collective operator multiplies the
    commutator from the left in the alpha and f terms and from the right in
    their conjugate partners. The result is not trace preserving for
    ``lam > 0``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (4, 4):
        raise ValueError(f"reduced dynamics needs a 4x4 matrix, got {rho.shape}")
    ops = atomic_operators()
    sz = ops.sz1 + ops.sz2
    s_plus = ops.sp1 + ops.sp2
    s_minus = ops.sm1 + ops.sm2
    sigma = ops.collective
    lam2 = params.lam**2
    a = coeff_alpha(t, params.delta_big)
    f = coeff_f(t, params.delta_small)

    out = -0.5j * params.omega0 * commutator(sz, rho)
    out = out - a * lam2 * (sigma @ commutator(s_plus, rho))
    out = out - f * lam2 * (sigma @ commutator(s_minus, rho))
    out = out + a.conjugate() * lam2 * (commutator(s_minus, rho) @ sigma)
    out = out + f.conjugate() * lam2 * (commutator(s_plus, rho) @ sigma)
    return out + lindblad_decay(rho, params.gamma, ops)


def _left(a: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A X) = (A kron I) vec(X)
    return np.kron(a, np.eye(a.shape[0]))


def _right(b: np.ndarray) -> np.ndarray:
    # vec(X B) = (I kron B^T) vec(X)
    return np.kron(np.eye(b.shape[0]), b.T)


class ReducedGenerator:
    """Fast, batched evaluation of :func:`reduced_rhs`.

    The generator is linear in rho, so it is stored as a static
    superoperator plus four fixed superoperators weighted by the
    coefficients ``alpha(t)``, ``f(t)`` and their conjugates. Calling the
    instance accepts a stack of shape ``(..., 4, 4)``.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        ops = atomic_operators()
        sz = ops.sz1 + ops.sz2
        s_plus = ops.sp1 + ops.sp2
        s_minus = ops.sm1 + ops.sm2
        sigma = ops.collective

        def comm(x):
            return _left(x) - _right(x)

        static = -0.5j * params.omega0 * comm(sz)
        for sm, sp in ((ops.sm1, ops.sp1), (ops.sm2, ops.sp2)):
            n = sp @ sm
            static = static + 0.5 * params.gamma * (
                2 * _left(sm) @ _right(sp) - _left(n) - _right(n)
            )
        lam2 = params.lam**2
        blocks = [
            static,
            -lam2 * _left(sigma) @ comm(s_plus),
            -lam2 * _left(sigma) @ comm(s_minus),
            lam2 * _right(sigma) @ comm(s_minus),
            lam2 * _right(sigma) @ comm(s_plus),
        ]
        self.blocks = np.stack(blocks)
        self._flat = self.blocks.reshape(5, 256)
        # RK4 evaluates each midpoint twice and reuses the end point as the
        # next start, so remembering the last time halves the rebuilds
        self._cached_t = None
        self._cached_transpose = None

    def coefficients(self, t: float) -> np.ndarray:
        a = coeff_alpha(t, self.params.delta_big)
        f = coeff_f(t, self.params.delta_small)
        return np.array([1.0, a, f, a.conjugate(), f.conjugate()])

    def superoperator(self, t: float) -> np.ndarray:
        return (self.coefficients(t) @ self._flat).reshape(16, 16)

    def __call__(self, rho, t: float) -> np.ndarray:
        if t != self._cached_t:
            self._cached_transpose = self.superoperator(t).T
            self._cached_t = t
        rho = np.asarray(rho)
        return (rho.reshape(-1, 16) @ self._cached_transpose).reshape(rho.shape)


def number_operator(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def full_hamiltonian(params: ModelParams, n_max: int, rotating_wave: bool = False) -> np.ndarray:
    """Two atoms plus one truncated cavity mode, qubit1 (x) qubit2 (x) field.

    By default the interaction keeps both rotating and counter-rotating
    products. ``rotating_wave=True`` drops the counter-rotating ones and
    exists for excitation-conservation checks.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    ops = atomic_operators()
    a = annihilation(n_max)
    ad = dagger(a)
    i_f = np.eye(n_max + 1, dtype=complex)
    i_a = np.eye(4, dtype=complex)
    h = 0.5 * params.omega0 * tensor(ops.sz1 + ops.sz2, i_f)
    h = h + params.omega * tensor(i_a, number_operator(n_max))
    if rotating_wave:
        s_plus = ops.sp1 + ops.sp2
        h_int = tensor(s_plus, a) + tensor(dagger(s_plus), ad)
    else:
        h_int = tensor(ops.collective, a + ad)
    return h + params.lam * h_int


def excitation_number(n_max: int) -> np.ndarray:
    """(sz1 + sz2)/2 + 1 + a^dagger a on the joint space."""
    ops = atomic_operators()
    atoms = 0.5 * (ops.sz1 + ops.sz2) + np.eye(4)
    return tensor(atoms, np.eye(n_max + 1)) + tensor(np.eye(4), number_operator(n_max))
