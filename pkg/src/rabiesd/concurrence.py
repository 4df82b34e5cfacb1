"""Wootters concurrence for two qubits."""
from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from .core import SIGMA_Y, as_matrix, dagger, tensor

YY = tensor(SIGMA_Y, SIGMA_Y)
NEGATIVE_TOL = 1e-6
RANGE_TOL = 1e-9
X_TOL = 1e-8

# (row, col) pairs outside the X pattern, upper triangle, zero-based
OFF_X = ((0, 1), (0, 2), (1, 3), (2, 3))


class Method(str, enum.Enum):
    GENERAL = "general"
    XFORM = "xform"


class ConcurrenceValue(NamedTuple):
    value: float
    method: Method

    def __float__(self):
        return self.value


class XStructureError(ValueError):
    def __init__(self, index: tuple[int, int], magnitude: float):
        self.index = index
        self.magnitude = magnitude
        super().__init__(
            f"not an X state: |rho[{index[0]},{index[1]}]| = {magnitude:.3e} (zero-based)"
        )


def _clamp(value: float) -> float:
    if value > 1 + RANGE_TOL:
        raise ValueError(f"concurrence {value} exceeds 1")
    return min(max(value, 0.0), 1.0)


def _check_dim(rho) -> np.ndarray:
    m = as_matrix(rho)
    if m.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 matrix, got {m.shape}")
    return m


def spin_flip_roots(rho) -> np.ndarray:
    """Square roots of the eigenvalues of rho (YY) rho* (YY), descending.

    Computed as the singular values of sqrt(rho) YY sqrt(rho)* YY, whose
    squares are those eigenvalues. This avoids the square root of
    eigensolver noise near zero.
    """
    m = _check_dim(rho)
    m = 0.5 * (m + dagger(m))
    w, v = np.linalg.eigh(m)
    if w[0] < -NEGATIVE_TOL:
        raise ValueError(f"input has eigenvalue {w[0]:.3e}; not a valid state")
    sqrt_rho = (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)
    return np.linalg.svd(sqrt_rho @ YY @ sqrt_rho.conj() @ YY, compute_uv=False)


def concurrence_general(rho) -> ConcurrenceValue:
    s = spin_flip_roots(rho)
    return ConcurrenceValue(_clamp(float(s[0] - s[1] - s[2] - s[3])), Method.GENERAL)


def x_defect(rho) -> tuple[tuple[int, int], float]:
    """Largest off-X entry magnitude and its index (checks both triangles)."""
    m = np.asarray(rho)
    worst, where = -1.0, OFF_X[0]
    for i, j in OFF_X:
        for idx in ((i, j), (j, i)):
            mag = abs(m[idx])
            if mag > worst:
                worst, where = mag, idx
    return where, float(worst)


def concurrence_x(rho, x_tol: float = X_TOL) -> ConcurrenceValue:
    """Closed form for X states, taking the larger of the two branches."""
    m = _check_dim(rho)
    where, mag = x_defect(m)
    if mag > x_tol:
        raise XStructureError(where, mag)
    p = np.real(np.diag(m))
    pops = np.clip(p, 0.0, None)
    c_phi = 2 * abs(m[1, 2]) - 2 * np.sqrt(pops[0] * pops[3])
    c_psi = 2 * abs(m[0, 3]) - 2 * np.sqrt(pops[1] * pops[2])
    return ConcurrenceValue(_clamp(float(max(0.0, c_phi, c_psi))), Method.XFORM)


def x_concurrence_series(states: np.ndarray) -> np.ndarray:
    """:func:`concurrence_x` over a stack ``(..., 4, 4)`` without the X check."""
    s = np.asarray(states)
    pops = np.clip(np.real(np.diagonal(s, axis1=-2, axis2=-1)), 0.0, None)
    c_phi = 2 * np.abs(s[..., 1, 2]) - 2 * np.sqrt(pops[..., 0] * pops[..., 3])
    c_psi = 2 * np.abs(s[..., 0, 3]) - 2 * np.sqrt(pops[..., 1] * pops[..., 2])
    return np.clip(np.maximum(c_phi, c_psi), 0.0, None)


def max_x_defect(states: np.ndarray) -> float:
    s = np.asarray(states)
    idx = [i for i, _ in OFF_X] + [j for _, j in OFF_X]
    jdx = [j for _, j in OFF_X] + [i for i, _ in OFF_X]
    return float(np.max(np.abs(s[..., idx, jdx]))) if s.size else 0.0
