"""Dense complex-matrix primitives and the fixed two-qubit basis.

Every matrix in the package is a plain ``numpy.ndarray`` of dtype
``complex128``. The two-qubit product basis is ordered
``{|ee>, |eg>, |ge>, |gg>}`` with the excited state first in each
single-qubit factor, and joint atom+field spaces are ordered
``qubit1 (x) qubit2 (x) field`` so the photon number is the fastest index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

BASIS_LABELS = ("ee", "eg", "ge", "gg")
EXCITED = np.array([1.0, 0.0], dtype=complex)
GROUND = np.array([0.0, 1.0], dtype=complex)

# single-qubit operators in the (|e>, |g>) ordering
IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.T.copy()

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def basis_index(label: str) -> int:
    """Zero-based index of a two-qubit basis label such as ``"eg"``."""
    return BASIS_LABELS.index(label)


def basis_ket(label: str) -> np.ndarray:
    ket = np.zeros(4, dtype=complex)
    ket[basis_index(label)] = 1.0
    return ket


def joint_index(qubit_index: int, n: int, n_max: int) -> int:
    """Index of ``|qubits> (x) |n>`` in the joint space with cutoff ``n_max``."""
    return qubit_index * (n_max + 1) + n


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def tensor(*ops) -> np.ndarray:
    """Kronecker product of the operands, left factor outermost."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def dagger(a) -> np.ndarray:
    return np.conj(np.swapaxes(np.asarray(a), -1, -2))


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def partial_trace(joint, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor of ``joint`` not listed in ``keep``.

    Parameters
    ----------
    joint : array_like
        Square matrix on the product space ``dims[0] (x) dims[1] (x) ...``.
    dims : sequence of int
        Factor dimensions, outermost first.
    keep : int or iterable of int
        Factor indices to keep, in any order; the result is ordered as in
        ``dims``.

    Returns
    -------
    numpy.ndarray
        The reduced matrix on the kept factors.
    """
    rho = np.asarray(joint, dtype=complex)
    dims = [int(d) for d in dims]
    if isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one factor")
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep={keep} out of range for {len(dims)} factors")
    total = int(np.prod(dims))
    if rho.ndim != 2 or rho.shape != (total, total):
        raise ValueError(f"dims {dims} inconsistent with matrix shape {rho.shape}")

    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    t = rho.reshape(dims + dims)
    # contract row/column index pairs from the highest axis down so the
    # remaining axis numbers stay valid
    for count, i in enumerate(sorted(traced, reverse=True)):
        remaining = n - count
        t = np.trace(t, axis1=i, axis2=i + remaining)
    d_keep = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d_keep, d_keep)


class Diagnostics(NamedTuple):
    trace: complex
    hermiticity_defect: float
    min_eigenvalue: float


def eigenvalues(rho) -> np.ndarray:
    """Ascending eigenvalues of the Hermitian part ``(rho + rho^dagger)/2``."""
    m = np.asarray(rho, dtype=complex)
    return np.linalg.eigvalsh(0.5 * (m + dagger(m)))


def diagnostics(rho) -> Diagnostics:
    m = np.asarray(rho, dtype=complex)
    defect = float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0
    return Diagnostics(
        trace=complex(np.trace(m)),
        hermiticity_defect=defect,
        min_eigenvalue=float(eigenvalues(m)[0]),
    )


def batch_diagnostics(states: np.ndarray):
    """Vectorised diagnostics over a stack of shape ``(k, d, d)``.

    Returns three arrays: traces, hermiticity defects, minimum eigenvalues.
    """
    states = np.asarray(states, dtype=complex)
    traces = np.trace(states, axis1=-2, axis2=-1)
    adj = dagger(states)
    defects = np.max(np.abs(states - adj), axis=(-2, -1))
    mins = np.linalg.eigvalsh(0.5 * (states + adj))[..., 0]
    return traces, defects, mins


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix.

    Construction checks hermiticity, unit trace and positivity against the
    module tolerances. Evolved states that have drifted are carried as raw
    arrays instead; see :class:`rabiesd.integrator.Trajectory`.
    """

    matrix: np.ndarray
    label: str | None = None

    def __post_init__(self):
        m = as_matrix(self.matrix).copy()
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix has non-finite entries")
        d = diagnostics(m)
        if d.hermiticity_defect > HERMITICITY_TOL:
            raise ValueError(f"not Hermitian: defect {d.hermiticity_defect:.3e}")
        if abs(d.trace - 1) > TRACE_TOL:
            raise ValueError(f"trace {d.trace} differs from 1")
        if d.min_eigenvalue < -POSITIVITY_TOL:
            raise ValueError(f"negative eigenvalue {d.min_eigenvalue:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, ket, label: str | None = None) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex).ravel()
        return cls(np.outer(ket, ket.conj()), label)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagnostics(self) -> Diagnostics:
        return diagnostics(self.matrix)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __getitem__(self, idx):
        return self.matrix[idx]
