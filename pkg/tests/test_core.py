import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rabiesd.core import (
    IDENTITY2,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    DensityMatrix,
    basis_ket,
    commutator,
    dagger,
    diagnostics,
    eigenvalues,
    partial_trace,
    tensor,
)

from conftest import random_density

# Gaussian integers keep every product exact, so equality is meaningful
gaussian_int = st.builds(complex, st.integers(-50, 50), st.integers(-50, 50))
complex_2x2 = arrays(np.complex128, (2, 2), elements=gaussian_int)


class TestTensor:
    def test_identity(self):
        assert np.array_equal(tensor(IDENTITY2, IDENTITY2), np.eye(4))

    def test_sigma_z_first_factor_ordering(self):
        assert np.array_equal(np.diag(tensor(SIGMA_Z, IDENTITY2)).real, [1, 1, -1, -1])

    def test_entries(self, rng):
        a = rng.integers(-9, 9, size=(2, 2)) + 1j * rng.integers(-9, 9, size=(2, 2))
        b = rng.integers(-9, 9, size=(2, 2)) + 1j * rng.integers(-9, 9, size=(2, 2))
        ab = tensor(a, b)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    for l in range(2):
                        assert ab[i * 2 + k, j * 2 + l] == a[i, j] * b[k, l]

    @given(complex_2x2, complex_2x2, complex_2x2)
    def test_associative(self, a, b, c):
        assert np.array_equal(tensor(tensor(a, b), c), tensor(a, tensor(b, c)))


class TestDagger:
    def test_identity(self):
        assert np.array_equal(dagger(np.eye(3)), np.eye(3))

    def test_involution(self, rng):
        a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        assert np.array_equal(dagger(dagger(a)), a)

    def test_lowering_to_raising(self):
        assert np.array_equal(dagger(SIGMA_MINUS), SIGMA_PLUS)


class TestCommutator:
    def test_self(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert np.allclose(commutator(a, a), 0, atol=1e-14)

    def test_pauli(self):
        assert np.array_equal(commutator(SIGMA_PLUS, SIGMA_MINUS), SIGMA_Z)

    def test_identity(self, rng):
        a = rng.normal(size=(3, 3))
        assert np.allclose(commutator(np.eye(3), a), 0)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            commutator(np.eye(2), np.eye(3))

    def test_traceless(self, rng):
        for _ in range(20):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            rho = random_density(rng, 4)
            assert abs(np.trace(commutator(a, rho))) < 1e-12


class TestPartialTrace:
    def test_product_state(self, rng):
        ra = random_density(rng, 4)
        rb = random_density(rng, 5)
        assert np.allclose(partial_trace(tensor(ra, rb), [4, 5], keep={0}), ra, atol=1e-12)
        assert np.allclose(partial_trace(tensor(ra, rb), [4, 5], keep=1), rb, atol=1e-12)

    def test_bell_times_vacuum(self):
        ket = (basis_ket("eg") + basis_ket("ge")) / np.sqrt(2)
        vac = np.zeros((3, 3))
        vac[0, 0] = 1
        reduced = partial_trace(tensor(np.outer(ket, ket.conj()), vac), [4, 3], keep=[0])
        expected = np.zeros((4, 4))
        expected[1, 1] = expected[2, 2] = expected[1, 2] = expected[2, 1] = 0.5
        assert np.allclose(reduced, expected, atol=1e-15)

    def test_trace_preserved(self, rng):
        for _ in range(100):
            joint = random_density(rng, 12)
            assert abs(np.trace(partial_trace(joint, [4, 3], keep=[0])) - np.trace(joint)) < 1e-12

    def test_three_factors_against_einsum(self, rng):
        joint = random_density(rng, 2 * 3 * 2)
        t = joint.reshape(2, 3, 2, 2, 3, 2)
        assert np.allclose(partial_trace(joint, [2, 3, 2], keep=[0, 2]), np.einsum("ajbcjd->abcd", t).reshape(4, 4))
        assert np.allclose(partial_trace(joint, [2, 3, 2], keep=[1]), np.einsum("ajbakb->jk", t))

    def test_inconsistent_dims(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(6), [4, 2], keep=[0])
        with pytest.raises(ValueError):
            partial_trace(np.eye(8), [4, 2], keep=[])


class TestDiagnostics:
    def test_maximally_mixed(self):
        d = diagnostics(np.eye(4) / 4)
        assert d.trace == pytest.approx(1)
        assert d.hermiticity_defect == 0
        assert d.min_eigenvalue == pytest.approx(0.25)

    def test_bell(self):
        ket = (basis_ket("ee") + basis_ket("gg")) / np.sqrt(2)
        d = diagnostics(np.outer(ket, ket))
        assert abs(d.trace - 1) < 1e-12
        assert d.hermiticity_defect < 1e-12
        assert abs(d.min_eigenvalue) < 1e-12

    def test_scaled(self):
        d = diagnostics(0.5 * np.eye(4) / 4)
        assert d.trace == pytest.approx(0.5)
        assert d.min_eigenvalue == pytest.approx(0.125)

    def test_eigenvalues_sorted_and_sum_to_trace(self, rng):
        for _ in range(20):
            rho = random_density(rng, 6)
            w = eigenvalues(rho)
            assert np.all(np.diff(w) >= 0)
            assert abs(w.sum() - np.trace(rho).real) < 1e-10


class TestDensityMatrix:
    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(4) / 2)

    def test_rejects_non_hermitian(self):
        m = np.eye(2) / 2 + 0j
        m[0, 1] = 0.1
        with pytest.raises(ValueError):
            DensityMatrix(m)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_immutable(self):
        rho = DensityMatrix(np.eye(4) / 4)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1
