import numpy as np
import pytest

from shadowbag.core.errors import BarrierDomainError, HermiticityError
from shadowbag.services.spectral_service import (
    HermitianMatrix,
    decompose,
    eigh,
    inverse_shifted,
    lambda_min,
    trace_log_shifted,
)


def random_hermitian(D: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return 0.5 * (A + A.conj().T)


class TestHermitianMatrix:

    def test_symmetrizes_round_off(self):
        A = random_hermitian(6, 0)
        A[0, 1] += 1e-14
        H = HermitianMatrix(A)
        np.testing.assert_array_equal(H.entries, H.entries.conj().T)

    def test_rejects_skew_input(self):
        with pytest.raises(HermiticityError):
            HermitianMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(HermiticityError):
            HermitianMatrix(np.zeros((2, 3)))


class TestEigh:

    def test_identity(self):
        w, _ = eigh(np.eye(5))
        np.testing.assert_allclose(w, np.ones(5), atol=1e-14)

    def test_diagonal(self):
        w, _ = eigh(np.diag([5.0, -1.0, 2.0]))
        np.testing.assert_allclose(w, [-1.0, 2.0, 5.0], atol=1e-15)

    def test_random_against_independent_solver(self):
        A = random_hermitian(50, 1)
        w, V = eigh(A)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(A), atol=1e-9)
        np.testing.assert_allclose(V.conj().T @ V, np.eye(50), atol=1e-10)
        np.testing.assert_allclose(A @ V, V * w, atol=1e-9)

    def test_lambda_min(self):
        A = random_hermitian(30, 2)
        assert lambda_min(A) == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-10)


class TestBarrierKernel:

    def test_trace_log_identity(self):
        assert trace_log_shifted(np.eye(4), 0.0) == pytest.approx(0.0, abs=1e-14)

    def test_trace_log_closed_form(self):
        A = np.diag([1.0, np.e - 1.0])
        assert trace_log_shifted(A, 1.0) == pytest.approx(np.log(2.0) + 1.0, abs=1e-14)

    def test_trace_log_against_log_determinant(self):
        A = random_hermitian(40, 3)
        eps = 1.0 - np.linalg.eigvalsh(A)[0]
        sign, logdet = np.linalg.slogdet(A + eps * np.eye(40))
        assert sign.real == pytest.approx(1.0)
        assert trace_log_shifted(A, eps) == pytest.approx(logdet, abs=1e-9)

    def test_inverse_identity(self):
        np.testing.assert_allclose(inverse_shifted(np.eye(3), 1.0).entries, 0.5 * np.eye(3), atol=1e-15)

    def test_inverse_diagonal(self):
        d = np.array([0.5, 2.0, 4.0])
        np.testing.assert_allclose(inverse_shifted(np.diag(d), 0.0).entries, np.diag(1.0 / d), atol=1e-14)

    def test_inverse_residual(self):
        A = random_hermitian(200, 4)
        eps = 0.5 - np.linalg.eigvalsh(A)[0]
        X = inverse_shifted(A, eps).entries
        residual = np.linalg.norm((A + eps * np.eye(200)) @ X - np.eye(200))
        assert residual < 1e-8

    def test_infeasible_shift(self):
        spectrum = decompose(np.diag([-2.0, 1.0]))
        assert not spectrum.is_feasible(1.5)
        assert spectrum.is_feasible(2.5)
        with pytest.raises(BarrierDomainError) as excinfo:
            spectrum.trace_log_shifted(1.5)
        assert excinfo.value.lambda_min == pytest.approx(-2.0)
        with pytest.raises(BarrierDomainError):
            inverse_shifted(np.diag([-2.0, 1.0]), 2.0)
