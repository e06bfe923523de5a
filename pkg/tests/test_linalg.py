import numpy as np
import pytest
import scipy.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spreduce import linalg
from spreduce.errors import NotPositiveDefinite, SingularSylvester, ToleranceViolation

from conftest import random_orthogonal, random_stable


def kron_lyapunov(M, S):
    """Independent oracle: (I kron M^T + M^T kron I) vec(Phi) = -vec(S)."""
    n = M.shape[0]
    K = np.kron(np.eye(n), M.T) + np.kron(M.T, np.eye(n))
    return np.linalg.solve(K, -S.reshape(-1, order="F")).reshape(n, n, order="F")


def lu_det(M):
    lu, piv = spla.lu_factor(M)
    swaps = np.sum(piv != np.arange(len(piv)))
    return (-1) ** swaps * np.prod(np.diag(lu))


class TestEigenvalues:
    def test_rotation(self):
        ev = np.sort_complex(linalg.eigenvalues([[0, 1], [-1, 0]]))
        np.testing.assert_allclose(ev, [-1j, 1j], atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(np.sort(linalg.eigenvalues([[-1, 0], [0, -100]]).real), [-100, -1])

    def test_product_matches_lu_determinant(self, rng):
        M = rng.standard_normal((8, 8))
        prod = np.prod(linalg.eigenvalues(M))
        det = lu_det(M)
        assert abs(prod.imag) <= 1e-8 * abs(det)
        assert prod.real == pytest.approx(det, rel=1e-8)

    def test_conjugate_pairs(self, rng):
        M = rng.standard_normal((9, 9))
        ev = linalg.eigenvalues(M)
        assert len(ev) == 9
        assert abs(np.sum(ev.imag)) <= 1e-10 * np.max(np.abs(ev))

    def test_similarity_invariance(self, rng):
        M = rng.standard_normal((7, 7))
        U = random_orthogonal(rng, 7)
        a = np.sort_complex(linalg.eigenvalues(M))
        b = np.sort_complex(linalg.eigenvalues(U.T @ M @ U))
        np.testing.assert_allclose(a, b, atol=1e-8)


class TestHurwitz:
    def test_stable_diagonal(self):
        assert linalg.is_hurwitz([[-1, 0], [0, -2]], margin=0)

    def test_imaginary_pair(self):
        assert not linalg.is_hurwitz([[0, 1], [-1, 0]], margin=0)

    def test_margin_rule(self):
        assert not linalg.is_hurwitz([[-1e-12, 0], [0, -1]], margin=1e-9)

    def test_default_margin_is_relative(self):
        # -1e-3 is far from zero for a unit-scale matrix but not next to a 1e7 eigenvalue
        assert linalg.is_hurwitz([[-1e-3, 0], [0, -1.0]])
        assert not linalg.is_hurwitz([[-1e-3, 0], [0, -1e7]])


class TestLyapunov:
    def test_scalar(self):
        np.testing.assert_allclose(linalg.solve_lyapunov([[-1.0]], [[1.0]]), [[0.5]])

    def test_decoupled(self):
        np.testing.assert_allclose(linalg.solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2)),
                                   np.diag([0.5, 0.25]), atol=1e-15)

    def test_matches_kronecker_oracle(self, rng):
        M = random_stable(rng, 6)
        C = rng.standard_normal((2, 6))
        S = C.T @ C
        Phi = linalg.solve_lyapunov(M, S)
        np.testing.assert_allclose(Phi, kron_lyapunov(M, S), rtol=0, atol=1e-9 * np.abs(Phi).max())

    def test_residual_and_symmetry(self, rng):
        for n in (3, 10, 40):
            M = random_stable(rng, n)
            S = np.eye(n)
            Phi = linalg.solve_lyapunov(M, S)
            res = np.linalg.norm(M.T @ Phi + Phi @ M + S)
            assert res <= 1e-8 * (np.linalg.norm(M) * np.linalg.norm(Phi) + np.linalg.norm(S))
            assert np.linalg.norm(Phi - Phi.T) <= 1e-10 * np.linalg.norm(Phi)
            assert np.min(np.linalg.eigvalsh(Phi)) > 0

    def test_singular_operator(self):
        with pytest.raises(SingularSylvester):
            linalg.solve_lyapunov([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))

    def test_sylvester_solver_matches_scipy(self, rng):
        F = random_stable(rng, 7)
        R = random_stable(rng, 3)
        rhs = rng.standard_normal((7, 3))
        solver = linalg.SylvesterSolver(F)
        X = solver.solve(R, rhs, transpose=True)
        np.testing.assert_allclose(F.T @ X + X @ R, rhs, atol=1e-10)
        Y = solver.solve(R, rhs, transpose=False)
        np.testing.assert_allclose(F @ Y + Y @ R.T, rhs, atol=1e-10)


class TestCholesky:
    def test_scalar(self):
        np.testing.assert_allclose(linalg.cholesky([[4.0]]), [[2.0]])

    def test_closed_form_2x2(self):
        L = linalg.cholesky([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(L, [[np.sqrt(2), 0], [1 / np.sqrt(2), np.sqrt(1.5)]], atol=1e-15)

    def test_round_trip_on_gramian(self, rng):
        M = random_stable(rng, 6)
        C = rng.standard_normal((6, 6))
        Phi = linalg.solve_lyapunov(M, C.T @ C)
        L = linalg.cholesky(Phi)
        assert np.allclose(L, np.tril(L))
        assert np.all(np.diag(L) > 0)
        assert np.linalg.norm(L @ L.T - Phi) <= 1e-10 * np.linalg.norm(Phi)

    def test_hurwitz_chain(self, rng):
        # any Hurwitz M gives X > 0 from M^T X + X M + I = 0
        for n in (2, 5, 12):
            X = linalg.solve_lyapunov(random_stable(rng, n), np.eye(n))
            linalg.cholesky(X)

    def test_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.cholesky([[1.0, 2.0], [2.0, 1.0]])

    def test_asymmetric(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.cholesky([[2.0, 1.0], [0.0, 2.0]])


class TestOrthonormalBasis:
    def test_drops_zero_row(self):
        np.testing.assert_allclose(linalg.orthonormal_basis([[2, 0], [0, 0]]), [[1, 0]])

    def test_rank_one(self):
        np.testing.assert_allclose(linalg.orthonormal_basis([[1, 1], [2, 2]]),
                                   [[1 / np.sqrt(2), 1 / np.sqrt(2)]])

    def test_zero_matrix(self):
        assert linalg.orthonormal_basis(np.zeros((3, 4))).shape == (0, 4)

    def test_random_full_rank(self, rng):
        M = rng.standard_normal((2, 10))
        G = linalg.orthonormal_basis(M)
        assert G.shape == (2, 10)
        assert np.max(np.abs(G @ G.T - np.eye(2))) <= 1e-12
        assert np.max(np.abs(M - (M @ G.T) @ G)) <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 8)),
                  elements=st.floats(-1e3, 1e3, allow_nan=False, width=64)))
    def test_rows_always_orthonormal(self, M):
        G = linalg.orthonormal_basis(M)
        assert G.shape[0] <= min(M.shape)
        if G.shape[0]:
            assert np.max(np.abs(G @ G.T - np.eye(G.shape[0]))) <= 1e-12


class TestOrthonormalComplement:
    def test_first_axis(self):
        V = linalg.orthonormal_complement(np.array([[1.0, 0, 0]]), 3)
        assert V.shape == (2, 3)
        np.testing.assert_allclose(V[:, 0], 0, atol=1e-15)
        np.testing.assert_allclose(V @ V.T, np.eye(2), atol=1e-12)

    def test_empty(self):
        V = linalg.orthonormal_complement(np.zeros((0, 2)), 2)
        np.testing.assert_allclose(V @ V.T, np.eye(2))

    def test_completes_orthogonal_matrix(self, rng):
        G = random_orthogonal(rng, 5)[:2]
        V = linalg.orthonormal_complement(G, 5)
        U = np.vstack([G, V])
        assert np.max(np.abs(U @ U.T - np.eye(5))) <= 1e-10
        assert np.max(np.abs(V @ G.T)) <= 1e-10

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ToleranceViolation):
            linalg.orthonormal_complement(np.array([[1.0, 1.0, 0.0]]), 3)

    def test_smallest_subnormal_rows(self):
        G = linalg.orthonormal_basis(np.full((3, 2), 5e-324))
        np.testing.assert_allclose(G, [[1 / np.sqrt(2), 1 / np.sqrt(2)]])
