"""Dense real linear-algebra kernels.

Everything here works on plain 2-D ``numpy.ndarray`` objects of dtype
``float64``. Eigenvalues are returned as a 1-D complex array.
"""

import numpy as np
import scipy.linalg as spla
from scipy.linalg import lapack

from .errors import (
    NonConvergence,
    NotPositiveDefinite,
    SingularSylvester,
    ToleranceViolation,
)

__all__ = [
    "as_matrix",
    "eigenvalues",
    "spectral_abscissa",
    "default_hurwitz_margin",
    "is_hurwitz",
    "solve_lyapunov",
    "SylvesterSolver",
    "cholesky",
    "orthonormal_basis",
    "orthonormal_complement",
]


def as_matrix(M, name="matrix", *, rows=None, cols=None):
    """Return `M` as a finite 2-D float64 array, checking its shape."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    return arr


def _square(M, name="M"):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def eigenvalues(M):
    """All eigenvalues of a square real matrix (LAPACK ``geev``)."""
    M = _square(M)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        return np.linalg.eigvals(M).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigenvalue iteration failed: {exc}") from exc


def spectral_abscissa(M):
    """Largest real part over the spectrum of `M`."""
    ev = eigenvalues(M)
    return float(np.max(ev.real)) if ev.size else -np.inf


def default_hurwitz_margin(M, spectrum=None):
    ev = eigenvalues(M) if spectrum is None else spectrum
    radius = float(np.max(np.abs(ev))) if ev.size else 0.0
    return 1e-9 * max(1.0, radius)


def is_hurwitz(M, margin=None):
    """True iff every eigenvalue of `M` has real part below ``-margin``.

    The default margin is ``1e-9 * max(1, spectral radius)``.
    """
    ev = eigenvalues(M)
    if ev.size == 0:
        return True
    if margin is None:
        margin = default_hurwitz_margin(M, ev)
    return bool(np.max(ev.real) < -margin)


def _check_sylvester_spectra(left_ev, right_ev):
    if left_ev.size == 0 or right_ev.size == 0:
        return
    sums = np.abs(left_ev[:, None] + right_ev[None, :])
    scale = max(1.0, float(np.max(np.abs(left_ev))), float(np.max(np.abs(right_ev))))
    if np.min(sums) <= 1e-12 * scale:
        raise SingularSylvester(
            "operator spectra have eigenvalue pairs summing to ~0 "
            f"(min |l_i + l_j| = {np.min(sums):.3e})"
        )


def solve_lyapunov(M, S):
    """Solve ``M^T Phi + Phi M + S = 0`` for symmetric `Phi`.

    Bartels-Stewart through the real Schur form of `M`. `M` is expected to be
    Hurwitz; a spectrum with eigenvalue pairs summing to zero raises
    :class:`SingularSylvester`.
    """
    M = _square(M)
    S = as_matrix(S, "S", rows=M.shape[0], cols=M.shape[0])
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    ev = eigenvalues(M)
    _check_sylvester_spectra(ev, ev)
    Phi = spla.solve_continuous_lyapunov(M.T, -S)
    return 0.5 * (Phi + Phi.T)


class SylvesterSolver:
    """Repeated Sylvester solves sharing one fixed operator.

    The real Schur form of the fixed matrix ``F`` is computed once; each call
    then only factors the (usually small) second operator. Two forms are
    supported::

        transpose=True:   F^T X + X R   = rhs
        transpose=False:  F X   + X R^T = rhs
    """

    def __init__(self, F):
        F = _square(F, "F")
        self.F = F
        self._T, self._U = spla.schur(F, output="real")
        self._ev = eigenvalues(F)

    def solve(self, R, rhs, transpose=True):
        R = _square(R, "R")
        n, r = self.F.shape[0], R.shape[0]
        rhs = as_matrix(rhs, "rhs", rows=n, cols=r)
        if n == 0 or r == 0:
            return np.zeros((n, r))
        S, V = spla.schur(R, output="real")
        _check_sylvester_spectra(self._ev, eigenvalues(R))
        U = self._U
        rhs_t = U.T @ rhs @ V
        if transpose:
            Y, scale, info = lapack.dtrsyl(self._T, S, rhs_t, trana="T", tranb="N")
        else:
            Y, scale, info = lapack.dtrsyl(self._T, S, rhs_t, trana="N", tranb="T")
        if info < 0:
            raise ValueError(f"dtrsyl: illegal argument {-info}")
        if info == 1:
            raise SingularSylvester("Sylvester operator is (nearly) singular")
        return U @ (Y / scale) @ V.T


def cholesky(X):
    """Lower-triangular ``L`` with positive diagonal and ``L L^T = X``."""
    X = _square(X, "X")
    if X.shape[0] == 0:
        return np.zeros((0, 0))
    norm = np.linalg.norm(X)
    if np.linalg.norm(X - X.T) > 1e-10 * max(norm, np.finfo(float).tiny):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(0.5 * (X + X.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if np.any(np.diag(L) <= 0):
        raise NotPositiveDefinite("non-positive pivot in Cholesky factor")
    return L


def orthonormal_basis(M, tol=None):
    """Orthonormal basis for the row space of `M`, as the rows of the result.

    Modified Gram-Schmidt with one re-orthogonalization pass. A row is
    dropped when its residual norm falls below `tol`, which defaults to
    ``1e-10`` times the largest row norm of `M`.
    """
    M = as_matrix(M, "M")
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return np.zeros((0, ncols))
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        return np.zeros((0, ncols))
    # work on a unit-scale copy; tiny or huge entries otherwise lose accuracy
    # (the default tolerance is computed after scaling so it cannot underflow)
    M = M / scale
    if tol is None:
        tol = 1e-10 * float(np.max(np.linalg.norm(M, axis=1)))
    else:
        tol = tol / scale
    basis = []
    for row in M:
        v = row.copy()
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > tol and nv > 0.0:
            basis.append(v / nv)
    if not basis:
        return np.zeros((0, ncols))
    return np.array(basis)


def orthonormal_complement(G, n):
    """Rows spanning the orthogonal complement of the row space of `G`.

    `G` must have orthonormal rows (``G G^T = I`` within 1e-10).
    """
    G = np.asarray(G, dtype=float)
    if G.size == 0:
        return np.eye(n)
    G = as_matrix(G, "G", cols=n)
    k = G.shape[0]
    if np.max(np.abs(G @ G.T - np.eye(k))) > 1e-10:
        raise ToleranceViolation("rows of G are not orthonormal within 1e-10")
    if k == n:
        return np.zeros((0, n))
    _, _, vh = np.linalg.svd(G, full_matrices=True)
    V = vh[k:]
    # one projection sweep tightens V G^T = 0 to roundoff
    V = V - (V @ G.T) @ G
    return orthonormal_basis(V, tol=0.5)
