"""Singular-perturbation reduction for a given retained/eliminated split.

With an orthogonal ``U = [P; Q]`` the states ``z_q = Q x`` are set to their
quasi-steady state and eliminated::

    Pi   = Q^T (Q A Q^T)^{-1} Q
    Ahat = P A P^T - P A Pi A P^T
    Bhat = (P - P A Pi) B
    Chat = C (P^T - Pi A P^T)
    Dhat = -C Pi B
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DuplicateIndex, IndexOutOfRange, SingularFastBlock, ToleranceViolation
from .lti import ReducedModel

__all__ = [
    "ProjectionPair",
    "selection_pair",
    "compute_pi",
    "reduce",
    "check_range_condition",
    "FAST_BLOCK_COND_LIMIT",
]

FAST_BLOCK_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """Retained basis ``P`` (r x n) and eliminated basis ``Q`` ((n-r) x n).

    ``[P; Q]`` must be orthogonal within 1e-10.
    """

    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        n = P.shape[1] if P.ndim == 2 else Q.shape[1]
        P = P.reshape(-1, n)
        Q = Q.reshape(-1, n)
        if P.shape[0] + Q.shape[0] != n:
            raise ToleranceViolation(
                f"P and Q have {P.shape[0]} + {Q.shape[0]} rows, expected {n}"
            )
        U = np.vstack([P, Q])
        if n and np.max(np.abs(U @ U.T - np.eye(n))) > 1e-10:
            raise ToleranceViolation("[P; Q] is not orthogonal within 1e-10")
        for name, val in (("P", P), ("Q", Q)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.P.shape[1]

    @property
    def r(self):
        return self.P.shape[0]

    @classmethod
    def from_retained(cls, P):
        """Complete an orthonormal retained basis with its orthogonal complement."""
        P = np.asarray(P, dtype=float)
        return cls(P, linalg.orthonormal_complement(P, P.shape[1]))


def selection_pair(retained_indices, n):
    """Selection-matrix pair keeping `retained_indices` in the given order.

    ``Q`` holds the remaining canonical vectors in ascending index order.
    """
    retained = [int(i) for i in retained_indices]
    if not retained:
        raise ValueError("at least one state must be retained")
    for i in retained:
        if not 0 <= i < n:
            raise IndexOutOfRange(f"state index {i} outside [0, {n})")
    if len(set(retained)) != len(retained):
        raise DuplicateIndex(f"duplicate state index in {retained}")
    eye = np.eye(n)
    keep = set(retained)
    eliminated = [i for i in range(n) if i not in keep]
    return ProjectionPair(eye[retained], eye[eliminated])


def _fast_block_inverse(A, Q):
    block = Q @ A @ Q.T
    cond = np.linalg.cond(block)
    if not np.isfinite(cond) or cond > FAST_BLOCK_COND_LIMIT:
        raise SingularFastBlock(
            f"eliminated block QAQ^T is ill-conditioned (cond = {cond:.3e})"
        )
    return np.linalg.inv(block)


def compute_pi(A, Q):
    """``Pi = Q^T (Q A Q^T)^{-1} Q``; zero when nothing is eliminated."""
    A = linalg.as_matrix(A, "A")
    n = A.shape[0]
    Q = np.asarray(Q, dtype=float).reshape(-1, n)
    if Q.shape[0] == 0:
        return np.zeros((n, n))
    return Q.T @ _fast_block_inverse(A, Q) @ Q


def reduce(model, proj):
    """Singular-perturbation reduction of `model` onto ``range(proj.P^T)``."""
    if proj.n != model.n:
        raise ValueError(f"projection is for n={proj.n}, model has n={model.n}")
    A, B, C = model.A, model.B, model.C
    P = proj.P
    Pi = compute_pi(A, proj.Q)
    PA = P @ A
    APt = A @ P.T
    Ahat = P @ APt - PA @ Pi @ APt
    Bhat = (P - PA @ Pi) @ B
    Chat = C @ (P.T - Pi @ APt)
    Dhat = -C @ Pi @ B
    return ReducedModel(Ahat, Bhat, Chat, Dhat, proj)


def check_range_condition(C, P):
    """True iff ``range(C^T)`` lies in ``range(P^T)`` (relative tol 1e-10).

    `P` must have orthonormal rows.
    """
    C = np.asarray(C, dtype=float)
    P = np.asarray(P, dtype=float)
    cnorm = np.linalg.norm(C)
    if cnorm == 0.0:
        return True
    Ct = C.T
    residual = np.linalg.norm(Ct - P.T @ (P @ Ct))
    return bool(residual <= 1e-10 * cnorm)
