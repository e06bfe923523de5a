"""Singular-perturbation reduction over general orthonormal retained bases.

The model is first brought to coordinates ``x~ = L^T x`` where
``A^T X + X A = -I`` and ``X = L L^T``. In these coordinates the state
matrix is negative definite, and so is every singular-perturbation reduction
of it, whatever orthonormal retained basis ``P`` is used. ``P`` is split as::

    P = [Pfix; W V]

with ``Pfix`` an orthonormal basis of ``range(C~^T)`` (so the reduced model
has no feedthrough) and ``V`` its orthogonal complement. The decision
variable ``W`` lives on the Stiefel manifold ``W W^T = I`` and is optimized
by Riemannian gradient descent with a QR retraction and Armijo backtracking.

For the gradient, the reduction is written without ``Q``: with
``M = A~^{-1}``, ``G = P M P^T``::

    Ahat = G^{-1},  Bhat = G^{-1} P M B~,  Chat = C~ M P^T G^{-1}

which agrees with the ``Q``-based formulas for every orthogonal ``[P; Q]``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as spla

from . import linalg
from .errors import AlignmentInfeasible, RankDeficientOutput, SingularFastBlock, ToleranceViolation
from .lti import StateSpaceModel, _clamp, build_error_system, h2_error
from .sp import FAST_BLOCK_COND_LIMIT, ProjectionPair, reduce

__all__ = [
    "TransformedModel",
    "StiefelPoint",
    "Parameterization",
    "OptimizationReport",
    "StiefelResult",
    "stabilizing_transform",
    "build_parameterization",
    "assemble_P",
    "objective",
    "gradient",
    "riemannian_gradient",
    "retract",
    "random_stiefel",
    "align_from_greedy",
    "optimize",
    "stiefel_reduce",
]

GRAD_TOL = 1e-6
ARMIJO_C = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 60


@dataclass(frozen=True, eq=False)
class TransformedModel:
    """Model in the coordinates where the state matrix is negative definite."""

    Atilde: np.ndarray
    Btilde: np.ndarray
    Ctilde: np.ndarray
    L: np.ndarray

    @property
    def model(self):
        return StateSpaceModel(self.Atilde, self.Btilde, self.Ctilde, check_stable=False)

    @property
    def n(self):
        return self.Atilde.shape[0]

    @property
    def p(self):
        return self.Ctilde.shape[0]


@dataclass(frozen=True, eq=False)
class StiefelPoint:
    """``(r-p) x (n-p)`` matrix with orthonormal rows."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float, ndmin=2)
        if W.size and np.max(np.abs(W @ W.T - np.eye(W.shape[0]))) > 1e-9:
            raise ToleranceViolation("W W^T != I within 1e-9")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def shape(self):
        return self.W.shape


@dataclass(frozen=True, eq=False)
class Parameterization:
    Pfix: np.ndarray
    V: np.ndarray


@dataclass
class OptimizationReport:
    initial_objective: float
    final_objective: float
    iterations: int
    converged: bool
    objective_history: List[float]
    final_point: StiefelPoint = field(repr=False)
    gradient_norm: float = float("nan")
    stop_reason: str = ""

    def to_dict(self):
        return {
            "initial_objective": self.initial_objective,
            "final_objective": self.final_objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "stop_reason": self.stop_reason,
            "objective_history": list(self.objective_history),
            "final_point": self.final_point.W.tolist(),
        }


def _as_W(W):
    return W.W if isinstance(W, StiefelPoint) else np.asarray(W, dtype=float)


def stabilizing_transform(model):
    """Coordinates ``x~ = L^T x`` making the state matrix negative definite."""
    A = model.A
    n = model.n
    X = linalg.solve_lyapunov(A, np.eye(n))
    L = linalg.cholesky(X)
    # L^{-T} applied from the right: Z L^{-T} = solve(L, Z^T)^T
    Atilde = spla.solve_triangular(L, (L.T @ A).T, lower=True).T
    Btilde = L.T @ model.B
    Ctilde = spla.solve_triangular(L, model.C.T, lower=True).T
    return TransformedModel(Atilde, Btilde, Ctilde, L)


def build_parameterization(tmodel, r):
    """``Pfix`` spanning the output directions and its orthogonal complement ``V``."""
    n, p = tmodel.n, tmodel.p
    if not p <= r <= n:
        raise ValueError(f"order r={r} must satisfy p={p} <= r <= n={n}")
    Pfix = linalg.orthonormal_basis(tmodel.Ctilde)
    if Pfix.shape[0] < p:
        raise RankDeficientOutput(
            f"output matrix has rank {Pfix.shape[0]} < p={p}; remove redundant outputs"
        )
    V = linalg.orthonormal_complement(Pfix, n)
    return Parameterization(Pfix, V)


def assemble_P(Pfix, V, W):
    """Retained basis ``[Pfix; W V]``."""
    W = _as_W(W)
    k = W.shape[0] if W.size else 0
    if k == 0:
        return np.array(Pfix, dtype=float)
    if np.max(np.abs(W @ W.T - np.eye(k))) > 1e-9:
        raise ToleranceViolation("W W^T != I within 1e-9")
    return np.vstack([Pfix, W @ V])


def _param(tmodel, r, param):
    return build_parameterization(tmodel, r) if param is None else param


def objective(tmodel, W, r, param=None):
    """H2 error of the reduction of the transformed model on ``[Pfix; W V]``."""
    param = _param(tmodel, r, param)
    P = assemble_P(param.Pfix, param.V, W)
    if P.shape[0] != r:
        raise ValueError(f"W gives {P.shape[0]} retained directions, expected r={r}")
    model = tmodel.model
    reduced = reduce(model, ProjectionPair.from_retained(P))
    return h2_error(build_error_system(model, reduced))


class _Problem:
    """Objective and Euclidean gradient in W for one (model, r)."""

    def __init__(self, tmodel, r, param=None):
        self.tmodel = tmodel
        self.r = r
        self.param = _param(tmodel, r, param)
        A, B, C = tmodel.Atilde, tmodel.Btilde, tmodel.Ctilde
        self.M = np.linalg.inv(A)
        self.MB = self.M @ B
        self.CM = C @ self.M
        self.sylv = linalg.SylvesterSolver(A)
        Phi11 = linalg.solve_lyapunov(A, C.T @ C)
        self.full_energy = float(np.trace(B.T @ Phi11 @ B))

    def reduced(self, W):
        # no orthonormality check: the closed form extends smoothly off the manifold
        P = np.vstack([self.param.Pfix, np.asarray(W).reshape(-1, self.param.V.shape[0]) @ self.param.V])
        G = P @ self.M @ P.T
        if np.linalg.cond(G) > FAST_BLOCK_COND_LIMIT:
            raise SingularFastBlock("retained block P A^-1 P^T is ill-conditioned")
        Ahat = np.linalg.inv(G)
        N = P @ self.MB
        K = self.CM @ P.T
        return P, Ahat, Ahat @ N, K @ Ahat, N, K

    def value(self, W):
        return self._evaluate(W, with_gradient=False)[0]

    def value_and_gradient(self, W):
        return self._evaluate(W, with_gradient=True)

    def _evaluate(self, W, with_gradient):
        A, B, C = self.tmodel.Atilde, self.tmodel.Btilde, self.tmodel.Ctilde
        P, Ahat, Bhat, Chat, N, K = self.reduced(W)
        Phi12 = self.sylv.solve(Ahat, C.T @ Chat, transpose=True)
        Phi22 = linalg.solve_lyapunov(Ahat, Chat.T @ Chat)
        J = (self.full_energy
             + 2.0 * float(np.sum(B * (Phi12 @ Bhat)))
             + float(np.sum(Bhat * (Phi22 @ Bhat))))
        J = _clamp(J)
        if not with_gradient:
            return J, None
        Sig12 = self.sylv.solve(Ahat, -B @ Bhat.T, transpose=False)
        Sig22 = linalg.solve_lyapunov(Ahat.T, Bhat @ Bhat.T)
        Phi21 = Phi12.T
        gA = 2.0 * (Phi21 @ Sig12 + Phi22 @ Sig22)
        gB = 2.0 * (Phi21 @ B + Phi22 @ Bhat)
        gC = -2.0 * (C @ Sig12 - Chat @ Sig22)
        # chain rule through Ahat = G^-1, Bhat = Ahat N, Chat = K Ahat
        gA_total = gA + gB @ N.T + K.T @ gC
        Y = -Ahat.T @ gA_total @ Ahat.T
        M = self.M
        gP = (Y @ P @ M.T + Y.T @ P @ M
              + Ahat.T @ gB @ self.MB.T
              + Ahat @ gC.T @ self.CM)
        p = self.param.Pfix.shape[0]
        return J, gP[p:] @ self.param.V.T


def gradient(tmodel, W, r, param=None):
    """Euclidean gradient of :func:`objective` with respect to ``W``."""
    W = _as_W(W)
    if W.size == 0:
        return np.zeros_like(W)
    return _Problem(tmodel, r, param).value_and_gradient(W)[1]


def riemannian_gradient(W, egrad):
    """Project a Euclidean gradient onto the tangent space at ``W`` (rows orthonormal)."""
    WG = egrad @ W.T
    return egrad - 0.5 * (WG + WG.T) @ W


def retract(W, xi):
    """QR retraction of ``W + xi`` back onto ``{W : W W^T = I}``."""
    Qf, R = np.linalg.qr((W + xi).T)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return (Qf * signs).T


def random_stiefel(k, d, seed):
    """Seeded ``k x d`` matrix with orthonormal rows (orthogonalized Gaussian)."""
    if k == 0:
        return StiefelPoint(np.zeros((0, d)))
    rng = np.random.default_rng(seed)
    return StiefelPoint(retract(np.zeros((k, d)), rng.standard_normal((k, d))))


def align_from_greedy(model, tmodel, greedy, r, Pfix, V):
    """Stiefel point whose retained span matches a greedy solution.

    The greedy retained states ``P_g`` map to ``range(L^{-1} P_g^T)`` in the
    transformed coordinates. The part of that span orthogonal to ``Pfix`` is
    given an orthonormal basis ``R`` and the point returned is ``W = R V^T``.
    Any orthonormal basis of the same span yields the same objective value.
    """
    n, p = tmodel.n, Pfix.shape[0]
    if r == p:
        return StiefelPoint(np.zeros((0, n - p)))
    retained = greedy.retained_at(r)
    Pg = np.eye(n)[retained]
    span = linalg.orthonormal_basis(spla.solve_triangular(tmodel.L, Pg.T, lower=True).T)
    if span.shape[0] != r:
        raise AlignmentInfeasible(f"transformed greedy span has rank {span.shape[0]} != {r}")
    residual = Pfix - (Pfix @ span.T) @ span
    if np.max(np.abs(residual), initial=0.0) > 1e-8:
        raise AlignmentInfeasible(
            "greedy retained span does not contain the output directions "
            f"(residual {np.max(np.abs(residual)):.2e})"
        )
    projected = span - (span @ Pfix.T) @ Pfix
    R = linalg.orthonormal_basis(projected, tol=1e-6)
    if R.shape[0] != r - p:
        raise AlignmentInfeasible(f"extracted {R.shape[0]} directions, expected {r - p}")
    W = linalg.orthonormal_basis(R @ V.T)
    return StiefelPoint(W)


def optimize(tmodel, r, init, budget=500, param=None, initial_step=1.0, tol=GRAD_TOL,
             step_rule="bb"):
    """Riemannian gradient descent for the H2 error over the Stiefel manifold.

    Every iterate stays feasible (QR retraction) and the objective never
    increases (Armijo backtracking, ``c = 1e-4``, step halving). The first
    trial step is `initial_step`; with ``step_rule="bb"`` later trial steps
    are Barzilai-Borwein estimates from the previous iterate, with
    ``"fixed"`` every iteration starts from `initial_step`. Trial points with
    an ill-conditioned retained block are rejected. Stops when the Riemannian gradient norm drops below `tol`,
    when no decrease can be found, or after `budget` iterations.
    """
    problem = _Problem(tmodel, r, param)
    W = _as_W(init).copy()
    k = W.shape[0] if W.size else 0
    if k == 0:
        f = problem.value(np.zeros((0, tmodel.n - tmodel.p)))
        return OptimizationReport(f, f, 0, True, [f], StiefelPoint(W.reshape(0, tmodel.n - tmodel.p)),
                                  0.0, "empty decision variable")
    f, egrad = problem.value_and_gradient(W)
    history = [f]
    iterations = 0
    reason = "budget exhausted"
    gnorm = np.inf
    bb_step = None
    while True:
        rgrad = riemannian_gradient(W, egrad)
        gnorm = float(np.linalg.norm(rgrad))
        if gnorm < tol:
            reason = "gradient tolerance reached"
            break
        if iterations >= budget:
            break
        step = initial_step if bb_step is None else bb_step
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = retract(W, -step * rgrad)
            try:
                f_trial = problem.value(trial)
            except SingularFastBlock:
                f_trial = np.inf
            if f_trial <= f - ARMIJO_C * step * gnorm ** 2:
                accepted = True
                break
            step *= SHRINK
        if not accepted:
            reason = "line search found no decrease"
            break
        W_prev, rgrad_prev = W, rgrad
        W = trial
        f, egrad = problem.value_and_gradient(W)
        history.append(f)
        if step_rule == "bb":
            s_k = W - W_prev
            y_k = riemannian_gradient(W, egrad) - rgrad_prev
            sy = float(np.sum(s_k * y_k))
            bb_step = float(np.sum(s_k * s_k)) / sy if sy > 0 else None
            if bb_step is not None:
                bb_step = min(max(bb_step, 1e-10), 1e10)
        iterations += 1
    return OptimizationReport(
        initial_objective=history[0],
        final_objective=history[-1],
        iterations=iterations,
        converged=gnorm < tol,
        objective_history=history,
        final_point=StiefelPoint(W),
        gradient_norm=gnorm,
        stop_reason=reason,
    )


@dataclass
class StiefelResult:
    reduced: object
    report: OptimizationReport
    tmodel: TransformedModel = field(repr=False)
    P: np.ndarray = field(repr=False)
    start: str = "greedy"


def stiefel_reduce(model, r, greedy=None, budget=500, seed=0, tmodel=None, **kwargs):
    """Reduce `model` to order `r`, warm-started from `greedy` when it reaches `r`.

    Falls back to a seeded random Stiefel start otherwise. The returned
    reduced model lives in the transformed coordinates; its input-output
    behaviour is what approximates `model`.
    """
    tmodel = stabilizing_transform(model) if tmodel is None else tmodel
    param = build_parameterization(tmodel, r)
    p = param.Pfix.shape[0]
    start = "random"
    init = None
    if greedy is not None and greedy.final_order <= r < greedy.n:
        init = align_from_greedy(model, tmodel, greedy, r, param.Pfix, param.V)
        start = "greedy"
    if init is None:
        init = random_stiefel(r - p, tmodel.n - p, seed)
    report = optimize(tmodel, r, init, budget=budget, param=param, **kwargs)
    P = assemble_P(param.Pfix, param.V, report.final_point)
    reduced = reduce(tmodel.model, ProjectionPair.from_retained(P))
    return StiefelResult(reduced, report, tmodel, P, start)
