"""State-space models, the reduction error system and its H2 value.

The H2 value reported throughout the package is ``trace(Bbar^T Phi Bbar)``
where ``Phi`` is the observability gramian of the error system, i.e. the
*squared* H2 norm (total impulse-response energy of the output error).
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import signal
import scipy.linalg as spla
from scipy.integrate import simpson

from . import linalg
from .errors import DimensionMismatch, HorizonTooShort, NotStable, UnstableErrorSystem

__all__ = [
    "StateSpaceModel",
    "ReducedModel",
    "ErrorSystem",
    "build_error_system",
    "h2_error",
    "h2_norm_squared",
    "impulse_response_error",
    "white_noise_error",
    "H2ErrorEvaluator",
]


def _frozen(arr):
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Continuous-time model ``x' = A x + B u, y = C x`` with Hurwitz ``A``.

    Construction validates shapes and finiteness. The Hurwitz check can be
    skipped with ``check_stable=False`` for intermediate objects that are
    not baseline models.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    check_stable: bool = field(default=True, repr=False)

    def __post_init__(self):
        A = linalg.as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        try:
            B = linalg.as_matrix(self.B, "B", rows=n)
            C = linalg.as_matrix(self.C, "C", cols=n)
        except ValueError as exc:
            if "non-finite" in str(exc):
                raise
            raise DimensionMismatch(str(exc)) from exc
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) == 0:
                labels = None
            elif len(labels) != n:
                raise DimensionMismatch(f"expected {n} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)
        if self.check_stable and n > 0:
            ev = linalg.eigenvalues(A)
            worst = float(np.max(ev.real))
            if not worst < -linalg.default_hurwitz_margin(A, ev):
                raise NotStable(
                    f"A is not Hurwitz: max real part of eigenvalues is {worst:.6g}",
                    max_real_part=worst,
                )

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def transformed(self, T, Tinv=None):
        """Model in coordinates ``x_new = T x``."""
        T = np.asarray(T, dtype=float)
        Tinv = np.linalg.inv(T) if Tinv is None else np.asarray(Tinv, dtype=float)
        return StateSpaceModel(T @ self.A @ Tinv, T @ self.B, self.C @ Tinv,
                               check_stable=False)


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Order-``r`` model ``(Ahat, Bhat, Chat, Dhat)`` and the projection used."""

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Dhat: np.ndarray
    projection: Optional[object] = None

    def __post_init__(self):
        Ahat = linalg.as_matrix(self.Ahat, "Ahat")
        r = Ahat.shape[0]
        if Ahat.shape != (r, r):
            raise DimensionMismatch(f"Ahat must be square, got {Ahat.shape}")
        Bhat = linalg.as_matrix(self.Bhat, "Bhat", rows=r)
        Chat = linalg.as_matrix(self.Chat, "Chat", cols=r)
        Dhat = linalg.as_matrix(self.Dhat, "Dhat", rows=Chat.shape[0], cols=Bhat.shape[1])
        for name, val in (("Ahat", Ahat), ("Bhat", Bhat), ("Chat", Chat), ("Dhat", Dhat)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def order(self):
        return self.Ahat.shape[0]

    r = order

    @classmethod
    def from_model(cls, model, projection=None):
        """Wrap a full model as a (non-)reduced one with zero feedthrough."""
        return cls(model.A, model.B, model.C, np.zeros((model.p, model.m)), projection)


@dataclass(frozen=True, eq=False)
class ErrorSystem:
    """Output-error system ``(Abar, Bbar, Cbar)`` with ``Abar`` block diagonal."""

    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    n_full: int

    @property
    def order(self):
        return self.Abar.shape[0]


def build_error_system(full, reduced):
    """Stack a full and a reduced model into their output-error system."""
    if reduced.Bhat.shape[1] != full.m or reduced.Chat.shape[0] != full.p:
        raise DimensionMismatch(
            f"full model is {full.p}x{full.m} (outputs x inputs), "
            f"reduced is {reduced.Chat.shape[0]}x{reduced.Bhat.shape[1]}"
        )
    n, r = full.n, reduced.order
    Abar = np.zeros((n + r, n + r))
    Abar[:n, :n] = full.A
    Abar[n:, n:] = reduced.Ahat
    Bbar = np.vstack([full.B, reduced.Bhat])
    Cbar = np.hstack([full.C, -reduced.Chat])
    return ErrorSystem(Abar, Bbar, Cbar, n)


def h2_norm_squared(A, B, C):
    """``trace(B^T Phi B)`` with ``A^T Phi + Phi A + C^T C = 0``."""
    Phi = linalg.solve_lyapunov(A, C.T @ C)
    return float(np.trace(B.T @ Phi @ B))


def _clamp(value):
    if value < 0.0:
        if value >= -1e-12:
            return 0.0
    return value


def h2_error(err):
    """Squared H2 norm of the error system, via its observability gramian.

    Raises :class:`UnstableErrorSystem` when ``Abar`` is not Hurwitz.
    """
    n = err.n_full
    for block in (err.Abar[:n, :n], err.Abar[n:, n:]):
        if block.size and not linalg.is_hurwitz(block):
            raise UnstableErrorSystem("error system state matrix is not Hurwitz")
    return _clamp(h2_norm_squared(err.Abar, err.Bbar, err.Cbar))


def _check_stable_pair(full, reduced):
    err = build_error_system(full, reduced)
    if reduced.order and not linalg.is_hurwitz(reduced.Ahat):
        raise UnstableErrorSystem("reduced model is not Hurwitz")
    return err


def _default_time_grid(Abar, horizon, dt):
    ev = linalg.eigenvalues(Abar)
    slowest = -float(np.max(ev.real))
    if horizon is None:
        horizon = 20.0 / slowest
    if dt is None:
        radius = float(np.max(np.abs(ev)))
        dt = min(horizon / 2000.0, 0.05 / radius)
    if horizon <= 0 or dt <= 0:
        raise ValueError("horizon and dt must be positive")
    return horizon, dt, slowest


def impulse_response_error(full, reduced, horizon=None, dt=None):
    """Sum over inputs of the integrated squared output error after an impulse.

    Responses are propagated with the exact one-step transition matrix
    ``expm(Abar dt)`` and integrated with composite Simpson's rule, so the
    only approximation is the quadrature and the finite horizon. Defaults:
    20 slowest time constants and ``dt = min(horizon/2000, 0.05/rho)``.
    """
    err = _check_stable_pair(full, reduced)
    horizon, dt, slowest = _default_time_grid(err.Abar, horizon, dt)
    if np.exp(-slowest * horizon) > 1e-6:
        raise HorizonTooShort(
            f"slowest mode (rate {slowest:.4g}) only decays to "
            f"{np.exp(-slowest * horizon):.3g} of its initial value by t={horizon:.4g}"
        )
    steps = int(np.ceil(horizon / dt))
    steps += steps % 2
    if steps > 5_000_000:
        raise ValueError(f"time grid too fine ({steps} steps)")
    Phi = spla.expm(err.Abar * dt)
    X = err.Bbar.copy()
    energy = np.empty(steps + 1)
    for k in range(steps + 1):
        Y = err.Cbar @ X
        energy[k] = np.sum(Y * Y)
        X = Phi @ X
    return float(simpson(energy, dx=dt))


def _zoh(Abar, Bbar, dt):
    n, m = Bbar.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = Abar
    M[:n, n:] = Bbar
    E = spla.expm(M * dt)
    return E[:n, :n], E[:n, n:]


def white_noise_error(full, reduced, seed, duration=None, dt=None):
    """Monte Carlo estimate of the stationary output-error power under white noise.

    The input is held constant over each step of length `dt` (zero-order
    hold) with independent ``N(0, 1/dt)`` samples on every channel. The
    returned value is the average of ``||delta||^2`` over the second half of
    the trajectory.
    """
    err = _check_stable_pair(full, reduced)
    ev = linalg.eigenvalues(err.Abar)
    slowest = -float(np.max(ev.real))
    if dt is None:
        # ZOH bias on a mode of rate a is about (a dt)^2 / 12
        dt = 0.25 / float(np.max(np.abs(ev)))
    if duration is None:
        duration = min(1e4 / slowest, 2e6 * dt)
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    steps = int(np.ceil(duration / dt))
    if steps < 4:
        raise ValueError("duration must span at least a few steps")
    if steps > 20_000_000:
        raise ValueError(f"time grid too fine ({steps} steps)")
    Ad, Bd = _zoh(err.Abar, err.Bbar, dt)
    rng = np.random.default_rng(seed)
    Bd = Bd / np.sqrt(dt)
    half = steps // 2
    total = 0.0
    for start, out in _simulate_outputs(Ad, Bd, err.Cbar, rng, steps):
        lo = max(half - start, 0)
        if lo < out.shape[0]:
            total += float(np.sum(out[lo:] ** 2))
    return total / (steps - half)


def _simulate_outputs(Ad, Bd, Cd, rng, steps, block=65536):
    """Yield ``(first_step, outputs)`` chunks of ``x+ = Ad x + Bd w``, ``y = Cd x+``.

    ``w`` is standard normal, drawn chunk by chunk from `rng`. When `Ad` has
    a well-conditioned eigenbasis each mode runs as a first-order filter in
    compiled code; otherwise the recursion is stepped directly.
    """
    m = Bd.shape[1]
    lam, V = np.linalg.eig(Ad)
    lam, V = lam.astype(complex), V.astype(complex)
    modal = np.linalg.cond(V) < 1e8
    if modal:
        Vinv = np.linalg.inv(V)
        G = (Vinv @ Bd).T
        H = (Cd @ V).T
        z = np.zeros(lam.size, dtype=complex)
    else:
        AdT, BdT, CdT = Ad.T, Bd.T, Cd.T
        x = np.zeros(Ad.shape[0])
    for start in range(0, steps, block):
        count = min(block, steps - start)
        w = rng.standard_normal((count, m))
        if modal:
            drive = w @ G
            Z = np.empty_like(drive)
            for i, li in enumerate(lam):
                # z_k = li z_{k-1} + drive_k, continuing from the previous chunk
                Z[:, i] = signal.lfilter([1.0], [1.0, -li], drive[:, i], zi=[li * z[i]])[0]
                z[i] = Z[-1, i]
            yield start, (Z @ H).real
        else:
            drive = w @ BdT
            xs = np.empty((count, Ad.shape[0]))
            for k in range(count):
                x = x @ AdT + drive[k]
                xs[k] = x
            yield start, xs @ CdT


class H2ErrorEvaluator:
    """H2 error against one fixed full model, for many candidate reductions.

    The observability gramian of the error system is assembled blockwise:
    the full-model block is solved once, the cross block is a Sylvester
    equation sharing the cached Schur form of ``A``, and only the small
    reduced block is solved from scratch per call.
    """

    def __init__(self, full):
        self.full = full
        self._sylv = linalg.SylvesterSolver(full.A)
        Phi11 = linalg.solve_lyapunov(full.A, full.C.T @ full.C)
        self.full_energy = float(np.trace(full.B.T @ Phi11 @ full.B))

    def gramian_blocks(self, reduced):
        """Cross and reduced blocks ``(Phi12, Phi22)`` of the observability gramian."""
        C, Ahat, Chat = self.full.C, reduced.Ahat, reduced.Chat
        Phi12 = self._sylv.solve(Ahat, C.T @ Chat, transpose=True)
        Phi22 = linalg.solve_lyapunov(Ahat, Chat.T @ Chat)
        return Phi12, Phi22

    def __call__(self, reduced):
        if reduced.order and not linalg.is_hurwitz(reduced.Ahat):
            raise UnstableErrorSystem("reduced model is not Hurwitz")
        Phi12, Phi22 = self.gramian_blocks(reduced)
        B, Bhat = self.full.B, reduced.Bhat
        value = (self.full_energy
                 + 2.0 * float(np.sum(B * (Phi12 @ Bhat)))
                 + float(np.sum(Bhat * (Phi22 @ Bhat))))
        return _clamp(value)
