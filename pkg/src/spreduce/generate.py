"""Synthetic two-timescale test systems.

Generated models have a block of slow states (rates of order 1) and a block
of fast states (rates of order ``timescale_ratio``), joined by sparse random
coupling. Outputs observe slow states only, through unit rows of ``C``.
States are randomly permuted so block membership is not visible from the
index order; ``labels`` records it ("slow3", "fast0", ...).
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import linalg
from .errors import StabilizationFailed
from .lti import StateSpaceModel

__all__ = ["GeneratorConfig", "PRESETS", "generate", "preset"]

MAX_RETRIES = 20


@dataclass(frozen=True)
class GeneratorConfig:
    n_slow: int
    n_fast: int
    timescale_ratio: float = 100.0
    coupling_density: float = 0.2
    seed: int = 0
    n_inputs: int = 1
    n_outputs: int = 1
    coupling_strength: float = 0.5

    def __post_init__(self):
        if self.n_slow < 1 or self.n_fast < 0:
            raise ValueError("need n_slow >= 1 and n_fast >= 0")
        if not self.timescale_ratio > 1:
            raise ValueError("timescale_ratio must exceed 1")
        if not 0.0 <= self.coupling_density <= 1.0:
            raise ValueError("coupling_density must lie in [0, 1]")
        if self.n_inputs < 1:
            raise ValueError("need at least one input")
        if not 1 <= self.n_outputs <= self.n_slow:
            raise ValueError("n_outputs must satisfy 1 <= n_outputs <= n_slow")
        if self.coupling_strength < 0:
            raise ValueError("coupling_strength must be non-negative")

    @property
    def n(self):
        return self.n_slow + self.n_fast

    def to_dict(self):
        return asdict(self)


PRESETS = {
    "tiny": GeneratorConfig(n_slow=2, n_fast=3, timescale_ratio=30.0, coupling_density=0.4,
                            seed=0, n_inputs=2, n_outputs=1),
    "small": GeneratorConfig(n_slow=4, n_fast=6, timescale_ratio=50.0, coupling_density=0.3,
                             seed=0, n_inputs=3, n_outputs=2),
    "medium": GeneratorConfig(n_slow=8, n_fast=12, timescale_ratio=100.0, coupling_density=0.2,
                              seed=0, n_inputs=4, n_outputs=2),
    # same dimensions as a 56-state, 12-input, 2-output network model
    "paper-like": GeneratorConfig(n_slow=20, n_fast=36, timescale_ratio=20.0, coupling_density=0.15,
                                  seed=0, n_inputs=12, n_outputs=2),
}


def preset(name, **overrides):
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return GeneratorConfig(**{**cfg.to_dict(), **overrides}) if overrides else cfg


def generate(config):
    """Draw a stable two-timescale model, deterministic in `config`.

    ``A = T (-D + k E)`` with ``D`` a positive diagonal, ``E`` sparse Gaussian
    scaled by ``1/sqrt(n * density)`` and ``T`` scaling the fast rows by the
    timescale ratio. If the draw is not Hurwitz the diagonal damping is
    increased and the check repeated, at most 20 times.
    """
    rng = np.random.default_rng(config.seed)
    ns, nf = config.n_slow, config.n_fast
    n = ns + nf
    damping = rng.uniform(0.5, 1.5, size=n)
    coupling = np.zeros((n, n))
    if config.coupling_density > 0 and n > 1:
        mask = rng.random((n, n)) < config.coupling_density
        np.fill_diagonal(mask, False)
        coupling = np.where(mask, rng.standard_normal((n, n)), 0.0)
        coupling *= config.coupling_strength / np.sqrt(n * config.coupling_density)
    rates = np.concatenate([np.ones(ns), np.full(nf, float(config.timescale_ratio))])
    B = rng.standard_normal((n, config.n_inputs))
    observed = np.sort(rng.choice(ns, size=config.n_outputs, replace=False))
    perm = rng.permutation(n)

    for attempt in range(MAX_RETRIES + 1):
        A = rates[:, None] * (coupling - np.diag(damping + 0.25 * attempt))
        if linalg.is_hurwitz(A):
            break
    else:
        raise StabilizationFailed(f"no Hurwitz draw after {MAX_RETRIES} damping increases")

    C = np.zeros((config.n_outputs, n))
    C[np.arange(config.n_outputs), observed] = 1.0
    labels = [f"slow{i}" for i in range(ns)] + [f"fast{i}" for i in range(nf)]
    # position k of the permuted model holds original state perm[k]
    return StateSpaceModel(
        A[np.ix_(perm, perm)],
        B[perm],
        C[:, perm],
        labels=tuple(labels[i] for i in perm),
    )
