"""Greedy state elimination by singular perturbation.

Starting from the full model, one state is eliminated per step: among the
states whose output column is zero (so that the reduced model keeps zero
feedthrough), the one whose elimination gives the smallest H2 error is
removed. Candidates that give a non-Hurwitz reduced model, or an
ill-conditioned eliminated block, are skipped.
"""

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import linalg
from .errors import NoReductionPossible, SingularFastBlock, UnstableErrorSystem
from .lti import H2ErrorEvaluator
from .sp import ProjectionPair, reduce, selection_pair

__all__ = [
    "Termination",
    "GreedyStep",
    "GreedyTrace",
    "candidate_set",
    "greedy_reduce",
    "TIE_RTOL",
]

TIE_RTOL = 1e-12


class Termination(str, enum.Enum):
    REACHED_TARGET_ORDER = "ReachedTargetOrder"
    CANDIDATES_EXHAUSTED = "CandidatesExhausted"
    ALL_REMAINING_UNSTABLE = "AllRemainingUnstable"


@dataclass(frozen=True)
class GreedyStep:
    eliminated_index: int
    h2_error_after: float
    candidates_evaluated: int
    candidates_unstable: int
    elapsed: float = field(default=0.0, compare=False, repr=False)


@dataclass(frozen=True)
class GreedyTrace:
    n: int
    r_target: int
    steps: List[GreedyStep]
    termination: Termination
    final_projection: ProjectionPair = field(repr=False)

    @property
    def eliminated(self):
        return [s.eliminated_index for s in self.steps]

    @property
    def final_order(self):
        return self.n - len(self.steps)

    @property
    def final_error(self):
        return self.steps[-1].h2_error_after if self.steps else 0.0

    def orders(self):
        """Reduced orders reached by the trace, largest first."""
        return [self.n - k for k in range(1, len(self.steps) + 1)]

    def retained_at(self, r):
        """Retained state indices (ascending) after reducing to order `r`."""
        k = self.n - r
        if not 0 <= k <= len(self.steps):
            raise ValueError(f"order {r} not reached by this trace "
                             f"(orders {self.final_order}..{self.n})")
        gone = set(self.eliminated[:k])
        return [i for i in range(self.n) if i not in gone]

    def projection_at(self, r):
        return selection_pair(self.retained_at(r), self.n)

    def elapsed_at(self, r):
        """Seconds spent until order `r` was reached."""
        k = self.n - r
        self.retained_at(r)
        return 0.0 if k == 0 else self.steps[k - 1].elapsed

    def error_at(self, r):
        k = self.n - r
        self.retained_at(r)
        return 0.0 if k == 0 else self.steps[k - 1].h2_error_after

    def to_dict(self):
        return {
            "n": self.n,
            "r_target": self.r_target,
            "final_order": self.final_order,
            "termination": self.termination.value,
            "steps": [
                {
                    "eliminated_index": s.eliminated_index,
                    "h2_error_after": s.h2_error_after,
                    "candidates_evaluated": s.candidates_evaluated,
                    "candidates_unstable": s.candidates_unstable,
                }
                for s in self.steps
            ],
        }


def candidate_set(C, tol=1e-12):
    """Indices of the columns of `C` that are entirely below `tol` in magnitude."""
    C = np.asarray(C, dtype=float)
    return [j for j in range(C.shape[1]) if np.all(np.abs(C[:, j]) < tol)]


def _evaluate(model, evaluator, eliminated, j):
    """H2 error after eliminating ``eliminated + [j]``; None if infeasible."""
    gone = set(eliminated)
    gone.add(j)
    retained = [i for i in range(model.n) if i not in gone]
    try:
        reduced = reduce(model, selection_pair(retained, model.n))
    except SingularFastBlock:
        return None
    if not linalg.is_hurwitz(reduced.Ahat):
        return None
    try:
        return evaluator(reduced)
    except UnstableErrorSystem:
        return None


def _pick(results):
    """Index of the smallest error, ties (within TIE_RTOL) go to the lowest index."""
    feasible = [(j, e) for j, e in results if e is not None]
    if not feasible:
        return None
    best = min(e for _, e in feasible)
    cutoff = best + TIE_RTOL * abs(best)
    return min((j, e) for j, e in feasible if e <= cutoff)


def greedy_reduce(model, r_target, workers=None):
    """Eliminate states one at a time until order `r_target` is reached.

    Stops early when no candidate states remain or when every remaining
    candidate yields an unstable reduced model; the reason is recorded in
    the returned trace. Raises :class:`NoReductionPossible` if not even the
    first elimination is feasible.
    """
    n = model.n
    if not 1 <= r_target < n:
        raise ValueError(f"r_target must satisfy 1 <= r_target < n={n}, got {r_target}")
    evaluator = H2ErrorEvaluator(model)
    candidates = candidate_set(model.C)
    eliminated = []
    steps = []
    termination = None
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    t0 = time.perf_counter()
    try:
        while True:
            if len(eliminated) == n - r_target:
                termination = Termination.REACHED_TARGET_ORDER
                break
            if not candidates:
                termination = Termination.CANDIDATES_EXHAUSTED
                break
            if pool is None:
                errs = [_evaluate(model, evaluator, eliminated, j) for j in candidates]
            else:
                errs = list(pool.map(
                    lambda j: _evaluate(model, evaluator, eliminated, j), candidates))
            picked = _pick(list(zip(candidates, errs)))
            if picked is None:
                termination = Termination.ALL_REMAINING_UNSTABLE
                break
            j, err = picked
            eliminated.append(j)
            candidates = [c for c in candidates if c != j]
            steps.append(GreedyStep(
                eliminated_index=j,
                h2_error_after=err,
                candidates_evaluated=len(errs),
                candidates_unstable=sum(e is None for e in errs),
                elapsed=time.perf_counter() - t0,
            ))
    finally:
        if pool is not None:
            pool.shutdown()

    if not steps:
        raise NoReductionPossible(
            "no state can be eliminated: "
            + ("no state has a zero output column" if termination is Termination.CANDIDATES_EXHAUSTED
               else "every single-state elimination gives an unstable reduced model")
        )
    gone = set(eliminated)
    final = selection_pair([i for i in range(n) if i not in gone], n)
    return GreedyTrace(n, r_target, steps, termination, final)
