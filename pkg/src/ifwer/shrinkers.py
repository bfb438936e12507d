"""Automated exclusion strategies.

A strategy consumes an analyst view plus a score per hypothesis (higher
means more likely non-null) and proposes the next batch of hypotheses to
exclude.  Strategies are pure given (view, scores) and may be swapped
between steps of a running session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .session import AnalystView, Session

Scorer = Callable[[AnalystView], np.ndarray]


def neg_g_scores(view: AnalystView) -> np.ndarray:
    """Default score: larger masked values suggest nulls, so S = -g."""
    return np.where(np.isnan(view.g), 0.0, -view.g)


@dataclass(frozen=True)
class ConePeelParams:
    d: int = 5
    delta: float = 0.05

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"cone count must be >= 1, got {self.d}")
        if not (0.0 < self.delta <= 1.0):
            raise ConfigError(f"peel fraction must be in (0, 1], got {self.delta}")


class ConePeel:
    """Peel the outer rim of the lowest-scoring angular sector.

    The active hypotheses (2-D coordinates) are split into ``d`` equal
    angular sectors around their centroid; in each sector the
    ceil(delta * size) hypotheses farthest from the centroid form a
    candidate ring, and the ring of the sector with the smallest mean
    score is proposed.  Ties break toward the lowest sector index, and
    hypotheses sitting exactly on the centroid count as sector 0.
    """

    def __init__(self, params: ConePeelParams = ConePeelParams()):
        self.params = params

    def propose(self, view: AnalystView, scores: np.ndarray) -> set:
        active = view.active_indices
        if active.size == 0:
            raise DomainError("no active hypotheses to propose from")
        if view.covariates.shape[1] != 2:
            raise DomainError("cone peel requires 2-D grid coordinates")
        coords = view.covariates[active]
        centroid = coords.mean(axis=0)
        offset = coords - centroid
        dist = np.hypot(offset[:, 0], offset[:, 1])
        theta = np.mod(np.arctan2(offset[:, 1], offset[:, 0]), 2.0 * math.pi)
        sector = np.minimum(
            (theta * self.params.d / (2.0 * math.pi)).astype(np.int64),
            self.params.d - 1,
        )
        sector[dist == 0.0] = 0
        best_ring: Optional[np.ndarray] = None
        best_mean = math.inf
        for j in range(self.params.d):
            members = np.flatnonzero(sector == j)
            if members.size == 0:
                continue
            take = math.ceil(self.params.delta * members.size)
            # Farthest first; ties resolved by lower hypothesis index.
            ring_order = members[np.lexsort((active[members], -dist[members]))]
            ring = ring_order[:take]
            mean_score = float(scores[active[ring]].mean())
            if mean_score < best_mean:
                best_mean = mean_score
                best_ring = ring
        assert best_ring is not None
        return {int(i) for i in active[best_ring]}


class SubtreePrune:
    """Remove the lowest-scoring leaf of the active subtree.

    ``parent`` maps each hypothesis to its parent index (negative for
    the root).  When omitted it is read from the first covariate column.
    The active set must form a rooted subtree, and pruning leaves keeps
    it one.
    """

    def __init__(self, parent=None):
        self.parent = None if parent is None else np.asarray(parent, dtype=np.int64)

    def _parents(self, view: AnalystView) -> np.ndarray:
        if self.parent is not None:
            if self.parent.size != view.n:
                raise DomainError("parent map does not cover all hypotheses")
            return self.parent
        if view.covariates.shape[1] < 1:
            raise DomainError("subtree pruning needs a parent covariate column")
        return view.covariates[:, 0].astype(np.int64)

    def propose(self, view: AnalystView, scores: np.ndarray) -> set:
        active = view.active_indices
        if active.size == 0:
            raise DomainError("no active hypotheses to propose from")
        parent = self._parents(view)
        is_active = np.zeros(view.n, dtype=bool)
        is_active[active] = True
        par = parent[active]
        has_active_parent = (par >= 0) & is_active[np.maximum(par, 0)]
        if int((~has_active_parent).sum()) != 1:
            raise DomainError("active set is not a rooted subtree")
        has_active_child = np.zeros(view.n, dtype=bool)
        has_active_child[par[has_active_parent]] = True
        leaves = active[~has_active_child[active]]
        pick = leaves[np.lexsort((leaves, scores[leaves]))[0]]
        return {int(pick)}


class LowestScore:
    """Remove the ``batch_size`` lowest-scoring active hypotheses."""

    def __init__(self, batch_size: int = 1):
        if batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {batch_size}")
        self.batch_size = batch_size

    def propose(self, view: AnalystView, scores: np.ndarray) -> set:
        active = view.active_indices
        if active.size == 0:
            raise DomainError("no active hypotheses to propose from")
        order = active[np.lexsort((active, scores[active]))]
        return {int(i) for i in order[: self.batch_size]}


def make_strategy(name: str, *, parent=None, batch_size: int = 1,
                  cone_d: int = 5, cone_delta: float = 0.05):
    """Build a strategy from configuration values (CLI and service)."""
    if name == "cone_peel":
        return ConePeel(ConePeelParams(d=cone_d, delta=cone_delta))
    if name == "subtree_prune":
        return SubtreePrune(parent=parent)
    if name == "lowest_score":
        return LowestScore(batch_size=batch_size)
    raise ConfigError(f"unknown strategy {name!r}")


def run_until_stop(
    session: Session,
    strategy,
    scorer: Scorer = neg_g_scores,
    refit_every: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> str:
    """Drive a session with a strategy until it stops (or a step budget).

    Scores are recomputed every ``refit_every`` steps (default
    max(1, n / 50)) and reused in between; the strategy sees a fresh
    view each step.  Returns the session status.
    """
    if refit_every is None:
        refit_every = max(1, session.n // 50)
    if refit_every < 1:
        raise ConfigError(f"refit_every must be >= 1, got {refit_every}")
    scores: Optional[np.ndarray] = None
    steps = 0
    while not session.stopped:
        if max_steps is not None and steps >= max_steps:
            break
        view = session.view()
        if scores is None or steps % refit_every == 0:
            scores = np.asarray(scorer(view), dtype=float)
            if scores.shape != (session.n,):
                raise DomainError("scorer must return one score per hypothesis")
        session.exclude(strategy.propose(view, scores))
        steps += 1
    return session.status
