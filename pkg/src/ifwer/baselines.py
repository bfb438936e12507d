"""Classical familywise-error procedures used as power references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class BaselineResult:
    rejected: frozenset
    thresholds: tuple


def _check_pvalues(pvalues) -> np.ndarray:
    p = np.asarray(list(pvalues), dtype=float)
    if p.size == 0:
        raise DomainError("p-value list must be non-empty")
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise DomainError("p-values must lie in [0, 1]")
    return p


def sidak(pvalues, alpha: float) -> BaselineResult:
    """Single-step correction: reject p <= 1 - (1 - alpha)^(1/n)."""
    p = _check_pvalues(pvalues)
    threshold = 1.0 - (1.0 - alpha) ** (1.0 / p.size)
    rejected = frozenset(int(i) for i in np.flatnonzero(p <= threshold))
    return BaselineResult(rejected=rejected, thresholds=(threshold,))


def holm(pvalues, alpha: float) -> BaselineResult:
    """Step-down correction: reject while p_(i) <= alpha / (n - i + 1).

    Ties are ordered by original index, which makes the result
    deterministic.
    """
    p = _check_pvalues(pvalues)
    n = p.size
    order = np.lexsort((np.arange(n), p))
    thresholds = alpha / (n - np.arange(n))
    rejected = []
    for rank, idx in enumerate(order):
        if p[idx] <= thresholds[rank]:
            rejected.append(int(idx))
        else:
            break
    return BaselineResult(rejected=frozenset(rejected), thresholds=tuple(thresholds))


def fallback(pvalues, order, alpha: float, v: int) -> BaselineResult:
    """Ordered testing at level alpha / v, stopping after v failures.

    ``order`` must be a permutation of all indices, chosen independently
    of the p-values (e.g. from side information).
    """
    p = _check_pvalues(pvalues)
    if v < 1:
        raise DomainError(f"v must be >= 1, got {v}")
    order = np.asarray(list(order), dtype=np.int64)
    if sorted(order.tolist()) != list(range(p.size)):
        raise DomainError("order must be a permutation of all indices")
    threshold = alpha / v
    rejected = []
    failures = 0
    for idx in order:
        if p[idx] <= threshold:
            rejected.append(int(idx))
        else:
            failures += 1
            if failures >= v:
                break
    return BaselineResult(rejected=frozenset(rejected), thresholds=(threshold,))
