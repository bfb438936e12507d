"""Decomposition of p-values into a visible masked value and a hidden bit.

A masking scheme splits each p-value P into two pieces: a masked value g
that an analyst may inspect freely, and a sign bit h that stays hidden
until the hypothesis is removed from the candidate rejection set.  For
null p-values the two pieces are independent, which is what makes
interactive shrinking of the rejection set safe.

Four schemes are supported:

``tent``
    h = +1 iff P < p_star; g = min(P, p_star * (1 - P) / (1 - p_star)).
``railway``
    Same bit; the branch for P >= p_star is flipped to be increasing,
    g = p_star * (P - p_star) / (1 - p_star).
``gap``
    Two thresholds p_l < p_u.  P < p_l gives h = +1 and g = P; P > p_u
    gives h = -1 and g = p_l * (1 - P) / (1 - p_u); p-values in
    [p_l, p_u] are not masked at all and are revealed from the start.
``gap_railway``
    Like gap but with the upper branch increasing,
    g = p_l * (P - p_u) / (1 - p_u).

All functions here are pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, DomainError

VARIANTS = ("tent", "railway", "gap", "gap_railway")
GAP_VARIANTS = ("gap", "gap_railway")


@dataclass(frozen=True)
class MaskingScheme:
    """Which decomposition to use and its parameters.

    ``tent`` and ``railway`` take a single threshold ``p_star`` in (0, 1).
    The gap variants take ``0 < p_l <= p_u < 1``; taking p_l == p_u
    degenerates to the tent/railway map with p_star = p_l.
    """

    variant: str
    p_star: Optional[float] = None
    p_l: Optional[float] = None
    p_u: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown masking variant {self.variant!r}")
        if self.is_gap:
            if self.p_star is not None:
                raise ConfigError("gap variants take p_l/p_u, not p_star")
            if self.p_l is None or self.p_u is None:
                raise ConfigError("gap variants require both p_l and p_u")
            if not (0.0 < self.p_l <= self.p_u < 1.0):
                raise ConfigError(
                    f"need 0 < p_l <= p_u < 1, got p_l={self.p_l}, p_u={self.p_u}"
                )
        else:
            if self.p_l is not None or self.p_u is not None:
                raise ConfigError(f"{self.variant} takes p_star, not p_l/p_u")
            if self.p_star is None or not (0.0 < self.p_star < 1.0):
                raise ConfigError(f"need 0 < p_star < 1, got p_star={self.p_star}")

    @property
    def is_gap(self) -> bool:
        return self.variant in GAP_VARIANTS

    @property
    def lower(self) -> float:
        """Threshold below which h = +1 (p_star, or p_l for gap variants)."""
        return self.p_l if self.is_gap else self.p_star  # type: ignore[return-value]

    @property
    def upper(self) -> float:
        """Threshold above which h = -1 (p_star, or p_u for gap variants)."""
        return self.p_u if self.is_gap else self.p_star  # type: ignore[return-value]

    def to_dict(self) -> dict:
        d = {"variant": self.variant}
        if self.is_gap:
            d["p_l"] = self.p_l
            d["p_u"] = self.p_u
        else:
            d["p_star"] = self.p_star
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MaskingScheme":
        return cls(
            variant=d["variant"],
            p_star=d.get("p_star"),
            p_l=d.get("p_l"),
            p_u=d.get("p_u"),
        )


@dataclass(frozen=True)
class MaskedPair:
    """Result of masking one p-value.

    Exactly one of (h, p_plain) is set: a masked p-value carries the sign
    bit h and the masked value g, while a gap-variant p-value falling in
    [p_l, p_u] skips masking entirely and carries only the original
    p-value.
    """

    h: Optional[int] = None
    g: Optional[float] = None
    p_plain: Optional[float] = None

    def __post_init__(self):
        if (self.h is None) == (self.p_plain is None):
            raise DomainError("exactly one of h and p_plain must be set")
        if self.h is not None and self.h not in (-1, 1):
            raise DomainError(f"h must be +1 or -1, got {self.h}")
        if (self.h is None) != (self.g is None):
            raise DomainError("g must be present exactly when h is")

    @property
    def masked(self) -> bool:
        return self.h is not None


def mask(p: float, scheme: MaskingScheme) -> MaskedPair:
    """Decompose a p-value under the given scheme.

    Ties at the thresholds are deterministic: p == p_star maps to h = -1
    (tent/railway), and p == p_l or p == p_u falls in the revealed middle
    band (gap variants).

    Raises
    ------
    DomainError
        If p is outside [0, 1].
    """
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise DomainError(f"p-value must be in [0, 1], got {p}")
    v = scheme.variant
    if v == "tent":
        if p < scheme.p_star:
            return MaskedPair(h=1, g=p)
        return MaskedPair(h=-1, g=scheme.p_star / (1.0 - scheme.p_star) * (1.0 - p))
    if v == "railway":
        if p < scheme.p_star:
            return MaskedPair(h=1, g=p)
        return MaskedPair(h=-1, g=scheme.p_star / (1.0 - scheme.p_star) * (p - scheme.p_star))
    if v == "gap":
        if p < scheme.p_l:
            return MaskedPair(h=1, g=p)
        if p > scheme.p_u:
            return MaskedPair(h=-1, g=scheme.p_l / (1.0 - scheme.p_u) * (1.0 - p))
        return MaskedPair(p_plain=p)
    # gap_railway
    if p < scheme.p_l:
        return MaskedPair(h=1, g=p)
    if p > scheme.p_u:
        return MaskedPair(h=-1, g=scheme.p_l / (1.0 - scheme.p_u) * (p - scheme.p_u))
    return MaskedPair(p_plain=p)


def invert(pair: MaskedPair, scheme: MaskingScheme) -> float:
    """Recover the unique p-value that masks to ``pair`` under ``scheme``.

    Raises
    ------
    DomainError
        If the (h, g) combination cannot be produced by ``mask`` under
        this scheme, e.g. g >= p_l with h present under a gap variant.
    """
    if not pair.masked:
        return pair.p_plain  # type: ignore[return-value]
    g = pair.g
    if g is None or math.isnan(g) or g < 0.0:
        raise DomainError(f"masked value must be nonnegative, got {g}")
    lo = scheme.lower
    if pair.h == 1:
        if g >= lo:
            raise DomainError(f"h=+1 requires g < {lo}, got {g}")
        return g
    # The h=-1 branch allows one-ulp overshoot of the bound, which mask()
    # can produce at p exactly on the threshold.
    if g > lo * (1.0 + 1e-12):
        raise DomainError(f"h=-1 requires g <= {lo}, got {g}")
    v = scheme.variant
    if v == "tent":
        p = 1.0 - g * (1.0 - scheme.p_star) / scheme.p_star
    elif v == "railway":
        p = scheme.p_star + g * (1.0 - scheme.p_star) / scheme.p_star
    elif v == "gap":
        p = 1.0 - g * (1.0 - scheme.p_u) / scheme.p_l
    else:  # gap_railway
        if g == 0.0:
            raise DomainError("h=-1 under gap_railway requires g > 0")
        p = scheme.p_u + g * (1.0 - scheme.p_u) / scheme.p_l
    return min(1.0, max(0.0, p))


def hidden_bit_rate(scheme: MaskingScheme) -> float:
    """P(h = +1) for a null (uniform) p-value, given that h is observed.

    This is p_star for tent/railway.  For the gap variants the middle
    band is skipped, so the rate conditions on the p-value landing in a
    tail: p_l / (p_l + 1 - p_u).
    """
    if scheme.is_gap:
        return scheme.p_l / (scheme.p_l + 1.0 - scheme.p_u)
    return scheme.p_star


def fwer_estimate(n_minus: int, scheme: MaskingScheme) -> float:
    """Estimated probability of at least one false rejection.

    ``n_minus`` is the number of candidate hypotheses whose hidden bit is
    -1.  The estimate is 1 - (1 - q)^(n_minus + 1) with q the hidden bit
    rate of the scheme.
    """
    if n_minus < 0:
        raise DomainError(f"n_minus must be >= 0, got {n_minus}")
    q = hidden_bit_rate(scheme)
    return 1.0 - (1.0 - q) ** (n_minus + 1)


def k_fwer_estimate(n_minus: int, k: int, scheme: MaskingScheme) -> float:
    """Estimated probability of at least k false rejections.

    Generalizes :func:`fwer_estimate` (the k = 1 case) to
    1 - sum_{i=0}^{k-1} C(n_minus + i, i) (1 - q)^(n_minus + 1) q^i.
    Binomial coefficients are accumulated in log space so large
    candidate sets do not overflow.
    """
    if n_minus < 0:
        raise DomainError(f"n_minus must be >= 0, got {n_minus}")
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    q = hidden_bit_rate(scheme)
    log_q = math.log(q)
    log_1mq = math.log1p(-q)
    total = 0.0
    for i in range(k):
        log_comb = (
            math.lgamma(n_minus + i + 1) - math.lgamma(i + 1) - math.lgamma(n_minus + 1)
        )
        total += math.exp(log_comb + (n_minus + 1) * log_1mq + i * log_q)
    return 1.0 - total


def meets_level(estimate: float, alpha: float) -> bool:
    """Tie-tolerant test of ``estimate <= alpha``.

    Recommended parameter choices make the error estimate exactly equal
    to alpha at the stopping time (e.g. p_star with
    log(1 - alpha) / log(1 - p_star) an integer), so the comparison must
    not hinge on the rounding of 1 - (1 - q)**m.  The slack is far below
    the spacing between estimates at consecutive candidate-set sizes.
    """
    return estimate <= alpha * (1.0 + 1e-9) + 1e-15


def feasible(scheme: MaskingScheme, alpha: float) -> bool:
    """Whether the scheme can ever drive the FWER estimate down to alpha.

    Tent/railway need p_star <= alpha; gap variants need
    (1 - alpha) / alpha * p_l + p_u < 1.  An infeasible scheme has
    ``fwer_estimate(0) > alpha`` and would never reject anything.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    if scheme.is_gap:
        return (1.0 - alpha) / alpha * scheme.p_l + scheme.p_u < 1.0
    return scheme.p_star <= alpha


def budget(alpha: float, scheme: MaskingScheme) -> int:
    """Number of h = -1 hypotheses a stopped candidate set may contain.

    Returns v = floor(log(1 - alpha) / log(1 - q)); the stopping rule
    ``fwer_estimate(n_minus) <= alpha`` holds exactly when n_minus < v.

    Raises
    ------
    ConfigError
        If the scheme is infeasible at this alpha.
    """
    if not feasible(scheme, alpha):
        raise ConfigError(f"scheme {scheme} infeasible at alpha={alpha}")
    q = hidden_bit_rate(scheme)
    v = math.floor(math.log1p(-alpha) / math.log1p(-q))
    # Align with the estimator under floating-point arithmetic so the two
    # characterizations of the stopping rule never disagree.
    while meets_level(fwer_estimate(v, scheme), alpha):
        v += 1
    while v > 1 and not meets_level(fwer_estimate(v - 1, scheme), alpha):
        v -= 1
    return v
