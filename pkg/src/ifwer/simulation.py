"""Synthetic data generators, the replication harness, and density checks.

The grid setting places a disc of non-nulls on a rectangular lattice and
draws one Gaussian z-score per cell (optionally equi-correlated); the
tree setting grows a fixed-fanout hierarchy with a small connected
non-null set inside one top-level subtree.  ``run_experiment`` replays a
method over independent replications and reports empirical error and
power with standard errors.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .baselines import fallback, holm, sidak
from .errors import ConfigError, DomainError
from .masking import MaskingScheme
from .scoring import BasisSpec, EmScorer
from .session import Session, SessionConfig
from .shrinkers import make_strategy, neg_g_scores, run_until_stop


@dataclass(frozen=True)
class GridSpec:
    """Lattice of unit-variance Gaussians with a disc of non-nulls."""

    rows: int = 30
    cols: int = 30
    disc_center: tuple = (15.0, 15.0)
    disc_radius: float = 2.5
    mu_alt: float = 3.0
    mu_null: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid must have at least one cell")
        n = self.rows * self.cols
        if not (-1.0 / max(n - 1, 1) <= self.rho < 1.0):
            raise ConfigError(f"rho={self.rho} outside the positive-semidefinite range")
        if self.disc_radius > 0:
            cx, cy = self.disc_center
            r = self.disc_radius
            if cx - r < -0.5 or cy - r < -0.5 or cx + r > self.rows - 0.5 or cy + r > self.cols - 0.5:
                raise ConfigError("non-null disc sticks out of the grid")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def to_dict(self) -> dict:
        return {
            "kind": "grid", "rows": self.rows, "cols": self.cols,
            "disc_center": list(self.disc_center), "disc_radius": self.disc_radius,
            "mu_alt": self.mu_alt, "mu_null": self.mu_null, "rho": self.rho,
        }


@dataclass(frozen=True)
class TreeSpec:
    """Fixed-fanout tree with a connected non-null set under one top node.

    The default shape (root fanout 20, inner fanout 3, five levels) has
    1 + 20 + 60 + 180 + 540 = 801 nodes; the default non-null pattern is
    7 connected nodes inside the first top-level subtree.
    """

    root_fanout: int = 20
    inner_fanout: int = 3
    depth: int = 5
    mu_alt: float = 3.0
    mu_null: float = 0.0
    non_null_nodes: Optional[tuple] = None

    def __post_init__(self):
        if self.root_fanout < 1 or self.inner_fanout < 1 or self.depth < 2:
            raise ConfigError("tree must have positive fanouts and depth >= 2")

    @property
    def n(self) -> int:
        total, level = 1, self.root_fanout
        for _ in range(1, self.depth):
            total += level
            level *= self.inner_fanout
        return total

    def to_dict(self) -> dict:
        return {
            "kind": "tree", "root_fanout": self.root_fanout,
            "inner_fanout": self.inner_fanout, "depth": self.depth,
            "mu_alt": self.mu_alt, "mu_null": self.mu_null,
            "non_null_nodes": list(self.non_null_nodes) if self.non_null_nodes else None,
        }


def tree_parents(spec: TreeSpec) -> np.ndarray:
    """Parent index per node (-1 for the root), in breadth-first order."""
    parents = [-1]
    frontier = [0]
    fanout = spec.root_fanout
    for _ in range(1, spec.depth):
        nxt = []
        for node in frontier:
            for _ in range(fanout if node == 0 else spec.inner_fanout):
                nxt.append(len(parents))
                parents.append(node)
        frontier = nxt
        fanout = spec.inner_fanout
    return np.asarray(parents, dtype=np.int64)


def default_tree_pattern(spec: TreeSpec) -> tuple:
    """Seven connected non-nulls: a top-level node, one child, that
    child's children, and two grandchildren below the first of them."""
    parents = tree_parents(spec)
    children: list = [[] for _ in range(len(parents))]
    for i, par in enumerate(parents):
        if par >= 0:
            children[par].append(i)
    anchor = children[0][0]
    child = children[anchor][0]
    grandchildren = children[child]
    great = children[grandchildren[0]][:2]
    pattern = [anchor, child, *grandchildren, *great]
    return tuple(pattern[:7])


def gen_grid(spec: GridSpec, rng: np.random.Generator):
    """Simulate one grid replication.

    Returns (pvalues, covariates, labels) with covariates the integer
    lattice coordinates and labels True on non-null cells.  Positive
    equi-correlation uses the shared-factor construction; negative uses
    the analytic square root of the equi-correlated covariance.
    """
    coords = np.array(
        [(x, y) for x in range(spec.rows) for y in range(spec.cols)], dtype=float
    )
    cx, cy = spec.disc_center
    d2 = (coords[:, 0] - cx) ** 2 + (coords[:, 1] - cy) ** 2
    disc = d2 <= spec.disc_radius**2 if spec.disc_radius > 0 else np.zeros(spec.n, bool)
    means = np.where(disc, spec.mu_alt, spec.mu_null)
    # A cell is truly non-null only if its mean actually differs.
    labels = disc & (spec.mu_alt != spec.mu_null)
    n = spec.n
    if spec.rho == 0.0:
        noise = rng.standard_normal(n)
    elif spec.rho > 0.0:
        shared = rng.standard_normal()
        noise = np.sqrt(spec.rho) * shared + np.sqrt(1.0 - spec.rho) * rng.standard_normal(n)
    else:
        eps = rng.standard_normal(n)
        mean_eps = eps.mean()
        # Square root of (1 - rho) I + rho 11^T via its eigenspaces.
        noise = np.sqrt(1.0 - spec.rho) * (eps - mean_eps) + np.sqrt(
            1.0 + (n - 1) * spec.rho
        ) * mean_eps
    z = means + noise
    pvalues = ndtr(-z)
    return pvalues, coords, labels


def gen_tree(spec: TreeSpec, rng: np.random.Generator):
    """Simulate one tree replication.

    Returns (pvalues, covariates, labels); the single covariate column
    is the parent index (-1 at the root).  Z-scores are independent.
    """
    parents = tree_parents(spec)
    n = parents.size
    pattern = spec.non_null_nodes or default_tree_pattern(spec)
    pattern_set = set(int(i) for i in pattern)
    outside_parent = [i for i in pattern_set if int(parents[i]) not in pattern_set]
    if len(outside_parent) != 1:
        raise ConfigError("non-null pattern must be a connected subtree")
    pattern_mask = np.zeros(n, dtype=bool)
    pattern_mask[list(pattern_set)] = True
    means = np.where(pattern_mask, spec.mu_alt, spec.mu_null)
    labels = pattern_mask & (spec.mu_alt != spec.mu_null)
    z = means + rng.standard_normal(n)
    pvalues = ndtr(-z)
    return pvalues, parents.reshape(-1, 1).astype(float), labels


@dataclass(frozen=True)
class MethodSpec:
    """Which procedure to run on each replication."""

    kind: str = "ifwer"  # ifwer | sidak | holm | fallback
    scheme: Optional[MaskingScheme] = None
    strategy: str = "cone_peel"  # cone_peel | subtree_prune | lowest_score
    scorer: str = "neg_g"  # neg_g | em
    k: int = 1
    adjusted_start: bool = False
    batch_size: int = 1
    cone_d: int = 5
    cone_delta: float = 0.05
    refit_every: Optional[int] = None
    em_iters_first: int = 10
    em_iters_update: int = 2
    fallback_v: int = 1

    def __post_init__(self):
        if self.kind not in ("ifwer", "sidak", "holm", "fallback"):
            raise ConfigError(f"unknown method kind {self.kind!r}")
        if self.kind == "ifwer" and self.scheme is None:
            raise ConfigError("the interactive method needs a masking scheme")

    @property
    def name(self) -> str:
        if self.kind != "ifwer":
            return self.kind
        parts = ["ifwer", self.scheme.variant, self.strategy, self.scorer]
        if self.k != 1:
            parts.append(f"k{self.k}")
        if self.adjusted_start:
            parts.append("adj")
        return "-".join(parts)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind, "strategy": self.strategy, "scorer": self.scorer,
            "k": self.k, "adjusted_start": self.adjusted_start,
            "batch_size": self.batch_size, "cone_d": self.cone_d,
            "cone_delta": self.cone_delta, "refit_every": self.refit_every,
            "em_iters_first": self.em_iters_first,
            "em_iters_update": self.em_iters_update, "fallback_v": self.fallback_v,
        }
        d["scheme"] = self.scheme.to_dict() if self.scheme else None
        return d


def top_level_design(parent: np.ndarray) -> np.ndarray:
    """Intercept plus one indicator column per top-level subtree.

    Lets the non-null prior vary by branch of the hierarchy, which is
    where a connected non-null set shows up first.
    """
    n = parent.size
    top = np.zeros(n, dtype=np.int64)
    for i in range(n):
        cur = i
        while parent[cur] > 0:
            cur = parent[cur]
        top[i] = cur
    cols = [np.ones(n)]
    for t in np.unique(top[top > 0]):
        cols.append((top == t).astype(float))
    return np.column_stack(cols)


def make_scorer(name: str, strategy: str, covariates: np.ndarray,
                em_iters_first: int = 10, em_iters_update: int = 2):
    """Build a scorer by name, picking a basis that fits the covariates."""
    if name == "neg_g":
        return neg_g_scores
    if name == "em":
        covariates = np.asarray(covariates, dtype=float)
        if strategy == "subtree_prune" or covariates.shape[1] == 1:
            # Tree-style runs: branch-level prior projected onto the
            # parent-dominates-child order.
            parent = covariates[:, 0].astype(np.int64)
            return EmScorer(
                basis=BasisSpec("custom", matrix=top_level_design(parent)),
                iters_first=em_iters_first,
                iters_update=em_iters_update,
                monotonize=strategy == "subtree_prune",
                parent=parent,
            )
        return EmScorer(
            basis=BasisSpec("tensor_spline", knots=3),
            iters_first=em_iters_first,
            iters_update=em_iters_update,
        )
    raise ConfigError(f"unknown scorer {name!r}")


def _make_scorer(method: MethodSpec, covariates: np.ndarray):
    return make_scorer(
        method.scorer, method.strategy, covariates,
        em_iters_first=method.em_iters_first,
        em_iters_update=method.em_iters_update,
    )


def run_method(method: MethodSpec, pvalues, covariates, alpha: float, seed: int) -> frozenset:
    """Run one procedure on one dataset; returns the rejected index set."""
    if method.kind == "sidak":
        return sidak(pvalues, alpha).rejected
    if method.kind == "holm":
        return holm(pvalues, alpha).rejected
    if method.kind == "fallback":
        return fallback(
            pvalues, order=range(len(pvalues)), alpha=alpha, v=method.fallback_v
        ).rejected
    covariates = np.asarray(covariates, dtype=float)
    config = SessionConfig(
        scheme=method.scheme, alpha=alpha, k=method.k,
        adjusted_start=method.adjusted_start, rng_seed=seed,
    )
    session = Session(pvalues, covariates, config)
    parent = covariates[:, 0].astype(np.int64) if covariates.shape[1] >= 1 else None
    strategy = make_strategy(
        method.strategy, parent=parent, batch_size=method.batch_size,
        cone_d=method.cone_d, cone_delta=method.cone_delta,
    )
    scorer = _make_scorer(method, covariates)
    run_until_stop(session, strategy, scorer, refit_every=method.refit_every)
    return session.rejections


@dataclass(frozen=True)
class ExperimentConfig:
    generator: Union[GridSpec, TreeSpec]
    method: MethodSpec
    alpha: float = 0.2
    reps: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "method": self.method.to_dict(),
            "alpha": self.alpha, "reps": self.reps, "seed": self.seed,
        }

    @property
    def config_id(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Summary:
    """Replication summary; power is None for all-null generators."""

    config_id: str
    method: str
    alpha: float
    scheme: str
    reps: int
    empirical_fwer: float
    se_fwer: Optional[float]
    mean_power: Optional[float]
    se_power: Optional[float]
    runtime: float

    CSV_HEADER = "config_id,method,alpha,scheme,reps,fwer,se_fwer,power,se_power"

    def to_csv_row(self) -> str:
        def fmt(x):
            return "NA" if x is None else repr(float(x))

        return ",".join(
            [
                self.config_id, self.method, repr(float(self.alpha)), self.scheme,
                str(self.reps), fmt(self.empirical_fwer), fmt(self.se_fwer),
                fmt(self.mean_power), fmt(self.se_power),
            ]
        )


def _scheme_label(method: MethodSpec) -> str:
    if method.scheme is None:
        return "none"
    s = method.scheme
    if s.is_gap:
        return f"{s.variant}({s.p_l!r},{s.p_u!r})"
    return f"{s.variant}({s.p_star!r})"


def _one_rep(config: ExperimentConfig, child: np.random.SeedSequence):
    data_seed, session_seed = child.spawn(2)
    rng = np.random.default_rng(data_seed)
    if isinstance(config.generator, GridSpec):
        pvalues, covariates, labels = gen_grid(config.generator, rng)
    else:
        pvalues, covariates, labels = gen_tree(config.generator, rng)
    seed = int(session_seed.generate_state(1, np.uint64)[0])
    rejected = run_method(config.method, pvalues, covariates, config.alpha, seed)
    nulls = ~labels
    false_count = sum(1 for i in rejected if nulls[i])
    n_alt = int(labels.sum())
    power = (
        sum(1 for i in rejected if labels[i]) / n_alt if n_alt > 0 else None
    )
    return false_count, power, n_alt


def run_experiment(config: ExperimentConfig, n_jobs: int = 1) -> Summary:
    """Run all replications and aggregate deterministically.

    Identical configs (including seed) give identical summaries; the
    per-rep streams are spawned from the master seed, so the result does
    not depend on scheduling or on n_jobs.
    """
    start = time.perf_counter()
    children = np.random.SeedSequence(config.seed).spawn(config.reps)
    if n_jobs == 1 or config.reps == 1:
        results = [_one_rep(config, child) for child in children]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_one_rep)(config, child) for child in children
        )
    k = config.method.k
    events = [fc >= k for fc, _, _ in results]
    n_alts = {na for _, _, na in results}
    assert len(n_alts) == 1, "non-null count must be constant across reps"
    fwer = float(np.mean(events))
    powers = [pw for _, pw, _ in results if pw is not None]
    if config.reps > 1:
        se_fwer = float(np.sqrt(fwer * (1.0 - fwer) / config.reps))
        se_power = (
            float(np.std(powers, ddof=1) / np.sqrt(len(powers))) if powers else None
        )
    else:
        se_fwer = None
        se_power = None
    return Summary(
        config_id=config.config_id,
        method=config.method.name,
        alpha=config.alpha,
        scheme=_scheme_label(config.method),
        reps=config.reps,
        empirical_fwer=fwer,
        se_fwer=se_fwer,
        mean_power=float(np.mean(powers)) if powers else None,
        se_power=se_power,
        runtime=time.perf_counter() - start,
    )


@dataclass(frozen=True)
class MirrorReport:
    """Histogram comparison of f(a) against the mirrored band density."""

    bins: int
    flagged: tuple
    inconclusive: bool
    min_count: int
    lower_density: tuple
    upper_density: tuple


def mirror_conservative_check(samples, p_star: float, bins: int) -> MirrorReport:
    """Check f(a) <= f(1 - a (1 - p_star) / p_star) bin by bin.

    Compares the density on [0, p_star] against the mirrored band near 1
    and flags bins where the lower density exceeds the mirrored one by
    more than three standard errors.  Bins with fewer than 20 samples on
    either side make the report inconclusive.
    """
    if bins < 2:
        raise DomainError(f"need at least 2 bins, got {bins}")
    if not (0.0 < p_star < 1.0):
        raise DomainError(f"p_star must be in (0, 1), got {p_star}")
    x = np.asarray(list(samples), dtype=float)
    n = x.size
    if n == 0:
        raise DomainError("no samples")
    edges = np.linspace(0.0, p_star, bins + 1)
    width = edges[1] - edges[0]
    ratio = (1.0 - p_star) / p_star
    flagged = []
    lower_density = []
    upper_density = []
    min_count = n
    for b in range(bins):
        lo, hi = edges[b], edges[b + 1]
        c_low = int(((x >= lo) & (x < hi)).sum())
        m_lo, m_hi = 1.0 - ratio * hi, 1.0 - ratio * lo
        c_up = int(((x > m_lo) & (x <= m_hi)).sum())
        min_count = min(min_count, c_low, c_up)
        f_low = c_low / (n * width)
        f_up = c_up / (n * width * ratio)
        se = np.sqrt(
            c_low / (n * width) ** 2 + c_up / (n * width * ratio) ** 2
        )
        lower_density.append(f_low)
        upper_density.append(f_up)
        if f_low > f_up + 3.0 * se:
            flagged.append(b)
    return MirrorReport(
        bins=bins,
        flagged=tuple(flagged),
        inconclusive=min_count < 20,
        min_count=min_count,
        lower_density=tuple(lower_density),
        upper_density=tuple(upper_density),
    )
