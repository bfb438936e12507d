"""EM estimation of per-hypothesis non-null probabilities.

Works on z-scores z = quantile(1 - p).  A masked p-value pins its
z-score down to one of two candidates: the observed folded value, or its
image under the scheme's fold transform t.  Treating the true z-scores
as latent, an EM pass estimates the alternative mean, a logistic model
for the non-null prior over covariates, and per-hypothesis posteriors
over (which fold branch, null or non-null).  The posterior non-null
probability is the score used to order exclusions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, ndtr, ndtri

from .errors import ConfigError, DomainError, FitError
from .masking import MaskingScheme
from .session import ACTIVE, AnalystView

P_CLAMP = 1e-15
_SQRT_2PI = math.sqrt(2.0 * math.pi)

IRLS_MAX_ITER = 25
IRLS_GRAD_TOL = 1e-6
IRLS_RIDGE = 1e-6


def normal_cdf(z):
    """Standard Gaussian CDF."""
    return ndtr(z)


def normal_quantile(u):
    """Inverse standard Gaussian CDF; defined on (0, 1) only."""
    u_arr = np.asarray(u, dtype=float)
    if (u_arr <= 0.0).any() or (u_arr >= 1.0).any() or np.isnan(u_arr).any():
        raise DomainError("quantile argument must lie strictly inside (0, 1)")
    return ndtri(u)


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _clamp_p(p):
    return np.clip(p, P_CLAMP, 1.0 - P_CLAMP)


class FoldTransforms:
    """The scheme-specific map t sending the hidden branch onto the observed one.

    For a masked hypothesis with observed z the true z-score is either z
    itself (p-value below the lower threshold) or t_inverse(z).  All maps
    are expressed through the Gaussian CDF, and ``jacobian`` is the
    absolute derivative |d t_inverse / dz| used to weight the folded
    branch's density.
    """

    def __init__(self, scheme: MaskingScheme):
        self.scheme = scheme
        if scheme.is_gap:
            self.ratio = scheme.p_l / (1.0 - scheme.p_u)
        else:
            self.ratio = scheme.p_star / (1.0 - scheme.p_star)
        self.flipped = scheme.variant in ("railway", "gap_railway")
        self.lower = scheme.lower

    def forward(self, z):
        """t(z): image of a hidden-branch z-score in the observed range."""
        if self.flipped:
            return ndtri(1.0 - self.lower + self.ratio * ndtr(z))
        return ndtri(1.0 - self.ratio * ndtr(z))

    def inverse(self, z_obs):
        """t^{-1}(z): hidden-branch candidate for an observed z-score."""
        if self.flipped:
            return ndtri((ndtr(z_obs) - 1.0 + self.lower) / self.ratio)
        return ndtri(ndtr(-z_obs) / self.ratio)

    def jacobian(self, z_obs, z_inv=None):
        """|(t^{-1})'(z)|, the folded branch's change-of-variable factor."""
        if z_inv is None:
            z_inv = self.inverse(z_obs)
        return _phi(z_obs) / (self.ratio * _phi(z_inv))


def observed_z(g: Optional[float], plain_p: Optional[float], scheme: MaskingScheme):
    """Observed z-score of one hypothesis and which branch produced it.

    A revealed p-value (excluded hypothesis or gap middle band) gives the
    exact z-score (branch "plain"); a masked value gives the folded
    observation quantile(1 - g) (branch "folded").
    """
    if plain_p is not None:
        return float(ndtri(1.0 - _clamp_p(plain_p))), "plain"
    if g is None:
        raise DomainError("record carries neither a masked value nor a plain p")
    return float(ndtri(1.0 - _clamp_p(g))), "folded"


@dataclass(frozen=True)
class BasisSpec:
    """How to expand covariates into a design matrix for the non-null prior.

    ``tensor_spline`` builds a per-axis natural cubic spline basis with
    ``knots`` interior knots at coordinate quantiles and takes the tensor
    product across axes (intercept included).  ``raw_polynomial`` uses
    all monomials of total degree <= ``degree``.  ``custom`` uses a fixed
    matrix as-is.
    """

    kind: str = "tensor_spline"
    knots: int = 3
    degree: int = 2
    matrix: Optional[np.ndarray] = None

    def build(self, covariates: np.ndarray) -> np.ndarray:
        n = len(covariates)
        if self.kind == "custom":
            if self.matrix is None or len(self.matrix) != n:
                raise ConfigError("custom basis needs a matrix with one row per hypothesis")
            return np.asarray(self.matrix, dtype=float)
        if self.kind == "raw_polynomial":
            return _polynomial_design(covariates, self.degree)
        if self.kind == "tensor_spline":
            return _tensor_spline_design(covariates, self.knots)
        raise ConfigError(f"unknown basis kind {self.kind!r}")


def _polynomial_design(covariates: np.ndarray, degree: int) -> np.ndarray:
    n, d = covariates.shape
    if degree < 0:
        raise ConfigError(f"degree must be >= 0, got {degree}")
    cols = [np.ones(n)]
    if d > 0 and degree > 0:
        import itertools

        for exps in itertools.product(range(degree + 1), repeat=d):
            if 0 < sum(exps) <= degree:
                col = np.ones(n)
                for axis, e in enumerate(exps):
                    if e:
                        col = col * covariates[:, axis] ** e
                cols.append(col)
    return np.column_stack(cols)


def _natural_cubic_columns(x: np.ndarray, n_interior: int) -> np.ndarray:
    """Natural cubic spline basis on one axis, intercept included.

    Knots sit at the axis extremes plus ``n_interior`` interior
    quantiles; the truncated-power construction with linear tails gives
    n_interior + 2 columns: 1, x, and one curvature term per interior
    knot.
    """
    qs = np.linspace(0.0, 1.0, n_interior + 2)
    knots = np.quantile(x, qs)
    knots = np.unique(knots)
    if knots.size < 3:
        # Degenerate axis: fall back to a linear term.
        return np.column_stack([np.ones(x.size), x])
    k_last = knots[-1]
    k_penult = knots[-2]

    def d(k, xv):
        return (np.clip(xv - k, 0.0, None) ** 3 - np.clip(xv - k_last, 0.0, None) ** 3) / (
            k_last - k
        )

    cols = [np.ones(x.size), x]
    for k in knots[:-2]:
        cols.append(d(k, x) - d(k_penult, x))
    return np.column_stack(cols)


def _tensor_spline_design(covariates: np.ndarray, knots: int) -> np.ndarray:
    n, dims = covariates.shape
    if dims == 0:
        return np.ones((n, 1))
    design = _natural_cubic_columns(covariates[:, 0], knots)
    for axis in range(1, dims):
        nxt = _natural_cubic_columns(covariates[:, axis], knots)
        design = np.einsum("ni,nj->nij", design, nxt).reshape(n, -1)
    return design


@dataclass
class MixtureModel:
    """Alternative mean plus a logistic non-null prior over covariates."""

    mu: float
    beta: np.ndarray
    basis: BasisSpec = field(default_factory=BasisSpec)

    def prior(self, design: np.ndarray) -> np.ndarray:
        return expit(design @ self.beta)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "beta": [float(b) for b in self.beta],
            "basis": {"kind": self.basis.kind, "knots": self.basis.knots,
                      "degree": self.basis.degree},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureModel":
        basis = d.get("basis", {})
        return cls(
            mu=float(d["mu"]),
            beta=np.asarray(d["beta"], dtype=float),
            basis=BasisSpec(
                kind=basis.get("kind", "tensor_spline"),
                knots=basis.get("knots", 3),
                degree=basis.get("degree", 2),
            ),
        )


@dataclass
class Posterior:
    """Joint posterior over (observed branch w, non-null q) per hypothesis.

    a = P(w=1, q=1), b = P(w=1, q=0), c = P(w=0, q=1), d = P(w=0, q=0);
    rows sum to one, and unmasked hypotheses have c = d = 0.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray


@dataclass
class ZData:
    """Pre-transformed observations for EM, built once per view.

    ``z`` holds the observed z-score, ``masked`` marks folded
    observations, and ``z_fold``/``jac`` hold t^{-1}(z) and the fold
    Jacobian where masked (NaN elsewhere).
    """

    z: np.ndarray
    masked: np.ndarray
    design: np.ndarray
    z_fold: np.ndarray
    jac: np.ndarray
    covariates: np.ndarray


def prepare(view_or_data, scheme: MaskingScheme, basis: Optional[BasisSpec] = None,
            design: Optional[np.ndarray] = None) -> ZData:
    """Build :class:`ZData` from an analyst view.

    Active hypotheses contribute folded observations from their masked
    values; excluded and middle-band hypotheses contribute exact
    z-scores from their revealed p-values.
    """
    view: AnalystView = view_or_data
    masked = view.state == ACTIVE
    p_obs = np.where(masked, np.nan, view.p)
    z = np.empty(view.n)
    z[masked] = ndtri(1.0 - _clamp_p(view.g[masked]))
    z[~masked] = ndtri(1.0 - _clamp_p(p_obs[~masked]))
    folds = FoldTransforms(scheme)
    z_fold = np.full(view.n, np.nan)
    jac = np.full(view.n, np.nan)
    if masked.any():
        z_fold[masked] = folds.inverse(z[masked])
        jac[masked] = folds.jacobian(z[masked], z_fold[masked])
    if design is None:
        basis = basis or BasisSpec()
        design = basis.build(view.covariates)
    return ZData(
        z=z, masked=masked, design=design, z_fold=z_fold, jac=jac,
        covariates=view.covariates,
    )


def _branch_densities(model: MixtureModel, data: ZData, pi: Optional[np.ndarray] = None):
    if pi is None:
        pi = model.prior(data.design)
    a = pi * _phi(data.z - model.mu)
    b = (1.0 - pi) * _phi(data.z)
    c = np.zeros_like(a)
    d = np.zeros_like(a)
    m = data.masked
    c[m] = data.jac[m] * pi[m] * _phi(data.z_fold[m] - model.mu)
    d[m] = data.jac[m] * (1.0 - pi[m]) * _phi(data.z_fold[m])
    return a, b, c, d


def e_step(model: MixtureModel, data: ZData) -> Posterior:
    """Posterior over (branch, non-null) given the current model.

    Masked hypotheses use the four-branch formula with the fold
    Jacobian; unmasked ones collapse to the two-branch formula with
    c = d = 0.
    """
    a, b, c, d = _branch_densities(model, data)
    total = a + b + c + d
    return Posterior(a=a / total, b=b / total, c=c / total, d=d / total)


def observed_loglik(model: MixtureModel, data: ZData) -> float:
    """Log-likelihood of the observed (possibly folded) z-scores."""
    a, b, c, d = _branch_densities(model, data)
    return float(np.sum(np.log(a + b + c + d)))


def weighted_logistic_fit(design: np.ndarray, targets: np.ndarray,
                          beta0: Optional[np.ndarray] = None,
                          check_rank: bool = True,
                          max_iter: int = IRLS_MAX_ITER) -> np.ndarray:
    """Ridge-damped IRLS for a logistic model with fractional targets.

    Maximizes sum_i [y_i log pi_i + (1 - y_i) log(1 - pi_i)] minus a
    ridge penalty whose weight enters the normal equations; iterations
    are step-halved to keep the penalized objective non-decreasing.
    Running fewer than the default 25 iterations still improves the
    objective, which is all an EM outer loop needs.
    """
    n, m = design.shape
    if check_rank and np.linalg.matrix_rank(design) < m:
        raise FitError("design matrix is rank-deficient")
    beta = np.zeros(m) if beta0 is None else beta0.astype(float).copy()

    def objective(b):
        eta = design @ b
        # log pi = -log(1 + exp(-eta)); log(1 - pi) = -log(1 + exp(eta))
        return float(
            -np.sum(targets * np.logaddexp(0.0, -eta) + (1.0 - targets) * np.logaddexp(0.0, eta))
            - IRLS_RIDGE * b @ b
        )

    current = objective(beta)
    slack = 1e-9 * (1.0 + abs(current))
    eye = np.eye(m)
    for _ in range(max_iter):
        pi = expit(design @ beta)
        grad = design.T @ (targets - pi) - 2.0 * IRLS_RIDGE * beta
        if np.linalg.norm(grad) < IRLS_GRAD_TOL:
            break
        w = np.maximum(pi * (1.0 - pi), 1e-10)
        hess = design.T @ (design * w[:, None]) + 2.0 * IRLS_RIDGE * eye
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise FitError(f"normal equations not solvable: {exc}") from exc
        if float(np.abs(step).max()) < 1e-10:
            break
        scale = 1.0
        accepted = False
        for _ in range(20):
            cand = beta + scale * step
            val = objective(cand)
            if val >= current - slack:
                beta, current = cand, max(val, current)
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
    if not np.all(np.isfinite(beta)):
        raise FitError("logistic fit diverged")
    return beta


def m_step(post: Posterior, data: ZData, beta0: Optional[np.ndarray] = None,
           basis: Optional[BasisSpec] = None, check_rank: bool = True,
           irls_max_iter: int = IRLS_MAX_ITER) -> MixtureModel:
    """Closed-form alternative mean plus a weighted logistic prior fit."""
    weight = post.a + post.c
    denom = float(weight.sum())
    if denom <= 0.0:
        raise FitError("no posterior mass on the non-null component")
    fold_term = np.where(data.masked, np.nan_to_num(data.z_fold), 0.0)
    mu = float(np.sum(post.a * data.z + post.c * fold_term) / denom)
    beta = weighted_logistic_fit(data.design, weight, beta0=beta0,
                                 check_rank=check_rank, max_iter=irls_max_iter)
    return MixtureModel(mu=mu, beta=beta, basis=basis or BasisSpec())


@dataclass
class FitResult:
    model: MixtureModel
    posterior: Posterior
    loglik_path: list


def fit(data: ZData, scheme: MaskingScheme, init: Optional[MixtureModel] = None,
        iters: int = 20, basis: Optional[BasisSpec] = None,
        irls_max_iter: int = IRLS_MAX_ITER) -> FitResult:
    """Alternate E and M steps, recording the observed log-likelihood."""
    if iters < 1:
        raise DomainError(f"iters must be >= 1, got {iters}")
    if init is None:
        model = MixtureModel(mu=2.5, beta=np.zeros(data.design.shape[1]),
                             basis=basis or BasisSpec())
    else:
        model = init
    if np.linalg.matrix_rank(data.design) < data.design.shape[1]:
        raise FitError("design matrix is rank-deficient")
    path = []
    post = None
    for _ in range(iters):
        post = e_step(model, data)
        model = m_step(post, data, beta0=model.beta, basis=basis, check_rank=False,
                       irls_max_iter=irls_max_iter)
        path.append(observed_loglik(model, data))
    return FitResult(model=model, posterior=post, loglik_path=path)


def scores(post: Posterior) -> np.ndarray:
    """Posterior non-null probability per hypothesis: a + c."""
    return post.a + post.c


def tree_monotonize(pi, parent) -> np.ndarray:
    """Project priors onto the order `parent >= child` by a bottom-up max pass.

    The result is the pointwise-smallest dominator of the input that is
    monotone along every root-to-leaf path (so the pass is idempotent).

    Raises
    ------
    DomainError
        If the parent map contains a cycle or is not a forest.
    """
    pi = np.asarray(pi, dtype=float).copy()
    parent = np.asarray(parent, dtype=np.int64)
    n = pi.size
    if parent.size != n:
        raise DomainError("parent map does not cover all nodes")
    children: list = [[] for _ in range(n)]
    roots = []
    for i, par in enumerate(parent):
        if par < 0:
            roots.append(i)
        elif 0 <= par < n:
            children[par].append(i)
        else:
            raise DomainError(f"parent index {par} out of range")
    order = []
    seen = np.zeros(n, dtype=bool)
    stack = list(roots)
    while stack:
        node = stack.pop()
        if seen[node]:
            raise DomainError("cycle detected in parent map")
        seen[node] = True
        order.append(node)
        stack.extend(children[node])
    if not seen.all():
        raise DomainError("cycle detected in parent map")
    for node in reversed(order):
        par = parent[node]
        if par >= 0 and pi[node] > pi[par]:
            pi[par] = pi[node]
    return pi


class EmScorer:
    """Scorer for :func:`ifwer.shrinkers.run_until_stop` backed by the EM fit.

    Refits from the previous model on every call, so early calls pay the
    full iteration budget and later refits converge quickly.  With
    ``monotonize`` a parent map (from the first covariate column unless
    given) constrains the prior along the tree before scoring.
    """

    def __init__(self, basis: Optional[BasisSpec] = None, iters_first: int = 10,
                 iters_update: int = 2, irls_max_iter: int = 4,
                 monotonize: bool = False, parent=None):
        self.basis = basis
        self.iters_first = iters_first
        self.iters_update = iters_update
        self.irls_max_iter = irls_max_iter
        self.monotonize = monotonize
        self.parent = parent
        self._model: Optional[MixtureModel] = None
        self._design: Optional[np.ndarray] = None

    def __call__(self, view: AnalystView) -> np.ndarray:
        basis = self.basis or BasisSpec()
        if self._design is None:
            self._design = basis.build(view.covariates)
        data = prepare(view, view.scheme, design=self._design)
        iters = self.iters_first if self._model is None else self.iters_update
        result = fit(data, view.scheme, init=self._model, iters=iters, basis=basis,
                     irls_max_iter=self.irls_max_iter)
        self._model = result.model
        post = result.posterior
        if self.monotonize:
            parent = (
                self.parent
                if self.parent is not None
                else view.covariates[:, 0].astype(np.int64)
            )
            pi = tree_monotonize(self._model.prior(data.design), parent)
            a, b, c, d = _branch_densities(self._model, data, pi=pi)
            total = a + b + c + d
            post = Posterior(a=a / total, b=b / total, c=c / total, d=d / total)
        return scores(post)
