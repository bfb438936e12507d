"""Interactive testing sessions.

A session owns the full decomposition of every p-value but releases
information only as the protocol allows: analysts see covariates and
masked values for everything, plus the revealed p-values of hypotheses
that have been removed from the candidate set (and, for gap schemes,
the middle band that was never masked).  Hidden bits stay quarantined
until their hypothesis is excluded or the session stops.

Sessions are single-writer objects: call ``exclude`` from one thread at
a time.  Views are immutable snapshots and safe to share.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, JournalError, QuarantineError, StateError
from .masking import MaskingScheme, feasible, k_fwer_estimate, mask, meets_level

ACTIVE = "active"
EXCLUDED = "excluded"
MIDDLE_BAND = "middle_band"

_STATE_NAMES = (ACTIVE, EXCLUDED, MIDDLE_BAND)
_STATE_NAME_ARR = np.array(_STATE_NAMES)
_S_ACTIVE, _S_EXCLUDED, _S_MIDDLE = 0, 1, 2

DISCLOSURES = ("strict", "estimate_visible")


@dataclass(frozen=True)
class SessionConfig:
    """Immutable configuration fixed before any data is revealed."""

    scheme: MaskingScheme
    alpha: float
    k: int = 1
    adjusted_start: bool = False
    rng_seed: int = 0
    disclosure: str = "strict"

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.disclosure not in DISCLOSURES:
            raise ConfigError(f"disclosure must be one of {DISCLOSURES}")
        if self.adjusted_start and self.k != 1:
            raise ConfigError("adjusted start is defined only for k = 1")
        if not feasible(self.scheme, self.alpha):
            raise ConfigError(
                f"scheme {self.scheme} cannot reach level alpha={self.alpha}; "
                "no rejection would ever be made"
            )

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.to_dict(),
            "alpha": self.alpha,
            "k": self.k,
            "adjusted_start": self.adjusted_start,
            "rng_seed": self.rng_seed,
            "disclosure": self.disclosure,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        return cls(
            scheme=MaskingScheme.from_dict(d["scheme"]),
            alpha=d["alpha"],
            k=d.get("k", 1),
            adjusted_start=d.get("adjusted_start", False),
            rng_seed=d.get("rng_seed", 0),
            disclosure=d.get("disclosure", "strict"),
        )


class HypothesisRecord:
    """Read view of one hypothesis with quarantine enforcement.

    ``hidden_bit`` and ``plain_p`` raise :class:`QuarantineError` while
    the hypothesis is active and the session has not stopped.
    """

    __slots__ = ("_session", "index")

    def __init__(self, session: "Session", index: int):
        self._session = session
        self.index = index

    @property
    def covariates(self) -> tuple:
        return tuple(self._session._covariates[self.index])

    @property
    def state(self) -> str:
        return _STATE_NAMES[self._session._state[self.index]]

    @property
    def g_value(self) -> Optional[float]:
        g = self._session._g[self.index]
        return None if np.isnan(g) else float(g)

    @property
    def _released(self) -> bool:
        return (
            self._session._state[self.index] != _S_ACTIVE
            or self._session.status == "stopped"
        )

    @property
    def hidden_bit(self) -> Optional[int]:
        if not self._released:
            raise QuarantineError(f"hidden bit of hypothesis {self.index} is quarantined")
        h = int(self._session._h[self.index])
        return h if h != 0 else None

    @property
    def plain_p(self) -> float:
        if not self._released:
            raise QuarantineError(f"p-value of hypothesis {self.index} is quarantined")
        return float(self._session._p[self.index])


@dataclass(frozen=True)
class AnalystView:
    """Everything an analyst may see at the current step.

    Per-hypothesis arrays are aligned by index.  ``g`` is NaN for
    middle-band hypotheses (they were never masked) and ``p`` is NaN
    wherever the p-value is still quarantined.  In strict disclosure
    mode ``estimate`` is None; only the stopped flag leaks anything
    about the error estimate.
    """

    scheme: MaskingScheme
    alpha: float
    k: int
    step: int
    stopped: bool
    estimate: Optional[float]
    covariates: np.ndarray
    g: np.ndarray
    state: np.ndarray
    p: np.ndarray

    @property
    def n(self) -> int:
        return len(self.g)

    @property
    def active_mask(self) -> np.ndarray:
        return self.state == ACTIVE

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.state == ACTIVE)

    def to_dict(self) -> dict:
        """JSON-ready form with snake_case keys; NaN becomes null."""
        hyps = []
        for i in range(self.n):
            g = self.g[i]
            p = self.p[i]
            hyps.append(
                {
                    "index": i,
                    "covariates": [float(c) for c in self.covariates[i]],
                    "g": None if np.isnan(g) else float(g),
                    "state": str(self.state[i]),
                    "p": None if np.isnan(p) else float(p),
                }
            )
        return {
            "scheme": self.scheme.to_dict(),
            "alpha": self.alpha,
            "k": self.k,
            "step": self.step,
            "stopped": self.stopped,
            "estimate": self.estimate,
            "hypotheses": hyps,
        }


@dataclass(frozen=True)
class StepOutcome:
    """Result of one exclusion step."""

    stopped: bool
    rejections: Optional[frozenset] = None


def mask_arrays(pvalues: np.ndarray, scheme: MaskingScheme):
    """Vectorized masking of an array of p-values.

    Returns (h, g, p) with h in {-1, 0, +1} (0 meaning no bit, i.e. the
    gap middle band) and g NaN where no masked value exists.  Must agree
    with :func:`ifwer.masking.mask` elementwise.
    """
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        raise DomainError("p-value list must be non-empty")
    if np.isnan(p).any() or (p < 0.0).any() or (p > 1.0).any():
        raise DomainError("p-values must lie in [0, 1]")
    h = np.zeros(p.shape, dtype=np.int8)
    g = np.full(p.shape, np.nan)
    lo = scheme.lower
    up = scheme.upper
    plus = p < lo
    h[plus] = 1
    g[plus] = p[plus]
    minus = p > up if scheme.is_gap else ~plus
    h[minus] = -1
    v = scheme.variant
    if v == "tent":
        g[minus] = scheme.p_star / (1.0 - scheme.p_star) * (1.0 - p[minus])
    elif v == "railway":
        g[minus] = scheme.p_star / (1.0 - scheme.p_star) * (p[minus] - scheme.p_star)
    elif v == "gap":
        g[minus] = scheme.p_l / (1.0 - scheme.p_u) * (1.0 - p[minus])
    else:
        g[minus] = scheme.p_l / (1.0 - scheme.p_u) * (p[minus] - scheme.p_u)
    return h, g, p


class Session:
    """The interactive test over one batch of hypotheses.

    Parameters
    ----------
    pvalues : sequence of float
        One p-value per hypothesis, each in [0, 1].
    covariates : sequence of sequences, optional
        Fixed-length side-information vector per hypothesis (grid
        coordinates, a parent index for trees, or arbitrary features).
        Defaults to empty vectors.
    config : SessionConfig

    If the stop condition already holds with the full candidate set, the
    session stops at creation; with ``adjusted_start`` enabled it spends
    the remaining error budget on randomized extra rejections instead.
    """

    def __init__(self, pvalues, covariates, config: SessionConfig):
        self.config = config
        p = np.asarray(list(pvalues), dtype=float)
        if p.size == 0:
            raise DomainError("p-value list must be non-empty")
        cov = _normalize_covariates(p.size, covariates)
        self._h, self._g, self._p = mask_arrays(p, config.scheme)
        self._covariates = cov
        self._state = np.where(self._h == 0, _S_MIDDLE, _S_ACTIVE).astype(np.int8)
        self._excluded_step = np.full(p.size, -1, dtype=np.int64)
        self._n_minus = int((self._h[self._state == _S_ACTIVE] == -1).sum())
        self._step = 0
        self._rng_counter = 0
        self._adjusted_rejections: Optional[tuple] = None
        self.status = "active"
        self.rejections: Optional[frozenset] = None
        self.exclusion_log: list = []
        self._digest = _inputs_digest(config, p, cov)
        if self._meets_level():
            if config.adjusted_start:
                self._run_adjusted_start()
            else:
                self._stop()

    # -- internals ----------------------------------------------------

    def _meets_level(self) -> bool:
        est = k_fwer_estimate(self._n_minus, self.config.k, self.config.scheme)
        return meets_level(est, self.config.alpha)

    def _current_estimate(self) -> float:
        return k_fwer_estimate(self._n_minus, self.config.k, self.config.scheme)

    def _active_plus(self) -> np.ndarray:
        return np.flatnonzero((self._state == _S_ACTIVE) & (self._h == 1))

    def _stop(self, extra: Iterable[int] = ()):
        self.rejections = frozenset(int(i) for i in self._active_plus()) | frozenset(extra)
        self.status = "stopped"

    def _run_adjusted_start(self):
        est0 = self._current_estimate()
        minus = np.flatnonzero((self._state == _S_ACTIVE) & (self._h == -1))
        extras: tuple = ()
        if minus.size > 0:
            prob = adjusted_start_probability(self.config.alpha, est0, minus.size)
            gen = np.random.Generator(np.random.Philox(key=self.config.rng_seed))
            u = gen.uniform(size=minus.size)
            self._rng_counter += minus.size
            extras = tuple(int(i) for i in minus[u < prob])
        self._adjusted_rejections = extras
        self._stop(extras)

    # -- operations ---------------------------------------------------

    @property
    def n(self) -> int:
        return self._p.size

    @property
    def step(self) -> int:
        return self._step

    @property
    def stopped(self) -> bool:
        return self.status == "stopped"

    def record(self, index: int) -> HypothesisRecord:
        if not 0 <= index < self.n:
            raise DomainError(f"no hypothesis with index {index}")
        return HypothesisRecord(self, index)

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self._state == _S_ACTIVE)

    def view(self) -> AnalystView:
        """Snapshot of exactly the information the analyst may use."""
        visible = self._state != _S_ACTIVE
        p = np.where(visible, self._p, np.nan)
        estimate = None
        if self.config.disclosure == "estimate_visible":
            estimate = self._current_estimate()
        return AnalystView(
            scheme=self.config.scheme,
            alpha=self.config.alpha,
            k=self.config.k,
            step=self._step,
            stopped=self.stopped,
            estimate=estimate,
            covariates=self._covariates.copy(),
            g=self._g.copy(),
            state=_STATE_NAME_ARR[self._state],
            p=p,
        )

    def exclude(self, indices) -> StepOutcome:
        """Remove hypotheses from the candidate set and recheck the stop rule.

        The removed hypotheses' p-values and hidden bits become visible.
        Raises :class:`StateError` on a stopped session and
        :class:`DomainError` if any index is not currently active.
        """
        if self.stopped:
            raise StateError("session already stopped")
        idx = np.array(sorted({int(i) for i in indices}), dtype=np.int64)
        if idx.size == 0:
            raise DomainError("exclusion set must be non-empty")
        if (idx < 0).any() or (idx >= self.n).any():
            raise DomainError("exclusion index out of range")
        if (self._state[idx] != _S_ACTIVE).any():
            bad = idx[self._state[idx] != _S_ACTIVE]
            raise DomainError(f"indices not active: {bad.tolist()}")
        self._step += 1
        self._state[idx] = _S_EXCLUDED
        self._excluded_step[idx] = self._step
        self._n_minus -= int((self._h[idx] == -1).sum())
        self.exclusion_log.append((self._step, tuple(int(i) for i in idx)))
        if self._meets_level():
            self._stop()
            return StepOutcome(stopped=True, rejections=self.rejections)
        return StepOutcome(stopped=False)

    def adjusted_start(self) -> StepOutcome:
        """Spend leftover budget on randomized rejections at step 0.

        Applied automatically at creation when the configuration enables
        it, so calling this directly only reports why it cannot run.
        """
        if not self.config.adjusted_start:
            raise ConfigError("adjusted start is not enabled in this configuration")
        if self._adjusted_rejections is not None:
            raise StateError("adjusted start was already applied at creation")
        if self._step > 0 or self.stopped:
            raise StateError("adjusted start is only available at step 0")
        raise StateError("stop condition does not hold at step 0")

    def journal(self) -> str:
        """Serialized event log; replayable with the original inputs."""
        lines = [journal_header(self.config, self._digest)]
        if self._adjusted_rejections is not None:
            idx = ",".join(str(i) for i in sorted(self._adjusted_rejections))
            lines.append(f"0\t{idx}\t{self._rng_counter}")
        for step, idx in self.exclusion_log:
            lines.append(f"{step}\t{','.join(str(i) for i in idx)}\t{self._rng_counter}")
        return "\n".join(lines) + "\n"


def adjusted_start_probability(alpha: float, estimate0: float, n_minus0: int) -> float:
    """Per-hypothesis probability of a randomized extra rejection.

    With remaining budget alpha - estimate0 spread over the n_minus0
    hypotheses carrying a -1 bit, each is independently rejected with
    probability 1 - (1 - alpha + estimate0)^(1 / n_minus0).
    """
    if n_minus0 < 1:
        raise DomainError("probability undefined for an empty minus set")
    base = 1.0 - alpha + estimate0
    if base >= 1.0:
        return 0.0
    return 1.0 - base ** (1.0 / n_minus0)


def _normalize_covariates(n: int, covariates) -> np.ndarray:
    if covariates is None:
        cov = np.zeros((n, 0))
    else:
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(n, -1)
    if len(cov) != n:
        raise DomainError(f"{n} p-values but {len(cov)} covariate vectors")
    return cov


def _canonical_inputs(config: SessionConfig, pvalues, covariates) -> bytes:
    payload = {
        "config": config.to_dict(),
        "pvalues": [float(x) for x in np.asarray(pvalues, dtype=float)],
        "covariates": [[float(c) for c in row] for row in np.asarray(covariates, dtype=float)],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def _inputs_digest(config: SessionConfig, pvalues, covariates) -> str:
    return hashlib.sha256(_canonical_inputs(config, pvalues, covariates)).hexdigest()


def journal_header(config: SessionConfig, digest: str) -> str:
    return f"{digest}\t{json.dumps(config.to_dict(), sort_keys=True, separators=(',', ':'))}"


def replay(log: str, pvalues, covariates) -> Session:
    """Rebuild a session from its journal and the original inputs.

    The header digest must match the inputs; every event must apply
    cleanly and any randomized draws must reproduce exactly.  A
    truncated log yields the session as of the truncation point.
    """
    lines = [ln for ln in log.splitlines() if ln.strip()]
    if not lines:
        raise JournalError("empty journal")
    head = lines[0].split("\t")
    if len(head) != 2:
        raise JournalError("malformed journal header")
    digest, config_json = head
    try:
        config = SessionConfig.from_dict(json.loads(config_json))
    except (ValueError, KeyError) as exc:
        raise JournalError(f"malformed config in journal header: {exc}") from exc
    p = np.asarray(list(pvalues), dtype=float)
    cov = _normalize_covariates(p.size, covariates)
    if _inputs_digest(config, p, cov) != digest:
        raise JournalError("journal digest does not match config and inputs")
    session = Session(p, cov, config)
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != 3:
            raise JournalError(f"malformed journal record: {ln!r}")
        step = int(parts[0])
        idx = tuple(int(i) for i in parts[1].split(",") if i != "")
        counter = int(parts[2])
        if step == 0:
            if session._adjusted_rejections is None or tuple(
                sorted(session._adjusted_rejections)
            ) != idx:
                raise JournalError("adjusted-start record does not match a replayed draw")
        else:
            if session.stopped:
                raise JournalError(f"journal continues past the stopping step: {ln!r}")
            if step != session.step + 1:
                raise JournalError(f"journal steps out of order at: {ln!r}")
            session.exclude(idx)
        if counter != session._rng_counter:
            raise JournalError(f"journal rng counter mismatch at: {ln!r}")
    return session
