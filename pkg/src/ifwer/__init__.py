"""Interactive multiple testing with familywise error rate control.

The package implements an interactive test in which p-values are split
into a visible masked value and a hidden sign bit.  An analyst (or an
automated strategy) progressively shrinks a candidate rejection set
using only permitted information; hidden bits of removed hypotheses are
revealed as the procedure runs, and the test stops once an internal
estimate of the familywise error rate drops to the target level.
"""

from .baselines import BaselineResult, fallback, holm, sidak
from .errors import (
    ConfigError,
    DomainError,
    FitError,
    IfwerError,
    JournalError,
    QuarantineError,
    StateError,
)
from .masking import (
    MaskedPair,
    MaskingScheme,
    budget,
    feasible,
    fwer_estimate,
    hidden_bit_rate,
    invert,
    k_fwer_estimate,
    mask,
    meets_level,
)
from .scoring import BasisSpec, EmScorer, MixtureModel, Posterior, fit, tree_monotonize
from .session import AnalystView, Session, SessionConfig, StepOutcome, replay
from .shrinkers import (
    ConePeel,
    ConePeelParams,
    LowestScore,
    SubtreePrune,
    make_strategy,
    neg_g_scores,
    run_until_stop,
)
from .simulation import (
    ExperimentConfig,
    GridSpec,
    MethodSpec,
    Summary,
    TreeSpec,
    gen_grid,
    gen_tree,
    mirror_conservative_check,
    run_experiment,
)

__all__ = [
    "AnalystView",
    "BaselineResult",
    "BasisSpec",
    "ConePeel",
    "ConePeelParams",
    "ConfigError",
    "DomainError",
    "EmScorer",
    "ExperimentConfig",
    "FitError",
    "GridSpec",
    "IfwerError",
    "JournalError",
    "LowestScore",
    "MaskedPair",
    "MaskingScheme",
    "MethodSpec",
    "MixtureModel",
    "Posterior",
    "QuarantineError",
    "Session",
    "SessionConfig",
    "StateError",
    "StepOutcome",
    "SubtreePrune",
    "Summary",
    "TreeSpec",
    "budget",
    "fallback",
    "feasible",
    "fit",
    "fwer_estimate",
    "gen_grid",
    "gen_tree",
    "hidden_bit_rate",
    "holm",
    "invert",
    "k_fwer_estimate",
    "make_strategy",
    "mask",
    "meets_level",
    "mirror_conservative_check",
    "neg_g_scores",
    "replay",
    "run_experiment",
    "run_until_stop",
    "sidak",
    "tree_monotonize",
]

__version__ = "0.1.0"
