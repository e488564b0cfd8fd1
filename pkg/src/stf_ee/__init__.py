"""Event extraction with compatibility-guided self-training.

A base trigger/argument extractor, a path-compatibility scorer over AMR
graphs, and a self-training loop in which scores in [-1, 1] rescale (and
can negate) the loss on pseudo-labeled samples.
"""
from .corpus import (
    Argument,
    EventMention,
    FlaggedPrediction,
    LabeledSentence,
    SynthConfig,
    generate_synthetic,
    inject_amr_noise,
)
from .extractor import EventExtractor, EventGraphPrediction
from .labels import LabelSchema
from .metrics import (
    PRF,
    average_compatibility,
    f1_argument_classification,
    f1_trigger_classification,
    scorer_agreement,
    select_checkpoint,
    sweep_report,
)
from .scorer import CompatibilityScorer, ScoringExample, build_scoring_examples, make_negatives
from .selftrain import (
    CheckpointSeries,
    PseudoSample,
    StfConfig,
    beta_schedule,
    compat_transform,
    generate_pseudo_labels,
    run_stf,
    stf_loss,
    threshold_filter,
    vanilla_self_train,
)

__version__ = "0.1.0"

__all__ = [
    "Argument",
    "EventMention",
    "FlaggedPrediction",
    "LabeledSentence",
    "SynthConfig",
    "generate_synthetic",
    "inject_amr_noise",
    "EventExtractor",
    "EventGraphPrediction",
    "LabelSchema",
    "PRF",
    "average_compatibility",
    "f1_argument_classification",
    "f1_trigger_classification",
    "scorer_agreement",
    "select_checkpoint",
    "sweep_report",
    "CompatibilityScorer",
    "ScoringExample",
    "build_scoring_examples",
    "make_negatives",
    "CheckpointSeries",
    "PseudoSample",
    "StfConfig",
    "beta_schedule",
    "compat_transform",
    "generate_pseudo_labels",
    "run_stf",
    "stf_loss",
    "threshold_filter",
    "vanilla_self_train",
]
