"""trigkit: event trigger detection via transformer sequence labeling.

Sentences are labeled with IOB2 trigger tags by a small from-scratch
transformer; training combines the token tagging loss with an optional
sentence-level event-presence loss read off the [CLS] vector. The
package ships its own reverse-mode autodiff, a synthetic-corpus
generator, an exact-match trigger scorer, a seeded training harness,
and both a CLI (``trigkit``) and a scikit-learn style estimator.
"""

from .autodiff import Adam, Parameter, Tensor
from .corpus import (
    Batch,
    Corpus,
    Sentence,
    SynthSpec,
    Vocab,
    build_vocab,
    generate_synthetic,
    load_corpus,
    make_batch,
    make_batches,
    save_corpus,
)
from .encoder import EncoderConfig, EncoderOutput, TransformerEncoder
from .errors import (
    AlignmentError,
    CheckpointError,
    ConfigError,
    DivergenceError,
    LengthError,
    NumericError,
    ParseError,
    ShapeError,
    TrigkitError,
    ValidationError,
)
from .estimator import TriggerTagger
from .gradcheck import run_gradient_check
from .harness import (
    AblationResult,
    RunRecord,
    SweepResult,
    TrainConfig,
    ablate,
    profile,
    sweep,
    train,
)
from .labels import LabelSet, TriggerSpan, decode_iob2, encode_iob2
from .metrics import (
    EvalReport,
    RunComparison,
    compare_runs,
    misclassification_fraction,
    score_triggers,
    sentence_event_accuracy,
)
from .model import (
    SentencePrediction,
    TriggerModel,
    joint_loss,
    load_checkpoint,
    predict,
    predict_batch,
    predict_sentences,
    save_checkpoint,
    sep_loss,
    token_loss,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AblationResult",
    "AlignmentError",
    "Batch",
    "CheckpointError",
    "ConfigError",
    "Corpus",
    "DivergenceError",
    "EncoderConfig",
    "EncoderOutput",
    "EvalReport",
    "LabelSet",
    "LengthError",
    "NumericError",
    "Parameter",
    "ParseError",
    "RunComparison",
    "RunRecord",
    "Sentence",
    "SentencePrediction",
    "ShapeError",
    "SweepResult",
    "SynthSpec",
    "Tensor",
    "TrainConfig",
    "TransformerEncoder",
    "TriggerModel",
    "TriggerSpan",
    "TriggerTagger",
    "TrigkitError",
    "ValidationError",
    "Vocab",
    "ablate",
    "build_vocab",
    "compare_runs",
    "decode_iob2",
    "encode_iob2",
    "generate_synthetic",
    "joint_loss",
    "load_checkpoint",
    "load_corpus",
    "make_batch",
    "make_batches",
    "misclassification_fraction",
    "predict",
    "predict_batch",
    "predict_sentences",
    "profile",
    "run_gradient_check",
    "save_checkpoint",
    "save_corpus",
    "score_triggers",
    "sentence_event_accuracy",
    "sep_loss",
    "sweep",
    "token_loss",
    "train",
]
