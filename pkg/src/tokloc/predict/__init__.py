"""Hallucination predictors: per-token scorers with a scan rule, and
per-sample sequence encoders with a pointer head."""

from tokloc.predict.base import (
    ModelError,
    ModelKind,
    PredictorModel,
    TrainConfig,
    load_model,
    save_model,
)
from tokloc.predict.forest import TreeEnsembleScorer
from tokloc.predict.pointer import (
    ENCODER_CLASSES,
    AttentionPointer,
    ConvolutionalPointer,
    RecurrentPointer,
    finite_difference_check,
    predict_pointer,
    train_pointer,
)
from tokloc.predict.tokens import (
    FeedForwardScorer,
    LogisticScorer,
    downsample,
    predict_scan,
    train_token_classifier,
)

_PAYLOAD_CLASSES = {
    ModelKind.TREE_ENSEMBLE: TreeEnsembleScorer,
    ModelKind.LINEAR_LOGISTIC: LogisticScorer,
    ModelKind.FEED_FORWARD: FeedForwardScorer,
    ModelKind.RECURRENT_POINTER: RecurrentPointer,
    ModelKind.CONVOLUTIONAL_POINTER: ConvolutionalPointer,
    ModelKind.ATTENTION_POINTER: AttentionPointer,
}


def payload_class(kind: ModelKind):
    return _PAYLOAD_CLASSES[kind]


__all__ = [
    "AttentionPointer",
    "ConvolutionalPointer",
    "ENCODER_CLASSES",
    "FeedForwardScorer",
    "LogisticScorer",
    "ModelError",
    "ModelKind",
    "PredictorModel",
    "RecurrentPointer",
    "TrainConfig",
    "TreeEnsembleScorer",
    "downsample",
    "finite_difference_check",
    "load_model",
    "payload_class",
    "predict_pointer",
    "predict_scan",
    "save_model",
    "train_pointer",
    "train_token_classifier",
]
