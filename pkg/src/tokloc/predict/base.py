"""Predictor model wrapper, training configuration, save/load."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from tokloc import FEATURE_LAYOUT_VERSION, MODEL_FORMAT_VERSION
from tokloc.container import read_container, write_container


class ModelError(Exception):
    pass


class ModelKind(str, Enum):
    TREE_ENSEMBLE = "tree-ensemble"
    LINEAR_LOGISTIC = "logistic"
    FEED_FORWARD = "feedforward"
    RECURRENT_POINTER = "recurrent"
    CONVOLUTIONAL_POINTER = "conv"
    ATTENTION_POINTER = "attention"


PER_TOKEN_KINDS = frozenset(
    [ModelKind.TREE_ENSEMBLE, ModelKind.LINEAR_LOGISTIC, ModelKind.FEED_FORWARD]
)
POINTER_KINDS = frozenset(
    [ModelKind.RECURRENT_POINTER, ModelKind.CONVOLUTIONAL_POINTER, ModelKind.ATTENTION_POINTER]
)

# Encoder hyperparameters by kind: (hidden_dim, layers).
_ENCODER_DEFAULTS = {
    ModelKind.RECURRENT_POINTER: (512, 2),
    ModelKind.CONVOLUTIONAL_POINTER: (512, 4),
    ModelKind.ATTENTION_POINTER: (256, 4),
    ModelKind.FEED_FORWARD: (64, 1),
}


@dataclass(frozen=True)
class TrainConfig:
    """Training knobs; unset hidden_dim/layers use per-architecture defaults."""

    downsample_ratio: float = 3.0
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    hidden_dim: int | None = None
    layers: int | None = None
    heads: int = 8
    ff_dim: int = 1024
    kernel_size: int = 3
    n_trees: int = 100
    max_depth: int = 12
    max_seq_len: int = 2048
    seed: int = 0

    def __post_init__(self):
        if self.downsample_ratio < 1:
            raise ValueError("downsample_ratio must be ≥ 1")
        if self.epochs < 1:
            raise ValueError("epochs must be ≥ 1")

    def resolve(self, kind: ModelKind) -> "TrainConfig":
        hidden, layers = _ENCODER_DEFAULTS.get(kind, (64, 1))
        return replace(
            self,
            hidden_dim=self.hidden_dim if self.hidden_dim is not None else hidden,
            layers=self.layers if self.layers is not None else layers,
        )

    def meta(self) -> dict:
        return {
            "downsample_ratio": self.downsample_ratio,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "hidden_dim": self.hidden_dim,
            "layers": self.layers,
            "heads": self.heads,
            "ff_dim": self.ff_dim,
            "kernel_size": self.kernel_size,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class PredictorModel:
    """A trained predictor: kind tag, payload object, training metadata."""

    kind: ModelKind
    payload: object
    training_meta: dict = field(default_factory=dict)
    feature_layout_version: int = FEATURE_LAYOUT_VERSION

    @property
    def is_per_token(self) -> bool:
        return self.kind in PER_TOKEN_KINDS


def save_model(model: PredictorModel, path: str | Path) -> None:
    meta, arrays = model.payload.to_arrays()
    header = {
        "container": "predictor-model",
        "model_format_version": MODEL_FORMAT_VERSION,
        "feature_layout_version": model.feature_layout_version,
        "kind": model.kind.value,
        "training_meta": model.training_meta,
        "payload_meta": meta,
    }
    write_container(path, header, arrays)


def load_model(path: str | Path) -> PredictorModel:
    header, arrays = read_container(path)
    if header.get("container") != "predictor-model":
        raise ModelError(f"{path}: not a predictor model file")
    if header.get("model_format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(
            f"{path}: model_format_version {header.get('model_format_version')} "
            f"unsupported (expected {MODEL_FORMAT_VERSION}); refusing to load"
        )
    if header.get("feature_layout_version") != FEATURE_LAYOUT_VERSION:
        raise ModelError(
            f"{path}: feature_layout_version {header.get('feature_layout_version')} "
            f"does not match this build ({FEATURE_LAYOUT_VERSION}); refusing to load"
        )
    kind = ModelKind(header["kind"])
    from tokloc.predict import payload_class

    payload = payload_class(kind).from_arrays(header.get("payload_meta", {}), arrays)
    return PredictorModel(
        kind=kind,
        payload=payload,
        training_meta=header.get("training_meta", {}),
        feature_layout_version=header["feature_layout_version"],
    )


def standardize_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and stds from training rows (zero-variance columns get sd 1)."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return mu, sd


def standardize_apply(X: np.ndarray, mu: np.ndarray, sd: np.ndarray) -> np.ndarray:
    return (X - mu) / sd
