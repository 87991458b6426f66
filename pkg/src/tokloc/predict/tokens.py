"""Per-token hallucination classifiers and the left-to-right scan rule."""

from __future__ import annotations

import logging

import numpy as np

from tokloc.features import PER_TOKEN_WIDTH, FeatureMatrix, Mode
from tokloc.predict.base import (
    ModelError,
    ModelKind,
    PredictorModel,
    TrainConfig,
    standardize_apply,
    standardize_fit,
)
from tokloc.predict.forest import TreeEnsembleScorer
from tokloc.predict.grad import Adam, Tensor

log = logging.getLogger(__name__)


def downsample(
    X: np.ndarray, y: np.ndarray, ratio: float = 3.0, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Keep all hallucinated rows; subsample correct rows to ratio x as many.

    Uniform without replacement, deterministic under seed; original row
    order is preserved.
    """
    y = np.asarray(y)
    pos = np.nonzero(y == 1)[0]
    neg = np.nonzero(y == 0)[0]
    if pos.size == 0:
        raise ValueError("downsample: no hallucinated rows")
    target = int(ratio * pos.size)
    if neg.size > target:
        rng = np.random.default_rng(seed)
        neg = rng.choice(neg, size=target, replace=False)
    keep = np.sort(np.concatenate([pos, neg]))
    return X[keep], y[keep]


class LogisticScorer:
    """L2-free logistic regression trained with minibatch Adam."""

    def __init__(self, epochs=10, batch_size=32, learning_rate=1e-2, seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.w = None
        self.b = 0.0
        self.mu = None
        self.sd = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.mu, self.sd = standardize_fit(X)
        Xs = standardize_apply(X, self.mu, self.sd)
        rng = np.random.default_rng(self.seed)
        w = Tensor(np.zeros(X.shape[1]))
        b = Tensor(np.zeros(1))
        optimizer = Adam({"w": w, "b": b}, lr=self.learning_rate)
        for _ in range(self.epochs):
            order = rng.permutation(X.shape[0])
            for start in range(0, order.size, self.batch_size):
                batch = order[start : start + self.batch_size]
                xb = Tensor(Xs[batch])
                yb = y[batch]
                optimizer.zero_grad()
                p = ((xb * w).sum(axis=1) + b).sigmoid()
                loss = -(
                    Tensor(yb) * (p + 1e-12).log()
                    + Tensor(1.0 - yb) * ((1.0 - p) + 1e-12).log()
                ).mean()
                loss.backward()
                optimizer.step()
        self.w = w.data.copy()
        self.b = float(b.data[0])
        return self

    def score_rows(self, X):
        z = standardize_apply(np.asarray(X, dtype=np.float64), self.mu, self.sd) @ self.w + self.b
        return 1.0 / (1.0 + np.exp(-z))

    def to_arrays(self):
        meta = {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }
        return meta, {"w": self.w, "b": np.array([self.b]), "mu": self.mu, "sd": self.sd}

    @classmethod
    def from_arrays(cls, meta, arrays):
        scorer = cls(**meta)
        scorer.w = arrays["w"]
        scorer.b = float(arrays["b"][0])
        scorer.mu = arrays["mu"]
        scorer.sd = arrays["sd"]
        return scorer


class FeedForwardScorer:
    """One-hidden-layer MLP with a sigmoid output, trained with Adam."""

    def __init__(self, hidden_dim=64, epochs=10, batch_size=32, learning_rate=1e-3, seed=0):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.params = {}
        self.mu = None
        self.sd = None

    def _init(self, d, rng):
        h = self.hidden_dim
        self.params = {
            "W1": Tensor(rng.uniform(-1, 1, (d, h)) / np.sqrt(d)),
            "b1": Tensor(np.zeros(h)),
            "W2": Tensor(rng.uniform(-1, 1, (h, 1)) / np.sqrt(h)),
            "b2": Tensor(np.zeros(1)),
        }

    def _logit(self, xb: Tensor) -> Tensor:
        hidden = (xb @ self.params["W1"] + self.params["b1"]).relu()
        return (hidden @ self.params["W2"] + self.params["b2"]).reshape(xb.shape[0])

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.mu, self.sd = standardize_fit(X)
        Xs = standardize_apply(X, self.mu, self.sd)
        rng = np.random.default_rng(self.seed)
        self._init(X.shape[1], rng)
        optimizer = Adam(self.params, lr=self.learning_rate)
        for _ in range(self.epochs):
            order = rng.permutation(X.shape[0])
            for start in range(0, order.size, self.batch_size):
                batch = order[start : start + self.batch_size]
                optimizer.zero_grad()
                p = self._logit(Tensor(Xs[batch])).sigmoid()
                yb = y[batch]
                loss = -(
                    Tensor(yb) * (p + 1e-12).log()
                    + Tensor(1.0 - yb) * ((1.0 - p) + 1e-12).log()
                ).mean()
                loss.backward()
                optimizer.step()
        return self

    def score_rows(self, X):
        Xs = standardize_apply(np.asarray(X, dtype=np.float64), self.mu, self.sd)
        return self._logit(Tensor(Xs)).sigmoid().data

    def to_arrays(self):
        meta = {
            "hidden_dim": self.hidden_dim,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }
        arrays = {f"param/{k}": p.data for k, p in self.params.items()}
        arrays["mu"] = self.mu
        arrays["sd"] = self.sd
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        scorer = cls(**meta)
        scorer.params = {
            k.split("/", 1)[1]: Tensor(v) for k, v in arrays.items() if k.startswith("param/")
        }
        scorer.mu = arrays["mu"]
        scorer.sd = arrays["sd"]
        return scorer


_SCORER_KINDS = {
    ModelKind.TREE_ENSEMBLE,
    ModelKind.LINEAR_LOGISTIC,
    ModelKind.FEED_FORWARD,
}


def train_token_classifier(
    X: np.ndarray,
    y: np.ndarray,
    kind: ModelKind = ModelKind.TREE_ENSEMBLE,
    config: TrainConfig = TrainConfig(),
) -> PredictorModel:
    """Train a per-token scorer on already-downsampled labeled rows."""
    if kind not in _SCORER_KINDS:
        raise ModelError(f"{kind.value} is not a per-token model kind")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.size == 0:
        raise ModelError("empty training matrix")
    classes = np.unique(y)
    if classes.size < 2:
        raise ModelError("per-token training needs both classes present")
    if np.all(X.std(axis=0) < 1e-12):
        log.warning("train_token_classifier: all features constant; scores will be constant")
    config = config.resolve(kind)
    if kind == ModelKind.TREE_ENSEMBLE:
        scorer = TreeEnsembleScorer(
            n_trees=config.n_trees, max_depth=config.max_depth, seed=config.seed
        ).fit(X, y)
    elif kind == ModelKind.LINEAR_LOGISTIC:
        scorer = LogisticScorer(
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=max(config.learning_rate, 1e-2),
            seed=config.seed,
        ).fit(X, y)
    else:
        scorer = FeedForwardScorer(
            hidden_dim=config.hidden_dim,
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            seed=config.seed,
        ).fit(X, y)
    return PredictorModel(
        kind=kind,
        payload=scorer,
        training_meta={"config": config.meta(), "n_rows": int(X.shape[0])},
    )


def predict_scan(
    model: PredictorModel, matrix: FeatureMatrix, threshold: float = 0.5
) -> int | None:
    """Smallest 1-based index whose score crosses threshold, else None."""
    if model.kind not in _SCORER_KINDS:
        raise ModelError(f"{model.kind.value} is not a per-token model kind")
    if matrix.mode != Mode.PER_TOKEN:
        raise ModelError(f"record '{matrix.record_id}' not featurized per-token")
    if matrix.rows.shape[1] != PER_TOKEN_WIDTH:
        raise ModelError(
            f"feature width {matrix.rows.shape[1]} does not match layout ({PER_TOKEN_WIDTH})"
        )
    if matrix.layout_version != model.feature_layout_version:
        raise ModelError(
            f"feature layout {matrix.layout_version} does not match model "
            f"({model.feature_layout_version})"
        )
    scores = model.payload.score_rows(matrix.rows)
    flagged = np.nonzero(scores >= threshold)[0]
    if flagged.size == 0:
        return None
    return int(flagged[0]) + 1
