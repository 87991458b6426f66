"""Per-sample pointer predictors: encode the token sequence, point at one.

Three encoder families over per-sample feature rows (T x 108): a
bidirectional LSTM stack, a stack of same-padded 1-d convolutions, and a
post-norm self-attention stack with sinusoidal positions. A linear pointer
head maps each hidden state to a logit; training minimizes cross-entropy of
the gold index under the sequence softmax. Everything runs in float64 so
central finite differences validate the backward pass tightly.
"""

from __future__ import annotations

import numpy as np

from tokloc.features import PER_SAMPLE_WIDTH, FeatureMatrix, Mode
from tokloc.predict.base import (
    ModelError,
    ModelKind,
    PredictorModel,
    TrainConfig,
    standardize_apply,
    standardize_fit,
)
from tokloc.predict.grad import Adam, Tensor, concat, layer_norm, log_softmax, softmax


def _uniform(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


class _EncoderBase:
    kind: ModelKind

    def __init__(self, in_dim: int, config: TrainConfig):
        self.in_dim = in_dim
        self.config = config
        self.params: dict[str, Tensor] = {}
        self.mu = np.zeros(in_dim)
        self.sd = np.ones(in_dim)

    # subclasses fill params in init_params and implement logits()

    def init_params(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def logits(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def _pointer(self, hidden: Tensor) -> Tensor:
        # zero-initialized head: untrained logits are exactly uniform
        out = hidden @ self.params["head/w"] + self.params["head/b"]
        return out.reshape(hidden.shape[0])

    def _init_head(self, enc_dim: int) -> None:
        self.params["head/w"] = Tensor(np.zeros((enc_dim, 1)))
        self.params["head/b"] = Tensor(np.zeros(1))

    def loss(self, rows: np.ndarray, gold_index: int) -> Tensor:
        logits = self.logits(Tensor(standardize_apply(rows, self.mu, self.sd)))
        return -log_softmax(logits)[gold_index - 1]

    def pointer_logits(self, rows: np.ndarray) -> np.ndarray:
        return self.logits(Tensor(standardize_apply(rows, self.mu, self.sd))).data

    def to_arrays(self):
        meta = {
            "in_dim": self.in_dim,
            "hidden_dim": self.config.hidden_dim,
            "layers": self.config.layers,
            "heads": self.config.heads,
            "ff_dim": self.config.ff_dim,
            "kernel_size": self.config.kernel_size,
            "max_seq_len": self.config.max_seq_len,
        }
        arrays = {f"param/{k}": p.data for k, p in self.params.items()}
        arrays["scaler/mu"] = self.mu
        arrays["scaler/sd"] = self.sd
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta, arrays):
        config = TrainConfig(
            hidden_dim=meta["hidden_dim"],
            layers=meta["layers"],
            heads=meta.get("heads", 8),
            ff_dim=meta.get("ff_dim", 1024),
            kernel_size=meta.get("kernel_size", 3),
            max_seq_len=meta.get("max_seq_len", 2048),
        )
        enc = cls(meta["in_dim"], config)
        rng = np.random.default_rng(0)
        enc.init_params(rng)
        for key, p in enc.params.items():
            name = f"param/{key}"
            if name not in arrays:
                raise ModelError(f"model file missing array '{name}'")
            if arrays[name].shape != p.data.shape:
                raise ModelError(f"model array '{name}' has wrong shape")
            p.data = arrays[name].astype(np.float64)
        enc.mu = arrays["scaler/mu"].astype(np.float64)
        enc.sd = arrays["scaler/sd"].astype(np.float64)
        return enc


class RecurrentPointer(_EncoderBase):
    """Bidirectional LSTM stack; hidden_dim per direction, outputs concatenated."""

    kind = ModelKind.RECURRENT_POINTER

    def init_params(self, rng):
        hidden = self.config.hidden_dim
        in_dim = self.in_dim
        for layer in range(self.config.layers):
            for direction in ("f", "b"):
                scale = 1.0 / np.sqrt(hidden)
                self.params[f"l{layer}{direction}/Wih"] = Tensor(
                    _uniform(rng, (in_dim, 4 * hidden), scale)
                )
                self.params[f"l{layer}{direction}/Whh"] = Tensor(
                    _uniform(rng, (hidden, 4 * hidden), scale)
                )
                self.params[f"l{layer}{direction}/b"] = Tensor(np.zeros(4 * hidden))
            in_dim = 2 * hidden
        self._init_head(2 * hidden)

    def _direction(self, x: Tensor, layer: int, direction: str) -> Tensor:
        hidden = self.config.hidden_dim
        if direction == "b":
            x = x[::-1]
        pre = x @ self.params[f"l{layer}{direction}/Wih"] + self.params[f"l{layer}{direction}/b"]
        whh = self.params[f"l{layer}{direction}/Whh"]
        h = Tensor(np.zeros((1, hidden)))
        c = Tensor(np.zeros((1, hidden)))
        outs = []
        for t in range(x.shape[0]):
            gates = pre[t : t + 1] + h @ whh
            i = gates[:, :hidden].sigmoid()
            f = gates[:, hidden : 2 * hidden].sigmoid()
            o = gates[:, 2 * hidden : 3 * hidden].sigmoid()
            u = gates[:, 3 * hidden :].tanh()
            c = f * c + i * u
            h = o * c.tanh()
            outs.append(h)
        out = concat(outs, axis=0)
        if direction == "b":
            out = out[::-1]
        return out

    def logits(self, x):
        for layer in range(self.config.layers):
            fwd = self._direction(x, layer, "f")
            bwd = self._direction(x, layer, "b")
            x = concat([fwd, bwd], axis=1)
        return self._pointer(x)


class ConvolutionalPointer(_EncoderBase):
    """Stacked same-padded 1-d convolutions with ReLU."""

    kind = ModelKind.CONVOLUTIONAL_POINTER

    def init_params(self, rng):
        hidden = self.config.hidden_dim
        k = self.config.kernel_size
        in_dim = self.in_dim
        for layer in range(self.config.layers):
            scale = 1.0 / np.sqrt(k * in_dim)
            for tap in range(k):
                self.params[f"l{layer}/W{tap}"] = Tensor(_uniform(rng, (in_dim, hidden), scale))
            self.params[f"l{layer}/b"] = Tensor(np.zeros(hidden))
            in_dim = hidden
        self._init_head(hidden)

    def logits(self, x):
        k = self.config.kernel_size
        pad = k // 2
        for layer in range(self.config.layers):
            t_len = x.shape[0]
            zeros = Tensor(np.zeros((pad, x.shape[1])))
            padded = concat([zeros, x, zeros], axis=0)
            acc = None
            for tap in range(k):
                term = padded[tap : tap + t_len] @ self.params[f"l{layer}/W{tap}"]
                acc = term if acc is None else acc + term
            x = (acc + self.params[f"l{layer}/b"]).relu()
        return self._pointer(x)


def _positional_encoding(t_len: int, dim: int) -> np.ndarray:
    pos = np.arange(t_len)[:, None].astype(np.float64)
    idx = np.arange(dim)[None, :].astype(np.float64)
    angle = pos / np.power(10000.0, (2 * (idx // 2)) / dim)
    enc = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return enc


class AttentionPointer(_EncoderBase):
    """Post-norm transformer encoder stack with sinusoidal positions."""

    kind = ModelKind.ATTENTION_POINTER

    def init_params(self, rng):
        dim = self.config.hidden_dim
        ff = self.config.ff_dim
        scale = 1.0 / np.sqrt(dim)
        self.params["proj/W"] = Tensor(_uniform(rng, (self.in_dim, dim), 1.0 / np.sqrt(self.in_dim)))
        self.params["proj/b"] = Tensor(np.zeros(dim))
        for layer in range(self.config.layers):
            for name in ("Wq", "Wk", "Wv", "Wo"):
                self.params[f"l{layer}/{name}"] = Tensor(_uniform(rng, (dim, dim), scale))
            self.params[f"l{layer}/bo"] = Tensor(np.zeros(dim))
            self.params[f"l{layer}/ln1_g"] = Tensor(np.ones(dim))
            self.params[f"l{layer}/ln1_b"] = Tensor(np.zeros(dim))
            self.params[f"l{layer}/W1"] = Tensor(_uniform(rng, (dim, ff), scale))
            self.params[f"l{layer}/b1"] = Tensor(np.zeros(ff))
            self.params[f"l{layer}/W2"] = Tensor(_uniform(rng, (ff, dim), 1.0 / np.sqrt(ff)))
            self.params[f"l{layer}/b2"] = Tensor(np.zeros(dim))
            self.params[f"l{layer}/ln2_g"] = Tensor(np.ones(dim))
            self.params[f"l{layer}/ln2_b"] = Tensor(np.zeros(dim))
        self._init_head(dim)

    def logits(self, x):
        dim = self.config.hidden_dim
        heads = self.config.heads
        if dim % heads:
            raise ModelError(f"hidden_dim {dim} not divisible by heads {heads}")
        dk = dim // heads
        t_len = x.shape[0]
        x = x @ self.params["proj/W"] + self.params["proj/b"]
        x = x + Tensor(_positional_encoding(t_len, dim))
        for layer in range(self.config.layers):
            q = (x @ self.params[f"l{layer}/Wq"]).reshape(t_len, heads, dk).swapaxes(0, 1)
            k = (x @ self.params[f"l{layer}/Wk"]).reshape(t_len, heads, dk).swapaxes(0, 1)
            v = (x @ self.params[f"l{layer}/Wv"]).reshape(t_len, heads, dk).swapaxes(0, 1)
            scores = (q @ k.swapaxes(1, 2)) * (1.0 / np.sqrt(dk))
            attn = softmax(scores, axis=-1)
            ctx = (attn @ v).swapaxes(0, 1).reshape(t_len, dim)
            ctx = ctx @ self.params[f"l{layer}/Wo"] + self.params[f"l{layer}/bo"]
            x = layer_norm(x + ctx, self.params[f"l{layer}/ln1_g"], self.params[f"l{layer}/ln1_b"])
            ff = ((x @ self.params[f"l{layer}/W1"] + self.params[f"l{layer}/b1"]).relu()
                  @ self.params[f"l{layer}/W2"] + self.params[f"l{layer}/b2"])
            x = layer_norm(x + ff, self.params[f"l{layer}/ln2_g"], self.params[f"l{layer}/ln2_b"])
        return self._pointer(x)


ENCODER_CLASSES = {
    ModelKind.RECURRENT_POINTER: RecurrentPointer,
    ModelKind.CONVOLUTIONAL_POINTER: ConvolutionalPointer,
    ModelKind.ATTENTION_POINTER: AttentionPointer,
}


def _truncate(rows: np.ndarray, gold: int | None, cap: int, record_id: str):
    """Front-truncate to cap tokens; the gold index must survive."""
    n = rows.shape[0]
    if n <= cap:
        return rows, gold, 0
    drop = n - cap
    if gold is not None:
        if gold <= drop:
            raise ModelError(
                f"record '{record_id}': gold index {gold} would be cut by "
                f"front-truncation to {cap} tokens"
            )
        gold = gold - drop
    return rows[drop:], gold, drop


def train_pointer(
    matrices: list[FeatureMatrix], kind: ModelKind, config: TrainConfig
) -> PredictorModel:
    """Train a pointer model; deterministic under config.seed."""
    if kind not in ENCODER_CLASSES:
        raise ModelError(f"{kind.value} is not a pointer model kind")
    if not matrices:
        raise ModelError("no training samples")
    config = config.resolve(kind)
    samples = []
    for matrix in matrices:
        if matrix.mode != Mode.PER_SAMPLE:
            raise ModelError(f"record '{matrix.record_id}' not featurized per-sample")
        if matrix.rows.shape[1] != PER_SAMPLE_WIDTH:
            raise ModelError(f"record '{matrix.record_id}': bad row width {matrix.rows.shape[1]}")
        gold = matrix.gold_index
        if gold is None or not (1 <= gold <= matrix.n_tokens):
            raise ModelError(f"record '{matrix.record_id}': gold_index missing or out of range")
        rows, gold, _ = _truncate(matrix.rows, gold, config.max_seq_len, matrix.record_id)
        samples.append((rows, gold))

    rng = np.random.default_rng(config.seed)
    encoder = ENCODER_CLASSES[kind](PER_SAMPLE_WIDTH, config)
    encoder.init_params(rng)
    encoder.mu, encoder.sd = standardize_fit(np.vstack([rows for rows, _ in samples]))

    optimizer = Adam(encoder.params, lr=config.learning_rate)
    for _ in range(config.epochs):
        order = rng.permutation(len(samples))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            optimizer.zero_grad()
            inv = 1.0 / len(batch)
            for idx in batch:
                rows, gold = samples[idx]
                loss = encoder.loss(rows, gold) * inv
                loss.backward()
            optimizer.step()

    return PredictorModel(
        kind=kind,
        payload=encoder,
        training_meta={"config": config.meta(), "n_samples": len(samples)},
    )


def predict_pointer(model: PredictorModel, matrix: FeatureMatrix) -> int:
    """Argmax of the pointer logits, ties broken toward the smallest index."""
    if model.kind not in ENCODER_CLASSES:
        raise ModelError(f"{model.kind.value} is not a pointer model kind")
    if matrix.mode != Mode.PER_SAMPLE:
        raise ModelError(f"record '{matrix.record_id}' not featurized per-sample")
    encoder = model.payload
    if matrix.rows.shape[1] != encoder.in_dim:
        raise ModelError(
            f"feature width {matrix.rows.shape[1]} does not match model ({encoder.in_dim})"
        )
    rows, _, drop = _truncate(
        matrix.rows, None, encoder.config.max_seq_len, matrix.record_id
    )
    logits = encoder.pointer_logits(rows)
    return int(np.argmax(logits)) + 1 + drop


def finite_difference_check(
    encoder: _EncoderBase, rows: np.ndarray, gold: int, step: float = 1e-5
) -> float:
    """Max relative error between backprop and central finite differences.

    Relative error uses a unit floor: |a - n| / max(1, |a|, |n|).
    """
    for p in encoder.params.values():
        p.grad = None
    loss = encoder.loss(rows, gold)
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in encoder.params.items()}

    worst = 0.0
    for key, p in encoder.params.items():
        flat = p.data.reshape(-1)
        grad = analytic[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(encoder.loss(rows, gold).data)
            flat[i] = orig - step
            down = float(encoder.loss(rows, gold).data)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            err = abs(numeric - grad[i]) / max(1.0, abs(numeric), abs(grad[i]))
            if err > worst:
                worst = err
    return worst
