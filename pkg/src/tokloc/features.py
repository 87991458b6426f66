"""Numeric feature rows for predictors from annotated records.

Per-token rows: 100 probability slots (descending, zero-padded) + 8-slot
token-type one-hot + raw 1-based position = 109 columns. Per-sample rows
drop the position column (108). Per-token binary labels are 1 at the gold
index, 0 before it; rows after the gold index are marked unlabeled (-1) and
excluded from per-token training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from tokloc import FEATURE_LAYOUT_VERSION
from tokloc.corpus import GenerationRecord, LogProbStep
from tokloc.syntax import N_TOKEN_TYPES, TokenAnnotation, annotate_tokens

TOP_K = 100
PER_TOKEN_WIDTH = TOP_K + N_TOKEN_TYPES + 1
PER_SAMPLE_WIDTH = TOP_K + N_TOKEN_TYPES

UNLABELED = -1


class Mode(str, Enum):
    PER_TOKEN = "per-token"
    PER_SAMPLE = "per-sample"


def step_probabilities(step: LogProbStep) -> np.ndarray:
    """exp of the top-k logprobs, descending, zero-padded to 100 slots."""
    probs = np.zeros(TOP_K, dtype=np.float64)
    k = min(len(step.entries), TOP_K)
    if k:
        probs[:k] = np.exp([lp for _, lp in step.entries[:k]])
    return probs


def step_entropy(step: LogProbStep) -> float:
    """Shannon entropy (nats) of the renormalized top-k distribution."""
    if not step.entries:
        raise ValueError("step has no entries")
    return step.entropy()


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows for one record, one row per LLM token."""

    record_id: str
    mode: Mode
    rows: np.ndarray = field(repr=False)
    gold_index: int | None
    token_labels: np.ndarray | None = field(default=None, repr=False)
    layout_version: int = FEATURE_LAYOUT_VERSION

    @property
    def n_tokens(self) -> int:
        return self.rows.shape[0]


def featurize(
    record: GenerationRecord,
    annotations: list[TokenAnnotation] | None = None,
    mode: Mode = Mode.PER_TOKEN,
    require_labels: bool = False,
) -> FeatureMatrix:
    """Build the feature matrix for a record (annotating it if needed)."""
    if annotations is None:
        annotations = annotate_tokens(record)
    if len(annotations) != len(record.tokens):
        raise ValueError(
            f"record '{record.id}': {len(annotations)} annotations for "
            f"{len(record.tokens)} tokens"
        )
    if require_labels and record.gold_index is None:
        raise ValueError(f"record '{record.id}' has no gold_index but labels were requested")

    n = len(record.tokens)
    width = PER_TOKEN_WIDTH if mode == Mode.PER_TOKEN else PER_SAMPLE_WIDTH
    rows = np.zeros((n, width), dtype=np.float64)
    for i, (step, ann) in enumerate(zip(record.steps, annotations)):
        rows[i, :TOP_K] = step_probabilities(step)
        rows[i, TOP_K + ann.type.value] = 1.0
        if mode == Mode.PER_TOKEN:
            rows[i, -1] = ann.token_index
    rows.flags.writeable = False

    token_labels = None
    if record.gold_index is not None:
        gold = record.gold_index
        token_labels = np.full(n, UNLABELED, dtype=np.int8)
        token_labels[: gold - 1] = 0
        token_labels[gold - 1] = 1
        token_labels.flags.writeable = False
    return FeatureMatrix(
        record_id=record.id,
        mode=mode,
        rows=rows,
        gold_index=record.gold_index,
        token_labels=token_labels,
    )


def collect_token_rows(matrices: list[FeatureMatrix]) -> tuple[np.ndarray, np.ndarray]:
    """Stack labeled per-token rows across records (unlabeled rows dropped)."""
    xs, ys = [], []
    for matrix in matrices:
        if matrix.mode != Mode.PER_TOKEN:
            raise ValueError(f"record '{matrix.record_id}' was featurized as {matrix.mode.value}")
        if matrix.token_labels is None:
            raise ValueError(f"record '{matrix.record_id}' has no labels")
        keep = matrix.token_labels != UNLABELED
        xs.append(matrix.rows[keep])
        ys.append(matrix.token_labels[keep])
    if not xs:
        raise ValueError("no labeled rows")
    return np.vstack(xs), np.concatenate(ys).astype(np.int8)
