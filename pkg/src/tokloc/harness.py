"""Evaluation harness: split regimes, accuracy, cross-LLM matrices, tables.

A record is predicted correctly iff the predicted index equals gold_index
exactly (the scan rule guarantees no earlier token was flagged). Strategies
wrap the two prediction modes behind fit/predict so oracles and constants
can stand in for trained models in tests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from tokloc.corpus import GenerationRecord
from tokloc.features import FeatureMatrix, Mode, collect_token_rows, featurize
from tokloc.predict import (
    ModelKind,
    TrainConfig,
    downsample,
    predict_pointer,
    predict_scan,
    train_pointer,
    train_token_classifier,
)
from tokloc.syntax import TokenType, annotate_tokens


class Regime(str, Enum):
    ALL_IN_ONE = "all-in-one"
    ONE_PER_DATASET = "one-per-dataset"
    ONE_PER_LLM = "one-per-llm"


def _group_key(record: GenerationRecord, regime: Regime) -> str:
    if regime == Regime.ALL_IN_ONE:
        return "all"
    if regime == Regime.ONE_PER_DATASET:
        return record.dataset
    return record.model


@dataclass(frozen=True)
class SplitPlan:
    """Fold assignments per record id, grouped by the regime's key."""

    regime: Regime
    k: int
    seed: int
    assignments: dict = field(default_factory=dict)  # id -> fold
    group_of: dict = field(default_factory=dict)  # id -> group key


def make_folds(
    records: list[GenerationRecord], regime: Regime, k: int = 5, seed: int = 0
) -> SplitPlan:
    """Deterministic k-fold assignment within each regime group."""
    groups: dict[str, list[GenerationRecord]] = {}
    for record in records:
        groups.setdefault(_group_key(record, regime), []).append(record)
    assignments: dict[str, int] = {}
    group_of: dict[str, str] = {}
    for g_idx, group in enumerate(sorted(groups)):
        members = sorted(groups[group], key=lambda r: r.id)
        if len(members) < k:
            raise ValueError(
                f"group '{group}' has {len(members)} records, fewer than k={k}"
            )
        rng = np.random.default_rng(np.random.SeedSequence([seed, g_idx]))
        order = rng.permutation(len(members))
        for fold_pos, member_idx in enumerate(order):
            record = members[member_idx]
            assignments[record.id] = fold_pos % k
            group_of[record.id] = group
    return SplitPlan(regime=regime, k=k, seed=seed, assignments=assignments, group_of=group_of)


def _derived_seed(base: int, *parts: int) -> int:
    return int(np.random.SeedSequence([base, *parts]).generate_state(1)[0])


class TokenScanStrategy:
    """Per-token classifier + scan rule."""

    def __init__(
        self,
        kind: ModelKind = ModelKind.TREE_ENSEMBLE,
        config: TrainConfig = TrainConfig(),
        threshold: float = 0.5,
    ):
        self.kind = kind
        self.config = config
        self.threshold = threshold
        self._cache: dict[str, FeatureMatrix] = {}

    @property
    def label(self) -> str:
        return f"per-token/{self.kind.value}"

    @property
    def base_seed(self) -> int:
        return self.config.seed

    def matrix(self, record: GenerationRecord) -> FeatureMatrix:
        cached = self._cache.get(record.id)
        if cached is None:
            cached = featurize(record, mode=Mode.PER_TOKEN)
            self._cache[record.id] = cached
        return cached

    def fit(self, records: list[GenerationRecord], seed: int):
        X, y = collect_token_rows([self.matrix(r) for r in records])
        X, y = downsample(X, y, self.config.downsample_ratio, seed)
        return train_token_classifier(X, y, self.kind, replace(self.config, seed=seed))

    def predict(self, model, record: GenerationRecord) -> int | None:
        return predict_scan(model, self.matrix(record), self.threshold)


class PointerStrategy:
    """Sequence encoder + pointer head."""

    def __init__(
        self,
        kind: ModelKind = ModelKind.RECURRENT_POINTER,
        config: TrainConfig = TrainConfig(),
    ):
        self.kind = kind
        self.config = config
        self._cache: dict[str, FeatureMatrix] = {}

    @property
    def label(self) -> str:
        return f"per-sample/{self.kind.value}"

    @property
    def base_seed(self) -> int:
        return self.config.seed

    def matrix(self, record: GenerationRecord) -> FeatureMatrix:
        cached = self._cache.get(record.id)
        if cached is None:
            cached = featurize(record, mode=Mode.PER_SAMPLE)
            self._cache[record.id] = cached
        return cached

    def fit(self, records: list[GenerationRecord], seed: int):
        matrices = [self.matrix(r) for r in records]
        return train_pointer(matrices, self.kind, replace(self.config, seed=seed))

    def predict(self, model, record: GenerationRecord) -> int | None:
        return predict_pointer(model, self.matrix(record))


@dataclass(frozen=True)
class EvalReport:
    """Exact-index accuracy per (train_group, test_group, strategy label)."""

    cells: dict  # (train_group, test_group, label) -> accuracy in [0, 1]
    counts: dict  # same key -> (correct, evaluated)
    regime: str
    config_digest: str

    def to_json_obj(self) -> dict:
        rows = [
            {
                "train_group": tg,
                "test_group": eg,
                "strategy": lab,
                "accuracy": acc,
                "correct": self.counts[(tg, eg, lab)][0],
                "evaluated": self.counts[(tg, eg, lab)][1],
            }
            for (tg, eg, lab), acc in sorted(self.cells.items())
        ]
        return {"regime": self.regime, "config_digest": self.config_digest, "cells": rows}


def _digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _require_labels(records):
    for record in records:
        if record.gold_index is None:
            raise ValueError(f"record '{record.id}' is unlabeled (gold_index missing)")


def evaluate(records: list[GenerationRecord], plan: SplitPlan, strategy) -> EvalReport:
    """Per-group k-fold cross-validation accuracy under the plan's regime."""
    _require_labels(records)
    by_id = {r.id: r for r in records}
    missing = [rid for rid in plan.assignments if rid not in by_id]
    if missing:
        raise ValueError(f"plan covers unknown record ids, e.g. '{missing[0]}'")
    groups: dict[str, list[GenerationRecord]] = {}
    for rid, group in plan.group_of.items():
        groups.setdefault(group, []).append(by_id[rid])
    cells = {}
    counts = {}
    for g_idx, group in enumerate(sorted(groups)):
        members = sorted(groups[group], key=lambda r: r.id)
        correct = 0
        total = 0
        for fold in range(plan.k):
            train = [r for r in members if plan.assignments[r.id] != fold]
            test = [r for r in members if plan.assignments[r.id] == fold]
            model = strategy.fit(train, _derived_seed(strategy.base_seed, g_idx, fold))
            for record in test:
                total += 1
                if strategy.predict(model, record) == record.gold_index:
                    correct += 1
        key = (group, group, strategy.label)
        cells[key] = correct / total if total else 0.0
        counts[key] = (correct, total)
    digest = _digest(
        {
            "regime": plan.regime.value,
            "k": plan.k,
            "seed": plan.seed,
            "strategy": strategy.label,
            "base_seed": strategy.base_seed,
        }
    )
    return EvalReport(cells=cells, counts=counts, regime=plan.regime.value, config_digest=digest)


def cross_matrix(
    records: list[GenerationRecord], strategy, k: int = 5, seed: int = 0
) -> EvalReport:
    """One-per-LLM generalization matrix.

    Diagonal cells use within-group k-fold cross-validation; off-diagonal
    cells train on the entire source group and test on the entire target.
    """
    _require_labels(records)
    groups: dict[str, list[GenerationRecord]] = {}
    for record in records:
        groups.setdefault(record.model, []).append(record)
    if len(groups) < 2:
        raise ValueError("cross_matrix needs at least 2 model groups")
    names = sorted(groups)
    cells = {}
    counts = {}
    plan = make_folds(records, Regime.ONE_PER_LLM, k=k, seed=seed)
    diagonal = evaluate(records, plan, strategy)
    cells.update(diagonal.cells)
    counts.update(diagonal.counts)
    for s_idx, source in enumerate(names):
        model = strategy.fit(
            sorted(groups[source], key=lambda r: r.id), _derived_seed(strategy.base_seed, s_idx)
        )
        for target in names:
            if target == source:
                continue
            correct = 0
            total = 0
            for record in sorted(groups[target], key=lambda r: r.id):
                total += 1
                if strategy.predict(model, record) == record.gold_index:
                    correct += 1
            key = (source, target, strategy.label)
            cells[key] = correct / total if total else 0.0
            counts[key] = (correct, total)
    digest = _digest(
        {"cross": True, "k": k, "seed": seed, "strategy": strategy.label,
         "base_seed": strategy.base_seed}
    )
    return EvalReport(
        cells=cells, counts=counts, regime=Regime.ONE_PER_LLM.value, config_digest=digest
    )


# -- statistics tables ---------------------------------------------------------


def _annotation_cache(records):
    return {r.id: annotate_tokens(r) for r in records}


def _groupings(record: GenerationRecord, group_by: str) -> str:
    if group_by == "model":
        return record.model
    if group_by == "dataset":
        return record.dataset
    raise ValueError(f"unknown grouping '{group_by}'")


def type_rate_table(
    records: list[GenerationRecord],
    group_by: str = "model",
    denominator: str = "prefix",
    annotations: dict | None = None,
) -> dict[str, dict[TokenType, float]]:
    """Hallucination rate per token type and group.

    rate(t, g) = gold tokens of type t / tokens of type t at positions up to
    gold_index ('prefix', default) or over all positions ('all'). Types with
    an empty denominator are absent from the group's row.
    """
    if denominator not in ("prefix", "all"):
        raise ValueError("denominator must be 'prefix' or 'all'")
    _require_labels(records)
    annotations = annotations or _annotation_cache(records)
    golds: dict[str, dict[TokenType, int]] = {}
    totals: dict[str, dict[TokenType, int]] = {}
    for record in records:
        group = _groupings(record, group_by)
        g_gold = golds.setdefault(group, {})
        g_total = totals.setdefault(group, {})
        gold = record.gold_index
        for ann in annotations[record.id]:
            if denominator == "prefix" and ann.token_index > gold:
                continue
            g_total[ann.type] = g_total.get(ann.type, 0) + 1
            if ann.token_index == gold:
                g_gold[ann.type] = g_gold.get(ann.type, 0) + 1
    table: dict[str, dict[TokenType, float]] = {}
    for group, g_total in totals.items():
        row = {}
        for ttype, denom in g_total.items():
            if denom:
                row[ttype] = golds[group].get(ttype, 0) / denom
        table[group] = row
    return table


def type_proportion_table(
    records: list[GenerationRecord],
    group_by: str = "model",
    annotations: dict | None = None,
) -> dict[str, dict[TokenType, float]]:
    """Share of each token type among all generated tokens, per group."""
    annotations = annotations or _annotation_cache(records)
    counts: dict[str, dict[TokenType, int]] = {}
    for record in records:
        group = _groupings(record, group_by)
        row = counts.setdefault(group, {})
        for ann in annotations[record.id]:
            row[ann.type] = row.get(ann.type, 0) + 1
    table = {}
    for group, row in counts.items():
        total = sum(row.values())
        if total:
            table[group] = {t: c / total for t, c in row.items()}
    return table


def _summary(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    qs = np.quantile(arr, [0.1, 0.25, 0.5, 0.75, 0.9])
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "min": float(arr.min()),
        "p10": float(qs[0]),
        "p25": float(qs[1]),
        "p50": float(qs[2]),
        "p75": float(qs[3]),
        "p90": float(qs[4]),
        "max": float(arr.max()),
    }


def distribution_report(
    records: list[GenerationRecord], annotations: dict | None = None
) -> dict:
    """Chosen-probability and entropy summaries, gold vs pre-gold tokens.

    Grouped by model, by dataset, and by token type; empty groups omitted.
    """
    _require_labels(records)
    annotations = annotations or _annotation_cache(records)
    buckets: dict[str, dict[str, dict[str, list[float]]]] = {
        "by_model": {},
        "by_dataset": {},
        "by_type": {},
    }

    def push(section, group, bucket, ann):
        slot = buckets[section].setdefault(group, {}).setdefault(
            bucket, {"chosen_prob": [], "entropy": []}
        )
        slot["chosen_prob"].append(ann.chosen_prob)
        slot["entropy"].append(ann.entropy)

    for record in records:
        gold = record.gold_index
        for ann in annotations[record.id]:
            if ann.token_index > gold:
                continue
            bucket = "gold" if ann.token_index == gold else "pre_gold"
            push("by_model", record.model, bucket, ann)
            push("by_dataset", record.dataset, bucket, ann)
            push("by_type", ann.type.name, bucket, ann)

    report: dict = {}
    for section, groups in buckets.items():
        report[section] = {}
        for group, parts in sorted(groups.items()):
            report[section][group] = {
                bucket: {
                    "chosen_prob": _summary(vals["chosen_prob"]),
                    "entropy": _summary(vals["entropy"]),
                }
                for bucket, vals in parts.items()
            }
    return report
