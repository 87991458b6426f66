import math

import numpy as np
import pytest

from tokloc.corpus import LogProbStep
from tokloc.features import (
    PER_SAMPLE_WIDTH,
    PER_TOKEN_WIDTH,
    UNLABELED,
    Mode,
    collect_token_rows,
    featurize,
    step_entropy,
    step_probabilities,
)
from helpers import make_record, make_step


def step_from_probs(probs):
    entries = tuple((f"t{i}", math.log(p)) for i, p in enumerate(sorted(probs, reverse=True)))
    return LogProbStep(entries=entries, chosen=0, chosen_logprob=entries[0][1])


def test_probability_padding():
    vec = step_probabilities(step_from_probs([0.7, 0.2, 0.1]))
    assert vec.shape == (100,)
    assert vec[:3] == pytest.approx([0.7, 0.2, 0.1])
    assert (vec[3:] == 0).all()


def test_single_entry_prob_one():
    step = LogProbStep(entries=(("a", 0.0),), chosen=0, chosen_logprob=0.0)
    vec = step_probabilities(step)
    assert vec[0] == 1.0 and (vec[1:] == 0).all()


def test_hundred_uniform_entries():
    step = step_from_probs([0.01] * 100)
    vec = step_probabilities(step)
    assert vec == pytest.approx([0.01] * 100)


def test_probabilities_descending_then_padded():
    vec = step_probabilities(make_step(top1=0.6, k=7))
    nonzero = vec[vec > 0]
    assert (np.diff(nonzero) <= 0).all()


def test_entropy_uniform_100():
    step = step_from_probs([0.01] * 100)
    assert step_entropy(step) == pytest.approx(math.log(100), abs=1e-12)


def test_entropy_single_entry_zero():
    step = LogProbStep(entries=(("a", -0.5),), chosen=0, chosen_logprob=-0.5)
    assert step_entropy(step) == 0.0


def test_entropy_two_even():
    assert step_entropy(step_from_probs([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-12)


def test_entropy_renormalizes():
    assert step_entropy(step_from_probs([0.2, 0.2])) == pytest.approx(math.log(2), abs=1e-12)


def test_entropy_permutation_invariance_of_features():
    a = step_from_probs([0.4, 0.4, 0.2])
    assert step_probabilities(a) == pytest.approx(step_probabilities(a))
    assert step_entropy(a) == pytest.approx(step_entropy(step_from_probs([0.4, 0.2, 0.4])))


def test_per_token_matrix_shape():
    record = make_record(["x", " =", " 1"] * 4, eos=False, gold_index=5)
    matrix = featurize(record, mode=Mode.PER_TOKEN)
    assert matrix.rows.shape == (12, PER_TOKEN_WIDTH)
    assert matrix.rows.shape[1] == 109


def test_per_sample_matrix_shape():
    record = make_record(["x", " =", " 1"] * 4, eos=False, gold_index=5)
    matrix = featurize(record, mode=Mode.PER_SAMPLE)
    assert matrix.rows.shape == (12, PER_SAMPLE_WIDTH)
    assert matrix.rows.shape[1] == 108


def test_labels_around_gold():
    record = make_record(["x", " =", " 1"] * 4, eos=False, gold_index=5)
    matrix = featurize(record, mode=Mode.PER_TOKEN)
    labels = matrix.token_labels
    assert list(labels[:4]) == [0, 0, 0, 0]
    assert labels[4] == 1
    assert (labels[5:] == UNLABELED).all()


def test_one_hot_exactly_one():
    record = make_record(["def", " f", "(", ")", ":", "\n", "    ", "return", " 1", "\n"])
    matrix = featurize(record, mode=Mode.PER_TOKEN)
    onehot = matrix.rows[:, 100:108]
    assert (onehot.sum(axis=1) == 1).all()


def test_position_feature_raw_index():
    record = make_record(["x", " =", " 1"])
    matrix = featurize(record, mode=Mode.PER_TOKEN)
    assert list(matrix.rows[:, -1]) == [1, 2, 3, 4]


def test_require_labels_errors_without_gold():
    record = make_record(["x"])
    with pytest.raises(ValueError, match="gold_index"):
        featurize(record, mode=Mode.PER_TOKEN, require_labels=True)


def test_collect_token_rows_drops_unlabeled():
    records = [
        make_record(["x", " =", " 1"], eos=False, gold_index=2, rec_id="a"),
        make_record(["y", " =", " 2"], eos=False, gold_index=3, rec_id="b"),
    ]
    X, y = collect_token_rows([featurize(r, mode=Mode.PER_TOKEN) for r in records])
    assert X.shape == (5, PER_TOKEN_WIDTH)
    assert list(y) == [0, 1, 0, 0, 1]


def test_gold_prob_statistic_hook():
    # hallucinated (gold) tokens built with low chosen prob, others high
    records = [
        make_record(["a", " =", " 1", "\n"], eos=False, gold_index=3,
                    top1s=[0.9, 0.9, 0.1, 0.9], rec_id=f"r{i}")
        for i in range(5)
    ]
    gold_probs = []
    pre_probs = []
    for record in records:
        matrix = featurize(record, mode=Mode.PER_TOKEN)
        gold_probs.append(matrix.rows[record.gold_index - 1, 0])
        pre_probs.extend(matrix.rows[: record.gold_index - 1, 0])
    assert np.mean(gold_probs) < np.mean(pre_probs)
