"""Synthetic planted-rule corpora for sanity checks and benchmarks.

Each record is a small real Python program segmented into LLM-style tokens
with fabricated top-k log-probabilities. The planted rule: the gold token's
top-1 probability is drawn from a low band and every other token's from a
high band, so the gold index is exactly the argmin of top-1 probability and
predictors have a learnable, verifiable target.
"""

from __future__ import annotations

import math

import numpy as np

from tokloc.corpus import GenerationRecord, LogProbStep, Language, Task

LOW_BAND = (0.05, 0.40)
HIGH_BAND = (0.60, 0.95)

_NAMES = ["alpha", "beta", "count", "delta", "total", "value", "width", "size"]


def _program_tokens(rng: np.random.Generator) -> list[str]:
    """Tokens of a tiny valid Python program (concatenation parses)."""
    names = list(rng.choice(_NAMES, size=3, replace=False))
    lines: list[list[str]] = []
    lines.append([names[0], " =", f" {rng.integers(1, 9)}", "\n"])
    lines.append([names[1], " =", " ", names[0], " +", f" {rng.integers(1, 9)}", "\n"])
    if rng.random() < 0.5:
        lines.append(["if", " ", names[1], " >", f" {rng.integers(1, 9)}", ":", "\n"])
        lines.append(["    ", names[2], " =", " ", names[1], " *", " 2", "\n"])
    else:
        lines.append(["for", " ", names[2], " in", " range", "(", str(rng.integers(2, 9)), ")", ":", "\n"])
        lines.append(["    ", names[1], " +=", " ", names[2], "\n"])
    lines.append(["print", "(", names[1], ")", "\n"])
    return [tok for line in lines for tok in line]


def _step(rng: np.random.Generator, token: str, top1: float, k: int = 8) -> LogProbStep:
    # tail entries stay strictly below top1 so slot 0 carries the planted signal
    cap = min(1.0 - top1, (k - 1) * top1 * 0.9)
    tail = rng.random(k - 1) + 0.2
    tail = tail / tail.sum() * cap
    tail = np.minimum(tail, top1 * 0.9)
    probs = np.concatenate([[top1], np.sort(tail)[::-1]])
    entries = tuple(
        (token if i == 0 else f"alt{i}", float(math.log(p))) for i, p in enumerate(probs)
    )
    return LogProbStep(entries=entries, chosen=0, chosen_logprob=entries[0][1])


def planted_corpus(
    n_records: int,
    seed: int = 0,
    models: tuple[str, ...] = ("model-a",),
    datasets: tuple[str, ...] = ("synthetic",),
    gold_choice: str = "uniform",
) -> list[GenerationRecord]:
    """Planted-rule records: gold index == argmin of top-1 probability.

    gold_choice 'uniform' places the gold anywhere (including the EOS
    sentinel); 'first' pins it at index 1 for counting fixtures.
    """
    rng = np.random.default_rng(seed)
    records = []
    for n in range(n_records):
        tokens = _program_tokens(rng) + [""]
        length = len(tokens)
        if gold_choice == "first":
            gold = 1
        else:
            gold = int(rng.integers(1, length + 1))
        steps = []
        for i, tok in enumerate(tokens, start=1):
            if i == gold:
                top1 = float(rng.uniform(*LOW_BAND))
            else:
                top1 = float(rng.uniform(*HIGH_BAND))
            steps.append(_step(rng, tok, top1))
        records.append(
            GenerationRecord(
                id=f"synt-{seed}-{n}",
                task=Task.CG,
                dataset=str(rng.choice(datasets)),
                model=str(rng.choice(models)),
                language=Language.PYTHON,
                problem_id=f"prob-{n % 17}",
                tokens=tuple(tokens),
                steps=tuple(steps),
                eos=True,
                gold_index=gold,
            )
        )
    return records
