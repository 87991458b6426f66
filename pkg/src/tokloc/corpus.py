"""Dataset schema, instance/canonical loading, validation, persistence.

File formats are line-delimited JSON (one record per line); see
docs/schema.md. Loaded records and pools are immutable and safe to share
across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from tokloc import SCHEMA_VERSION


class CorpusError(Exception):
    """Base class for data errors in instance or canonical files."""


class SchemaError(CorpusError):
    """A record does not conform to the documented schema."""


class IntegrityError(CorpusError):
    """A record is self-inconsistent (e.g. tokens do not rebuild the source)."""


class Task(str, Enum):
    CG = "CG"
    APR = "APR"


class Language(str, Enum):
    PYTHON = "python"
    JAVA = "java"


@dataclass(frozen=True)
class LogProbStep:
    """Top-k log-probabilities for one decoding step.

    ``entries`` holds at most 100 (token_text, logprob) pairs sorted by
    logprob descending. ``chosen`` indexes the emitted token inside
    ``entries``, or is None when the emitted token fell outside the stored
    top-k; ``chosen_logprob`` always carries the emitted token's logprob.
    """

    entries: tuple[tuple[str, float], ...]
    chosen: int | None
    chosen_logprob: float

    def chosen_prob(self) -> float:
        return math.exp(self.chosen_logprob)

    def entropy(self) -> float:
        """Shannon entropy (nats) of the top-k probabilities renormalized to sum 1."""
        probs = [math.exp(lp) for _, lp in self.entries]
        total = sum(probs)
        if total <= 0.0:
            raise ValueError("step has zero probability mass")
        h = 0.0
        for p in probs:
            p /= total
            if p > 0.0:
                h -= p * math.log(p)
        return h


@dataclass(frozen=True)
class GenerationRecord:
    """One LLM output plus its generation-time signals.

    ``tokens`` are the LLM's own token strings; when ``eos`` is set the final
    token is the end-of-sequence sentinel with empty text. Concatenating the
    non-sentinel tokens rebuilds the generated source byte for byte.
    """

    id: str
    task: Task
    dataset: str
    model: str
    language: Language
    problem_id: str
    tokens: tuple[str, ...]
    steps: tuple[LogProbStep, ...]
    context_prefix: str = ""
    eos: bool = False
    error_message: str | None = None
    gold_index: int | None = None

    @property
    def generated_text(self) -> str:
        toks = self.tokens[:-1] if self.eos else self.tokens
        return "".join(toks)

    @property
    def eos_index(self) -> int:
        """1-based index attributed to end-of-generation mismatches."""
        return len(self.tokens)


@dataclass(frozen=True)
class CanonicalPool:
    """Correct solutions for one problem, deduplicated on raw text at load."""

    problem_id: str
    language: Language
    solutions: tuple[str, ...]
    # Lazily filled by normalize.dedup_pool; not part of equality.
    _normalized: list = field(default=None, compare=False, repr=False)


def validate_record(record: GenerationRecord) -> list[str]:
    """Return all invariant violations (empty list iff the record is valid)."""
    violations: list[str] = []
    if not record.tokens:
        violations.append("tokens must be non-empty")
    if len(record.steps) != len(record.tokens):
        violations.append(
            f"length mismatch: {len(record.tokens)} tokens vs {len(record.steps)} steps"
        )
    if record.eos and record.tokens and record.tokens[-1] != "":
        violations.append("EOS sentinel token text must be empty")
    body = record.tokens[:-1] if record.eos else record.tokens
    for i, tok in enumerate(body, start=1):
        if tok == "":
            violations.append(f"token {i}: empty text (only the EOS sentinel may be empty)")
    if record.gold_index is not None and not (1 <= record.gold_index <= len(record.tokens)):
        violations.append("gold_index out of range")
    for i, step in enumerate(record.steps, start=1):
        if len(step.entries) > 100:
            violations.append(f"step {i}: more than 100 top-k entries")
        prev = math.inf
        for tok, lp in step.entries:
            if not math.isfinite(lp) or lp > 0.0:
                violations.append(f"step {i}: logprob must be ≤ 0")
                break
            if lp > prev:
                violations.append(f"step {i}: entries not sorted by logprob descending")
                break
            prev = lp
        if step.chosen is not None and not (0 <= step.chosen < len(step.entries)):
            violations.append(f"step {i}: chosen index out of range")
        if not math.isfinite(step.chosen_logprob) or step.chosen_logprob > 0.0:
            violations.append(f"step {i}: logprob must be ≤ 0 (chosen_logprob)")
    return violations


def _require(obj: dict, key: str, line: int):
    if key not in obj:
        raise SchemaError(f"line {line}: missing field '{key}'")
    return obj[key]


def _parse_step(raw, line: int, pos: int) -> LogProbStep:
    if not isinstance(raw, dict):
        raise SchemaError(f"line {line}: field 'steps[{pos}]' must be an object")
    top = raw.get("top")
    if not isinstance(top, list):
        raise SchemaError(f"line {line}: field 'steps[{pos}].top' must be a list")
    entries = []
    for pair in top:
        if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
            raise SchemaError(
                f"line {line}: field 'steps[{pos}].top' entries must be [token, logprob] pairs"
            )
        entries.append((pair[0], float(pair[1])))
    chosen = raw.get("chosen")
    if chosen is not None and not isinstance(chosen, int):
        raise SchemaError(f"line {line}: field 'steps[{pos}].chosen' must be an int or null")
    if chosen is not None:
        if not (0 <= chosen < len(entries)):
            raise SchemaError(f"line {line}: field 'steps[{pos}].chosen' out of range")
        chosen_logprob = entries[chosen][1]
    else:
        if "chosen_logprob" not in raw:
            raise SchemaError(
                f"line {line}: field 'steps[{pos}]' needs 'chosen_logprob' when chosen is null"
            )
        chosen_logprob = float(raw["chosen_logprob"])
    return LogProbStep(entries=tuple(entries), chosen=chosen, chosen_logprob=chosen_logprob)


def _record_from_obj(obj: dict, line: int) -> GenerationRecord:
    version = _require(obj, "schema_version", line)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"line {line}: unsupported schema_version {version!r}")
    try:
        task = Task(_require(obj, "task", line))
    except ValueError:
        raise SchemaError(f"line {line}: field 'task' must be one of CG, APR") from None
    try:
        language = Language(_require(obj, "language", line))
    except ValueError:
        raise SchemaError(f"line {line}: field 'language' must be 'python' or 'java'") from None
    tokens = _require(obj, "tokens", line)
    if not (isinstance(tokens, list) and all(isinstance(t, str) for t in tokens)):
        raise SchemaError(f"line {line}: field 'tokens' must be a list of strings")
    raw_steps = _require(obj, "steps", line)
    if not isinstance(raw_steps, list):
        raise SchemaError(f"line {line}: field 'steps' must be a list")
    steps = tuple(_parse_step(s, line, i) for i, s in enumerate(raw_steps))
    record = GenerationRecord(
        id=str(_require(obj, "id", line)),
        task=task,
        dataset=str(_require(obj, "dataset", line)),
        model=str(_require(obj, "model", line)),
        language=language,
        problem_id=str(_require(obj, "problem_id", line)),
        tokens=tuple(tokens),
        steps=steps,
        context_prefix=str(obj.get("context_prefix") or ""),
        eos=bool(obj.get("eos", False)),
        error_message=obj.get("error_message"),
        gold_index=obj.get("gold_index"),
    )
    declared = obj.get("source")
    if declared is not None and declared != record.generated_text:
        raise IntegrityError(
            f"line {line}: token concatenation does not equal the declared source"
        )
    violations = validate_record(record)
    if violations:
        raise SchemaError(f"line {line}: " + "; ".join(violations))
    return record


def load_records(path: str | Path) -> list[GenerationRecord]:
    """Load and validate an instance file. Raises on the first bad line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"line {line_no}: invalid JSON: {e}") from None
            if not isinstance(obj, dict):
                raise SchemaError(f"line {line_no}: record must be a JSON object")
            records.append(_record_from_obj(obj, line_no))
    return records


def record_to_obj(record: GenerationRecord) -> dict:
    steps = []
    for step in record.steps:
        raw = {"top": [[t, lp] for t, lp in step.entries], "chosen": step.chosen}
        if step.chosen is None:
            raw["chosen_logprob"] = step.chosen_logprob
        steps.append(raw)
    obj = {
        "schema_version": SCHEMA_VERSION,
        "id": record.id,
        "task": record.task.value,
        "dataset": record.dataset,
        "model": record.model,
        "language": record.language.value,
        "problem_id": record.problem_id,
        "context_prefix": record.context_prefix,
        "source": record.generated_text,
        "tokens": list(record.tokens),
        "eos": record.eos,
        "steps": steps,
    }
    if record.error_message is not None:
        obj["error_message"] = record.error_message
    if record.gold_index is not None:
        obj["gold_index"] = record.gold_index
    return obj


def save_records(records: Iterable[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_obj(record), ensure_ascii=False))
            fh.write("\n")


def load_canonicals(path: str | Path) -> dict[str, CanonicalPool]:
    """Load canonical solutions grouped by problem_id, deduplicating raw texts."""
    grouped: dict[str, list[str]] = {}
    seen: dict[str, set[str]] = {}
    languages: dict[str, Language] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"line {line_no}: invalid JSON: {e}") from None
            pid = str(_require(obj, "problem_id", line_no))
            try:
                language = Language(_require(obj, "language", line_no))
            except ValueError:
                raise SchemaError(
                    f"line {line_no}: field 'language' must be 'python' or 'java'"
                ) from None
            source = _require(obj, "source", line_no)
            if not isinstance(source, str) or not source.strip():
                raise SchemaError(f"line {line_no}: empty solution text")
            if pid in languages and languages[pid] != language:
                raise SchemaError(f"line {line_no}: conflicting language for problem '{pid}'")
            languages[pid] = language
            if source not in seen.setdefault(pid, set()):
                seen[pid].add(source)
                grouped.setdefault(pid, []).append(source)
    return {
        pid: CanonicalPool(problem_id=pid, language=languages[pid], solutions=tuple(sols))
        for pid, sols in grouped.items()
    }


def save_canonicals(pools: Iterable[CanonicalPool], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pool in pools:
            for source in pool.solutions:
                obj = {
                    "problem_id": pool.problem_id,
                    "language": pool.language.value,
                    "source": source,
                }
                fh.write(json.dumps(obj, ensure_ascii=False))
                fh.write("\n")
