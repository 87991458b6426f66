"""Hallucination token localization against canonical-solution pools.

Normalized generated code is compared with each unique normalized canonical
under the language whitespace policy (Python keeps newlines and indentation;
Java keeps nothing). The first differing significant character maps back
through the normalization offset map to an original byte, and that byte to
the covering LLM token. The reported index is the maximum over canonicals;
a full match with any canonical means the record is not hallucinated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from tokloc.corpus import CanonicalPool, CorpusError, GenerationRecord, Language
from tokloc.normalize import dedup_pool, normalize_program

_SPACE = 0x20
_TAB = 0x09
_LF = 0x0A
_CR = 0x0D
_OTHER_WS = (0x0B, 0x0C)
_JAVA_WS = frozenset([_SPACE, _TAB, _LF, _CR, 0x0B, 0x0C])


@dataclass(frozen=True)
class SignificantStream:
    """Bytes that matter for comparison plus their origin offsets."""

    chars: bytes
    origins: np.ndarray = field(repr=False)
    text_length: int = 0


@lru_cache(maxsize=8192)
def _stream_cached(data: bytes, language: Language) -> SignificantStream:
    chars = bytearray()
    origins: list[int] = []
    if language == Language.JAVA:
        for i, b in enumerate(data):
            if b not in _JAVA_WS:
                chars.append(b)
                origins.append(i)
    else:
        at_line_start = True
        i = 0
        n = len(data)
        while i < n:
            b = data[i]
            if b == _CR:
                chars.append(_LF)
                origins.append(i)
                if i + 1 < n and data[i + 1] == _LF:
                    i += 1
                at_line_start = True
            elif b == _LF:
                chars.append(_LF)
                origins.append(i)
                at_line_start = True
            elif b in (_SPACE, _TAB):
                if at_line_start:
                    chars.append(b)
                    origins.append(i)
            elif b in _OTHER_WS:
                pass
            else:
                chars.append(b)
                origins.append(i)
                at_line_start = False
            i += 1
    arr = np.asarray(origins, dtype=np.int64)
    arr.flags.writeable = False
    return SignificantStream(chars=bytes(chars), origins=arr, text_length=len(data))


def significant_stream(text: str | bytes, language: Language) -> SignificantStream:
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    return _stream_cached(data, language)


def mismatch_stream_position(gen: SignificantStream, canon: SignificantStream) -> int | None:
    """First differing stream index; len(gen.chars) when gen is a strict prefix.

    None when the streams are equal. A canonical that is a strict prefix of
    the generated stream mismatches at index len(canon.chars) < len(gen.chars).
    """
    a = np.frombuffer(gen.chars, dtype=np.uint8)
    b = np.frombuffer(canon.chars, dtype=np.uint8)
    n = min(a.size, b.size)
    if n:
        diff = np.nonzero(a[:n] != b[:n])[0]
        if diff.size:
            return int(diff[0])
    if a.size == b.size:
        return None
    return n


def first_mismatch(gen: SignificantStream, canon: SignificantStream) -> int | None:
    """Byte offset (into the generated normalized text) of the first mismatch.

    None when equal. When the generated stream is a strict prefix of the
    canonical, the offset points one past the last generated significant
    byte (the end-of-generation case, attributed to EOS downstream).
    """
    p = mismatch_stream_position(gen, canon)
    if p is None:
        return None
    if p < len(gen.chars):
        return int(gen.origins[p])
    return int(gen.origins[-1]) + 1 if len(gen.chars) else 0


@dataclass(frozen=True)
class HallucinationLabel:
    """Localization result: matched or a 1-based hallucination token index."""

    index: int | None
    matched: bool
    per_canonical: tuple[tuple[int, int | None], ...]


def localize(record: GenerationRecord, pool: CanonicalPool) -> HallucinationLabel:
    """Hallucination token index of record against pool (max rule)."""
    if not pool.solutions:
        raise CorpusError(f"no canonical solutions for problem '{pool.problem_id}'")
    if pool.language != record.language:
        raise CorpusError(
            f"language mismatch: record '{record.id}' is {record.language.value}, "
            f"pool '{pool.problem_id}' is {pool.language.value}"
        )
    language = record.language
    prefix_len = len(record.context_prefix.encode("utf-8"))
    full = record.context_prefix + record.generated_text
    full_len = len(full.encode("utf-8"))
    region = (prefix_len, full_len)
    program = normalize_program(full, language, region)

    gen_norm = program.normalized_bytes[program.normalized_region[0] :]
    gen_stream = significant_stream(gen_norm, language)

    body = record.tokens[:-1] if record.eos else record.tokens
    cum = np.cumsum([len(tok.encode("utf-8")) for tok in body]) if body else np.zeros(0)

    per_canonical: list[tuple[int, int | None]] = []
    matched = False
    best: int | None = None
    for cid, canonical in enumerate(dedup_pool(pool)):
        canon_stream = significant_stream(canonical.normalized_bytes, language)
        p = mismatch_stream_position(gen_stream, canon_stream)
        if p is None:
            matched = True
            per_canonical.append((cid, None))
            continue
        if p == len(gen_stream.chars):
            token_index = record.eos_index  # generation stopped short
        else:
            rel = int(gen_stream.origins[p])
            norm_offset = program.normalized_region[0] + rel
            original_byte = int(program.offset_map[norm_offset])
            gen_byte = original_byte - region[0]
            token_index = int(np.searchsorted(cum, gen_byte, side="right")) + 1
        per_canonical.append((cid, token_index))
        if best is None or token_index > best:
            best = token_index
    return HallucinationLabel(
        index=None if matched else best,
        matched=matched,
        per_canonical=tuple(per_canonical),
    )
