"""Alpha-renaming of user-defined identifiers to v1, v2, ... with offset maps.

Renaming is scoped to a region (the generated portion of a program): only
identifiers with a definition site inside the region are renamed, and only
their occurrences inside the region are rewritten. Prompt-provided names
survive untouched. Every byte of each replacement maps back to the first
byte of the original identifier occurrence, so mismatches found in
normalized text can be attributed to original tokens.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from tokloc.corpus import CanonicalPool, Language
from tokloc.syntax import collect_identifiers, parse

log = logging.getLogger(__name__)

_VNAME = re.compile(r"^v[0-9]+$")

# Leaf node types whose text can be an identifier occurrence.
_ID_LEAF_TYPES = {
    Language.PYTHON: frozenset(["identifier"]),
    Language.JAVA: frozenset(["identifier", "type_identifier"]),
}


@dataclass(frozen=True)
class NormalizedProgram:
    """A program with collected identifiers renamed to v1..vn inside region.

    offset_map[i] is the byte offset in ``original`` that byte i of
    ``normalized`` derives from; replacement bytes all map to the first byte
    of the original occurrence, other bytes map to themselves (shifted).
    """

    original: str
    normalized: str
    rename_table: tuple[tuple[str, str], ...]
    offset_map: np.ndarray = field(repr=False)
    region: tuple[int, int]
    normalized_region: tuple[int, int]
    original_bytes: bytes = field(repr=False)
    normalized_bytes: bytes = field(repr=False)


@lru_cache(maxsize=4096)
def _normalize_cached(source: str, language: Language, region: tuple[int, int] | None):
    original_bytes = source.encode("utf-8")
    if region is None:
        region = (0, len(original_bytes))
    lo, hi = region
    tree = parse(source, language)
    collected = collect_identifiers(tree, region)
    table = {occ.name: f"v{k}" for k, occ in enumerate(collected, start=1)}

    id_types = _ID_LEAF_TYPES[language]
    replacements = []
    stray = set()
    for leaf in tree.leaves:
        if leaf.node_type not in id_types or leaf.start < lo or leaf.end > hi:
            continue
        text = original_bytes[leaf.start : leaf.end].decode("utf-8")
        new = table.get(text)
        if new is not None:
            replacements.append((leaf.start, leaf.end, new))
        elif _VNAME.match(text):
            stray.add(text)
    if stray - set(table.values()):
        log.warning(
            "normalize: region already uses reserved names %s; renaming proceeds",
            sorted(stray - set(table.values())),
        )

    out = bytearray()
    offsets: list[int] = []
    pos = 0
    for start, end, new in replacements:
        out += original_bytes[pos:start]
        offsets.extend(range(pos, start))
        new_bytes = new.encode("utf-8")
        out += new_bytes
        offsets.extend([start] * len(new_bytes))
        pos = end
    out += original_bytes[pos:]
    offsets.extend(range(pos, len(original_bytes)))

    normalized_bytes = bytes(out)
    offset_map = np.asarray(offsets, dtype=np.int64)
    offset_map.flags.writeable = False
    tail = len(original_bytes) - hi
    normalized_region = (lo, len(normalized_bytes) - tail)
    return NormalizedProgram(
        original=source,
        normalized=normalized_bytes.decode("utf-8"),
        rename_table=tuple(table.items()),
        offset_map=offset_map,
        region=region,
        normalized_region=normalized_region,
        original_bytes=original_bytes,
        normalized_bytes=normalized_bytes,
    )


def normalize_program(
    source: str, language: Language, region: tuple[int, int] | None = None
) -> NormalizedProgram:
    """Rename region-defined identifiers to v1..vn (first-definition order)."""
    return _normalize_cached(source, language, region)


def dedup_pool(pool: CanonicalPool) -> list[NormalizedProgram]:
    """Unique normalized canonicals, keyed by significant-character stream.

    Stable order by first appearance; result cached on the pool.
    """
    if pool._normalized is not None:
        return pool._normalized
    if not pool.solutions:
        raise ValueError(f"empty canonical pool for problem '{pool.problem_id}'")
    from tokloc.localize import significant_stream

    unique: list[NormalizedProgram] = []
    seen: set[bytes] = set()
    for source in pool.solutions:
        program = normalize_program(source, pool.language)
        key = significant_stream(program.normalized_bytes, pool.language).chars
        if key not in seen:
            seen.add(key)
            unique.append(program)
    object.__setattr__(pool, "_normalized", unique)
    return unique
