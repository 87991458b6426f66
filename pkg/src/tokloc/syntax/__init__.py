"""Concrete-syntax layer: leaf spans, node types, definition sites, token types.

Python is backed by parso (an error-recovering grammar runtime); Java by the
in-repo lexer/structural parser in ``javasrc``. Both expose the same surface:
a flat list of leaves with byte spans and tree-sitter-style node types, plus
the definition-site identifier occurrences used for alpha-renaming.

All offsets throughout are byte offsets into the UTF-8 encoding of the
source. SyntaxTree values are immutable after construction.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum

from tokloc.corpus import GenerationRecord, Language


class ParserError(Exception):
    """Irrecoverable parser-configuration failure (not a parse error)."""


class TokenType(Enum):
    """Token categories; enum order fixes the one-hot encoding order."""

    KEYWORD = 0
    DELIMITER = 1
    OPERATOR = 2
    CONSTANT = 3
    IDENTIFIER = 4
    TYPE_IDENTIFIER = 5
    SPACE = 6
    EOS = 7


N_TOKEN_TYPES = len(TokenType)

_WHITESPACE_BYTES = frozenset(b" \t\n\r\x0b\x0c")
_OPERATOR_CHARS = frozenset("+-*/%<>=!&|^~?@")

PYTHON_KEYWORDS = frozenset(
    """False None True and as assert async await break class continue def del elif
    else except finally for from global if import in is lambda nonlocal not or
    pass raise return while with yield match case""".split()
)

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null""".split()
)


@dataclass(frozen=True)
class Leaf:
    start: int
    end: int
    node_type: str
    is_named: bool
    is_error: bool = False


@dataclass(frozen=True)
class IdentifierOccurrence:
    """A definition-site occurrence of a user-defined identifier."""

    name: str
    definition_span: tuple[int, int]
    defining_node_type: str


@dataclass(frozen=True)
class SyntaxTree:
    source: str
    language: Language
    leaves: tuple[Leaf, ...]
    definitions: tuple[IdentifierOccurrence, ...]
    has_errors: bool = False
    wrapper: str | None = None
    source_bytes: bytes = field(default=b"", repr=False)
    _leaf_starts: tuple[int, ...] = field(default=(), repr=False)

    def leaf_at(self, offset: int) -> Leaf | None:
        i = bisect_right(self._leaf_starts, offset) - 1
        if i >= 0 and self.leaves[i].end > offset:
            return self.leaves[i]
        return None


def _make_tree(source, language, leaves, definitions, has_errors, wrapper=None):
    leaves = tuple(sorted(leaves, key=lambda l: (l.start, l.end)))
    definitions = tuple(sorted(definitions, key=lambda d: d.definition_span))
    return SyntaxTree(
        source=source,
        language=language,
        leaves=leaves,
        definitions=definitions,
        has_errors=has_errors,
        wrapper=wrapper,
        source_bytes=source.encode("utf-8"),
        _leaf_starts=tuple(l.start for l in leaves),
    )


def parse(source: str, language: Language) -> SyntaxTree:
    """Parse source into a leaf-level syntax tree; never raises on bad code."""
    if language == Language.PYTHON:
        from tokloc.syntax import pysrc

        leaves, defs, has_errors = pysrc.parse_python(source)
        return _make_tree(source, language, leaves, defs, has_errors)
    if language == Language.JAVA:
        from tokloc.syntax import javasrc

        leaves, defs, has_errors, wrapper = javasrc.parse_java(source)
        return _make_tree(source, language, leaves, defs, has_errors, wrapper)
    raise ParserError(f"no parser configured for language {language!r}")


def collect_identifiers(
    tree: SyntaxTree, region: tuple[int, int] | None = None
) -> list[IdentifierOccurrence]:
    """Definition-site identifiers inside region, one per name, first-seen order."""
    if region is None:
        region = (0, len(tree.source_bytes))
    lo, hi = region
    out: list[IdentifierOccurrence] = []
    seen: set[str] = set()
    for occ in tree.definitions:
        s, e = occ.definition_span
        if s >= lo and e <= hi and occ.name not in seen:
            seen.add(occ.name)
            out.append(occ)
    return out


# Named node types that always map to Constant, across both backends.
_CONSTANT_NODE_TYPES = frozenset(
    """number integer float string fstring_start fstring_string fstring_end
    escape_sequence string_literal text_block character_literal
    decimal_integer_literal hex_integer_literal octal_integer_literal
    binary_integer_literal decimal_floating_point_literal
    hex_floating_point_literal true false none null_literal""".split()
)

# Leaf types whose content is classified by the character-class fallback.
_FALLBACK_NODE_TYPES = frozenset(
    ["comment", "line_comment", "block_comment", "error", "line_continuation"]
)


def _classify_symbol(text: str) -> TokenType:
    if any(ch in _OPERATOR_CHARS for ch in text):
        return TokenType.OPERATOR
    return TokenType.DELIMITER


def _is_word_byte(b: int) -> bool:
    if b >= 128:
        return True
    return b == 0x5F or b == 0x24 or chr(b).isalnum()


def _fallback_classify(tree: SyntaxTree, offset: int) -> TokenType:
    """Character-class fallback used for error leaves, comments and gaps."""
    data = tree.source_bytes
    b = data[offset]
    ch = chr(b) if b < 128 else ""
    if ch.isalpha() or ch == "_" or ch == "$" or b >= 128:
        lo = offset
        while lo > 0 and _is_word_byte(data[lo - 1]):
            lo -= 1
        hi = offset + 1
        while hi < len(data) and _is_word_byte(data[hi]):
            hi += 1
        word = data[lo:hi].decode("utf-8", errors="replace")
        reserved = PYTHON_KEYWORDS if tree.language == Language.PYTHON else JAVA_KEYWORDS
        if word in ("True", "False", "None", "true", "false", "null"):
            return TokenType.CONSTANT
        if word in reserved:
            return TokenType.KEYWORD
        return TokenType.IDENTIFIER
    if ch.isdigit():
        return TokenType.CONSTANT
    if ch in "\"'`":
        return TokenType.CONSTANT
    if ch in _OPERATOR_CHARS:
        return TokenType.OPERATOR
    return TokenType.DELIMITER


def classify_offset(tree: SyntaxTree, offset: int) -> TokenType:
    """Token type of the byte at offset. Total: every byte classifies."""
    if not (0 <= offset < len(tree.source_bytes)):
        raise ValueError(f"offset {offset} outside source of {len(tree.source_bytes)} bytes")
    if tree.source_bytes[offset] in _WHITESPACE_BYTES:
        return TokenType.SPACE
    leaf = tree.leaf_at(offset)
    if leaf is None or leaf.is_error or leaf.node_type in _FALLBACK_NODE_TYPES:
        return _fallback_classify(tree, offset)
    if leaf.is_named:
        if leaf.node_type == "identifier":
            return TokenType.IDENTIFIER
        if leaf.node_type in ("type_identifier", "primitive_type"):
            return TokenType.TYPE_IDENTIFIER
        if leaf.node_type in _CONSTANT_NODE_TYPES:
            return TokenType.CONSTANT
        return _fallback_classify(tree, offset)
    # Anonymous leaves: reserved words vs symbol tokens.
    if leaf.node_type[:1].isalpha():
        return TokenType.KEYWORD
    return _classify_symbol(leaf.node_type)


@dataclass(frozen=True)
class TokenAnnotation:
    """Per-LLM-token view: byte span, token type, and step signals."""

    token_index: int
    span: tuple[int, int]
    type: TokenType
    chosen_prob: float
    entropy: float


def token_spans(record: GenerationRecord) -> list[tuple[int, int]]:
    """Byte spans of each LLM token inside context_prefix + generated text."""
    pos = len(record.context_prefix.encode("utf-8"))
    spans = []
    body_len = len(record.tokens) - 1 if record.eos else len(record.tokens)
    for i, tok in enumerate(record.tokens):
        if record.eos and i == body_len:
            spans.append((pos, pos))
        else:
            n = len(tok.encode("utf-8"))
            spans.append((pos, pos + n))
            pos += n
    return spans


def annotate_tokens(record: GenerationRecord) -> list[TokenAnnotation]:
    """One annotation per LLM token; type from the first non-whitespace byte."""
    full = record.context_prefix + record.generated_text
    tree = parse(full, record.language)
    spans = token_spans(record)
    annotations = []
    n = len(record.tokens)
    for i, (tok, step, span) in enumerate(zip(record.tokens, record.steps, spans), start=1):
        if record.eos and i == n:
            ttype = TokenType.EOS
        else:
            tok_bytes = tok.encode("utf-8")
            first = next(
                (k for k, b in enumerate(tok_bytes) if b not in _WHITESPACE_BYTES), None
            )
            if first is None:
                ttype = TokenType.SPACE
            else:
                ttype = classify_offset(tree, span[0] + first)
        annotations.append(
            TokenAnnotation(
                token_index=i,
                span=span,
                type=ttype,
                chosen_prob=step.chosen_prob(),
                entropy=step.entropy() if step.entries else 0.0,
            )
        )
    return annotations
