"""Python backend: leaf extraction and definition-site collection via parso.

parso recovers from syntax errors, so parsing never raises; broken stretches
surface as error leaves. Definition sites collected (matching the Python
rules): assignment targets, for-statement variables, comprehension-for
variables, with-statement aliases, except-clause aliases, lambda parameters,
function definition names and parameters.
"""

from __future__ import annotations

import parso
from parso.utils import split_lines

from tokloc.syntax import IdentifierOccurrence, Leaf

_KEYWORD_CONSTANTS = {"True": "true", "False": "false", "None": "none"}

# Parso leaf types emitted as named leaves under these node types.
_NAMED_TYPES = {
    "name": "identifier",
    "number": "number",
    "string": "string",
    "fstring_start": "fstring_start",
    "fstring_string": "fstring_string",
    "fstring_end": "fstring_end",
}

# Target containers we descend into when extracting assignment-like targets.
_TARGET_CONTAINERS = {
    "testlist_star_expr",
    "exprlist",
    "testlist",
    "testlist_comp",
    "atom",
    "star_expr",
}


class _ByteIndex:
    """Convert parso (line, column) positions to byte offsets."""

    def __init__(self, source: str):
        self.lines = split_lines(source, keepends=True)
        starts = [0]
        for line in self.lines:
            starts.append(starts[-1] + len(line.encode("utf-8")))
        self.starts = starts

    def offset(self, pos: tuple[int, int]) -> int:
        line, col = pos
        text = self.lines[line - 1]
        if col == 0:
            return self.starts[line - 1]
        return self.starts[line - 1] + len(text[:col].encode("utf-8"))


def _iter_leaves(node):
    children = getattr(node, "children", None)
    if children is None:
        yield node
    else:
        for child in children:
            yield from _iter_leaves(child)


def _prefix_leaves(prefix: str, end_byte: int) -> list[Leaf]:
    """Synthesize comment / line-continuation leaves from a parso prefix."""
    if not prefix or ("#" not in prefix and "\\" not in prefix):
        return []
    leaves = []
    start_byte = end_byte - len(prefix.encode("utf-8"))
    pos = start_byte
    i = 0
    while i < len(prefix):
        ch = prefix[i]
        if ch == "#":
            j = i
            while j < len(prefix) and prefix[j] != "\n":
                j += 1
            nbytes = len(prefix[i:j].encode("utf-8"))
            leaves.append(Leaf(pos, pos + nbytes, "comment", True))
            pos += nbytes
            i = j
        elif ch == "\\":
            leaves.append(Leaf(pos, pos + 1, "line_continuation", False))
            pos += 1
            i += 1
        else:
            pos += len(ch.encode("utf-8"))
            i += 1
    return leaves


def _leaf_from_parso(leaf, index: _ByteIndex) -> Leaf | None:
    value = leaf.value
    if value == "":
        return None
    start = index.offset(leaf.start_pos)
    end = index.offset(leaf.end_pos)
    t = leaf.type
    if t in ("newline", "endmarker", "indent", "dedent"):
        return None  # pure-whitespace or zero-width bookkeeping leaves
    if t == "error_leaf":
        if value.strip() == "":
            return None
        return Leaf(start, end, "error", False, is_error=True)
    if t == "keyword":
        mapped = _KEYWORD_CONSTANTS.get(value)
        if mapped is not None:
            return Leaf(start, end, mapped, True)
        return Leaf(start, end, value, False)
    if t == "operator":
        return Leaf(start, end, value, False)
    named = _NAMED_TYPES.get(t)
    if named is not None:
        return Leaf(start, end, named, True)
    return Leaf(start, end, t, True)


def _target_names(node, out, label, index):
    """Collect bare-name targets, descending tuple/list patterns only."""
    t = node.type
    if t == "name":
        out.append(
            IdentifierOccurrence(
                name=node.value,
                definition_span=(index.offset(node.start_pos), index.offset(node.end_pos)),
                defining_node_type=label,
            )
        )
    elif t in _TARGET_CONTAINERS:
        for child in node.children:
            _target_names(child, out, label, index)
    elif t == "operator":
        pass
    # atom_expr / power (subscripts, attributes) are uses, not definitions.


def _param_names(params, out, label, index):
    for param in params:
        name = param.name
        if name is not None:
            out.append(
                IdentifierOccurrence(
                    name=name.value,
                    definition_span=(
                        index.offset(name.start_pos),
                        index.offset(name.end_pos),
                    ),
                    defining_node_type=label,
                )
            )


def _after_keyword(node, word):
    children = node.children
    for i, child in enumerate(children):
        if child.type == "keyword" and child.value == word and i + 1 < len(children):
            return children[i + 1]
    return None


def _collect(node, out, index):
    t = node.type
    if t == "expr_stmt":
        children = node.children
        eq_positions = [
            i
            for i, c in enumerate(children)
            if c.type == "operator" and c.value == "="
        ]
        if eq_positions:
            for i, child in enumerate(children):
                prev_eq = i == 0 or getattr(children[i - 1], "value", None) == "="
                if i < eq_positions[-1] and i not in eq_positions and prev_eq:
                    _target_names(child, out, "assignment", index)
        elif len(children) > 1 and children[1].type == "annassign":
            ann = children[1]
            if any(c.type == "operator" and c.value == "=" for c in ann.children):
                _target_names(children[0], out, "assignment", index)
    elif t == "for_stmt":
        if len(node.children) > 1:
            _target_names(node.children[1], out, "for_statement", index)
    elif t in ("sync_comp_for", "comp_for") and len(node.children) > 1:
        nxt = _after_keyword(node, "for")
        if nxt is not None:
            _target_names(nxt, out, "for_in_clause", index)
    elif t == "with_item":
        nxt = _after_keyword(node, "as")
        if nxt is not None:
            _target_names(nxt, out, "with_statement", index)
    elif t == "except_clause":
        nxt = _after_keyword(node, "as")
        if nxt is not None:
            _target_names(nxt, out, "except_clause", index)
    elif t == "funcdef":
        name = node.name
        out.append(
            IdentifierOccurrence(
                name=name.value,
                definition_span=(index.offset(name.start_pos), index.offset(name.end_pos)),
                defining_node_type="function_definition",
            )
        )
        _param_names(node.get_params(), out, "function_definition", index)
    elif t in ("lambdef", "lambdef_nocond"):
        _param_names(node.get_params(), out, "lambda", index)

    for child in getattr(node, "children", ()):
        _collect(child, out, index)


def parse_python(source: str):
    tree = parso.parse(source)
    index = _ByteIndex(source)
    leaves: list[Leaf] = []
    has_errors = False
    for pleaf in _iter_leaves(tree):
        leaves.extend(_prefix_leaves(pleaf.prefix, index.offset(pleaf.start_pos)))
        if pleaf.type == "error_leaf":
            has_errors = True
        made = _leaf_from_parso(pleaf, index)
        if made is not None:
            leaves.append(made)

    def scan_errors(node):
        nonlocal has_errors
        if node.type == "error_node":
            has_errors = True
        for child in getattr(node, "children", ()):
            scan_errors(child)

    scan_errors(tree)
    definitions: list[IdentifierOccurrence] = []
    _collect(tree, definitions, index)
    return leaves, definitions, has_errors
