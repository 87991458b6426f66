"""Java backend: hand-built lexer and structural parser.

No Java grammar runtime is available on the package index, so this module
implements the minimum structure the toolkit needs: a full lexer (every
non-whitespace byte becomes a leaf) and a tolerant recursive-descent pass
that recognizes declarations well enough to (a) collect definition-site
identifiers (variable declarators, enhanced-for variables, lambda
parameters, method and constructor declarations) and (b) re-tag identifiers
and primitive keywords that occur in type position.

The parser never raises on malformed input; it counts recovery events and
the caller retries sub-compilation-unit fragments under synthetic wrappers
(class body, then method body), picking the parse with the fewest errors.
"""

from __future__ import annotations

from tokloc.syntax import IdentifierOccurrence, Leaf

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while""".split()
)

PRIMITIVES = frozenset("boolean byte short int long char float double void".split())

MODIFIERS = frozenset(
    """public protected private static final abstract native synchronized
    transient volatile strictfp default""".split()
)

_OPERATORS = sorted(
    [
        ">>>=", ">>>", ">>=", "<<=", "...", "->", "::", "==", "!=", "<=", ">=",
        "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
        "<<", ">>", "+", "-", "*", "/", "%", "<", ">", "=", "!", "&", "|", "^",
        "~", "?", "@", "(", ")", "{", "}", "[", "]", ";", ",", ".", ":",
    ],
    key=len,
    reverse=True,
)

_INT_NODE = {
    "x": "hex_integer_literal",
    "b": "binary_integer_literal",
    "o": "octal_integer_literal",
    "d": "decimal_integer_literal",
}


class JTok:
    """One lexer token; node_type is mutable so the parser can re-tag it."""

    __slots__ = ("start", "end", "kind", "text", "node_type", "is_named", "is_error")

    def __init__(self, start, end, kind, text, node_type, is_named, is_error=False):
        self.start = start
        self.end = end
        self.kind = kind  # id kw num str char comment op error
        self.text = text
        self.node_type = node_type
        self.is_named = is_named
        self.is_error = is_error

    def __repr__(self):
        return f"JTok({self.kind}:{self.text!r})"


def _is_id_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$" or ord(ch) > 127


def _is_id_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$" or ord(ch) > 127


def tokenize(source: str) -> list[JTok]:
    toks: list[JTok] = []
    n = len(source)
    i = 0
    byte = 0

    def blen(s: str) -> int:
        return len(s.encode("utf-8"))

    while i < n:
        ch = source[i]
        if ch in " \t\r\n\f\x0b":
            byte += blen(ch)
            i += 1
            continue
        start_b = byte
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            j = i
            while j < n and source[j] != "\n":
                j += 1
            text = source[i:j]
            toks.append(JTok(start_b, start_b + blen(text), "comment", text, "line_comment", True))
        elif ch == "/" and i + 1 < n and source[i + 1] == "*":
            j = source.find("*/", i + 2)
            j = n if j < 0 else j + 2
            text = source[i:j]
            toks.append(JTok(start_b, start_b + blen(text), "comment", text, "block_comment", True))
        elif source.startswith('"""', i):
            j = source.find('"""', i + 3)
            j = n if j < 0 else j + 3
            text = source[i:j]
            toks.append(JTok(start_b, start_b + blen(text), "str", text, "text_block", True))
        elif ch == '"':
            j = i + 1
            while j < n and source[j] not in '"\n':
                j += 2 if source[j] == "\\" else 1
            j = min(j + 1, n) if j < n and source[j] == '"' else j
            text = source[i:j]
            toks.append(JTok(start_b, start_b + blen(text), "str", text, "string_literal", True))
        elif ch == "'":
            j = i + 1
            while j < n and source[j] not in "'\n":
                j += 2 if source[j] == "\\" else 1
            j = min(j + 1, n) if j < n and source[j] == "'" else j
            text = source[i:j]
            toks.append(JTok(start_b, start_b + blen(text), "char", text, "character_literal", True))
        elif ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            base = "d"
            if source.startswith(("0x", "0X"), i):
                base = "x"
                j = i + 2
                while j < n and (source[j] in "0123456789abcdefABCDEF_.pP" or source[j] in "+-" and source[j - 1] in "pP"):
                    j += 1
            elif source.startswith(("0b", "0B"), i):
                base = "b"
                j = i + 2
                while j < n and source[j] in "01_":
                    j += 1
            else:
                while j < n and (
                    source[j].isdigit()
                    or source[j] in "._eE"
                    or (source[j] in "+-" and source[j - 1] in "eE")
                ):
                    # a trailing '.' followed by an identifier is a member access
                    if source[j] == "." and j + 1 < n and not source[j + 1].isdigit():
                        break
                    j += 1
                if base == "d" and source[i] == "0" and j - i > 1 and source[i:j].isdigit():
                    base = "o"
            if j < n and source[j] in "lLfFdD":
                j += 1
            text = source[i:j]
            is_float = base in ("d", "x") and any(c in text for c in ".eEpP") or text[-1:] in "fFdD"
            node = "decimal_floating_point_literal" if is_float else _INT_NODE[base]
            toks.append(JTok(start_b, start_b + blen(text), "num", text, node, True))
        elif _is_id_start(ch):
            j = i
            while j < n and _is_id_part(source[j]):
                j += 1
            text = source[i:j]
            end_b = start_b + blen(text)
            if text in ("true", "false"):
                toks.append(JTok(start_b, end_b, "kw", text, text, True))
            elif text == "null":
                toks.append(JTok(start_b, end_b, "kw", text, "null_literal", True))
            elif text in KEYWORDS:
                toks.append(JTok(start_b, end_b, "kw", text, text, False))
            else:
                toks.append(JTok(start_b, end_b, "id", text, "identifier", True))
        else:
            for op in _OPERATORS:
                if source.startswith(op, i):
                    toks.append(JTok(start_b, start_b + len(op), "op", op, op, False))
                    break
            else:
                toks.append(
                    JTok(start_b, start_b + blen(ch), "error", ch, "error", False, is_error=True)
                )
                op = ch
            text = op
        i += len(text)
        byte += blen(text)
    return toks


class _Parser:
    """Tolerant structural pass over the significant token stream."""

    def __init__(self, toks: list[JTok]):
        self.toks = [t for t in toks if t.kind != "comment"]
        self.n = len(self.toks)
        self.i = 0
        self.errors = sum(1 for t in toks if t.kind == "error")
        self.defs: list[IdentifierOccurrence] = []

    # -- token helpers -----------------------------------------------------

    def tok(self, k=0) -> JTok | None:
        j = self.i + k
        return self.toks[j] if 0 <= j < self.n else None

    def is_op(self, text, k=0):
        t = self.tok(k)
        return t is not None and t.kind == "op" and t.text == text

    def is_kw(self, word, k=0):
        t = self.tok(k)
        return t is not None and t.kind == "kw" and t.text == word

    def is_id(self, k=0):
        t = self.tok(k)
        return t is not None and t.kind == "id"

    def advance(self):
        self.i += 1

    def expect_op(self, text) -> bool:
        if self.is_op(text):
            self.advance()
            return True
        return False

    def _emit(self, tok: JTok, label: str):
        self.defs.append(
            IdentifierOccurrence(
                name=tok.text, definition_span=(tok.start, tok.end), defining_node_type=label
            )
        )

    def skip_to_op(self, *texts):
        """Advance past nesting-aware until one of texts at depth 0 (consumed)."""
        depth = 0
        while self.i < self.n:
            t = self.toks[self.i]
            if t.kind == "op":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    if depth == 0 and t.text in texts:
                        self.advance()
                        return
                    depth -= 1
                elif depth == 0 and t.text in texts:
                    self.advance()
                    return
            self.advance()

    # -- speculative scanners (no side effects unless committed) -----------

    def scan_type(self, j: int):
        """Try to read a type starting at token j; requires balanced generics.

        Returns (end_index, retags) or None; retags is a list of
        (token_index, node_type) to apply when the caller commits.
        """
        scanned = self._scan_type_raw(j)
        if scanned is None or scanned[2] != 0:
            return None
        return scanned[0], scanned[1]

    def _scan_type_raw(self, j: int):
        """Like scan_type but returns (j, retags, pending_closes).

        pending_closes counts '>' units left over when a multi-'>' token
        (``>>``/``>>>``) closed this type's generic list together with
        enclosing ones; enclosing lists consume them.
        """
        retags: list[tuple[int, str]] = []
        pending = 0
        t = self.toks[j] if j < self.n else None
        if t is None:
            return None
        if t.kind == "kw" and t.text in PRIMITIVES:
            retags.append((j, "primitive_type"))
            j += 1
        elif t.kind == "id":
            last_id = j
            j += 1
            while (
                j + 1 < self.n
                and self.toks[j].kind == "op"
                and self.toks[j].text == "."
                and self.toks[j + 1].kind == "id"
            ):
                last_id = j + 1
                j += 2
            if j < self.n and self.toks[j].kind == "op" and self.toks[j].text == "<":
                scanned = self._scan_type_args(j)
                if scanned is not None:
                    j, inner_tags, pending = scanned
                    retags.extend(inner_tags)
            retags.append((last_id, "type_identifier"))
        else:
            return None
        if pending == 0:
            while (
                j + 1 < self.n
                and self.toks[j].kind == "op"
                and self.toks[j].text == "["
                and self.toks[j + 1].kind == "op"
                and self.toks[j + 1].text == "]"
            ):
                j += 2
        return j, retags, pending

    def _scan_type_args(self, j: int):
        """Scan '<' type arguments '>' at j; returns (next_j, retags, pending)."""
        if not (self.toks[j].kind == "op" and self.toks[j].text == "<"):
            return None
        j += 1
        retags: list[tuple[int, str]] = []
        if j < self.n and self.toks[j].kind == "op" and self.toks[j].text == ">":
            return j + 1, retags, 0  # diamond <>
        while j < self.n:
            t = self.toks[j]
            if t.kind == "op" and t.text == "?":
                j += 1
                if j < self.n and self.toks[j].kind == "kw" and self.toks[j].text in (
                    "extends",
                    "super",
                ):
                    j += 1
                    continue  # bound type comes as the next element
            elif t.kind == "kw" and t.text in ("extends", "super"):
                j += 1
                continue
            elif t.kind == "op" and t.text == "@":
                j += 2 if j + 1 < self.n else 1
                continue
            else:
                scanned = self._scan_type_raw(j)
                if scanned is None:
                    return None
                j, tags, pending = scanned
                retags.extend(tags)
                if pending > 0:
                    # the nested list's multi-'>' token closed this one too
                    return j, retags, pending - 1
            if j >= self.n:
                return None
            t = self.toks[j]
            if t.kind == "op" and t.text == ",":
                j += 1
                continue
            if t.kind == "op" and t.text in (">", ">>", ">>>"):
                return j + 1, retags, len(t.text) - 1
            if t.kind == "op" and t.text == "&":
                j += 1
                continue
            return None
        return None

    def commit(self, retags):
        for idx, node_type in retags:
            tok = self.toks[idx]
            tok.node_type = node_type
            tok.is_named = True

    # -- declarations -------------------------------------------------------

    def skip_annotations_and_modifiers(self):
        while self.i < self.n:
            if self.is_op("@") and (self.is_id(1) or self.is_kw("interface", 1)):
                if self.is_kw("interface", 1):
                    return  # @interface declaration, handled by caller
                self.advance()
                self.advance()
                while self.is_op(".") and self.is_id(1):
                    self.advance()
                    self.advance()
                if self.is_op("("):
                    self.advance()
                    self.skip_to_op(")")
            elif self.tok() is not None and self.tok().kind == "kw" and self.tok().text in MODIFIERS:
                self.advance()
            else:
                return

    def parse_formal_params(self, label: str):
        """Parse '(' typed parameters ')' collecting parameter names."""
        if not self.expect_op("("):
            return
        while self.i < self.n and not self.is_op(")"):
            start = self.i
            self.skip_annotations_and_modifiers()
            if self.is_kw("final"):
                self.advance()
            scanned = self.scan_type(self.i)
            if scanned is not None:
                j, retags = scanned
                if j < self.n and self.toks[j].kind == "op" and self.toks[j].text == "...":
                    j += 1
                if j < self.n and self.toks[j].kind == "id":
                    self.commit(retags)
                    self._emit(self.toks[j], label)
                    self.i = j + 1
                    while self.is_op("[") and self.is_op("]", 1):
                        self.advance()
                        self.advance()
                elif j < self.n and self.toks[j].kind == "kw" and self.toks[j].text == "this":
                    self.commit(retags)  # receiver parameter
                    self.i = j + 1
                else:
                    self.skip_param()
            else:
                self.skip_param()
            if self.is_op(","):
                self.advance()
            if self.i == start and not self.is_op(")"):
                self.errors += 1
                self.advance()
        self.expect_op(")")

    def skip_param(self):
        depth = 0
        while self.i < self.n:
            t = self.toks[self.i]
            if t.kind == "op":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    if depth == 0:
                        return
                    depth -= 1
                elif t.text == "," and depth == 0:
                    return
            self.advance()

    def looks_like_params(self, j: int) -> bool:
        """True if the '(' at j opens a formal parameter list, not arguments."""
        if not (self.toks[j].kind == "op" and self.toks[j].text == "("):
            return False
        k = j + 1
        if k < self.n and self.toks[k].kind == "op" and self.toks[k].text == ")":
            return True  # () — caller decides by what follows
        while k < self.n:
            t = self.toks[k]
            if t.kind == "kw" and (t.text == "final" or t.text in PRIMITIVES):
                return True
            if t.kind == "op" and t.text == "@":
                return True
            scanned = self.scan_type(k)
            if scanned is None:
                return False
            m, _ = scanned
            if m < self.n and self.toks[m].kind == "op" and self.toks[m].text == "...":
                m += 1
            if m < self.n and self.toks[m].kind == "id":
                return True
            return False
        return False

    def after_matching_paren(self, j: int) -> int:
        depth = 0
        while j < self.n:
            t = self.toks[j]
            if t.kind == "op":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    depth -= 1
                    if depth == 0:
                        return j + 1
            j += 1
        return j

    def try_member(self, in_class: bool) -> bool:
        """Try constructor / method / field / initializer at the cursor."""
        save = self.i
        self.skip_annotations_and_modifiers()
        if self.is_op("{"):
            self.advance()
            self.parse_statements_until("}")
            self.expect_op("}")
            return True
        if self.tok() is not None and self.tok().kind == "kw" and self.tok().text in (
            "class",
            "interface",
            "enum",
        ):
            self.parse_type_decl()
            return True
        if self.is_op("<"):  # generic method/constructor type parameters
            scanned = self._scan_type_args(self.i)
            if scanned is not None and scanned[2] == 0:
                self.commit(scanned[1])
                self.i = scanned[0]
        # constructor: Name ( params ) ...
        if self.is_id() and self.is_op("(", 1) and self.looks_like_params(self.i + 1):
            after = self.after_matching_paren(self.i + 1)
            nxt = self.toks[after] if after < self.n else None
            decl_follows = nxt is None or (
                nxt.kind == "op" and nxt.text in ("{", ";")
            ) or (nxt.kind == "kw" and nxt.text == "throws")
            empty_parens = self.is_op(")", 2)
            if decl_follows and (in_class or not empty_parens or (nxt is not None and nxt.text == "{")):
                name = self.tok()
                self._emit(name, "constructor_declaration")
                self.advance()
                self.parse_formal_params("constructor_declaration")
                self.parse_throws()
                self.parse_body_or_semi()
                return True
        # method or field: Type Name ( ... ) | Type declarators
        scanned = self.scan_type(self.i)
        if scanned is not None:
            j, retags = scanned
            if j < self.n and self.toks[j].kind == "id":
                follow = self.toks[j + 1] if j + 1 < self.n else None
                if follow is not None and follow.kind == "op" and follow.text == "(":
                    self.commit(retags)
                    self._emit(self.toks[j], "method_declaration")
                    self.i = j + 1
                    self.parse_formal_params("method_declaration")
                    self.parse_throws()
                    self.parse_body_or_semi()
                    return True
                if follow is None or (
                    follow.kind == "op" and follow.text in ("=", ";", ",")
                ) or (
                    follow is not None
                    and follow.kind == "op"
                    and follow.text == "["
                    and j + 2 < self.n
                    and self.toks[j + 2].text == "]"
                ):
                    self.commit(retags)
                    self.i = j
                    self.parse_declarators()
                    return True
        self.i = save
        return False

    def parse_throws(self):
        if self.is_kw("throws"):
            self.advance()
            while True:
                scanned = self.scan_type(self.i)
                if scanned is None:
                    break
                self.commit(scanned[1])
                self.i = scanned[0]
                if self.is_op(","):
                    self.advance()
                    continue
                break

    def parse_body_or_semi(self):
        if self.is_op("{"):
            self.advance()
            self.parse_statements_until("}")
            self.expect_op("}")
        elif self.is_op(";"):
            self.advance()

    def parse_declarators(self):
        """id [dims] [= init] (, id ...)* ';' — collects variable declarators."""
        while self.i < self.n:
            if not self.is_id():
                break
            self._emit(self.tok(), "variable_declarator")
            self.advance()
            while self.is_op("[") and self.is_op("]", 1):
                self.advance()
                self.advance()
            if self.is_op("="):
                self.advance()
                self.scan_expression((",", ";"))
            if self.is_op(","):
                self.advance()
                continue
            break
        if self.is_op(";"):
            self.advance()

    def parse_type_decl(self):
        self.advance()  # class / interface / enum
        if self.is_id():
            self.advance()
        if self.is_op("<"):
            scanned = self._scan_type_args(self.i)
            if scanned is not None and scanned[2] == 0:
                self.commit(scanned[1])
                self.i = scanned[0]
        while self.tok() is not None and not self.is_op("{"):
            if self.tok().kind == "kw" and self.tok().text in ("extends", "implements"):
                self.advance()
                continue
            scanned = self.scan_type(self.i)
            if scanned is not None:
                self.commit(scanned[1])
                self.i = scanned[0]
                if self.is_op(","):
                    self.advance()
                continue
            break
        if self.is_op("{"):
            self.advance()
            self.parse_class_body_until("}")
            self.expect_op("}")

    def parse_class_body_until(self, closer: str):
        while self.i < self.n and not self.is_op(closer):
            start = self.i
            if self.is_op(";"):
                self.advance()
                continue
            if not self.try_member(in_class=True):
                self.errors += 1
                self.advance()
            if self.i == start:
                self.advance()

    # -- statements ----------------------------------------------------------

    def parse_statements_until(self, closer: str):
        while self.i < self.n and not self.is_op(closer):
            start = self.i
            self.parse_statement()
            if self.i == start:
                self.errors += 1
                self.advance()

    def enhanced_for_colon(self) -> bool:
        """After 'for (', does a ':' at depth 0 precede any ';'?"""
        j = self.i
        depth = 0
        while j < self.n:
            t = self.toks[j]
            if t.kind == "op":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    if depth == 0:
                        return False
                    depth -= 1
                elif depth == 0 and t.text == ";":
                    return False
                elif depth == 0 and t.text == ":":
                    return True
            j += 1
        return False

    def parse_statement(self):
        t = self.tok()
        if t is None:
            return
        if t.kind == "op" and t.text == "{":
            self.advance()
            self.parse_statements_until("}")
            self.expect_op("}")
            return
        if t.kind == "op" and t.text == ";":
            self.advance()
            return
        if t.kind == "kw":
            word = t.text
            if word in ("class", "interface", "enum"):
                self.parse_type_decl()
                return
            if word == "for":
                self.advance()
                if self.expect_op("("):
                    if self.enhanced_for_colon():
                        self.skip_annotations_and_modifiers()
                        if self.is_kw("final"):
                            self.advance()
                        scanned = self.scan_type(self.i)
                        if scanned is not None:
                            j, retags = scanned
                            if j < self.n and self.toks[j].kind == "id":
                                self.commit(retags)
                                self._emit(self.toks[j], "enhanced_for_statement")
                                self.i = j + 1
                        if self.is_op(":"):
                            self.advance()
                        self.scan_expression((")",))
                        self.expect_op(")")
                    else:
                        if not self.is_op(";"):
                            if not self.try_local_declaration(terminator=";"):
                                self.scan_expression((";",))
                        self.expect_op(";")
                        self.scan_expression((";",))
                        self.expect_op(";")
                        self.scan_expression((")",))
                        self.expect_op(")")
                self.parse_statement()
                return
            if word in ("if", "while", "switch", "synchronized"):
                self.advance()
                if self.expect_op("("):
                    self.scan_expression((")",))
                    self.expect_op(")")
                self.parse_statement()
                if word == "if" and self.is_kw("else"):
                    self.advance()
                    self.parse_statement()
                return
            if word == "do":
                self.advance()
                self.parse_statement()
                if self.is_kw("while"):
                    self.advance()
                    if self.expect_op("("):
                        self.scan_expression((")",))
                        self.expect_op(")")
                    self.expect_op(";")
                return
            if word == "try":
                self.advance()
                if self.is_op("("):
                    self.advance()
                    while self.i < self.n and not self.is_op(")"):
                        if self.is_kw("final"):
                            self.advance()
                        scanned = self.scan_type(self.i)
                        if scanned is not None and scanned[0] < self.n and self.toks[scanned[0]].kind == "id":
                            self.commit(scanned[1])
                            self.i = scanned[0] + 1
                            if self.is_op("="):
                                self.advance()
                        self.scan_expression((";", ")"))
                        if self.is_op(";"):
                            self.advance()
                    self.expect_op(")")
                self.parse_statement()
                while self.is_kw("catch"):
                    self.advance()
                    if self.expect_op("("):
                        if self.is_kw("final"):
                            self.advance()
                        while True:
                            scanned = self.scan_type(self.i)
                            if scanned is None:
                                break
                            self.commit(scanned[1])
                            self.i = scanned[0]
                            if self.is_op("|"):
                                self.advance()
                                continue
                            break
                        if self.is_id():
                            self.advance()  # catch parameter: not collected
                        self.expect_op(")")
                    self.parse_statement()
                if self.is_kw("finally"):
                    self.advance()
                    self.parse_statement()
                return
            if word in ("return", "throw", "assert"):
                self.advance()
                self.scan_expression((";",))
                self.expect_op(";")
                return
            if word in ("break", "continue"):
                self.advance()
                if self.is_id():
                    self.advance()
                self.expect_op(";")
                return
            if word in MODIFIERS or word in PRIMITIVES or word == "final":
                if self.try_member(in_class=False):
                    return
                if self.try_local_declaration(terminator=";"):
                    self.expect_op(";")
                    return
                self.scan_expression((";",))
                self.expect_op(";")
                return
            # other keywords (new, this, super, ...) start expressions
            self.scan_expression((";",))
            self.expect_op(";")
            return
        # labeled statement
        if t.kind == "id" and self.is_op(":", 1):
            self.advance()
            self.advance()
            self.parse_statement()
            return
        # declaration vs expression vs fragment-level member
        if self.try_local_declaration(terminator=";"):
            self.expect_op(";")
            return
        if t.kind == "id" and self.try_member(in_class=False):
            return
        self.scan_expression((";",))
        self.expect_op(";")

    def try_local_declaration(self, terminator: str) -> bool:
        scanned = self.scan_type(self.i)
        if scanned is None:
            return False
        j, retags = scanned
        if j >= self.n or self.toks[j].kind != "id":
            return False
        follow = self.toks[j + 1] if j + 1 < self.n else None
        ok = follow is None or (
            follow.kind == "op"
            and (
                follow.text in ("=", ";", ",")
                or (follow.text == "[" and j + 2 < self.n and self.toks[j + 2].text == "]")
            )
        )
        if not ok:
            return False
        self.commit(retags)
        self.i = j
        while self.i < self.n:
            if not self.is_id():
                break
            self._emit(self.tok(), "variable_declarator")
            self.advance()
            while self.is_op("[") and self.is_op("]", 1):
                self.advance()
                self.advance()
            if self.is_op("="):
                self.advance()
                self.scan_expression((",", terminator))
            if self.is_op(","):
                self.advance()
                continue
            break
        return True

    # -- expressions ----------------------------------------------------------

    def lambda_params_from(self, arrow_index: int):
        """Collect lambda parameters looking back from a '->' token."""
        k = arrow_index - 1
        if k < 0:
            return
        t = self.toks[k]
        if t.kind == "id":
            prev = self.toks[k - 1] if k > 0 else None
            if prev is not None and prev.kind == "kw" and prev.text == "case":
                return  # switch arrow label, not a lambda
            self._emit(t, "lambda_expression")
            return
        if t.kind == "op" and t.text == ")":
            depth = 0
            j = k
            while j >= 0:
                tj = self.toks[j]
                if tj.kind == "op" and tj.text == ")":
                    depth += 1
                elif tj.kind == "op" and tj.text == "(":
                    depth -= 1
                    if depth == 0:
                        break
                j -= 1
            if j < 0:
                return
            seg = range(j + 1, k)
            idxs = list(seg)
            if not idxs:
                return
            # typed parameter list?
            m = idxs[0]
            typed: list[int] = []
            while m < k:
                if self.toks[m].kind == "kw" and self.toks[m].text == "final":
                    m += 1
                    continue
                scanned = self.scan_type(m)
                if scanned is None:
                    typed = []
                    break
                e, retags = scanned
                if e < k and self.toks[e].kind == "id":
                    typed.append(e)
                    self.commit(retags)
                    m = e + 1
                    if m < k and self.toks[m].kind == "op" and self.toks[m].text == ",":
                        m += 1
                        continue
                    break
                typed = []
                break
            if typed:
                for e in typed:
                    self._emit(self.toks[e], "lambda_expression")
                return
            # inferred parameter list: bare identifiers
            for j2 in idxs:
                tj = self.toks[j2]
                if tj.kind == "id":
                    self._emit(tj, "lambda_expression")
                elif not (tj.kind == "op" and tj.text == ","):
                    return  # not a parameter list after all

    def scan_expression(self, stops: tuple[str, ...]):
        """Scan an expression, handling lambdas and anonymous class bodies.

        Stops before any token in ``stops`` found at depth 0 (not consumed).
        """
        depth = 0
        while self.i < self.n:
            t = self.toks[self.i]
            if t.kind == "op":
                if depth == 0 and t.text in stops:
                    return
                if t.text in ("(", "["):
                    depth += 1
                    self.advance()
                    continue
                if t.text in (")", "]", "}"):
                    if depth == 0:
                        return
                    depth -= 1
                    self.advance()
                    continue
                if t.text == "{":
                    self.advance()
                    self.scan_expression(("}",))
                    self.expect_op("}")
                    continue
                if t.text == "->":
                    self.lambda_params_from(self.i)
                    self.advance()
                    if self.is_op("{"):
                        self.advance()
                        self.parse_statements_until("}")
                        self.expect_op("}")
                    continue
                self.advance()
                continue
            if t.kind == "kw" and t.text == "new":
                self.advance()
                scanned = self.scan_type(self.i)
                if scanned is not None:
                    self.commit(scanned[1])
                    self.i = scanned[0]
                if self.is_op("("):
                    self.advance()
                    self.scan_expression((")",))
                    self.expect_op(")")
                    if self.is_op("{"):
                        self.advance()
                        self.parse_class_body_until("}")
                        self.expect_op("}")
                continue
            self.advance()

    # -- top level -------------------------------------------------------------

    def parse_unit(self):
        while self.i < self.n:
            start = self.i
            if self.is_op(";"):
                self.advance()
                continue
            if self.is_kw("package") or self.is_kw("import"):
                self.skip_to_op(";")
            elif self.is_op("@") and self.is_kw("interface", 1):
                self.advance()
                self.advance()
                self.parse_type_decl_tail_annotation()
            else:
                probe = self.i
                self.skip_annotations_and_modifiers()
                if self.tok() is not None and self.tok().kind == "kw" and self.tok().text in (
                    "class",
                    "interface",
                    "enum",
                ):
                    self.parse_type_decl()
                else:
                    self.i = probe
                    if not self.try_member(in_class=False):
                        self.parse_statement()
            if self.i == start:
                self.errors += 1
                self.advance()

    def parse_type_decl_tail_annotation(self):
        if self.is_id():
            self.advance()
        if self.is_op("{"):
            self.advance()
            self.parse_class_body_until("}")
            self.expect_op("}")


def _run_parse(source: str):
    toks = tokenize(source)
    parser = _Parser(toks)
    parser.parse_unit()
    leaves = [
        Leaf(t.start, t.end, t.node_type, t.is_named, t.is_error) for t in toks
    ]
    return leaves, parser.defs, parser.errors


_WRAPPERS = [
    ("class_body", "class __TokWrap {\n", "\n}"),
    ("method_body", "class __TokWrap { void __tokwrap() {\n", "\n} }"),
]


def parse_java(source: str):
    """Parse, retrying fragments under synthetic wrappers on parse errors."""
    leaves, defs, errors = _run_parse(source)
    best = (errors, None, leaves, defs)
    if errors > 0:
        for label, prefix, suffix in _WRAPPERS:
            shift = len(prefix.encode("utf-8"))
            end = shift + len(source.encode("utf-8"))
            wleaves, wdefs, werrors = _run_parse(prefix + source + suffix)
            if werrors < best[0]:
                inner_leaves = [
                    Leaf(l.start - shift, l.end - shift, l.node_type, l.is_named, l.is_error)
                    for l in wleaves
                    if l.start >= shift and l.end <= end
                ]
                inner_defs = [
                    IdentifierOccurrence(
                        d.name,
                        (d.definition_span[0] - shift, d.definition_span[1] - shift),
                        d.defining_node_type,
                    )
                    for d in wdefs
                    if d.definition_span[0] >= shift and d.definition_span[1] <= end
                ]
                best = (werrors, label, inner_leaves, inner_defs)
            if best[0] == 0:
                break
    errors, wrapper, leaves, defs = best
    return leaves, defs, errors > 0, wrapper
