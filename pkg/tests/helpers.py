"""Shared test utilities: record builders, template fuzzers, diff oracle.

The oracle here re-implements the whitespace policy and token attribution
with plain loops, independent of the library's stream/offset-map path.
"""

from __future__ import annotations

import math

import numpy as np

from tokloc.corpus import GenerationRecord, Language, LogProbStep, Task


def make_step(top1: float = 0.8, k: int = 5, token: str = "tok") -> LogProbStep:
    rest = (1.0 - top1) / max(1, k - 1)
    probs = [top1] + [rest * (0.9**i) for i in range(k - 1)]
    entries = tuple((f"{token}{i}", math.log(p)) for i, p in enumerate(probs))
    return LogProbStep(entries=entries, chosen=0, chosen_logprob=entries[0][1])


def make_record(
    tokens: list[str],
    language: Language = Language.PYTHON,
    rec_id: str = "r1",
    eos: bool = True,
    gold_index: int | None = None,
    context_prefix: str = "",
    model: str = "model-a",
    dataset: str = "synthetic",
    top1s: list[float] | None = None,
) -> GenerationRecord:
    toks = list(tokens) + ([""] if eos else [])
    steps = []
    for i, tok in enumerate(toks):
        top1 = top1s[i] if top1s is not None else 0.8
        steps.append(make_step(top1=top1, token=tok or "<eos>"))
    return GenerationRecord(
        id=rec_id,
        task=Task.CG,
        dataset=dataset,
        model=model,
        language=language,
        problem_id="p1",
        tokens=tuple(toks),
        steps=tuple(steps),
        context_prefix=context_prefix,
        eos=eos,
        gold_index=gold_index,
    )


# -- template fuzzers ----------------------------------------------------------

_PY_NAMES = ["acc", "box", "cur", "data", "elem", "flag", "item", "key", "left",
             "num", "out", "pos", "res", "right", "step", "tmp", "total", "val"]
_JAVA_NAMES = ["acc", "base", "count", "depth", "extra", "first", "grand",
               "high", "index", "joint", "kept", "limit", "mark", "next"]


def py_program_tokens(rng: np.random.Generator) -> list[str]:
    """LLM-style token list whose concatenation is a valid Python program."""
    names = [str(n) for n in rng.choice(_PY_NAMES, size=6, replace=False)]
    a, b, c, fn, it, alias = names
    out: list[list[str]] = []
    out.append([a, " =", f" {rng.integers(1, 99)}", "\n"])
    if rng.random() < 0.7:
        out.append(["def", " ", fn, "(", b, ",", " ", c, ")", ":", "\n"])
        out.append(["    ", "return", " ", b, " +", " ", c, " *", f" {rng.integers(2, 9)}", "\n"])
    if rng.random() < 0.6:
        out.append(["for", " ", it, " in", " range", "(", str(rng.integers(2, 9)), ")", ":", "\n"])
        out.append(["    ", a, " +=", " ", it, "\n"])
    else:
        out.append([b, " =", " [", it, " *", " 2", " for", " ", it, " in", " range", "(", "4", ")", "]", "\n"])
    if rng.random() < 0.4:
        out.append(["try", ":", "\n", "    ", a, " =", " ", a, " //", " 2", "\n"])
        out.append(["except", " ZeroDivisionError", " as", " ", alias, ":", "\n", "    ", "pass", "\n"])
    if rng.random() < 0.4:
        out.append([c, " =", " lambda", " ", it, ":", " ", it, " -", " 1", "\n"])
    if rng.random() < 0.4:
        out.append(["with", " open", "(", f"'{'f' * int(rng.integers(1, 4))}.txt'", ")", " as", " ", alias, ":", "\n", "    ", "pass", "\n"])
    out.append(["print", "(", a, ")", "\n"])
    return [tok for line in out for tok in line]


def java_program_tokens(rng: np.random.Generator) -> list[str]:
    """LLM-style token list whose concatenation is a valid Java fragment."""
    names = [str(n) for n in rng.choice(_JAVA_NAMES, size=6, replace=False)]
    a, b, c, m, it, lam = names
    cls = "Sample" + str(rng.integers(0, 90))
    out: list[list[str]] = []
    out.append(["class", " ", cls, " {", "\n"])
    out.append(["    ", "int", " ", m, "(", "int", " ", a, ",", " int", " ", b, ")", " {", "\n"])
    out.append(["        ", "int", " ", c, " =", " ", a, " +", " ", b, " *", f" {rng.integers(2, 9)}", ";", "\n"])
    if rng.random() < 0.6:
        out.append(["        ", "for", " (", "int", " ", it, " =", " 0", ";", " ", it, " <", " ", b, ";", " ", it, "++", ")", " {", "\n"])
        out.append(["            ", c, " +=", " ", it, ";", "\n", "        }", "\n"])
    else:
        out.append(["        ", "for", " (", "Integer", " ", it, " :", " nums", ")", " {", "\n"])
        out.append(["            ", c, " -=", " ", it, ";", "\n", "        }", "\n"])
    if rng.random() < 0.5:
        out.append(["        ", "if", " (", c, " >", f" {rng.integers(1, 60)}", ")", " {", "\n",
                    "            ", c, " =", " 0", ";", "\n", "        }", "\n"])
    out.append(["        ", "return", " ", c, ";", "\n", "    }", "\n"])
    if rng.random() < 0.5:
        out.append(["    ", "void", " run", "(", ")", " {", "\n"])
        out.append(["        ", "nums", ".", "forEach", "(", lam, " ->", " ", "sink", "(", lam, ")", ")", ";", "\n"])
        out.append(["    }", "\n"])
    out.append(["}", "\n"])
    return [tok for line in out for tok in line]


def program_tokens(language: Language, rng: np.random.Generator) -> list[str]:
    if language == Language.PYTHON:
        return py_program_tokens(rng)
    return java_program_tokens(rng)


# -- structure-preserving single-token mutations ----------------------------------

_SWAPS = {
    " <": " >", " >": " <", " <=": " >=", " >=": " <=", " ==": " !=", " !=": " ==",
    " +": " -", " -": " +", " *": " +", " //": " *",
    " +=": " -=", " -=": " +=",
}


def mutable_positions(tokens: list[str]) -> list[int]:
    """0-based indices of tokens safe to mutate without touching identifiers."""
    positions = []
    for i, tok in enumerate(tokens):
        stripped = tok.strip()
        if tok in _SWAPS:
            positions.append(i)
        elif stripped.isdigit():
            positions.append(i)
    return positions


def mutate_token(tokens: list[str], position: int, rng: np.random.Generator) -> list[str]:
    out = list(tokens)
    tok = out[position]
    if tok in _SWAPS:
        out[position] = _SWAPS[tok]
    else:
        digits = tok.strip()
        replacement = str((int(digits) + int(rng.integers(1, 7))) % 100)
        if replacement == digits:
            replacement = str(int(digits) + 1)
        out[position] = tok.replace(digits, replacement)
    return out


# -- injective alpha-renamings -------------------------------------------------------


def fresh_sigma(source: str, names: list[str]) -> dict[str, str]:
    """Injective renaming of collected names to fresh names absent from source."""
    sigma = {}
    for i, name in enumerate(names):
        candidate = f"zq{i}x"
        assert candidate not in source
        sigma[name] = candidate
    return sigma


def apply_sigma(source: str, language: Language, sigma: dict[str, str]) -> str:
    """Rewrite identifier leaves per sigma (capture-free by construction)."""
    from tokloc.syntax import parse

    tree = parse(source, language)
    data = tree.source_bytes
    out = bytearray()
    pos = 0
    for leaf in tree.leaves:
        if leaf.node_type in ("identifier", "type_identifier"):
            text = data[leaf.start : leaf.end].decode()
            if text in sigma:
                out += data[pos : leaf.start]
                out += sigma[text].encode()
                pos = leaf.end
    out += data[pos:]
    return out.decode()


def rename_tokens(tokens: list[str], sigma: dict[str, str]) -> list[str]:
    """Apply sigma at token granularity (identifiers are whole tokens here)."""
    out = []
    for tok in tokens:
        stripped = tok.strip()
        if stripped in sigma:
            out.append(tok.replace(stripped, sigma[stripped]))
        else:
            out.append(tok)
    return out


# -- independent oracle ------------------------------------------------------------


def oracle_significant(text: str, language: Language) -> list[tuple[str, int]]:
    """(char, origin) pairs under the whitespace policy; plain-loop version."""
    pairs = []
    if language == Language.JAVA:
        for i, ch in enumerate(text):
            if ch not in " \t\n\r\f\v":
                pairs.append((ch, i))
        return pairs
    line_start = True
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\r":
            pairs.append(("\n", i))
            if i + 1 < len(text) and text[i + 1] == "\n":
                i += 1
            line_start = True
        elif ch == "\n":
            pairs.append(("\n", i))
            line_start = True
        elif ch in " \t":
            if line_start:
                pairs.append((ch, i))
        elif ch in "\f\v":
            pass
        else:
            pairs.append((ch, i))
            line_start = False
        i += 1
    return pairs


def oracle_token_index(
    gen_tokens: list[str], canonical: str, language: Language
) -> int | None:
    """Token index of the first raw-text mismatch (None when texts agree).

    -1 means the generated text ran out first (EOS attribution upstream).
    """
    gen_text = "".join(gen_tokens)
    gen_sig = oracle_significant(gen_text, language)
    can_sig = oracle_significant(canonical, language)
    diff_pos = None
    for i, ((gc, _), (cc, _)) in enumerate(zip(gen_sig, can_sig)):
        if gc != cc:
            diff_pos = i
            break
    if diff_pos is None:
        if len(gen_sig) == len(can_sig):
            return None
        if len(gen_sig) < len(can_sig):
            return -1
        diff_pos = len(can_sig)
    origin = gen_sig[diff_pos][1]
    total = 0
    for idx, tok in enumerate(gen_tokens, start=1):
        total += len(tok)
        if origin < total:
            return idx
    return len(gen_tokens)
