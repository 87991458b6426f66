"""Command-line entry point: the pipeline end to end.

Exit codes: 0 success, 1 data errors, 2 usage errors. Diagnostics go to
stderr; data goes to files or stdout. Every sampling-derived output embeds
its seed, so identical inputs and seeds give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import tokloc
from tokloc.container import ContainerError, write_container
from tokloc.corpus import (
    CanonicalPool,
    CorpusError,
    GenerationRecord,
    Language,
    LogProbStep,
    Task,
    load_canonicals,
    load_records,
    record_to_obj,
    save_records,
    validate_record,
)
from tokloc.features import Mode, collect_token_rows, featurize
from tokloc.harness import (
    PointerStrategy,
    Regime,
    TokenScanStrategy,
    cross_matrix,
    distribution_report,
    evaluate,
    make_folds,
    type_proportion_table,
    type_rate_table,
)
from tokloc.localize import localize
from tokloc.normalize import normalize_program
from tokloc.predict import (
    ModelError,
    ModelKind,
    TrainConfig,
    downsample,
    save_model,
    train_pointer,
    train_token_classifier,
)
from tokloc.syntax import TokenType

PER_TOKEN_CHOICES = ("tree-ensemble", "logistic", "feedforward")
POINTER_CHOICES = ("recurrent", "conv", "attention")


def _resolve_input(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    data_dir = os.environ.get("TOKLOC_DATA_DIR")
    if data_dir and not p.is_absolute():
        candidate = Path(data_dir) / p
        if candidate.exists():
            return candidate
    return p


def _config_from_args(args) -> TrainConfig:
    kwargs = {"seed": args.seed}
    for name in ("epochs", "batch_size", "hidden_dim", "layers", "n_trees", "max_depth"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    if getattr(args, "ratio", None) is not None:
        kwargs["downsample_ratio"] = args.ratio
    return TrainConfig(**kwargs)


def _model_kind(args) -> ModelKind:
    if getattr(args, "encoder", None):
        return ModelKind(args.encoder)
    return ModelKind(args.model)


def _mode_for_kind(kind: ModelKind, args) -> Mode:
    inferred = Mode.PER_TOKEN if kind.value in PER_TOKEN_CHOICES else Mode.PER_SAMPLE
    stated = getattr(args, "mode", None)
    if stated is not None and Mode(stated) != inferred:
        raise CorpusError(
            f"--mode {stated} conflicts with model kind '{kind.value}'"
        )
    return inferred


def _strategy(kind: ModelKind, config: TrainConfig, threshold: float):
    if kind.value in PER_TOKEN_CHOICES:
        return TokenScanStrategy(kind, config, threshold)
    return PointerStrategy(kind, config)


# -- subcommands ----------------------------------------------------------------


def cmd_validate(args) -> int:
    records = load_records(_resolve_input(args.infile))
    problems = 0
    for record in records:
        violations = validate_record(record)
        if violations:
            problems += 1
            for violation in violations:
                print(f"{record.id}: {violation}", file=sys.stderr)
    if args.canon:
        pools = load_canonicals(_resolve_input(args.canon))
        missing = sorted(
            {r.problem_id for r in records} - set(pools)
        )
        for pid in missing:
            problems += 1
            print(f"no canonical solutions for problem '{pid}'", file=sys.stderr)
    print(f"validated {len(records)} records; {problems} problem(s)", file=sys.stderr)
    return 1 if problems else 0


def cmd_normalize(args) -> int:
    if args.infile and args.infile != "-":
        source = Path(_resolve_input(args.infile)).read_text(encoding="utf-8")
    else:
        source = sys.stdin.read()
    region = (args.region_start, len(source.encode("utf-8"))) if args.region_start else None
    program = normalize_program(source, Language(args.lang), region)
    out = sys.stdout if not args.out or args.out == "-" else open(args.out, "w", encoding="utf-8")
    try:
        out.write(program.normalized)
    finally:
        if out is not sys.stdout:
            out.close()
    if args.table:
        for name, new in program.rename_table:
            print(f"{name} -> {new}", file=sys.stderr)
    return 0


_WORKER_POOLS: dict[str, CanonicalPool] = {}


def _localize_init(canon_path: str):
    global _WORKER_POOLS
    _WORKER_POOLS = load_canonicals(canon_path)


def _localize_one(record: GenerationRecord):
    pool = _WORKER_POOLS.get(record.problem_id)
    if pool is None:
        raise CorpusError(f"no canonical solutions for problem '{record.problem_id}'")
    label = localize(record, pool)
    return record.id, label


def cmd_localize(args) -> int:
    records = load_records(_resolve_input(args.infile))
    canon_path = str(_resolve_input(args.canon))
    labels = {}
    if args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs, initializer=_localize_init, initargs=(canon_path,)
        ) as pool:
            for rid, label in pool.map(_localize_one, records, chunksize=16):
                labels[rid] = label
    else:
        _localize_init(canon_path)
        for record in records:
            rid, label = _localize_one(record)
            labels[rid] = label
    labeled = []
    matched = 0
    for record in records:
        label = labels[record.id]
        if label.matched:
            matched += 1
            labeled.append(record)
        else:
            labeled.append(replace_gold(record, label.index))
    save_records(labeled, args.out)
    if args.per_canonical:
        with open(args.per_canonical, "w", encoding="utf-8") as fh:
            for record in records:
                label = labels[record.id]
                fh.write(
                    json.dumps(
                        {
                            "id": record.id,
                            "matched": label.matched,
                            "index": label.index,
                            "per_canonical": [
                                {"canonical": cid, "index": idx}
                                for cid, idx in label.per_canonical
                            ],
                        }
                    )
                )
                fh.write("\n")
    print(
        f"localized {len(records)} records ({matched} matched a canonical)",
        file=sys.stderr,
    )
    return 0


def replace_gold(record: GenerationRecord, index: int) -> GenerationRecord:
    return replace(record, gold_index=index)


def cmd_featurize(args) -> int:
    records = load_records(_resolve_input(args.infile))
    mode = Mode(args.mode)
    arrays = {}
    manifest = []
    for record in records:
        matrix = featurize(record, mode=mode)
        arrays[f"rows/{record.id}"] = matrix.rows
        manifest.append(
            {"id": record.id, "n_tokens": matrix.n_tokens, "gold_index": record.gold_index}
        )
    header = {
        "container": "feature-matrices",
        "mode": mode.value,
        "feature_layout_version": tokloc.FEATURE_LAYOUT_VERSION,
        "records": manifest,
    }
    write_container(args.out, header, arrays)
    print(f"featurized {len(records)} records -> {args.out}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    records = load_records(_resolve_input(args.infile))
    unlabeled = [r.id for r in records if r.gold_index is None]
    if unlabeled:
        raise CorpusError(f"unlabeled records (run localize first), e.g. '{unlabeled[0]}'")
    kind = _model_kind(args)
    mode = _mode_for_kind(kind, args)
    config = _config_from_args(args)
    matrices = [featurize(r, mode=mode) for r in records]
    if mode == Mode.PER_TOKEN:
        X, y = collect_token_rows(matrices)
        X, y = downsample(X, y, config.downsample_ratio, config.seed)
        model = train_token_classifier(X, y, kind, config)
    else:
        model = train_pointer(matrices, kind, config)
    save_model(model, args.out)
    print(f"trained {kind.value} on {len(records)} records -> {args.out}", file=sys.stderr)
    return 0


def _write_report(report, out_path: str | None, csv_path: str | None):
    obj = report.to_json_obj()
    payload = json.dumps(obj, indent=2, sort_keys=True)
    if out_path and out_path != "-":
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    if csv_path:
        groups = sorted({k[0] for k in report.cells} | {k[1] for k in report.cells})
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["train\\test"] + groups)
            for source in groups:
                row = [source]
                for target in groups:
                    acc = [v for (tg, eg, _), v in report.cells.items()
                           if tg == source and eg == target]
                    row.append(f"{acc[0]:.4f}" if acc else "")
                writer.writerow(row)


def cmd_eval(args) -> int:
    records = load_records(_resolve_input(args.infile))
    kind = _model_kind(args)
    _mode_for_kind(kind, args)
    config = _config_from_args(args)
    strategy = _strategy(kind, config, args.threshold)
    plan = make_folds(records, Regime(args.regime), k=args.k, seed=args.seed)
    report = evaluate(records, plan, strategy)
    _write_report(report, args.out, args.csv)
    return 0


def cmd_cross(args) -> int:
    records = load_records(_resolve_input(args.infile))
    kind = _model_kind(args)
    _mode_for_kind(kind, args)
    config = _config_from_args(args)
    strategy = _strategy(kind, config, args.threshold)
    report = cross_matrix(records, strategy, k=args.k, seed=args.seed)
    _write_report(report, args.out, args.csv)
    return 0


def _write_type_table(table, path: Path):
    groups = sorted(table)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token_type"] + groups)
        for ttype in TokenType:
            row = [ttype.name]
            for group in groups:
                value = table[group].get(ttype)
                row.append("" if value is None else f"{value:.6f}")
            writer.writerow(row)


def cmd_analyze(args) -> int:
    records = load_records(_resolve_input(args.infile))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from tokloc.harness import _annotation_cache

    annotations = _annotation_cache(records)
    for group_by in ("model", "dataset"):
        rates = type_rate_table(
            records, group_by=group_by, denominator=args.rate_denominator,
            annotations=annotations,
        )
        _write_type_table(rates, out_dir / f"type_rates_by_{group_by}.csv")
        props = type_proportion_table(records, group_by=group_by, annotations=annotations)
        _write_type_table(props, out_dir / f"type_proportions_by_{group_by}.csv")
    report = distribution_report(records, annotations=annotations)
    (out_dir / "distributions.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"analysis written to {out_dir}", file=sys.stderr)
    return 0


def figure1_record_and_pool() -> tuple[GenerationRecord, CanonicalPool]:
    """The worked example: '<' instead of '>' as the fifth generated token."""
    source = "return all(x < y for x, y in zip(tup1, tup2))"
    tokens = [
        "return", " all", "(", "x", " <", " y", " for", " x", ",", " y",
        " in", " zip", "(", "tup", "1", ",", " tup", "2", "))", "",
    ]
    assert "".join(tokens[:-1]) == source
    steps = []
    for tok in tokens:
        top = ((tok or "<eos>", -0.08), (" value", -3.4), (" item", -4.1))
        steps.append(LogProbStep(entries=top, chosen=0, chosen_logprob=-0.08))
    record = GenerationRecord(
        id="figure-1",
        task=Task.CG,
        dataset="humaneval",
        model="demo",
        language=Language.PYTHON,
        problem_id="monotonic-pairs",
        tokens=tuple(tokens),
        steps=tuple(steps),
        eos=True,
    )
    pool = CanonicalPool(
        problem_id="monotonic-pairs",
        language=Language.PYTHON,
        solutions=(
            "return all(i > j for i, j in zip(tup1, tup2))",
            "return all(a > b for a, b in zip(tup1, tup2))",
            "return all(left > right for left, right in zip(tup1, tup2))",
        ),
    )
    return record, pool


def cmd_demo_figure1(_args) -> int:
    record, pool = figure1_record_and_pool()
    label = localize(record, pool)
    print(f"hallucination token index: {label.index}")
    return 0 if label.index == 5 else 1


# -- parser -----------------------------------------------------------------------


def _add_train_flags(sub, with_regime=False):
    sub.add_argument("--in", dest="infile", required=True, help="instance file (JSONL)")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", choices=PER_TOKEN_CHOICES + POINTER_CHOICES)
    group.add_argument("--encoder", choices=POINTER_CHOICES)
    sub.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--epochs", type=int, default=None)
    sub.add_argument("--batch-size", type=int, dest="batch_size", default=None)
    sub.add_argument("--hidden-dim", type=int, dest="hidden_dim", default=None)
    sub.add_argument("--layers", type=int, default=None)
    sub.add_argument("--n-trees", type=int, dest="n_trees", default=None)
    sub.add_argument("--max-depth", type=int, dest="max_depth", default=None)
    sub.add_argument("--ratio", type=float, default=None, help="correct:hallucinated downsample ratio")
    sub.add_argument("--threshold", type=float, default=0.5)
    if with_regime:
        sub.add_argument(
            "--regime", choices=[r.value for r in Regime], default=Regime.ALL_IN_ONE.value
        )
        sub.add_argument("--k", type=int, default=5)
        sub.add_argument("--out", default=None, help="report JSON path (stdout if omitted)")
        sub.add_argument("--csv", default=None, help="also write a CSV matrix")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokloc",
        description="Localize the first hallucinated token in LLM-generated code "
        "and train predictors for it.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"tokloc {tokloc.__version__} "
            f"(schema {tokloc.SCHEMA_VERSION}, feature layout "
            f"{tokloc.FEATURE_LAYOUT_VERSION}, model format {tokloc.MODEL_FORMAT_VERSION})"
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("validate", help="schema-check an instance file")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--canon", default=None)
    sub.set_defaults(func=cmd_validate)

    sub = subs.add_parser("normalize", help="alpha-rename a source file or stdin")
    sub.add_argument("--lang", required=True, choices=[l.value for l in Language])
    sub.add_argument("--in", dest="infile", default="-")
    sub.add_argument("--out", default="-")
    sub.add_argument("--region-start", type=int, dest="region_start", default=0)
    sub.add_argument("--table", action="store_true", help="print the rename table to stderr")
    sub.set_defaults(func=cmd_normalize)

    sub = subs.add_parser("localize", help="fill gold_index against canonical pools")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--canon", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--per-canonical", dest="per_canonical", default=None)
    sub.add_argument("--jobs", type=int, default=1)
    sub.set_defaults(func=cmd_localize)

    sub = subs.add_parser("featurize", help="emit feature matrices")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--mode", choices=[m.value for m in Mode], required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_featurize)

    sub = subs.add_parser("train", help="train a predictor")
    _add_train_flags(sub)
    sub.add_argument("--out", required=True, help="model output path")
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("eval", help="cross-validated accuracy under a regime")
    _add_train_flags(sub, with_regime=True)
    sub.set_defaults(func=cmd_eval)

    sub = subs.add_parser("cross", help="cross-LLM generalization matrix")
    _add_train_flags(sub, with_regime=True)
    sub.set_defaults(func=cmd_cross)

    sub = subs.add_parser("analyze", help="token-type rates, proportions, distributions")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--out-dir", dest="out_dir", required=True)
    sub.add_argument(
        "--rate-denominator",
        dest="rate_denominator",
        choices=["prefix", "all"],
        default="prefix",
    )
    sub.set_defaults(func=cmd_analyze)

    sub = subs.add_parser("demo-figure1", help="run the worked localization example")
    sub.set_defaults(func=cmd_demo_figure1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ModelError, ContainerError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
