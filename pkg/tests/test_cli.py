import json

import pytest

from tokloc.cli import main
from tokloc.corpus import load_records, save_canonicals, save_records, CanonicalPool, Language
from tokloc.synth import planted_corpus
from helpers import make_record


def write_corpus(tmp_path, records):
    path = tmp_path / "inst.jsonl"
    save_records(records, path)
    return str(path)


def fig1_files(tmp_path):
    tokens = [
        "return", " all", "(", "x", " <", " y", " for", " x", ",", " y",
        " in", " zip", "(", "tup", "1", ",", " tup", "2", "))",
    ]
    record = make_record(tokens, eos=True, rec_id="fig1")
    inst = write_corpus(tmp_path, [record])
    pool = CanonicalPool(
        problem_id="p1",
        language=Language.PYTHON,
        solutions=("return all(i > j for i, j in zip(tup1, tup2))",),
    )
    canon = tmp_path / "canon.jsonl"
    save_canonicals([pool], canon)
    return inst, str(canon)


def test_demo_figure1(capsys):
    assert main(["demo-figure1"]) == 0
    assert "hallucination token index: 5" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "schema 1" in capsys.readouterr().out


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["localize", "--bogus"])
    assert exc.value.code == 2


def test_validate_ok(tmp_path):
    inst = write_corpus(tmp_path, planted_corpus(3, seed=0))
    assert main(["validate", "--in", inst]) == 0


def test_validate_missing_file_exit_1(tmp_path):
    assert main(["validate", "--in", str(tmp_path / "nope.jsonl")]) == 1


def test_localize_fills_gold(tmp_path, capsys):
    inst, canon = fig1_files(tmp_path)
    out = tmp_path / "labeled.jsonl"
    assert main(["localize", "--in", inst, "--canon", canon, "--out", str(out)]) == 0
    labeled = load_records(out)
    assert labeled[0].gold_index == 5


def test_localize_per_canonical_sidecar(tmp_path):
    inst, canon = fig1_files(tmp_path)
    out = tmp_path / "labeled.jsonl"
    sidecar = tmp_path / "debug.jsonl"
    main(["localize", "--in", inst, "--canon", canon, "--out", str(out),
          "--per-canonical", str(sidecar)])
    entry = json.loads(sidecar.read_text().splitlines()[0])
    assert entry["index"] == 5
    assert entry["per_canonical"][0]["index"] == 5


def test_localize_idempotent_outputs(tmp_path):
    inst, canon = fig1_files(tmp_path)
    out1 = tmp_path / "a.jsonl"
    out2 = tmp_path / "b.jsonl"
    main(["localize", "--in", inst, "--canon", canon, "--out", str(out1)])
    main(["localize", "--in", inst, "--canon", canon, "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_localize_jobs_parallel_matches_serial(tmp_path):
    records = []
    pools = []
    for i in range(6):
        tokens = ["x", " =", f" {i}", "\n"]
        records.append(make_record(tokens, rec_id=f"r{i}", eos=True))
    inst = write_corpus(tmp_path, records)
    pools = [CanonicalPool(problem_id="p1", language=Language.PYTHON,
                           solutions=("x = 99\n",))]
    canon = tmp_path / "canon.jsonl"
    save_canonicals(pools, canon)
    out1 = tmp_path / "serial.jsonl"
    out2 = tmp_path / "parallel.jsonl"
    assert main(["localize", "--in", inst, "--canon", str(canon), "--out", str(out1)]) == 0
    assert main(["localize", "--in", inst, "--canon", str(canon), "--out", str(out2),
                 "--jobs", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_featurize_container(tmp_path):
    from tokloc.container import read_container

    inst = write_corpus(tmp_path, planted_corpus(4, seed=1))
    out = tmp_path / "features.tlc"
    assert main(["featurize", "--in", inst, "--mode", "per-token", "--out", str(out)]) == 0
    header, arrays = read_container(out)
    assert header["mode"] == "per-token"
    assert header["feature_layout_version"] == 1
    first = header["records"][0]
    assert arrays[f"rows/{first['id']}"].shape == (first["n_tokens"], 109)


def test_train_eval_cycle(tmp_path, capsys):
    inst = write_corpus(tmp_path, planted_corpus(40, seed=2))
    model_path = tmp_path / "model.tlm"
    assert main(["train", "--in", inst, "--model", "tree-ensemble",
                 "--n-trees", "10", "--out", str(model_path)]) == 0
    assert model_path.exists()
    report_path = tmp_path / "report.json"
    assert main(["eval", "--in", inst, "--model", "tree-ensemble", "--n-trees", "10",
                 "--k", "4", "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["cells"][0]["evaluated"] == 40
    assert 0.0 <= report["cells"][0]["accuracy"] <= 1.0


def test_train_unlabeled_exit_1(tmp_path, capsys):
    records = [make_record(["x", " =", " 1"], rec_id="u1")]
    inst = write_corpus(tmp_path, records)
    code = main(["train", "--in", inst, "--model", "tree-ensemble",
                 "--out", str(tmp_path / "m.tlm")])
    assert code == 1
    assert "unlabeled" in capsys.readouterr().err


def test_train_mode_conflict_exit_1(tmp_path, capsys):
    inst = write_corpus(tmp_path, planted_corpus(10, seed=3))
    code = main(["train", "--in", inst, "--mode", "per-sample",
                 "--model", "tree-ensemble", "--out", str(tmp_path / "m.tlm")])
    assert code == 1


def test_analyze_outputs(tmp_path):
    inst = write_corpus(tmp_path, planted_corpus(15, seed=4))
    out_dir = tmp_path / "analysis"
    assert main(["analyze", "--in", inst, "--out-dir", str(out_dir)]) == 0
    assert (out_dir / "type_rates_by_model.csv").exists()
    assert (out_dir / "type_proportions_by_dataset.csv").exists()
    report = json.loads((out_dir / "distributions.json").read_text())
    assert "by_model" in report


def test_normalize_region_start(tmp_path, capsys):
    src = tmp_path / "prog.py"
    src.write_text("def f(tup1):\n    x = tup1\n", encoding="utf-8")
    prefix_len = len("def f(tup1):\n")
    assert main(["normalize", "--lang", "python", "--in", str(src),
                 "--region-start", str(prefix_len)]) == 0
    out = capsys.readouterr().out
    assert out == "def f(tup1):\n    v1 = tup1\n"
