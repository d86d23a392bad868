import json

import pytest

from apst.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def stream_file(tmp_path):
    out = tmp_path / "s.txt"
    assert run("generate", "--motif", "-1,-1,+1,+1", "--reps", 100, "--noise", 0.2,
               "--seed", 7, "--out", out, "--no-timestamp") == 0
    return out


def test_generate_writes_three_files(stream_file, capsys):
    assert stream_file.exists()
    assert stream_file.with_suffix(".mask").exists()
    side = json.loads(stream_file.with_suffix(".json").read_text())
    assert side["spec"]["seed"] == 7 and side["length"] == 400


@pytest.mark.parametrize("model,extra", [
    ("apst", ["--mode", "self-bounded"]),
    ("apst", ["--mode", "unbounded"]),
    ("pst", []),
])
def test_train_then_verify(tmp_path, stream_file, capsys, model, extra):
    trace, hyp = tmp_path / "t.jsonl", tmp_path / "h.json"
    assert run("train", "--model", model, *extra, "--lambda", 4, "--xi", 0.9, "--epsilon", 1,
               "--data", stream_file, "--trace", trace, "--hypothesis", hyp,
               "--no-timestamp") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["rounds"] == 400
    head = json.loads(trace.read_text().splitlines()[0])
    assert head["meta"]["version"] and "timestamp" not in head["meta"]
    assert run("verify-bounds", "--trace", trace, "--hypothesis", hyp, "--no-timestamp") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert run("inspect-tree", "--hypothesis", hyp) == 0
    assert json.loads(capsys.readouterr().out)["max_depth"] >= 1


def test_verify_fails_on_tampered_trace(tmp_path, stream_file, capsys):
    trace, hyp = tmp_path / "t.jsonl", tmp_path / "h.json"
    run("train", "--data", stream_file, "--trace", trace, "--hypothesis", hyp)
    lines = trace.read_text().splitlines()
    rec = json.loads(lines[5])
    rec["sum_omega_sq"] = 1e9
    lines[5] = json.dumps(rec)
    trace.write_text("\n".join(lines) + "\n")
    assert run("verify-bounds", "--trace", trace, "--hypothesis", hyp) == 2


def test_multiclass_round_trip(tmp_path, capsys):
    out = tmp_path / "m.txt"
    assert run("generate", "--motif", "1,2,3,4,1,3", "--reps", 40, "--classes", 5,
               "--noise", 0.1, "--out", out) == 0
    trace, hyp = tmp_path / "t.jsonl", tmp_path / "h.json"
    assert run("train", "--model", "apst-mc", "--classes", 5, "--data", out,
               "--trace", trace, "--hypothesis", hyp) == 0
    assert run("verify-bounds", "--trace", trace, "--hypothesis", hyp) == 0
    assert run("inspect-tree", "--hypothesis", hyp) == 0
    assert len(json.loads(capsys.readouterr().out.split("\n}\n")[-2] + "\n}")["depths"]) == 5


def test_evaluate_csv(stream_file, capsys):
    assert run("evaluate", "--data", stream_file, "--mask", stream_file.with_suffix(".mask"),
               "--protocol", "real_3070", "--format", "csv", "--no-timestamp") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("model,lam,xi,epsilon") and len(lines) == 2
    assert ",0.3," in lines[1]


def test_grid_from_motif(tmp_path, capsys):
    csv_path, js = tmp_path / "g.csv", tmp_path / "g.json"
    assert run("grid", "--motif", "-1,-1,+1,+1", "--reps", 50, "--noise", 0.1,
               "--seeds", "0-1", "--lambdas", "2,4", "--xis", "0.9", "--out-csv", csv_path,
               "--out-json", js, "--no-timestamp") == 0
    assert len(csv_path.read_text().splitlines()) == 1 + 2 * 2 * 2
    assert json.loads(js.read_text())["summary"]["apst"]["n_seeds"] == 2


def test_bound_table(capsys):
    assert run("verify-bounds", "--grid", "--lambdas", "2", "--xis", "0.5",
               "--epsilons", "0,1", "--ts", "2,10") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "lambda,xi,epsilon,t,brute_sum,lemma2,lemma3,cor21,gamma"
    assert len(lines) == 5


@pytest.mark.parametrize("argv,code", [
    ([], 1),
    (["train"], 1),
    (["train", "--data", "x", "--bogus"], 1),
    (["grid"], 1),
    (["verify-bounds"], 1),
    (["train", "--data", "/nonexistent/s.txt"], 3),
    (["train", "--data", "{bad}", "--lambda", "-1"], 2),
])
def test_exit_codes(tmp_path, argv, code, capsys):
    if "{bad}" in argv:
        f = tmp_path / "s.txt"
        f.write_text("+1 -1\n")
        argv = [str(f) if a == "{bad}" else a for a in argv]
    assert main(argv) == code
    assert capsys.readouterr().err


def test_bad_symbol_is_validation_error(tmp_path, capsys):
    f = tmp_path / "s.txt"
    f.write_text("+1 5\n")
    assert run("train", "--data", f) == 2
    assert "s.txt:1" in capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert main(["train", "--help"]) == 0
    assert "--lambda" in capsys.readouterr().out


def test_byte_identical_reruns(tmp_path, capsys):
    outs = []
    d = tmp_path
    for _ in range(2):
        run("generate", "--motif", "-1,-1,+1,+1", "--reps", 50, "--noise", 0.3, "--seed", 3,
            "--out", d / "s.txt", "--no-timestamp")
        run("train", "--data", d / "s.txt", "--trace", d / "t.jsonl", "--hypothesis",
            d / "h.json", "--no-timestamp")
        run("grid", "--data", d / "s.txt", "--lambdas", "2,4", "--xis", "0.9",
            "--out-csv", d / "g.csv", "--out-json", d / "g.json", "--no-timestamp")
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
