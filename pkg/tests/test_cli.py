import json
import subprocess
import sys

import pytest

from sigma_skew.cli import main

SMALL = ["--paths", "200", "--steps", "256", "--dt", "0.00390625", "--seed", "42"]


def test_simulate_writes_files(tmp_path):
    out = tmp_path / "a"
    code = main(["simulate", "--process", "abs-bm", "--alpha", "0.7", *SMALL, "--out", str(out)])
    assert code == 0
    assert (out / "ensemble.csv").exists() and (out / "manifest.json").exists()
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["alpha_schedule"] == "0:0.7"
    assert m["config"]["seed"] == 42 and "seed_derivation" in m
    assert (out / "ensemble.csv").read_text().startswith("replicate,t,y\n")


def test_simulate_is_deterministic_across_threads(tmp_path):
    outs = []
    for i, threads in enumerate(("1", "1", "3")):
        out = tmp_path / str(i)
        assert main(["simulate", "--process", "product-abs", "--alpha", "0.4", *SMALL,
                     "--threads", threads, "--out", str(out)]) == 0
        outs.append(out)
    a = (outs[0] / "ensemble.csv").read_bytes()
    assert a == (outs[1] / "ensemble.csv").read_bytes() == (outs[2] / "ensemble.csv").read_bytes()
    ma = json.loads((outs[0] / "manifest.json").read_text())
    assert ma == json.loads((outs[2] / "manifest.json").read_text())


def test_simulate_json_format(tmp_path):
    assert main(["simulate", *SMALL, "--format", "json", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "ensemble.json").read_text())
    assert len(data["values"]) == 200 and len(data["values"][0]) == 257


def test_alpha_out_of_range(tmp_path, capsys):
    assert main(["simulate", "--alpha", "1.3", "--out", str(tmp_path)]) == 2
    assert "alpha out of [0,1]" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["--paths", "0"],
    ["--dt", "-1"],
    ["--steps", "16", "--dt", "0.0625", "--horizon", "2"],
    ["--alpha-schedule", "1:0.3"],
    ["--alpha", "0.5", "--alpha-schedule", "0:0.5"],
    ["--process", "scaled-abs", "--sigma", "-2"],
])
def test_invalid_config_exits_2(tmp_path, args, capsys):
    assert main(["simulate", *args, "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", *SMALL, "--out", str(blocker / "sub")]) == 2


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv("SIGMA_SKEW_OUT", str(tmp_path / "env"))
    proc = subprocess.run([sys.executable, "-m", "sigma_skew.cli", "simulate", *SMALL],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "env" / "ensemble.csv").exists()


def test_verify_default_suite(tmp_path):
    out = tmp_path / "v"
    code = main(["verify", "--alpha", "0.7", "--paths", "2000", "--steps", "1024",
                 "--dt", "0.0009765625", "--seed", "3", "--out", str(out)])
    assert code == 0
    reports = json.loads((out / "report.json").read_text())
    assert [r["name"] for r in reports] == ["occupation", "ks", "sde-residual", "abs-match"]
    assert all(r["pass"] for r in reports)
    assert (out / "report.csv").read_text().startswith("name,statistic,threshold,pass\n")


def test_verify_raw_abs_fails_and_expect_fail_inverts(tmp_path):
    base = ["verify", "--paths", "1000", "--steps", "256", "--dt", "0.00390625", "--seed", "5",
            "--tests", "martingale-source"]
    assert main([*base, "--out", str(tmp_path / "a")]) == 1
    assert main([*base, "--expect-fail", "martingale-source", "--out", str(tmp_path / "b")]) == 0


def test_verify_unknown_test(tmp_path):
    assert main(["verify", "--tests", "nonsense", "--out", str(tmp_path)]) == 2
    assert main(["verify", "--expect-fail", "nonsense", "--out", str(tmp_path)]) == 2


def test_verify_missing_ensemble(tmp_path):
    assert main(["verify", "--from", str(tmp_path / "nowhere"), "--out", str(tmp_path)]) == 2


def test_verify_from_simulated_ensemble(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--alpha", "0.6", *SMALL, "--out", str(sim)]) == 0
    out = tmp_path / "ver"
    assert main(["verify", "--from", str(sim), "--tests", "occupation,ks", "--out", str(out)]) == 0
    inline = tmp_path / "inline"
    assert main(["verify", "--alpha", "0.6", *SMALL, "--tests", "occupation,ks", "--out", str(inline)]) == 0
    assert (out / "report.json").read_bytes() == (inline / "report.json").read_bytes()


def test_verify_reports_reproducible_across_threads(tmp_path):
    args = ["verify", "--process", "drawdown", "--alpha", "0.5", "--paths", "1000", "--steps", "256",
            "--dt", "0.00390625", "--seed", "9", "--tests", "martingale,membership,abs-match"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--threads", "2", "--out", str(tmp_path / "b")]) == 0
    for f in ("report.json", "report.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_report_merge(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["verify", "--alpha", "0.7", *SMALL, "--tests", "occupation,abs-match", "--out", str(a)])
    main(["verify", "--alpha", "0.7", *SMALL, "--tests", "ks", "--out", str(b)])
    capsys.readouterr()
    digest = tmp_path / "digest.csv"
    assert main(["report", str(a / "report.json"), "--out", str(digest)]) == 0
    assert digest.read_text() == (a / "report.csv").read_text().splitlines(True)[0] + "".join(
        sorted((a / "report.csv").read_text().splitlines(True)[1:]))
    assert main(["report", str(b / "report.json"), str(a / "report.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "name,statistic,threshold,pass"
    assert [line.split(",")[0] for line in lines[1:]] == ["abs-match", "ks", "occupation"]
    # idempotent: merging the same inputs again gives the same digest
    main(["report", str(b / "report.json"), str(a / "report.json")])
    assert capsys.readouterr().out.splitlines() == lines


def test_report_corrupt_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["report", str(bad)]) == 2
    assert main(["report", str(tmp_path / "missing.json")]) == 2


def test_schedule_and_sigma_flags(tmp_path):
    out = tmp_path / "s"
    code = main(["simulate", "--process", "scaled-abs", "--sigma", "0:1,0.5:2",
                 "--alpha-schedule", "0:0.3,0.5:0.8", "--paths", "20", "--steps", "512",
                 "--dt", "0.001953125", "--out", str(out)])
    assert code == 0
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["sigma"] == "0:1,0.5:2" and cfg["construction"] == "time_changed"
    assert cfg["alpha_schedule"] == "0:0.3,0.5:0.8"
