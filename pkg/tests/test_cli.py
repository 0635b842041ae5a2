import json

import pytest

from convstab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_square(capsys):
    code, out, _ = run(capsys, "eval", "--zoo", "quad", "--at", "0.3")
    assert code == 0 and "f = 0.09" in out and "G_f = -0.6 " in out


def test_eval_dsl_kink(capsys, tmp_path):
    fn = tmp_path / "fn.sx"
    fn.write_text("(max (pow x0 2) (abs x1))\n")
    code, out, _ = run(capsys, "eval", "--dsl", str(fn), "--at", "0,0")
    assert code == 0 and "f = 0\n" in out and "delta_stationary" in out


def test_eval_counterexample_one_sided(capsys):
    code, out, _ = run(capsys, "eval", "--zoo", "diff_cx", "--at", "0")
    assert code == 0 and "f'+ = 1\n" in out and "f'- = -1\n" in out


def test_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.sx"
    bad.write_text("(max x0")
    assert run(capsys, "eval", "--dsl", str(bad), "--at", "0")[0] == 2
    assert run(capsys, "eval", "--zoo", "quad", "--at", "4")[0] == 3
    assert run(capsys, "eval", "--zoo", "nope", "--at", "0")[0] == 2
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 2


def test_zoo_list(capsys):
    code, out, _ = run(capsys, "zoo", "list")
    assert code == 0 and "diff_cx" in out and "analytic=false" in out


def test_certify(capsys, tmp_path):
    code, out, _ = run(capsys, "certify", "--zoo", "quad", "--center", "0", "--r", "1",
                       "--out", str(tmp_path))
    assert code == 0 and "lambda0=0.32" in out and "r1=0.565" in out
    assert (tmp_path / "certificate.txt").exists()
    assert run(capsys, "certify", "--zoo", "double_abs", "--center", "0", "--r", "1")[0] == 1


def test_profile_square_shrinks(capsys, tmp_path):
    code, out, _ = run(capsys, "profile", "--zoo", "quad", "--center", "0", "--r1", "0.5",
                       "--deltas", "1e-1..1e-5", "--out", str(tmp_path), "--expect", "pass")
    assert code == 0 and "result: PASS" in out
    rows = (tmp_path / "profile.csv").read_text().splitlines()
    assert len(rows) == 6


def test_profile_counterexample_fails_to_shrink(capsys):
    code, out, _ = run(capsys, "profile", "--zoo", "diff_cx", "--center", "0", "--r1", "0.05")
    assert code == 1 and "FAIL-to-shrink" in out
    code, _, _ = run(capsys, "profile", "--zoo", "diff_cx", "--center", "0", "--r1", "0.05",
                     "--expect", "fail")
    assert code == 0


def test_outputs_reproducible_with_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"zoo": "two_pits", "delta": 0.01, "step": 0.01}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "scan", "--config", str(cfg), "--out", str(a), "--jobs", "1")[0] == 0
    assert run(capsys, "scan", "--config", str(cfg), "--out", str(b), "--jobs", "2")[0] == 0
    assert (a / "scan.csv").read_bytes() == (b / "scan.csv").read_bytes()
    echo = json.loads((a / "config.json").read_text())
    assert echo["zoo"] == "two_pits" and echo["delta"] == 0.01


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"zoo": "quad", "delta": 0.5}))
    run(capsys, "scan", "--config", str(cfg), "--delta", "0.1", "--step", "0.01",
        "--out", str(tmp_path / "o"))
    assert json.loads((tmp_path / "o" / "config.json").read_text())["delta"] == 0.1


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"zooo": "quad"}))
    assert run(capsys, "scan", "--config", str(cfg))[0] == 2


def test_run_single_and_experiment(capsys, tmp_path):
    code, out, _ = run(capsys, "run", "--zoo", "abs1d", "--x0", "0.7", "--algo", "sampling",
                       "--out", str(tmp_path / "r"))
    assert code == 0 and (tmp_path / "r" / "trajectory.csv").exists()
    code, out, _ = run(capsys, "run", "--zoo", "double_abs", "--experiment", "--r1", "0.9",
                       "--lam1", "0.5", "--eps", "0.4", "--start-points", "0.9", "--starts", "0",
                       "--seeds", "2", "--out", str(tmp_path / "e"))
    assert code == 1 and "result: FAIL" in out


def test_census_and_verify(capsys, tmp_path):
    code, out, _ = run(capsys, "census", "--zoo", "two_pits", "--out", str(tmp_path))
    assert code == 0 and "clusters = 1" in out
    code, out, _ = run(capsys, "verify", "--all", "--out", str(tmp_path))
    assert code == 0 and "result: PASS" in out
    assert "PAPER" in (tmp_path / "verify.csv").read_text()
