import csv
import json

import numpy as np
import pytest

from gtdyn.cli import load_config, main

BETA = '{"beta_plus": [0.3]}'


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def read_matrix(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0][1:], [r[0] for r in rows[1:]], np.array([[float(x) for x in r[1:]] for r in rows[1:]])


def read_measure(path):
    with open(path, newline="") as fh:
        return {r["signature"]: float(r["probability"]) for r in csv.DictReader(fh)}


def test_zero_omega_generator(tmp_path):
    code, out = run(tmp_path, "z", "gen", "--N", "2", "--box", "-1", "1")
    assert code == 0
    _, _, L = read_matrix(out / "generator.csv")
    assert np.abs(L).max() == 0
    assert json.loads((out / "generator.json").read_text())["N"] == 2


def test_two_band_generator(tmp_path):
    code, out = run(tmp_path, "g", "gen", "--N", "1", "--omega", BETA, "--box", "0", "3")
    assert code == 0
    cols, rows, L = read_matrix(out / "generator.csv")
    assert rows == ["3", "2", "1", "0"] and cols == rows
    for i in range(1, 4):
        assert L[i, i] == pytest.approx(-0.3) and L[i, i - 1] == pytest.approx(0.3)
    assert np.count_nonzero(L) == 7


@pytest.mark.parametrize("q", ["classical", "0.5"])
def test_route_both(tmp_path, q):
    code, out = run(tmp_path, "b", "gen", "--N", "2", "--q", q, "--omega", BETA, "--box", "-2", "2", "--route", "both")
    assert code == 0
    assert (out / "generator_determinantal.csv").exists() and (out / "generator_fusion.csv").exists()
    side = json.loads((out / "generator.json").read_text())
    assert side["defect"] <= 1e-9 and side["entries_compared"] > 0


def test_rational_link(tmp_path):
    code, out = run(tmp_path, "l", "link", "--N", "3", "--q", "1/2", "--mode", "rational", "--box", "-1", "1")
    assert code == 0
    assert json.loads((out / "link.json").read_text())["exact_row_sums"] is True
    text = (out / "link.csv").read_text()
    assert "/" in text


def test_evolve_t0_echo_and_composition(tmp_path):
    init = tmp_path / "init.csv"
    init.write_text('signature,probability\n"1,0",0.25\n"0,0",0.75\n')
    base = ["evolve", "--N", "2", "--omega", BETA, "--box", "-2", "12", "--initial", str(init)]
    code, grid = run(tmp_path, "grid", *base, "--times", "0,0.5,1.0")
    assert code == 0
    m0 = read_measure(grid / "measure_t0.csv")
    assert m0["1,0"] == 0.25 and m0["0,0"] == 0.75 and sum(m0.values()) == 1
    code, single = run(tmp_path, "single", *base, "--times", "1.0")
    a, b = read_measure(grid / "measure_t1.csv"), read_measure(single / "measure_t1.csv")
    assert max(abs(a[k] - b[k]) for k in a) <= 1e-8
    with open(grid / "measure_t1.csv", newline="") as fh:
        assert "deficit" in next(csv.reader(fh))


def test_evolve_poisson_closed_form(tmp_path):
    code, out = run(tmp_path, "p", "evolve", "--N", "1", "--omega", BETA, "--box", "0", "30", "--times", "2")
    assert code == 0
    m = read_measure(out / "measure_t2.csv")
    from math import exp, factorial

    for k in range(8):
        assert m[str(k)] == pytest.approx(exp(-0.6) * 0.6**k / factorial(k), abs=1e-12)


def test_sample_is_byte_identical_and_worker_independent(tmp_path, monkeypatch):
    args = ["sample", "--N", "2", "--omega", BETA, "--box", "-1", "15", "--times", "2", "--seed", "5", "--paths", "6"]
    monkeypatch.setenv("GTDYN_WORKERS", "1")
    assert run(tmp_path, "a", *args)[0] == 0
    assert run(tmp_path, "b", *args)[0] == 0
    monkeypatch.setenv("GTDYN_WORKERS", "2")
    assert run(tmp_path, "c", *args)[0] == 0
    a, b, c = (tmp_path / d / "trajectories.jsonl" for d in "abc")
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    header = json.loads(a.read_text().splitlines()[0])
    assert header["seed"] == 5
    assert (tmp_path / "a" / "trajectories.csv").read_text().startswith("path,time,signature")


def test_sample_zero_omega_constant(tmp_path):
    code, out = run(tmp_path, "z", "sample", "--N", "1", "--box", "-2", "2", "--seed", "1", "--paths", "3", "--times", "4")
    assert code == 0
    for line in (out / "trajectories.jsonl").read_text().splitlines()[1:]:
        assert {s for _, s in json.loads(line)["points"]} == {"0"}


def test_sample_requires_seed(tmp_path):
    assert run(tmp_path, "s", "sample", "--N", "1")[0] == 2


def test_gt_sample(tmp_path):
    args = ["gt-sample", "--N", "3", "--q", "0.5", "--omega", BETA, "--seed", "4", "--steps", "20"]
    assert run(tmp_path, "a", *args)[0] == 0
    assert run(tmp_path, "b", *args)[0] == 0
    a = (tmp_path / "a" / "gt_trajectory.jsonl").read_text()
    assert a == (tmp_path / "b" / "gt_trajectory.jsonl").read_text()
    lines = a.splitlines()
    assert len(lines) == 22
    assert json.loads(lines[1]) == [[0], [0, 0], [0, 0, 0]]


def test_gt_sample_tv_artifact(tmp_path):
    code, out = run(tmp_path, "tv", "gt-sample", "--N", "2", "--q", "0.5", "--omega", BETA, "--seed", "1",
                    "--steps", "0", "--tv-samples", "20000")
    assert code == 0
    assert json.loads((out / "tv.json").read_text())["tv"] <= 0.02


def test_toeplitz_command(tmp_path):
    code, out = run(tmp_path, "t", "toeplitz", "--N", "2", "--q", "0.5", "--omega", BETA, "--box", "-2", "2")
    assert code == 0
    rep = json.loads((out / "toeplitz.json").read_text())
    assert rep["T_vs_generator"] <= 1e-10 and rep["Tdown_vs_link"] <= 1e-10 and rep["delta_two_routes"] <= 1e-10


def test_boundary_and_measure(tmp_path):
    om = '{"beta_plus": [0.4, 0.1], "beta_minus": [0.3]}'
    code, out = run(tmp_path, "bd", "boundary", "--N", "2", "--omega", om, "--box", "-1", "2")
    assert code == 0
    assert json.loads((out / "boundary.json").read_text())["mass"] == pytest.approx(1, abs=1e-12)
    code, out = run(tmp_path, "ms", "measure", "--N", "2", "--q", "0.5", "--omega", om, "--box", "-1", "2")
    assert code == 0
    assert json.loads((out / "measure.json").read_text())["mass"] == pytest.approx(1, abs=1e-12)
    assert run(tmp_path, "bq", "boundary", "--N", "2", "--q", "0.5")[0] == 2


@pytest.mark.parametrize(
    "args, needle",
    [
        (["gen", "--q", "1.5"], "q must be"),
        (["gen", "--N", "0"], "N must be"),
        (["gen", "--box", "2", "1"], "lo <= hi"),
        (["gen", "--omega", '{"beta_plus": [0.9], "beta_minus": [0.5]}'], "exceeds 1"),
        (["gen", "--N", "3", "--q", "0.5", "--omega", '{"alpha_plus": [0.5]}'], "annulus"),
        (["gen", "--omega", '{"delta": 1}'], "unknown omega"),
        (["evolve", "--times", "-1"], "nonnegative"),
    ],
)
def test_invalid_input_exit_2(tmp_path, capsys, args, needle):
    assert run(tmp_path, "x", *args)[0] == 2
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_box_cap_exit_3(tmp_path, capsys):
    assert run(tmp_path, "x", "gen", "--N", "8", "--box", "-20", "20")[0] == 3
    assert "cap" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"omega": {"beta_plus": [0.3]}, "N": 2, "q": 0.5, "box": [-1, 1], "seed": 3}))
    c = load_config(str(cfg), {"N": 1})
    assert c.N == 1 and c.q == 0.5 and c.box == (-1, 1) and c.seed == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_verify_fault_injection(tmp_path):
    code, out = run(tmp_path, "v", "verify", "--only", "2", "--corrupt")
    assert code == 1
    rep = json.loads((out / "verify.json").read_text())
    assert rep["passed"] is False
    assert [c["criterion"] for c in rep["criteria"]] == ["2.total_positivity"]
    code, _ = run(tmp_path, "v2", "verify", "--only", "1,5")
    assert code == 0
