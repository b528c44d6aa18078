import io
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import dominant_psd_matrix, crafted_no_interior
from nash_align import ProbabilityTable, build_inconsistency
from nash_align.cli import main
from nash_align.io import game_to_json, read_game_json
from oracles import full_kkt_solve


def run(argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    text = out.getvalue()
    return code, (json.loads(text) if text.strip() else None)


def write_game(path, c, a):
    path.write_text(game_to_json(np.asarray(c, dtype=float), a), encoding="utf-8")
    return path


@pytest.fixture
def symmetric_game(tmp_path):
    return write_game(tmp_path / "sym.json", np.zeros((2, 2)), [0.5, 0.5])


BETAS = ["--beta-a", 1, "--beta-i", 1, "--beta-d", 1]


# --- build ------------------------------------------------------------------------

def test_build_single_sample(tmp_path):
    probs = tmp_path / "p.csv"
    probs.write_text("sample_id,subpop_0,subpop_1\nq1,1.0,0.0\n")
    out = tmp_path / "game.json"
    code, doc = run(["build", "--probs", probs, "--shares", "1,1", "--out", out])
    assert code == 0
    assert doc["psd"]["passed"]
    c, a = read_game_json(out)
    np.testing.assert_array_equal(c, [[1.0, 1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(a, [0.5, 0.5])


def test_build_identical_columns(tmp_path):
    probs = tmp_path / "p.csv"
    probs.write_text("sample_id,subpop_0,subpop_1,subpop_2\nq1,0.3,0.3,0.3\nq2,0.8,0.8,0.8\n")
    out = tmp_path / "game.json"
    code, doc = run(["build", "--probs", probs, "--shares", "1,2,1", "--psi", "power:2", "--out", out])
    assert code == 0 and doc["psd"]["passed"] and doc["psi"] == "power:2"
    c, a = read_game_json(out)
    np.testing.assert_array_equal(c, np.zeros((3, 3)))
    np.testing.assert_array_equal(a, [0.25, 0.5, 0.25])


def test_build_malformed_row(tmp_path, capsys):
    probs = tmp_path / "p.csv"
    probs.write_text("sample_id,subpop_0,subpop_1\nq1,1.0,0.0\nq2,0.5\n")
    code, _ = run(["build", "--probs", probs, "--shares", "1,1", "--out", tmp_path / "g.json"])
    assert code == 2
    assert "p.csv:3:" in capsys.readouterr().err
    assert not (tmp_path / "g.json").exists()


def test_build_alignment(tmp_path):
    probs = tmp_path / "p.csv"
    probs.write_text("sample_id,subpop_0,subpop_1\ns1,1.0,0.0\ns2,0.0,1.0\n")
    gt = tmp_path / "g.csv"
    gt.write_text("sample_id,option_index,gt_0,gt_1\ns1,0,1,0\ns2,0,0,1\n")
    opts = tmp_path / "o.csv"
    opts.write_text("sample_id,subpop,opt_0,opt_1\ns1,0,1,0\ns1,1,0,1\ns2,0,0,1\ns2,1,1,0\n")
    out = tmp_path / "game.json"
    code, _ = run(["build", "--probs", probs, "--ground-truth", gt, "--options", opts, "--out", out])
    assert code == 0
    _, a = read_game_json(out)
    np.testing.assert_array_equal(a, [1.0, 0.0])


def test_build_usage_errors(tmp_path):
    probs = tmp_path / "p.csv"
    probs.write_text("sample_id,subpop_0,subpop_1\nq1,1.0,0.0\n")
    assert run(["build", "--probs", probs, "--out", tmp_path / "g.json"])[0] == 2
    assert run(["build", "--probs", probs, "--shares", "1,1,1", "--out", tmp_path / "g.json"])[0] == 2
    assert run(["build", "--probs", probs, "--shares", "1,1", "--out", tmp_path / "nope" / "g.json"])[0] == 2


def test_build_then_solve_roundtrip(tmp_path, rng):
    k, d = 12, 4
    probs = rng.uniform(size=(k, d))
    lines = ["sample_id," + ",".join(f"subpop_{i}" for i in range(d))]
    lines += [f"s{j}," + ",".join(repr(float(x)) for x in row) for j, row in enumerate(probs)]
    path = tmp_path / "p.csv"
    path.write_text("\n".join(lines) + "\n")
    out = tmp_path / "game.json"
    assert run(["build", "--probs", path, "--shares", "3,1,1,2", "--out", out])[0] == 0
    c, a = read_game_json(out)
    assert np.max(np.abs(c - build_inconsistency(ProbabilityTable(probs)))) <= 1e-15
    assert np.max(np.abs(a - np.array([3, 1, 1, 2]) / 7)) <= 1e-15
    code, _ = run(["solve", "--game", out, "--agents", 3, *BETAS])
    assert code in (0, 3)


# --- solve ------------------------------------------------------------------------

def test_solve_symmetric(symmetric_game):
    code, doc = run(["solve", "--game", symmetric_game, "--agents", 2, *BETAS])
    assert code == 0
    assert doc["validity"] == "interior_valid"
    assert doc["w"] == [0.5, 0.5]
    assert "exploitability" not in doc


def test_solve_verify(tmp_path):
    c = 0.2 * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    game = write_game(tmp_path / "g.json", c, [0.3, 0.3, 0.4])
    code, doc = run(["solve", "--game", game, "--agents", 4, *BETAS, "--verify"])
    assert code == 0
    assert abs(doc["exploitability"]) <= 1e-8


def test_solve_no_interior_and_boundary(tmp_path, rng):
    spec = crafted_no_interior(rng)
    game = write_game(tmp_path / "g.json", spec.c, spec.a)
    b = spec.coeffs
    betas = ["--beta-a", repr(b.beta_a), "--beta-i", repr(b.beta_i), "--beta-d", repr(b.beta_d)]
    code, doc = run(["solve", "--game", game, "--agents", spec.m, *betas])
    assert code == 3
    assert doc["validity"] == "no_interior" and doc["min_weight"] <= 1e-12
    assert "boundary" not in doc
    log = tmp_path / "stages.jsonl"
    code, doc = run(["solve", "--game", game, "--agents", spec.m, *betas, "--boundary", "--stage-log", log])
    assert code == 3
    assert doc["boundary"]["exploitability"] <= 1e-4
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(records) == doc["boundary"]["stages"]
    assert set(records[0]) == {"tau", "loss", "exploitability", "iters"}


def test_solve_singular(tmp_path):
    game = write_game(tmp_path / "g.json", np.diag([0.0, 2.0]), [0.5, 0.5])
    code, doc = run(["solve", "--game", game, "--agents", 2, "--beta-a", 1, "--beta-i", 1e4, "--beta-d", 2e4])
    assert code == 4
    assert doc["validity"] == "singular" and doc["singular_kind"] == "alpha_zero"


def test_solve_requires_agents(symmetric_game):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--game", str(symmetric_game), "--beta-a", "1", "--beta-i", "1", "--beta-d", "1"])
    assert info.value.code == 2


def test_solve_rejects_nonpositive_beta(symmetric_game):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--game", str(symmetric_game), "--agents", "2", "--beta-a", "0", "--beta-i", "1", "--beta-d", "1"])
    assert info.value.code == 2


# --- sweep ------------------------------------------------------------------------

def sweep_args(game, prefix, *extra):
    return ["sweep", "--game", game, "--agents", 2, "--resolution", 4, "--out", prefix, *extra]


def test_sweep_symmetric_zero_metrics(symmetric_game, tmp_path):
    for fixed in ("beta_a", "beta_i", "beta_d"):
        code, doc = run(sweep_args(symmetric_game, tmp_path / fixed, "--fixed", fixed))
        assert code == 0
        assert doc["metrics"]["exclusion"] == 0 and doc["metrics"]["invalid"] == 0


def test_sweep_outputs_deterministic(tmp_path, rng):
    game = write_game(tmp_path / "g.json", dominant_psd_matrix(rng, 4), rng.dirichlet(np.full(4, 0.5)))
    run(sweep_args(game, tmp_path / "one", "--render"))
    run(sweep_args(game, tmp_path / "two", "--render", "--jobs", 2))
    for suffix in (".csv", ".metrics.json", ".meta.json", ".ppm"):
        assert (tmp_path / f"one{suffix}").read_bytes() == (tmp_path / f"two{suffix}").read_bytes()
    meta = json.loads((tmp_path / "one.meta.json").read_text())
    assert "version" in meta and not any("time" in k for k in meta)


def test_sweep_hand_counts_4x4(tmp_path):
    # x = beta_a, y = beta_d, beta_i = 1; classify every cell with the dense full-KKT oracle
    c = 0.05 * np.ones((2, 2))
    a = [0.9, 0.1]
    game = write_game(tmp_path / "g.json", c, a)
    prefix = tmp_path / "grid"
    code, doc = run(sweep_args(game, prefix, "--fixed", "beta_i", "--range-x", 0.6, 4.8, "--range-y", 1, 8))
    assert code == 0
    xs = np.exp(np.log(0.6) + np.arange(4) * (np.log(4.8) - np.log(0.6)) / 3)
    ys = np.exp(np.log(1.0) + np.arange(4) * np.log(8) / 3)
    counts = {"valid": 0, "excluded": 0, "invalid": 0}
    for y in ys:
        for x in xs:
            w = full_kkt_solve(c, np.array(a), (x, 1.0, y), 2)[0][0]
            counts["invalid" if w.min() <= 1e-12 else "excluded" if w.min() < 0.05 else "valid"] += 1
    assert counts["excluded"] > 0 and counts["invalid"] > 0
    assert doc["metrics"]["exclusion"] == counts["excluded"] / 16
    assert doc["metrics"]["invalid"] == counts["invalid"] / 16
    rows = (tmp_path / "grid.csv").read_text().splitlines()[1:]
    assert [r.split(",")[2] for r in rows].count("excluded") == counts["excluded"]


def test_sweep_usage_errors(symmetric_game, tmp_path):
    assert run(sweep_args(symmetric_game, tmp_path / "s", "--range-x", 1, 0.5))[0] == 2
    assert run(sweep_args(symmetric_game, tmp_path / "s", "--threshold", 1.5))[0] == 2
    assert run(sweep_args(symmetric_game, tmp_path / "s", "--focal", 5))[0] == 2
    assert run(sweep_args(symmetric_game, tmp_path / "missing" / "s"))[0] == 2


# --- verify / roots ---------------------------------------------------------------

def test_verify(symmetric_game, tmp_path):
    good = tmp_path / "good.json"
    good.write_text('{"w": [0.5, 0.5]}')
    code, doc = run(["verify", "--game", symmetric_game, "--profile", good, "--agents", 3, *BETAS])
    assert code == 0 and doc["nash"] and len(doc["gains"]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"w": [[1.0, 0.0], [1.0, 0.0]]}')
    code, doc = run(["verify", "--game", symmetric_game, "--profile", bad, *BETAS])
    assert code == 5 and not doc["nash"] and doc["exploitability"] > 0


def test_verify_rejects_off_simplex(symmetric_game, tmp_path):
    p = tmp_path / "w.json"
    p.write_text('{"w": [[0.7, 0.7], [0.5, 0.5]]}')
    assert run(["verify", "--game", symmetric_game, "--profile", p, *BETAS])[0] == 2


def test_roots(tmp_path):
    game = write_game(tmp_path / "g.json", np.diag([0.0, 2.0]), [0.5, 0.5])
    code, doc = run(["roots", "--game", game, "--interval", 0.1, 3.9])
    assert code == 0
    assert len(doc["roots"]) == 1 and abs(doc["roots"][0] - 2.0) <= 1e-9
    assert doc["poles"] == pytest.approx([0.0, 4.0])
    assert abs(doc["f_at_roots"][0]) <= 1e-9
    assert run(["roots", "--game", game, "--interval", 0, 1])[0] == 2


def test_help_lists_exit_codes():
    out = subprocess.run([sys.executable, "-m", "nash_align", "--help"], capture_output=True, text=True, check=True).stdout
    for code in range(6):
        assert f"  {code}  " in out
    assert "NASH_ALIGN_SEED" in out
