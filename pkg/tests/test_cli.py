import json
import subprocess
import sys

import numpy as np
import pytest

from fractal_burgers.cli import main
from fractal_burgers.storage import load_profile, read_json

SMALL_GRID = ["--grid-L", "64", "--grid-n", "4096"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    assert run("solve", "--method", "picard", *SMALL_GRID, "--out", out) == 0
    return out


def test_kernel_command(tmp_path):
    assert run("kernel", "--alpha", 1.5, *SMALL_GRID, "--out", tmp_path) == 0
    data = np.loadtxt(tmp_path / "kernel.csv", delimiter=",", skiprows=1)
    assert data.shape == (4096, 5)
    assert (tmp_path / "kernel.csv").read_text().splitlines()[0] == "x,p,dp,envelope,ratio"
    summary = read_json(tmp_path / "kernel.json")
    assert summary["manifest"] == "manifest.json"
    assert 0 < summary["ratio_inf"] <= summary["ratio_sup"] < np.inf
    manifest = read_json(tmp_path / "manifest.json")
    assert manifest["command"] == "kernel"
    assert set(manifest["outputs"]) == {"kernel.csv", "kernel.json"}


def test_usage_errors(tmp_path, capsys):
    assert run("kernel", "--alpha", 2.5, "--out", tmp_path / "a") == 2
    assert "(1, 2)" in capsys.readouterr().err
    assert run("solve", "--M", -1, "--out", tmp_path / "b") == 2
    assert run("lemmas", "--sweep-spec", '{"x": []}', "--out", tmp_path / "c") == 2
    assert run("verify", "--out", tmp_path / "d") == 2
    assert run("no-such-command") == 2


def test_lemmas_beta_zero_is_expected_divergence(tmp_path):
    spec = json.dumps({"x": [0.0], "v": [1e-3, 0.1, 0.5], "times": [0.1, 10.0], "radii": [0.1, 10.0]})
    assert run("lemmas", "--alpha", 1.5, "--beta", 0, "--sweep-spec", spec, "--out", tmp_path) == 0
    rep = read_json(tmp_path / "lemma_tech_integral_beta0_alpha1.5.json")
    assert rep["details"]["status"] == "divergent (expected)" and rep["passed"]
    c2 = read_json(tmp_path / "lemma_C2_identity_alpha1.5.json")
    assert c2["passed"] and c2["details"]["C2_closed_form"] == pytest.approx(2.41840, abs=5e-6)


def test_solve_outputs_round_trip(solved):
    prof, side = load_profile(solved / "profile_picard.csv")
    assert side["manifest"] == "manifest.json"
    assert side["producer"] == "picard" and side["residual"] < 1e-8
    raw = np.loadtxt(solved / "profile_picard.csv", delimiter=",", skiprows=1)
    assert np.array_equal(raw[:, 1], prof.values)
    assert prof.mass() == pytest.approx(2.0, rel=1e-6)
    assert prof.meta["method"] == "picard"


def test_determinism(tmp_path, solved):
    again = tmp_path / "again"
    assert run("solve", "--method", "picard", *SMALL_GRID, "--out", again) == 0
    for name in ("profile_picard.csv", "profile_picard.json"):
        assert (again / name).read_bytes() == (solved / name).read_bytes()
    m1, m2 = read_json(solved / "manifest.json"), read_json(again / "manifest.json")
    for m in (m1, m2):
        m.pop("timestamp")
        m.pop("stage_seconds")
    assert m1 == m2


def test_manifest_immutable_without_force(solved, capsys):
    before = (solved / "manifest.json").read_bytes()
    assert run("solve", "--method", "picard", *SMALL_GRID, "--out", solved) == 2
    assert "manifest" in capsys.readouterr().err
    assert (solved / "manifest.json").read_bytes() == before


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FBV_OUT_DIR", str(tmp_path))
    assert run("kernel", "--alpha", 1.25, *SMALL_GRID) == 0
    dirs = list(tmp_path.glob("kernel-*"))
    assert len(dirs) == 1 and (dirs[0] / "kernel.csv").exists()
    # same config, same digest: the second run must not overwrite silently
    assert run("kernel", "--alpha", 1.25, *SMALL_GRID) == 2
    assert run("kernel", "--alpha", 1.25, *SMALL_GRID, "--force") == 0


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 1.25, "M": 0.5, "grid-L": 64, "grid_n": 4096, "method": "picard"}))
    assert run("solve", "--config", cfg, "--M", 1.0, "--out", tmp_path / "o") == 0
    side = read_json(tmp_path / "o" / "profile_picard.json")
    assert side["config"]["alpha"] == 1.25 and side["config"]["M"] == 1.0
    manifest = read_json(tmp_path / "o" / "manifest.json")
    assert manifest["config"]["M"] == 1.0 and manifest["config"]["config_file"] == str(cfg)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alpah": 1.5}))
    assert run("solve", "--config", bad, "--out", tmp_path / "p") == 2


def test_convergence_failure_emits_trace(tmp_path):
    out = tmp_path / "fail"
    assert run("solve", "--method", "picard", "--max-iter", 2, *SMALL_GRID, "--out", out) == 5
    trace = read_json(out / "picard_trace.json")
    assert len(trace["trace"]) == 2
    assert (out / "manifest.json").exists()


def test_corrupt_profile_exits_3(tmp_path, solved, capsys):
    lines = (solved / "profile_picard.csv").read_text().splitlines()
    lines[6] = "0.1,not-a-number"
    bad = tmp_path / "profile_picard.csv"
    bad.write_text("\n".join(lines) + "\n")
    (tmp_path / "profile_picard.json").write_bytes((solved / "profile_picard.json").read_bytes())
    assert run("verify", "--profile", bad, "--out", tmp_path / "v") == 3
    assert "line 7" in capsys.readouterr().err


def test_verify_and_report(tmp_path, solved):
    vdir = tmp_path / "verify"
    assert run("verify", "--profile", solved / "profile_picard.csv", "--out", vdir) == 0
    rep = read_json(vdir / "report_00_profile_picard.json")
    assert rep["passed"] and all(rep["checks"].values())
    assert rep["proof_replay"]["C0_hat"] > 0
    assert run("verify", "--profile", solved / "profile_picard.csv", "--eta", 1.5, "--out", tmp_path / "e") == 2
    rdir = tmp_path / "report"
    assert run("report", "--in", vdir, "--out", rdir) == 0
    rows = (rdir / "summary.csv").read_text().splitlines()
    assert rows[0].startswith("source,alpha,M,b,ratio_inf") and len(rows) == 2
    assert read_json(rdir / "summary.json")["all_passed"] is True
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("report", "--in", empty, "--out", tmp_path / "r2") == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fractal_burgers", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("kernel", "lemmas", "solve", "verify", "report"):
        assert cmd in res.stdout


def test_verify_maps_later_times_back_to_t1():
    from conftest import small_config
    from fractal_burgers.cli import verify_profile
    from fractal_burgers.solver import evolve_spectral

    from fractal_burgers.grid import Grid1D

    # the decay radii need room after the domain shrinks by 2^(1/alpha)
    cfg = small_config(M=0.5, evolution_steps=128, grid=Grid1D(128.0, 2 ** 13))
    later = evolve_spectral(cfg, t_end=2.0)[2.0]
    rep = verify_profile(later)
    assert rep["rescaled_from_t"] == 2.0
    assert rep["passed"], rep["checks"]
