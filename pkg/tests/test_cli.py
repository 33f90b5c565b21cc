"""End-to-end checks of the command line interface and its report files."""

import json

import pytest

from spinlab import cli, graphs, models

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return cli.main(argv)


# ----------------------------------------------------------------------
# exit statuses
# ----------------------------------------------------------------------

def test_verify_moments_ok(tmp_path, monkeypatch):
    status = run(["verify", "moments", "--model", "ising", "--b", "0.1",
                  "--delta", "3", "--n", "2"], tmp_path, monkeypatch)
    assert status == 0
    report = json.loads((tmp_path / "spinlab-verify-moments.json").read_text())
    assert report["first_moment"]["status"] == "exact-match"
    assert report["first_moment"]["cases"] == 9
    assert report["first_moment"]["mismatches"] == []


def test_verify_tensor_impossible_tolerance_exits_1(tmp_path, monkeypatch):
    status = run(["verify", "tensor", "--model", "colorings", "--q", "3",
                  "--delta", "3", "--starts", "4", "--tol", "1e-30"],
                 tmp_path, monkeypatch)
    assert status == 1
    report = json.loads((tmp_path / "spinlab-verify-tensor.json").read_text())
    assert report["status"] == "mismatch"
    assert report["ratio_deviation"] > 0


def test_wrong_regime_exits_2_with_error_report(tmp_path, monkeypatch):
    # odd q below the threshold: the classified diagram refuses
    status = run(["phase-diagram", "--model", "potts", "--q", "3",
                  "--b", "0.1", "--delta", "4"], tmp_path, monkeypatch)
    assert status == 2
    report = json.loads((tmp_path / "spinlab-phase-diagram.json").read_text())
    assert report["error"]["category"] == "regime_or_domain"


def test_exact_over_budget_exits_3(tmp_path, monkeypatch):
    g = graphs.sample_graph(20, 0, 2, seed=1)
    graphs.write_graph(g, tmp_path / "big.txt")
    status = run(["exact", "--model", "ising", "--b", "0.1",
                  "--graph", "big.txt"], tmp_path, monkeypatch)
    assert status == 3
    report = json.loads((tmp_path / "spinlab-exact.json").read_text())
    assert report["error"]["category"] == "budget"


def test_missing_seed_is_a_usage_error(tmp_path, monkeypatch):
    with pytest.raises(SystemExit) as exc:
        run(["sample", "--n", "4", "--delta", "3"], tmp_path, monkeypatch)
    assert exc.value.code == 64


def test_unknown_flag_is_a_usage_error(tmp_path, monkeypatch):
    with pytest.raises(SystemExit) as exc:
        run(["norms", "--model", "colorings", "--q", "3", "--delta", "3",
             "--seed", "0", "--frobnicate"], tmp_path, monkeypatch)
    assert exc.value.code == 64


# ----------------------------------------------------------------------
# report files
# ----------------------------------------------------------------------

def test_default_report_name_and_sorted_keys(tmp_path, monkeypatch):
    status = run(["norms", "--model", "colorings", "--q", "3",
                  "--delta", "3", "--starts", "8", "--seed", "0"],
                 tmp_path, monkeypatch)
    assert status == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["spinlab-norms.json"]
    raw = (tmp_path / "spinlab-norms.json").read_text()
    # canonical form: sorted keys, two-space indent, trailing newline
    assert raw == json.dumps(json.loads(raw), sort_keys=True, indent=2) + "\n"
    report = json.loads(raw)
    assert report["max_psi1"] == pytest.approx(
        report["delta"] * report["log_norm"])
    assert report["tensor_ratio_deviation"] <= 1e-7


def test_sample_writes_parseable_graph(tmp_path, monkeypatch):
    status = run(["sample", "--n", "4", "--r", "1", "--delta", "3",
                  "--seed", "9", "--out", "g.txt"], tmp_path, monkeypatch)
    assert status == 0
    g = graphs.read_graph(tmp_path / "g.txt")
    assert (g.n, g.r, g.delta) == (4, 1, 3)


def test_exact_footprint_table(tmp_path, monkeypatch):
    g = graphs.sample_graph(3, 0, 2, seed=5)
    graphs.write_graph(g, tmp_path / "g.txt")
    status = run(["exact", "--model", "colorings", "--q", "3",
                  "--graph", "g.txt", "--footprints"], tmp_path, monkeypatch)
    assert status == 0
    report = json.loads((tmp_path / "spinlab-exact.json").read_text())
    assert report["rational"] is True
    z = graphs.exact_partition(g, models.colorings_model(3))
    assert report["Z"] == str(z)
    assert len(report["footprints"]) >= 1


def test_workers_never_change_report_bytes(tmp_path, monkeypatch):
    argv = ["fixpoint", "--model", "colorings", "--q", "3", "--delta", "4",
            "--starts", "12", "--seed", "3"]
    monkeypatch.setenv("SPINLAB_WORKERS", "1")
    run(argv + ["--out", "one.json"], tmp_path, monkeypatch)
    monkeypatch.setenv("SPINLAB_WORKERS", "4")
    run(argv + ["--out", "four.json"], tmp_path, monkeypatch)
    assert (tmp_path / "one.json").read_bytes() == \
        (tmp_path / "four.json").read_bytes()


def test_generic_model_from_matrix_file(tmp_path, monkeypatch):
    (tmp_path / "m.json").write_text(json.dumps(
        {"q": 2, "B": [[0.1, 1.0], [1.0, 0.1]], "kind": "generic"}))
    status = run(["norms", "--model", "generic", "--matrix", "m.json",
                  "--delta", "3", "--starts", "8", "--seed", "0"],
                 tmp_path, monkeypatch)
    assert status == 0
    report = json.loads((tmp_path / "spinlab-norms.json").read_text())
    assert report["norm"] > 1.0


# ----------------------------------------------------------------------
# figures
# ----------------------------------------------------------------------

def test_ssc_plot_renders_png(tmp_path, monkeypatch):
    status = run(["ssc", "--model", "ising", "--b", "0.1", "--delta", "3",
                  "--i-max", "40", "--plot", "--out", "ssc.json"],
                 tmp_path, monkeypatch)
    assert status == 0
    report = json.loads((tmp_path / "ssc.json").read_text())
    assert report["gap"] <= 1e-6
    png = (tmp_path / "ssc.png").read_bytes()
    assert png.startswith(PNG_MAGIC)


def test_phase_sweep_csv_and_png(tmp_path, monkeypatch):
    status = run(["phase-diagram", "--model", "potts", "--q", "4",
                  "--delta", "5", "--sweep", "0.0:0.15:4", "--plot"],
                 tmp_path, monkeypatch)
    assert status == 0
    lines = (tmp_path / "spinlab-phase-diagram.csv").read_text().splitlines()
    header = lines[0].split(",")
    for col in ("B", "regime", "x", "lambda1_d", "psi1_max"):
        assert col in header
    assert len(lines) == 5
    assert (tmp_path / "spinlab-phase-diagram.png").read_bytes() \
        .startswith(PNG_MAGIC)


def test_capital_b_flag_is_accepted(tmp_path, monkeypatch):
    status = run(["phase-diagram", "--model", "potts", "--q", "4",
                  "--delta", "5", "--B", "0.1"], tmp_path, monkeypatch)
    assert status == 0
    report = json.loads((tmp_path / "spinlab-phase-diagram.json").read_text())
    assert report["B"] == 0.1
    assert report["num_phases"] == 6
