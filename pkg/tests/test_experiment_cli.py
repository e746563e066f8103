import json
import math
from pathlib import Path

import pytest

from qlayer.cli import main
from qlayer.errors import InvalidLayer, MissingTable
from qlayer.experiment import ExperimentConfig, load_schema, run_experiment, validate_report
from qlayer.plots import plot_emit

ROOT = Path(__file__).resolve().parents[1]
EXPERIMENTS = ROOT / "experiments"


def _strip_config(tmp_path, **kw):
    base = dict(surface="straight_strip", a=0.5, R_list=[5.0, 10.0], h_list=[0.25, 0.125], u_intervals=[8, 16],
                certificates=["eigen_gap", "variational", "integral_invariant"],
                variational={"plateau": 2.0, "cutoff": 8.0, "shape": "linear"}, output_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def strip_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("strip")
    return run_experiment(_strip_config(out), "full"), out


def test_every_catalog_surface_has_an_experiment():
    from qlayer.catalog import BUILTINS

    names = {ExperimentConfig.load(p).surface for p in EXPERIMENTS.glob("*.yaml")}
    assert names == set(BUILTINS)


@pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.yaml")), ids=lambda p: p.stem)
def test_experiment_files_parse(path):
    cfg = ExperimentConfig.load(path)
    assert cfg.name == path.stem


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(surface="torus")
    with pytest.raises(ValueError):
        ExperimentConfig(surface="plane", R_list=[10, 5])
    with pytest.raises(ValueError):
        ExperimentConfig(surface="plane", h_list=[0.25, 0.5])
    with pytest.raises(ValueError):
        ExperimentConfig(surface="plane", R_list=[])
    with pytest.raises(ValueError):
        ExperimentConfig(surface="plane", certificates=["vibes"])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"surface": "plane", "colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"surface": "plane", "layer": {"b": 1}})


def test_nested_config_keys():
    cfg = ExperimentConfig.from_dict({"surface": {"name": "gaussian_bump", "params": {"h": 2}},
                                      "layer": {"a": 0.3}, "ladder": {"R_list": [4], "h_list": [0.5, 0.25]},
                                      "coefficients": {"C1": 2.0}, "output": {"prefix": "x"}})
    assert cfg.surface_params == {"h": 2} and cfg.a == 0.3 and cfg.C1 == 2.0 and cfg.prefix == "x"


def test_strip_report(strip_report):
    report, out = strip_report
    validate_report(report)
    assert report["spectral"]["below_threshold"] is False
    assert all(row["lambda1"] > report["kappa1"] for row in report["spectral"]["table"])
    verdicts = {c["kind"]: c for c in report["certificates"]}
    assert verdicts["eigen_gap"]["verdict"] == "Inconclusive"
    assert verdicts["variational"]["verdict"] == "Inconclusive"
    assert verdicts["integral_invariant"]["numbers"]["partial_integrals"] == [0.0] * 8
    assert (out / "straight_strip.report.json").exists()
    assert (out / "straight_strip.spectral.csv").read_text().startswith("R,h_base,u_intervals,lambda1")


def test_report_is_deterministic(strip_report):
    first, out = strip_report
    again = run_experiment(_strip_config(out), "full", write=False)
    strip = lambda r: {k: v for k, v in r.items() if k != "timings"}  # noqa: E731
    assert json.dumps(strip(first), sort_keys=True) == json.dumps(strip(again), sort_keys=True)


def test_schema_is_versioned():
    schema = load_schema()
    assert schema["properties"]["schema_version"]["const"] == "1.0"


def test_validity_abort(tmp_path):
    cfg = ExperimentConfig.load(EXPERIMENTS / "sphere_invalid.yaml")
    cfg.output_dir = str(tmp_path)
    with pytest.raises(InvalidLayer, match="validity stage.*margin"):
        run_experiment(cfg, "spectrum")


def test_describe_stage(tmp_path):
    cfg = ExperimentConfig(surface="gaussian_bump", output_dir=str(tmp_path), growth_radii=[2, 4, 8, 12, 20])
    report = run_experiment(cfg, "describe", write=False)
    validate_report(report)
    geo = report["geometry"]
    assert report["spectral"] is None and report["certificates"] == []
    assert geo["validity"]["passes"]
    assert geo["growth_fit"]["end_constants"][0] == pytest.approx(1.0, abs=0.02)
    assert geo["gauss_equation_residual"] < 1e-8


# ---------------------------------------------------------------- plots


def test_plots_deterministic(strip_report, tmp_path):
    report, _ = strip_report
    a = plot_emit(report, "convergence", tmp_path / "a.svg").read_bytes()
    b = plot_emit(report, "convergence", tmp_path / "b.svg").read_bytes()
    assert a == b and a.startswith(b"<?xml")
    plot_emit(report, "curvature_tail", tmp_path / "c.svg")


def test_plot_missing_table(strip_report, tmp_path):
    report, _ = strip_report
    with pytest.raises(MissingTable):
        plot_emit(report, "growth", tmp_path / "g.svg")
    empty = dict(report, spectral={"table": []})
    with pytest.raises(MissingTable):
        plot_emit(empty, "convergence", tmp_path / "e.svg")
    with pytest.raises(ValueError):
        plot_emit(report, "pie", tmp_path / "p.svg")


def test_strip_points_above_threshold(strip_report):
    report, _ = strip_report
    lam = [r["lambda1"] for r in report["spectral"]["table"] if r["h"] == 0.125]
    assert all(v > report["kappa1"] for v in lam)
    assert lam[0] > lam[1]


# ---------------------------------------------------------------- CLI


def test_cli_spectrum_and_plot(tmp_path, capsys):
    code = main(["spectrum", str(EXPERIMENTS / "straight_strip.yaml"), "--R-list", "4,8", "--h-list", "0.25,0.125",
                 "--u-intervals", "8,16", "--output-dir", str(tmp_path)])
    assert code == 0
    report = tmp_path / "straight_strip.report.json"
    assert "below_threshold = False" in capsys.readouterr().out
    assert main(["plot", str(report), "--kind", "convergence"]) == 0
    assert (tmp_path / "straight_strip.convergence.svg").exists()
    assert main(["plot", str(report), "--kind", "growth"]) == 1


def test_cli_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QLAYER_OUTPUT_DIR", str(tmp_path))
    assert main(["describe", "--surface", "plane", "--radii", "1,2,4", "--growth-radii", "2,4,8,12,20",
                 "--prefix", "flat"]) == 0
    assert (tmp_path / "flat.report.json").exists()


def test_cli_surface_params(tmp_path, capsys):
    code = main(["describe", "--surface", "gaussian_bump", "--param", "h=0.5", "--param", "w=2",
                 "--growth-radii", "2,4,8,12,20", "--no-write"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["surface_params"] == {"h": 0.5, "w": 2}


def test_cli_exit_codes(tmp_path):
    assert main(["full", str(EXPERIMENTS / "sphere_invalid.yaml"), "--output-dir", str(tmp_path)]) == 2
    assert main(["describe", "--surface", "torus"]) == 1
    assert main(["describe"]) == 1
    assert main(["describe", "--surface", "gaussian_bump", "--param", "w=0"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
