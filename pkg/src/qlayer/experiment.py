"""Experiment configuration, orchestration and persistence."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .catalog import BUILTINS, catalog_surface
from .certify import (
    KINDS,
    CutoffFamily,
    condition_integral_invariant,
    eigen_gap_certificate,
    euler_isoperimetric_condition,
    hartman_check,
    mean_curvature_growth,
    nonparabolic_condition,
    variational_certificate,
)
from .discretize import assemble, build_mesh
from .errors import InvalidLayer
from .spectral import Ladder, lowest_eigenpairs, refinement_study, transverse_threshold
from .surface_geometry import Quadrature, asymptotic_flatness_report, curvatures, volume_growth_fit
from .tube import LayerGeometry, validity_check

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
OUTPUT_ENV = "QLAYER_OUTPUT_DIR"
STAGES = ("describe", "spectrum", "certify", "full")


@dataclass
class ExperimentConfig:
    surface: str
    surface_params: dict = field(default_factory=dict)
    a: float = 0.5
    C0: float = 0.9
    R_list: list = field(default_factory=lambda: [5.0, 10.0])
    h_list: list = field(default_factory=lambda: [0.5, 0.25])
    u_intervals: list | None = None
    grading: float = 0.0
    count: int = 1
    certificates: list = field(default_factory=lambda: list(KINDS))
    radii: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 14.0, 20.0])
    growth_radii: list = field(default_factory=lambda: [2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0])
    ball_mode: str = "parameter"
    growth_ball_mode: str = "geodesic"
    mu: list | None = None
    C1: float = 1.0
    epsilon: float = 0.1
    euler_characteristic: int | None = None
    growth_m: float | None = None
    growth_C: float | None = None
    variational: dict = field(default_factory=lambda: {"plateau": 2.0, "cutoff": 8.0, "shape": "logarithmic"})
    scan_radius: float | None = None
    geodesic_h: float = 0.2
    output_dir: str | None = None
    prefix: str | None = None
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        if self.surface not in BUILTINS:
            raise ValueError(f"unknown surface {self.surface!r}")
        if not self.R_list or not self.h_list:
            raise ValueError("ladder lists must be nonempty")
        if list(self.R_list) != sorted(self.R_list):
            raise ValueError("R_list must be sorted increasing")
        if list(self.h_list) != sorted(self.h_list, reverse=True):
            raise ValueError("h_list must be sorted from coarse to fine")
        unknown = set(self.certificates) - set(KINDS)
        if unknown:
            raise ValueError(f"unknown certificate kinds {sorted(unknown)}")
        self.R_list = [float(r) for r in self.R_list]
        self.h_list = [float(h) for h in self.h_list]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        nested = {"layer": ("a", "C0"), "ladder": ("R_list", "h_list", "u_intervals", "grading"),
                  "coefficients": ("mu", "C1", "epsilon", "euler_characteristic", "growth_m", "growth_C"),
                  "output": ("output_dir", "prefix")}
        for key, names in nested.items():
            block = data.pop(key, None) or {}
            for k, v in block.items():
                if k not in names:
                    raise ValueError(f"unknown key {key}.{k}")
                data[k] = v
        surf = data.pop("surface")
        if isinstance(surf, dict):
            data["surface"] = surf["name"]
            data["surface_params"] = surf.get("params", {}) or {}
        else:
            data["surface"] = surf
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        cfg = cls.from_dict(data)
        if cfg.name is None:
            cfg.name = Path(path).stem
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


def _ladder(cfg: ExperimentConfig) -> Ladder:
    return Ladder.make(cfg.R_list, cfg.h_list, cfg.a, cfg.u_intervals, cfg.grading)


def gauss_equation_residual(chart, n_points: int, seed: int, R: float) -> float:
    """max |det A - K_graph| over random points of a graph chart z = f(x, y).

    K_graph = det(Hess f) / (1 + |grad f|^2)^2 is the intrinsic curvature.
    """
    rng = np.random.default_rng(seed)
    pts = chart.origin + rng.uniform(-R, R, size=(n_points, 2))
    rep = curvatures(chart, pts)
    grad = chart.jac(pts)[..., 2, :]
    hes = chart.hess(pts)[..., 2, :, :]
    K = np.linalg.det(hes) / (1 + np.sum(grad * grad, axis=-1)) ** 2
    return float(np.max(np.abs(rep.gauss_curvature - K)))


def describe(cfg: ExperimentConfig, chart=None) -> dict:
    chart = chart or catalog_surface(cfg.surface, cfg.surface_params)
    layer = LayerGeometry(chart, cfg.a, cfg.C0, cfg.scan_radius)
    quad = Quadrature(geodesic_h=cfg.geodesic_h)
    geo: dict = {"surface": chart.name, "dim_base": chart.dim_base, "orientation": chart.orientation_note,
                 "derivative_mode": chart.derivative_mode,
                 "euler_characteristic": cfg.euler_characteristic if cfg.euler_characteristic is not None
                 else chart.euler_characteristic,
                 "ends": [e.name for e in chart.ends]}
    flat_radii = [r for r in cfg.radii if r <= chart.extent]
    geo["flatness"] = asymptotic_flatness_report(chart, flat_radii)
    if chart.dim_base == 2 and chart.complete:
        geo["growth_fit"] = volume_growth_fit(chart, cfg.growth_radii, cfg.growth_ball_mode, quad).to_dict()
        geo["gauss_equation_residual"] = gauss_equation_residual(chart, 1000, cfg.seed, min(max(cfg.radii), 20.0))
    geo["validity"] = validity_check(layer, None if cfg.scan_radius is None else cfg.scan_radius)
    return geo


def run_experiment(cfg: ExperimentConfig, stage: str = "full", write: bool = True) -> dict:
    """Run the requested stage and return the report; files are written when ``write``."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    timings = {}
    t0 = time.perf_counter()
    chart = catalog_surface(cfg.surface, cfg.surface_params)
    layer = LayerGeometry(chart, cfg.a, cfg.C0, cfg.scan_radius)
    quad = Quadrature(geodesic_h=cfg.geodesic_h)
    kappa = transverse_threshold(cfg.a)
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "reproducibility": {"package": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                            "python": platform.python_version(),
                            "mode": "deterministic for a fixed config and library versions; timings excluded"},
        "config": cfg.to_dict(),
        "kappa1": kappa,
        "geometry": None,
        "spectral": None,
        "certificates": [],
        "hartman": None,
        "timings": timings,
    }

    geometry = describe(cfg, chart)
    report["geometry"] = geometry
    timings["describe"] = time.perf_counter() - t0
    validity = geometry["validity"]

    if stage in ("spectrum", "full", "certify"):
        needs_spectrum = stage in ("spectrum", "full") or {"eigen_gap", "variational"} & set(cfg.certificates)
        if needs_spectrum:
            if not validity["passes"]:
                raise InvalidLayer(f"validity stage: a*sup|A| = {validity['a_sup_norm_A']:.4g} exceeds "
                                   f"C0 = {validity['C0']} (margin {validity['margin']:.4g})")
            t1 = time.perf_counter()
            study = refinement_study(layer, _ladder(cfg), cfg.count, strict=False, seed=cfg.seed)
            report["spectral"] = study.to_dict()
            timings["spectrum"] = time.perf_counter() - t1
        else:
            study = None

    if stage in ("certify", "full"):
        t1 = time.perf_counter()
        certs = []
        wanted = set(cfg.certificates)
        if "eigen_gap" in wanted and study is not None:
            certs.append(eigen_gap_certificate(study, layer, geometry["flatness"]))
        if "variational" in wanted and study is not None:
            R, h, nu = cfg.R_list[-1], cfg.h_list[-1], _ladder(cfg).u_intervals[-1]
            mesh = build_mesh(layer, R, h, u_intervals=nu, grading=cfg.grading)
            pair = assemble(mesh, layer)
            var = cfg.variational
            family = CutoffFamily(var.get("plateau", 2.0), var.get("cutoff", R), var.get("shape", "logarithmic"),
                                  var.get("m", 3.0))
            certs.append(variational_certificate(layer, pair, family, lambda1=study.lambda1_finest))
        radii = [r for r in cfg.radii if r <= chart.extent]
        if "integral_invariant" in wanted and chart.complete:
            certs.append(condition_integral_invariant(chart, cfg.mu, radii, cfg.ball_mode, quad=quad))
        if chart.dim_base == 2 and chart.complete:
            if "euler_isoperimetric" in wanted:
                certs.append(euler_isoperimetric_condition(chart, cfg.euler_characteristic, cfg.growth_radii,
                                                           cfg.growth_ball_mode, quad=quad))
                report["hartman"] = hartman_check(chart, cfg.euler_characteristic, cfg.growth_radii,
                                                  cfg.growth_ball_mode, quad).to_dict()
            if "mean_curvature_growth" in wanted:
                certs.append(mean_curvature_growth(chart, radii, "signed", cfg.epsilon, cfg.ball_mode, quad))
                certs.append(mean_curvature_growth(chart, radii, "absolute", cfg.epsilon, cfg.ball_mode, quad))
            if "nonparabolic_condition" in wanted:
                gm = geometry.get("growth_fit", {})
                m = cfg.growth_m if cfg.growth_m is not None else gm.get("exponent_m")
                C = cfg.growth_C if cfg.growth_C is not None else gm.get("constant_C")
                certs.append(nonparabolic_condition(chart, cfg.mu, m, C, cfg.C1, radii, cfg.ball_mode, quad))
        report["certificates"] = [c.to_dict() for c in certs]
        timings["certify"] = time.perf_counter() - t1

    timings["total"] = time.perf_counter() - t0
    report = _jsonable(report)
    if write:
        write_report(report, cfg)
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def output_dir(cfg: ExperimentConfig) -> Path:
    base = cfg.output_dir or os.environ.get(OUTPUT_ENV) or "qlayer-output"
    return Path(base)


def write_report(report: dict, cfg: ExperimentConfig) -> dict[str, Path]:
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.prefix or cfg.name or cfg.surface
    paths = {"report": out / f"{prefix}.report.json"}
    with open(paths["report"], "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if report.get("spectral"):
        paths["spectral_csv"] = out / f"{prefix}.spectral.csv"
        with open(paths["spectral_csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "h_base", "u_intervals", "lambda1", "max_relative_residual"])
            for row in report["spectral"]["table"]:
                w.writerow([row["R"], repr(row["h_base"]), row["u_intervals"], repr(row["lambda1"]),
                            repr(row["max_relative_residual"])])
    for cert in report.get("certificates", []):
        nums = cert["numbers"]
        if "radii" in nums:
            col = next((k for k in ("L", "growth", "partial_integrals") if k in nums), None)
            if col is None:
                continue
            tag = cert["kind"] + ("_" + cert["provenance"]["mode"] if "mode" in cert["provenance"] else "")
            p = out / f"{prefix}.{tag}.csv"
            paths[tag] = p
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["r", col])
                for r, v in zip(nums["radii"], nums[col]):
                    w.writerow([r, repr(v)])
    return paths


def load_schema() -> dict:
    text = resources.files("qlayer").joinpath("schemas/report-v1.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema())
