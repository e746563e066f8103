"""Ground-state criteria as numerical verdicts.

Two kinds of certificate can conclude that a ground state exists: the
eigenvalue gap from a refinement study and the Rayleigh quotient of an
explicit test function.  The remaining checkers evaluate the curvature
conditions on the base surface and only report whether the condition holds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .discretize import OperatorPair
from .errors import NonConvergentTail, UnsupportedDimension
from .spectral import SAFETY_FRACTION, StudyResult, rayleigh_quotient, transverse_threshold
from .surface_geometry import (
    DEFAULT_QUADRATURE,
    ImmersionChart,
    Quadrature,
    _fit_inverse_powers,
    asymptotic_flatness_report,
    ball_integrals,
    default_coeffs,
    volume_growth_fit,
)
from .tube import LayerGeometry, transverse_profile

INTEGRAL_TOL = 1e-3
ISOPERIMETRIC_TOL = 0.02


class Verdict(str, enum.Enum):
    GROUND_STATE_CERTIFIED = "GroundStateCertified"
    CONDITION_SATISFIED = "ConditionSatisfied"
    CONDITION_FAILED = "ConditionFailed"
    INCONCLUSIVE = "Inconclusive"


KINDS = ("eigen_gap", "variational", "integral_invariant", "euler_isoperimetric",
         "mean_curvature_growth", "nonparabolic_condition")


@dataclass
class Certificate:
    kind: str
    verdict: Verdict
    numbers: dict = field(default_factory=dict)
    assumptions: list[dict] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}")
        if self.verdict is Verdict.GROUND_STATE_CERTIFIED and self.kind not in ("eigen_gap", "variational"):
            raise ValueError("only spectral certificates may certify a ground state")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "verdict": self.verdict.value,
            "numbers": {k: _plain(v) for k, v in self.numbers.items()},
            "assumptions": [{k: _plain(v) for k, v in a.items()} for a in self.assumptions],
            "provenance": {k: _plain(v) for k, v in self.provenance.items()},
            "notices": list(self.notices),
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _nonincreasing(seq, atol=1e-9, rtol=1e-6) -> bool:
    seq = np.asarray(seq, dtype=float)
    return bool(np.all(np.diff(seq) <= atol + rtol * np.abs(seq[:-1])))


def _nondecreasing(seq, atol=1e-9, rtol=1e-6) -> bool:
    return _nonincreasing(-np.asarray(seq, dtype=float), atol, rtol)


def _tail(seq):
    seq = np.asarray(seq)
    return seq[len(seq) // 2:]


def extrapolate_limit(radii, values, atol: float = 1e-9) -> dict:
    """Limit of a ball-integral sequence with a tail bound.

    The largest half of the samples is fitted with a0 + a1/r + a2/r^2; the
    bound is the larger of the extrapolation step and the fit residual.  If
    the last difference quotient times the last radius (the remaining change
    of an algebraic tail) is smaller than that step, the tail has already
    converged faster than any power and the last value is returned with that
    estimate as its bound.  Raises NonConvergentTail when the difference
    quotients |dI/dr| over the tail grow.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(radii) < 3:
        raise ValueError("need at least three radii")
    k0 = max(0, len(radii) // 2 - 1)
    inc = np.abs(np.diff(values[k0:])) / np.diff(radii[k0:])
    integrable = _nonincreasing(inc, atol=atol, rtol=1e-3)
    if not integrable:
        raise NonConvergentTail(f"ball-integral difference quotients do not decay: {inc}")
    tr, tv = _tail(radii), _tail(values)
    limit, resid = _fit_inverse_powers(tr, tv, terms=2)
    bound = max(abs(limit - values[-1]), resid)
    remaining = float(inc[-1] * radii[-1]) if len(inc) else 0.0
    if remaining < abs(limit - values[-1]):
        limit, bound = float(values[-1]), remaining
    return {"limit": limit, "tail_bound": bound, "increments": inc.tolist(), "integrable": integrable}


# ---------------------------------------------------------------- spectral certificates


def eigen_gap_certificate(study: StudyResult, layer: LayerGeometry | None = None,
                          flatness: dict | None = None) -> Certificate:
    verdict = Verdict.GROUND_STATE_CERTIFIED if study.below_threshold else Verdict.INCONCLUSIVE
    assumptions = []
    if flatness is not None:
        assumptions.append({"name": "asymptotically_flat", "ok": bool(flatness["flat"]),
                            "detail": "inf of the essential spectrum taken as kappa_1"})
    notices = []
    if flatness is not None and not flatness["flat"]:
        verdict = Verdict.INCONCLUSIVE
        notices.append("base not asymptotically flat; kappa_1 is not known to bound the essential spectrum")
    finest = max(study.table, key=lambda r: (r["R"], -r["h"]))
    return Certificate(
        kind="eigen_gap",
        verdict=verdict,
        numbers={"kappa1": study.kappa1, "extrapolated_lambda1": study.extrapolated_lambda1,
                 "error_bar": study.error_bar, "margin": study.margin, "gap": study.gap,
                 "lambda1_finest": study.lambda1_finest},
        assumptions=assumptions,
        provenance={"truncation_R": finest["R"], "h_base": finest["h_base"], "u_intervals": finest["u_intervals"],
                    "levels": len({r["h"] for r in study.table})},
        notices=notices,
    )


@dataclass(frozen=True)
class CutoffFamily:
    """Lateral profile phi(r) times the transverse ground mode.

    ``shape`` is ``linear``, ``logarithmic`` or ``polynomial``; the last uses
    r^(1 - m/2) and needs ``m > 2``.
    """

    plateau: float
    cutoff: float
    shape: str = "logarithmic"
    m: float = 3.0

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        r0, r1 = self.plateau, self.cutoff
        if not 0 < r0 < r1:
            raise ValueError("need 0 < plateau < cutoff")
        rr = np.clip(r, r0, r1)
        if self.shape == "linear":
            mid = (r1 - rr) / (r1 - r0)
        elif self.shape == "logarithmic":
            mid = np.log(r1 / rr) / math.log(r1 / r0)
        elif self.shape == "polynomial":
            p = 1 - self.m / 2
            if p >= 0:
                raise ValueError("polynomial cutoff needs m > 2")
            end = (r1 / r0) ** p
            mid = ((rr / r0) ** p - end) / (1 - end)
        else:
            raise ValueError(f"unknown cutoff shape {self.shape!r}")
        return np.where(r <= r0, 1.0, np.where(r >= r1, 0.0, mid))


def trial_function(layer: LayerGeometry, pair: OperatorPair, family: CutoffFamily) -> np.ndarray:
    """Nodal interpolant of phi(|x - centre|) cos(pi u / 2a), restricted to free nodes."""
    if pair.mesh is None:
        raise ValueError("operator pair carries no mesh")
    origin = layer.base.origin

    def psi(x, u):
        r = np.linalg.norm(x - origin, axis=-1)
        return family.profile(r) * transverse_profile(u, layer.a)

    return pair.restrict(pair.mesh.interpolate(psi))


def variational_certificate(layer: LayerGeometry, pair: OperatorPair, family: CutoffFamily,
                            lambda1: float | None = None) -> Certificate:
    kappa = transverse_threshold(layer.a)
    margin = SAFETY_FRACTION * kappa
    q = rayleigh_quotient(pair, trial_function(layer, pair, family))
    verdict = Verdict.GROUND_STATE_CERTIFIED if q < kappa - margin else Verdict.INCONCLUSIVE
    numbers = {"rayleigh_quotient": q, "kappa1": kappa, "margin": margin, "gap": kappa - q}
    notices = []
    mesh = pair.mesh
    if family.cutoff > mesh.truncation_R:
        notices.append(f"cutoff {family.cutoff} exceeds truncation {mesh.truncation_R}; "
                       "test function clipped by the Dirichlet wall")
    if lambda1 is not None:
        numbers["lambda1"] = lambda1
        numbers["ordering_ok"] = bool(q >= lambda1 * (1 - 1e-9))
    return Certificate(
        kind="variational",
        verdict=verdict,
        numbers=numbers,
        provenance={"truncation_R": mesh.truncation_R, "h_base": mesh.h_base, "h_u": mesh.h_u,
                    "plateau": family.plateau, "cutoff": family.cutoff, "shape": family.shape},
        notices=notices,
    )


# ---------------------------------------------------------------- curvature conditions


def condition_integral_invariant(chart: ImmersionChart, coeffs: Sequence[float] | None, radii: Sequence[float],
                                 ball_mode: str = "parameter", tol: float = INTEGRAL_TOL,
                                 quad: Quadrature = DEFAULT_QUADRATURE) -> Certificate:
    """Whether the integral of the curvature invariant over the base is <= 0."""
    coeffs = default_coeffs(chart.dim_base) if coeffs is None else list(coeffs)
    radii = sorted(float(r) for r in radii)
    values = ball_integrals(chart, "invariant", radii, ball_mode, quad, coeffs)
    lim = extrapolate_limit(radii, values)
    verdict = Verdict.CONDITION_SATISFIED if lim["limit"] <= tol else Verdict.CONDITION_FAILED
    return Certificate(
        kind="integral_invariant",
        verdict=verdict,
        numbers={"limit": lim["limit"], "tail_bound": lim["tail_bound"], "tol": tol,
                 "radii": radii, "partial_integrals": values.tolist(), "integrable": lim["integrable"]},
        assumptions=[{"name": "integrable", "ok": lim["integrable"], "detail": "tail increments decay"}],
        provenance={"ball_mode": ball_mode, "coeffs": coeffs, "panel_width": quad.panel_width,
                    "n_gauss": quad.n_gauss, "n_theta": quad.n_theta},
    )


def _require_surface(chart: ImmersionChart):
    if chart.dim_base != 2:
        raise UnsupportedDimension("this condition is stated for surfaces (n = 2)")


def euler_isoperimetric_condition(chart: ImmersionChart, euler_char: int | None, radii: Sequence[float],
                                  ball_mode: str = "geodesic", tol: float = ISOPERIMETRIC_TOL,
                                  quad: Quadrature = DEFAULT_QUADRATURE) -> Certificate:
    """e(Sigma) minus the sum of the end isoperimetric constants, compared with zero."""
    _require_surface(chart)
    e = chart.euler_characteristic if euler_char is None else euler_char
    if e is None:
        raise ValueError("Euler characteristic must be declared")
    fit = volume_growth_fit(chart, radii, ball_mode, quad)
    value = e - sum(fit.end_constants)
    verdict = Verdict.CONDITION_SATISFIED if value <= tol else Verdict.CONDITION_FAILED
    return Certificate(
        kind="euler_isoperimetric",
        verdict=verdict,
        numbers={"euler_characteristic": e, "end_constants": fit.end_constants, "value": value, "tol": tol,
                 "exponent_m": fit.exponent_m},
        assumptions=[{"name": "declared_topology", "ok": True, "detail": f"e = {e}, {len(chart.ends)} end(s)"}],
        provenance={"ball_mode": ball_mode, "radii": fit.radii, "geodesic_h": quad.geodesic_h},
    )


@dataclass
class HartmanResult:
    residual: float
    total_curvature_over_2pi: float
    euler_minus_ends: float
    end_constants: list[float]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def hartman_check(chart: ImmersionChart, euler_char: int | None, radii: Sequence[float],
                  ball_mode: str = "geodesic", quad: Quadrature = DEFAULT_QUADRATURE) -> HartmanResult:
    """(1/2pi) total curvature minus (e - sum of end constants); a pipeline cross-check."""
    _require_surface(chart)
    e = chart.euler_characteristic if euler_char is None else euler_char
    radii = sorted(float(r) for r in radii)
    values = ball_integrals(chart, "K", radii, "parameter", quad)
    total = extrapolate_limit(radii, values)["limit"]
    fit = volume_growth_fit(chart, radii, ball_mode, quad)
    rhs = e - sum(fit.end_constants)
    lhs = total / (2 * math.pi)
    return HartmanResult(residual=lhs - rhs, total_curvature_over_2pi=lhs, euler_minus_ends=rhs,
                         end_constants=list(fit.end_constants))


def mean_curvature_growth(chart: ImmersionChart, radii: Sequence[float], mode: str = "signed",
                          epsilon: float = 0.1, ball_mode: str = "parameter",
                          quad: Quadrature = DEFAULT_QUADRATURE, stable_drop: float = 0.1) -> Certificate:
    """limsup of (1/r)|integral of H over B(r)| (or of |H| in absolute mode) against epsilon.

    The limsup is estimated by the maximum over the largest half of the radii;
    the trend is "stable" unless G falls by more than ``stable_drop`` (relative)
    across that half.
    """
    _require_surface(chart)
    if mode not in ("signed", "absolute"):
        raise ValueError("mode must be 'signed' or 'absolute'")
    radii = sorted(float(r) for r in radii)
    field_name = "H" if mode == "signed" else "absH"
    integrals = ball_integrals(chart, field_name, radii, ball_mode, quad)
    G = np.abs(integrals) / np.asarray(radii)
    tail_r, tail_G = _tail(radii), _tail(G)
    estimate = float(np.max(tail_G))
    slope = float(np.polyfit(tail_r, tail_G, 1)[0]) if len(tail_r) > 1 else 0.0
    change = slope * (tail_r[-1] - tail_r[0])
    stable = bool(estimate <= 0 or change >= -stable_drop * estimate)
    ok = estimate >= epsilon and stable
    return Certificate(
        kind="mean_curvature_growth",
        verdict=Verdict.CONDITION_SATISFIED if ok else Verdict.CONDITION_FAILED,
        numbers={"epsilon": epsilon, "limsup_estimate": estimate, "trend_slope": slope, "stable": stable,
                 "radii": radii, "growth": G.tolist(), "integrals": integrals.tolist()},
        provenance={"mode": mode, "ball_mode": ball_mode, "orientation": chart.orientation_note},
    )


def nonparabolic_threshold(C: float, C1: float, m: float) -> float:
    """-(1/4) C C1 m^2 e^2 with e Euler's number."""
    return -0.25 * C * C1 * m * m * math.e ** 2


def growth_limit_verdict(radii: Sequence[float], L: Sequence[float], threshold: float):
    """Decide whether lim L(R) < threshold from a finite table.

    A monotone tail already on the decisive side settles the question (a
    non-increasing tail below the threshold stays below it, and likewise for
    a non-decreasing tail above it).  Otherwise a + b/R + c/R^2 is fitted to
    the tail and its constant compared with the threshold, with the bound
    max(|limit - L_last|, fit residual).  Returns (verdict, limit, bound).
    """
    L = np.asarray(L, dtype=float)
    tail = _tail(L)
    if _nonincreasing(tail) and L[-1] < threshold:
        return Verdict.CONDITION_SATISFIED, float(L[-1]), float("nan")
    if _nondecreasing(tail) and L[-1] >= threshold:
        return Verdict.CONDITION_FAILED, float(L[-1]), float("nan")
    limit, resid = _fit_inverse_powers(_tail(np.asarray(radii, dtype=float)), tail, terms=2)
    bound = max(abs(limit - L[-1]), resid)
    if limit + bound < threshold:
        return Verdict.CONDITION_SATISFIED, float(limit), float(bound)
    if limit - bound >= threshold:
        return Verdict.CONDITION_FAILED, float(limit), float(bound)
    return Verdict.INCONCLUSIVE, float(limit), float(bound)


def nonparabolic_condition(chart: ImmersionChart, coeffs: Sequence[float] | None, m: float | None,
                           C: float | None, C1: float = 1.0, radii: Sequence[float] = (),
                           ball_mode: str = "parameter", quad: Quadrature = DEFAULT_QUADRATURE,
                           growth_radii: Sequence[float] | None = None) -> Certificate:
    """R^(2-m) times the ball integral of the invariant, against the growth threshold.

    Satisfied when the tail of L(R) is non-increasing and already below the
    threshold (so the limit is too), or when the extrapolated limit plus its
    tail bound is below it.  The strong decay r^2 |A| -> 0 is a hypothesis;
    when it fails the certificate is forced to Inconclusive.
    """
    notices = []
    radii = sorted(float(r) for r in radii)
    if m is None or C is None:
        fit = volume_growth_fit(chart, growth_radii or radii, "geodesic" if chart.dim_base == 2 else "parameter",
                                quad)
        m = fit.exponent_m if m is None else m
        C = fit.constant_C if C is None else C
        notices.append(f"volume growth fitted: m={fit.exponent_m:.4f}, C={fit.constant_C:.4f}")
    if C1 == 1.0:
        notices.append("C1 left at its default value 1; the constant is not given explicitly")
    coeffs = default_coeffs(chart.dim_base) if coeffs is None else list(coeffs)
    values = ball_integrals(chart, "invariant", radii, ball_mode, quad, coeffs)
    L = np.asarray(radii) ** (2 - m) * values
    T = nonparabolic_threshold(C, C1, m)
    flat = asymptotic_flatness_report(chart, radii)
    verdict, limit, bound = growth_limit_verdict(radii, L, T)
    assumptions = [{"name": "strong_decay", "ok": bool(flat["strong_decay"]), "detail": "r^2 sup|A| -> 0"}]
    if not flat["strong_decay"]:
        notices.append("HypothesisUnmet: r^2 sup|A| does not decay; verdict forced Inconclusive")
        verdict = Verdict.INCONCLUSIVE
    return Certificate(
        kind="nonparabolic_condition",
        verdict=verdict,
        numbers={"m": m, "C": C, "C1": C1, "threshold": T, "limit_estimate": limit, "tail_bound": bound,
                 "radii": radii, "L": L.tolist(), "partial_integrals": values.tolist()},
        assumptions=assumptions,
        provenance={"ball_mode": ball_mode, "coeffs": coeffs},
        notices=notices,
    )
