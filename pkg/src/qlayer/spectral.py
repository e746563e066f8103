"""Low-lying Dirichlet spectrum of the discretized layer."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.sparse import linalg as spla

from .discretize import OperatorPair, assemble, build_mesh
from .errors import FactorizationFailure, MonotonicityViolation, NoConvergence, ZeroVector
from .tube import LayerGeometry

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
SAFETY_FRACTION = 1e-3


def transverse_threshold(a: float) -> float:
    """Bottom of the transverse Dirichlet spectrum on (-a, a): (pi / 2a)^2."""
    if a <= 0:
        raise ValueError("half-width must be positive")
    return (math.pi / (2.0 * a)) ** 2


def interval_dirichlet_eigenvalue(a: float, intervals: int) -> float:
    """Lowest P1 finite-element eigenvalue of -d^2/du^2 on (-a, a), Dirichlet ends."""
    h = 2 * a / intervals
    m = intervals - 1
    K = sparse.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h
    M = sparse.diags([np.ones(m - 1), 4 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) * (h / 6)
    vals = sla.eigh(K.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: int = 2) -> tuple[float, float]:
    """Extrapolated value and error bar |coarse - fine| / (ratio^order - 1)."""
    factor = ratio ** order - 1.0
    return fine + (fine - coarse) / factor, abs(fine - coarse) / factor


def transverse_threshold_numeric(a: float, levels: Sequence[int] = (32, 64, 128)) -> dict:
    """Finite-element ladder for the transverse threshold, Richardson-extrapolated."""
    vals = [interval_dirichlet_eigenvalue(a, n) for n in levels]
    extrap, err = richardson(vals[-2], vals[-1], levels[-1] / levels[-2])
    return {"levels": list(levels), "values": vals, "extrapolated": extrap, "error_bar": err}


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    relative_residuals: np.ndarray
    vectors: np.ndarray | None = field(default=None, repr=False)
    truncation_R: float | None = None
    h_base: float | None = None
    h_u: float | None = None
    solver: str = "shift-invert"
    shift: float | None = None
    extrapolated_lambda1: float | None = None
    error_bar: float | None = None

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residual_norms": [float(v) for v in self.residual_norms],
            "relative_residuals": [float(v) for v in self.relative_residuals],
            "truncation_R": self.truncation_R,
            "h_base": self.h_base,
            "h_u": self.h_u,
            "solver": self.solver,
            "shift": self.shift,
            "extrapolated_lambda1": self.extrapolated_lambda1,
            "error_bar": self.error_bar,
        }


def _residuals(pair: OperatorPair, vals: np.ndarray, vecs: np.ndarray):
    K, M = pair.stiffness, pair.mass
    Mv = M @ vecs
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, Mv))
    vecs = vecs / norms
    Mv = Mv / norms
    R = K @ vecs - Mv * vals[None, :]
    res = np.linalg.norm(R, axis=0)
    rel = res / (np.abs(vals) * np.linalg.norm(Mv, axis=0))
    return vecs, res, rel


def _provenance(pair: OperatorPair) -> dict:
    mesh = pair.mesh
    if mesh is None:
        return {}
    return {"truncation_R": mesh.truncation_R, "h_base": mesh.h_base, "h_u": mesh.h_u}


def dense_eigenpairs(pair: OperatorPair, count: int = 1) -> SpectralResult:
    """Direct dense solve; the oracle for small problems."""
    K = pair.stiffness.toarray()
    M = pair.mass.toarray()
    count = min(count, K.shape[0])
    vals, vecs = sla.eigh(K, M, subset_by_index=[0, count - 1])
    vecs, res, rel = _residuals(pair, vals, vecs)
    return SpectralResult(vals, res, rel, vecs, solver="dense", **_provenance(pair))


def lowest_eigenpairs(pair: OperatorPair, count: int = 1, tol: float = 1e-12, shift: float | None = None,
                      check_tol: float = 1e-6, seed: int = 0) -> SpectralResult:
    """The ``count`` smallest generalized eigenpairs by shift-invert Lanczos.

    The shift must lie below the wanted eigenvalues; if a returned value falls
    below the shift the solve is repeated with a lower shift.  Problems of at
    most ``count + 1`` unknowns go to the dense solver.  The Lanczos start
    vector is drawn from ``seed`` so repeated runs are bit-identical.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = pair.size
    if n <= count + 1:
        return dense_eigenpairs(pair, count)
    sigma = 0.0 if shift is None else float(shift)
    v0 = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    for _ in range(6):
        try:
            vals, vecs = spla.eigsh(pair.stiffness, k=count, M=pair.mass, sigma=sigma, which="LM", tol=tol, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(f"ARPACK did not converge: {len(exc.eigenvalues)} of {count} pairs") from exc
        except RuntimeError as exc:
            logger.warning("factorization failed at shift %g (%s); perturbing shift", sigma, exc)
            sigma = sigma - 1e-3 * max(1.0, abs(sigma))
            continue
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if vals[0] >= sigma:
            break
        sigma = vals[0] - max(abs(sigma - vals[0]), 1e-3 * max(1.0, abs(vals[0])))
    else:
        raise FactorizationFailure("could not find a usable shift")
    vecs, res, rel = _residuals(pair, vals, vecs)
    if np.any(rel > check_tol):
        raise NoConvergence(f"relative residuals {rel} exceed {check_tol}")
    return SpectralResult(vals, res, rel, vecs, shift=sigma, **_provenance(pair))


def rayleigh_quotient(pair: OperatorPair, vector) -> float:
    v = np.asarray(vector, dtype=float)
    if v.shape[0] == pair.n_total and pair.n_total != pair.size:
        v = pair.restrict(v)
    den = float(v @ (pair.mass @ v))
    if not np.any(v) or den <= 0:
        raise ZeroVector("vector vanishes on the interior degrees of freedom")
    return float(v @ (pair.stiffness @ v)) / den


@dataclass
class Ladder:
    """Truncation radii and refinement levels.

    Level k uses base spacing ``h_list[k]`` and ``u_intervals[k]`` transverse
    cells; successive levels should refine both by the same factor.
    """

    R_list: list[float]
    h_list: list[float]
    u_intervals: list[int]
    grading: float = 0.0

    @classmethod
    def make(cls, R_list, h_list, a: float, u_intervals=None, grading: float = 0.0) -> "Ladder":
        if u_intervals is None:
            u_intervals = [max(4, int(round(2 * a / h))) for h in h_list]
        if len(u_intervals) != len(h_list):
            raise ValueError("u_intervals and h_list must have equal length")
        return cls(sorted(float(r) for r in R_list), [float(h) for h in h_list], [int(n) for n in u_intervals],
                   grading)


@dataclass
class StudyResult:
    table: list[dict]
    kappa1: float
    extrapolated_lambda1: float
    error_bar: float
    margin: float
    below_threshold: bool
    monotone_in_R: bool
    lambda1_finest: float

    @property
    def gap(self) -> float:
        return self.kappa1 - self.extrapolated_lambda1

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "kappa1": self.kappa1,
            "extrapolated_lambda1": self.extrapolated_lambda1,
            "error_bar": self.error_bar,
            "margin": self.margin,
            "gap": self.gap,
            "below_threshold": self.below_threshold,
            "monotone_in_R": self.monotone_in_R,
            "lambda1_finest": self.lambda1_finest,
        }


def solve_level(layer: LayerGeometry, R: float, h: float, nu: int, count: int = 1,
                grading: float = 0.0, seed: int = 0) -> SpectralResult:
    mesh = build_mesh(layer, R, h, u_intervals=nu, grading=grading)
    pair = assemble(mesh, layer)
    return lowest_eigenpairs(pair, count, shift=0.9 * transverse_threshold(layer.a), seed=seed)


def refinement_study(layer: LayerGeometry, ladder: Ladder, count: int = 1, strict: bool = True,
                     mono_rtol: float = 1e-8, seed: int = 0) -> StudyResult:
    """lambda_1 over (R, h); Richardson in h at the largest R; certify lambda_1 < kappa_1.

    The certificate requires the extrapolated gap to exceed the error bar plus
    a safety margin of 1e-3 kappa_1.
    """
    if len(ladder.h_list) < 2:
        raise ValueError("need at least two refinement levels")
    kappa = transverse_threshold(layer.a)
    table = []
    lam = {}
    for R in ladder.R_list:
        for h, nu in zip(ladder.h_list, ladder.u_intervals):
            res = solve_level(layer, R, h, nu, count, ladder.grading, seed)
            lam[(R, h)] = float(res.eigenvalues[0])
            table.append({"R": R, "h_base": res.h_base, "h": h, "u_intervals": nu,
                          "eigenvalues": [float(v) for v in res.eigenvalues],
                          "lambda1": float(res.eigenvalues[0]),
                          "max_relative_residual": float(np.max(res.relative_residuals))})
    monotone = True
    for h in ladder.h_list:
        seq = [lam[(R, h)] for R in ladder.R_list]
        for lo, hi in zip(seq[:-1], seq[1:]):
            if hi > lo * (1 + mono_rtol):
                monotone = False
    if not monotone and strict:
        raise MonotonicityViolation("lambda_1 increased with the truncation radius")
    Rmax = ladder.R_list[-1]
    coarse, fine = lam[(Rmax, ladder.h_list[-2])], lam[(Rmax, ladder.h_list[-1])]
    extrap, err = richardson(coarse, fine, ladder.h_list[-2] / ladder.h_list[-1])
    margin = SAFETY_FRACTION * kappa
    below = bool(kappa - extrap > err + margin)
    return StudyResult(table=table, kappa1=kappa, extrapolated_lambda1=extrap, error_bar=err, margin=margin,
                       below_threshold=below, monotone_in_R=monotone, lambda1_finest=fine)
