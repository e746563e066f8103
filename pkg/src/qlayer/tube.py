"""Quantum layers: the half-width-a neighbourhood of a hypersurface.

The layer lives on parameter space U x (-a, a) and is immersed by
p(x, u) = map(x) + u N(x).  Its metric is the pullback of the Euclidean one,
computed here from the Jacobian of p.  The closed form
(I - uA)^T g (I - uA) is only used as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlockStructure, Degenerate, OutOfLayer
from .surface_geometry import (
    ImmersionChart,
    MetricTensor,
    eval_metric,
    normal_frame,
    shape_operator,
    sup_norm_A,
    unit_normal,
)

BLOCK_TOL = 1e-8
DET_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LayerGeometry:
    base: ImmersionChart
    half_width_a: float
    safety_C0: float = 0.9
    scan_radius: float | None = None

    def __post_init__(self):
        if not self.half_width_a > 0:
            raise ValueError("half-width a must be positive")
        if not 0 < self.safety_C0 < 1:
            raise ValueError("safety constant C0 must lie in (0, 1)")

    @property
    def a(self) -> float:
        return self.half_width_a

    @property
    def dim(self) -> int:
        return self.base.dim_base + 1

    def normal(self, x) -> np.ndarray:
        return unit_normal(self.base, x)

    def scaled(self, s: float) -> "LayerGeometry":
        scan = None if self.scan_radius is None else s * self.scan_radius
        return LayerGeometry(self.base.scaled(s), s * self.half_width_a, self.safety_C0, scan)


def immersion_point(layer: LayerGeometry, x, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) >= layer.a):
        raise OutOfLayer(f"|u| must be < a = {layer.a}")
    base = layer.base
    return base.evaluate(x) + u[..., None] * layer.normal(x)


def _metric_from_frame(J, N, dN, u, n: int, check: bool) -> np.ndarray:
    tang = J + u[..., None, None] * dN
    Nq = np.broadcast_to(N[..., None], tang.shape[:-1] + (1,))
    full = np.concatenate([tang, Nq], axis=-1)
    G = np.einsum("...ki,...kj->...ij", full, full)
    if check and G.size:
        mixed = np.max(np.abs(G[..., :n, n]))
        trans = np.max(np.abs(G[..., n, n] - 1.0))
        if mixed > BLOCK_TOL or trans > BLOCK_TOL:
            raise BlockStructure(f"pullback metric block structure violated (mixed {mixed:.2e}, "
                                 f"transverse {trans:.2e})")
        det = np.linalg.det(G)
        if np.any(det < DET_TOL):
            raise Degenerate(f"pullback metric degenerate: min det {det.min():.3e}")
    return G


def layer_metric(layer: LayerGeometry, x, u, check: bool = True) -> np.ndarray:
    """Pullback metric G on the grid of base points ``x`` (..., n) times transverse values ``u`` (q,).

    Returns shape ``x.shape[:-1] + (q, n+1, n+1)``.  With ``check`` the block
    structure (unit transverse entry, vanishing mixed entries) is verified at
    every point and a nondegenerate determinant is required.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    J, _, N, dN = normal_frame(layer.base, x)
    ex = (Ellipsis, None, slice(None), slice(None))
    return _metric_from_frame(J[ex], N[..., None, :], dN[ex], u, layer.base.dim_base, check)


def pullback_metric(layer: LayerGeometry, x, u) -> MetricTensor:
    """Pullback metric at paired points (x[k], u[k])."""
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) >= layer.a):
        raise OutOfLayer(f"|u| must be < a = {layer.a}")
    J, _, N, dN = normal_frame(layer.base, x)
    u = np.broadcast_to(u, J.shape[:-2])
    G = _metric_from_frame(J, N, dN, u, layer.base.dim_base, True)
    return MetricTensor(g=G, inverse=np.linalg.inv(G), det=np.linalg.det(G))


def analytic_pullback(layer: LayerGeometry, x, u) -> np.ndarray:
    """(I - uA)^T g (I - uA) in the base block, 1 in the transverse slot."""
    base = layer.base
    g = eval_metric(base, x).g
    A = shape_operator(base, x)
    n = base.dim_base
    u = np.asarray(u, dtype=float)
    B = np.eye(n) - u[..., None, None] * A
    block = np.swapaxes(B, -1, -2) @ g @ B
    G = np.zeros(block.shape[:-2] + (n + 1, n + 1))
    G[..., :n, :n] = block
    G[..., n, n] = 1.0
    return G


def volume_element(layer: LayerGeometry, x, u) -> np.ndarray:
    return np.sqrt(pullback_metric(layer, x, u).det)


def validity_check(layer: LayerGeometry, R: float | None = None, resolution: int = 161) -> dict:
    """Check a sup|A| <= C0 on the sampled base.

    The spectral norm max|kappa_i| decides the verdict because it controls
    the singular values of I - uA; the Frobenius norm is reported alongside.
    """
    base = layer.base
    if R is None:
        R = layer.scan_radius if layer.scan_radius is not None else min(base.extent, 10.0)
    sup_A = sup_norm_A(base, R, resolution, spectral=True)
    frob = sup_norm_A(base, R, resolution, spectral=False)
    term = layer.a * sup_A
    return {
        "passes": bool(term <= layer.safety_C0),
        "a_sup_norm_A": term,
        "a_sup_frobenius": layer.a * frob,
        "margin": layer.safety_C0 - term,
        "norm_mode": "spectral",
        "C0": layer.safety_C0,
        "a": layer.a,
        "scan_radius": float(R),
    }


def transverse_profile(u, a: float) -> np.ndarray:
    """Lowest Dirichlet mode cos(pi u / 2a) of the transverse interval."""
    return np.cos(math.pi * np.asarray(u) / (2 * a))
