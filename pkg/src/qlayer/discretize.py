"""Structured tensor-product meshes of the truncated layer and Q1 assembly.

The layer is a product U x (-a, a) in parameter space, so the mesh is a
tensor grid: base axes (one per base dimension) times a transverse axis.
Elements are axis-aligned boxes carrying multilinear nodal basis functions;
metric-weighted integrals use the 2-point Gauss rule per direction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import AssemblyNaN, DomainExceeded, EmptyInterior, ResolutionTooCoarse, UnsupportedDimension
from .tube import LayerGeometry, layer_metric

INTERIOR = 0
TRANSVERSE_WALL = 1
LATERAL_TRUNCATION = 2

_GAUSS = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


@dataclass
class Mesh:
    base_axes: list[np.ndarray]
    u_axis: np.ndarray
    truncation_R: float
    h_base: float
    h_u: float
    grading: float = 0.0
    tags: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shape = self.shape
        tags = np.zeros(shape, dtype=np.int8)
        tags[..., 0] |= TRANSVERSE_WALL
        tags[..., -1] |= TRANSVERSE_WALL
        for k in range(len(self.base_axes)):
            idx = [slice(None)] * len(shape)
            for end in (0, -1):
                idx[k] = end
                tags[tuple(idx)] |= LATERAL_TRUNCATION
        self.tags = tags

    @property
    def dim(self) -> int:
        return len(self.base_axes) + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.base_axes) + (len(self.u_axis),)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def base_node_count(self) -> int:
        return int(np.prod([len(a) for a in self.base_axes]))

    @property
    def n_elements(self) -> int:
        return int(np.prod([s - 1 for s in self.shape]))

    @property
    def boundary_tags(self) -> np.ndarray:
        """Per-node bit flags, flattened in node order."""
        return self.tags.ravel()

    @property
    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.base_axes, self.u_axis, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def interpolate(self, func) -> np.ndarray:
        """Nodal values of ``func(x, u)`` where x has shape (N, n) and u shape (N,)."""
        pts = self.nodes
        return np.asarray(func(pts[:, :-1], pts[:, -1]), dtype=float)


@dataclass
class OperatorPair:
    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    dof_map: np.ndarray
    n_total: int
    mesh: Mesh | None = None

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]

    def restrict(self, full_vector: np.ndarray) -> np.ndarray:
        return np.asarray(full_vector)[self.dof_map]

    def extend(self, reduced: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_total)
        out[self.dof_map] = reduced
        return out


def graded_axis(center: float, R: float, intervals: int, grading: float) -> np.ndarray:
    """Nodes on [center - R, center + R]; ``grading > 0`` clusters them at the centre."""
    t = np.linspace(-1.0, 1.0, intervals + 1)
    if grading > 0:
        t = np.sinh(grading * t) / math.sinh(grading)
    return center + R * t


def build_mesh(layer: LayerGeometry, truncation_R: float, h_base: float, h_u: float | None = None,
               u_intervals: int | None = None, grading: float = 0.0) -> Mesh:
    """Tensor mesh of origin + [-R, R]^n times [-a, a].

    The number of base intervals per axis is round(2R / h_base); with
    ``grading`` the same number of nodes is stretched by a sinh map so that
    ``h_base`` is the mean spacing.  The transverse axis is uniform with
    ``u_intervals`` cells, or round(2a / h_u) if only ``h_u`` is given.
    """
    base = layer.base
    n = base.dim_base
    if n not in (1, 2):
        raise UnsupportedDimension("meshes support base dimension 1 or 2")
    if truncation_R <= 0 or h_base <= 0:
        raise ValueError("truncation radius and h_base must be positive")
    if truncation_R > base.extent + 1e-12:
        raise DomainExceeded(f"truncation R={truncation_R} beyond chart extent {base.extent}")
    a = layer.a
    if u_intervals is None:
        if h_u is None or h_u <= 0:
            raise ValueError("give h_u > 0 or u_intervals")
        u_intervals = int(round(2 * a / h_u))
    if u_intervals < 4:
        raise ResolutionTooCoarse(f"need at least 4 transverse intervals, got {u_intervals}")
    nb = max(1, int(round(2 * truncation_R / h_base)))
    axes = [graded_axis(base.origin[k], truncation_R, nb, grading) for k in range(n)]
    u_axis = np.linspace(-a, a, u_intervals + 1)
    return Mesh(base_axes=axes, u_axis=u_axis, truncation_R=float(truncation_R), h_base=2 * truncation_R / nb,
                h_u=2 * a / u_intervals, grading=grading)


def _reference_element(d: int):
    """Quadrature points, weights, basis values and reference gradients on [0, 1]^d."""
    corners = list(itertools.product((0, 1), repeat=d))
    qpts = list(itertools.product(range(2), repeat=d))
    nq, nb = len(qpts), len(corners)
    phi = np.ones((nq, nb))
    dphi = np.ones((nq, nb, d))
    for q, qi in enumerate(qpts):
        s = _GAUSS[list(qi)]
        for p, c in enumerate(corners):
            vals = np.where(np.array(c) == 1, s, 1 - s)
            ders = np.where(np.array(c) == 1, 1.0, -1.0)
            phi[q, p] = np.prod(vals)
            for k in range(d):
                dphi[q, p, k] = ders[k] * np.prod(np.delete(vals, k))
    weights = np.full(nq, 0.5 ** d)
    return np.array(corners), np.array(qpts), weights, phi, dphi


def assemble_full(mesh: Mesh, layer: LayerGeometry) -> OperatorPair:
    """Stiffness and mass of the Dirichlet form on all mesh nodes (no elimination)."""
    d = mesh.dim
    n = d - 1
    corners, qpts, wq, phi, dphi = _reference_element(d)
    nq = len(wq)

    base_axes = mesh.base_axes
    base_sizes = [np.diff(ax) for ax in base_axes]
    u_sizes = np.diff(mesh.u_axis)

    # base quadrature points: (elements..., gauss..., n)
    if n == 1:
        xq = (base_axes[0][:-1, None] + base_sizes[0][:, None] * _GAUSS[None, :])[..., None]
        xq = xq.reshape(-1, 1)
    else:
        gx = base_axes[0][:-1, None] + base_sizes[0][:, None] * _GAUSS[None, :]
        gy = base_axes[1][:-1, None] + base_sizes[1][:, None] * _GAUSS[None, :]
        X = gx[:, None, :, None] * np.ones_like(gy)[None, :, None, :]
        Y = gy[None, :, None, :] * np.ones_like(gx)[:, None, :, None]
        xq = np.stack([X, Y], axis=-1).reshape(-1, 2)
    uq = (mesh.u_axis[:-1, None] + u_sizes[:, None] * _GAUSS[None, :]).ravel()

    G = layer_metric(layer, xq, uq)
    # reshape to element-major: base element indices, base gauss indices, u element, u gauss
    nbe = [len(ax) - 1 for ax in base_axes]
    nue = len(u_sizes)
    if n == 1:
        G = G.reshape(nbe[0], 2, nue, 2, d, d).transpose(0, 2, 1, 3, 4, 5)
        G = G.reshape(nbe[0] * nue, nq, d, d)
        sizes = np.stack(np.meshgrid(base_sizes[0], u_sizes, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        G = G.reshape(nbe[0], nbe[1], 2, 2, nue, 2, d, d).transpose(0, 1, 4, 2, 3, 5, 6, 7)
        G = G.reshape(nbe[0] * nbe[1] * nue, nq, d, d)
        sizes = np.stack(np.meshgrid(base_sizes[0], base_sizes[1], u_sizes, indexing="ij"), axis=-1).reshape(-1, d)

    det = np.linalg.det(G)
    sq = np.sqrt(det)
    Ginv = np.linalg.inv(G)
    vol = np.prod(sizes, axis=1)
    wgt = sq * wq[None, :] * vol[:, None]
    B = dphi[None, :, :, :] / sizes[:, None, None, :]
    C = Ginv * wgt[:, :, None, None]
    Ke = np.einsum("eqpk,eqkl,eqrl->epr", B, C, B, optimize=True)
    Me = np.einsum("eq,qp,qr->epr", wgt, phi, phi, optimize=True)
    if not (np.all(np.isfinite(Ke)) and np.all(np.isfinite(Me))):
        raise AssemblyNaN("non-finite element matrix entries")

    # global node ids of each element's corners
    shape = mesh.shape
    elem_idx = np.stack(np.meshgrid(*[np.arange(s - 1) for s in shape], indexing="ij"), axis=-1).reshape(-1, d)
    nodes = elem_idx[:, None, :] + corners[None, :, :]
    gid = np.ravel_multi_index(tuple(nodes[..., k] for k in range(d)), shape)
    rows = np.repeat(gid, gid.shape[1], axis=1).ravel()
    cols = np.tile(gid, (1, gid.shape[1])).ravel()
    N = mesh.n_nodes
    K = sparse.coo_matrix((Ke.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    M = sparse.coo_matrix((Me.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return OperatorPair(stiffness=K.tocsr(), mass=M.tocsr(), dof_map=np.arange(N), n_total=N, mesh=mesh)


def apply_dirichlet(pair: OperatorPair, tags: np.ndarray) -> OperatorPair:
    """Eliminate every node with a nonzero boundary tag."""
    tags = np.asarray(tags).ravel()
    if tags.shape[0] != pair.n_total:
        raise ValueError("tags do not match the operator size")
    free = np.nonzero(tags == INTERIOR)[0]
    if free.size == 0:
        raise EmptyInterior("every node lies on the Dirichlet boundary")
    K = pair.stiffness[free][:, free].tocsr()
    M = pair.mass[free][:, free].tocsr()
    return OperatorPair(stiffness=K, mass=M, dof_map=free, n_total=pair.n_total, mesh=pair.mesh)


def assemble(mesh: Mesh, layer: LayerGeometry) -> OperatorPair:
    """Reduced stiffness/mass pair on interior nodes."""
    return apply_dirichlet(assemble_full(mesh, layer), mesh.boundary_tags)


def dump_coo(pair: OperatorPair, path) -> None:
    """Write both matrices as ``matrix row col value`` lines."""
    with open(path, "w") as fh:
        fh.write(f"# n={pair.size} n_total={pair.n_total}\n")
        for label, mat in (("K", pair.stiffness), ("M", pair.mass)):
            coo = mat.tocoo()
            order = np.lexsort((coo.col, coo.row))
            for k in order:
                fh.write(f"{label} {coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n")
