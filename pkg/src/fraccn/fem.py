"""P1 finite elements on the unit interval and the unit square.

Only interior nodes carry unknowns (homogeneous Dirichlet data). Fields are
plain callables: ``f(x)`` in 1D and ``f(x, y)`` in 2D, vectorized over numpy
arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "FemSpace",
    "GridFunction",
    "build_interval_space",
    "build_square_space",
    "load_vector",
    "l2_project",
    "ritz_project",
    "interpolate",
    "l2_norm",
    "field_l2_norm",
]

# Strang-Fix degree-2 (3 points) and Dunavant degree-4 (6 points) rules on the
# reference triangle, barycentric coordinates; weights sum to 1.
_TRI_RULES = {
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
    4: (
        np.array([
            [0.108103018168070, 0.445948490915965, 0.445948490915965],
            [0.445948490915965, 0.108103018168070, 0.445948490915965],
            [0.445948490915965, 0.445948490915965, 0.108103018168070],
            [0.816847572980459, 0.091576213509771, 0.091576213509771],
            [0.091576213509771, 0.816847572980459, 0.091576213509771],
            [0.091576213509771, 0.091576213509771, 0.816847572980459],
        ]),
        np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
    ),
}


@dataclass(frozen=True, eq=False)
class FemSpace:
    """Structured P1 space with interior-node unknowns.

    ``elements`` indexes ``vertices`` (all mesh nodes, boundary included);
    ``interior`` maps an unknown to its vertex and ``dof_of_vertex`` is the
    inverse (-1 on the boundary).
    """

    dimension: int
    subdivisions: int
    vertices: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)
    dof_of_vertex: np.ndarray = field(repr=False)
    mass: sp.csr_matrix = field(repr=False)
    stiffness: sp.csr_matrix = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.subdivisions

    @property
    def interior_node_count(self) -> int:
        return len(self.interior)

    @property
    def node_coords(self) -> np.ndarray:
        return self.vertices[self.interior]

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.interior_node_count))

    # geometry of every element, computed on demand
    def _element_geometry(self):
        p = self.vertices[self.elements]  # (n_el, d+1, d)
        if self.dimension == 1:
            length = p[:, 1, 0] - p[:, 0, 0]
            grads = np.stack([-1.0 / length, 1.0 / length], axis=1)[:, :, None]
            return length, grads
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        area = 0.5 * np.abs(det)
        # gradients of barycentric coordinates
        inv = np.empty((len(det), 2, 2))
        inv[:, 0, 0] = e2[:, 1] / det
        inv[:, 0, 1] = -e2[:, 0] / det
        inv[:, 1, 0] = -e1[:, 1] / det
        inv[:, 1, 1] = e1[:, 0] / det
        g1 = inv[:, 0, :]
        g2 = inv[:, 1, :]
        grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (n_el, 3, 2)
        return area, grads

    def _quadrature(self, degree):
        """Reference barycentric points, weights (summing to 1)."""
        if self.dimension == 1:
            n = max(1, int(np.ceil((degree + 1) / 2)))
            x, w = np.polynomial.legendre.leggauss(n)
            lam1 = 0.5 * (x + 1.0)
            return np.stack([1.0 - lam1, lam1], axis=1), 0.5 * w
        key = 2 if degree <= 2 else 4
        if degree > 4:
            raise ValueError("triangle quadrature available up to degree 4")
        return _TRI_RULES[key]

    def _evaluate(self, f, points):
        if self.dimension == 1:
            return np.asarray(f(points[..., 0]), dtype=float) * np.ones(points.shape[:-1])
        return np.asarray(f(points[..., 0], points[..., 1]), dtype=float) * np.ones(points.shape[:-1])

    def _scatter(self, local):
        """Sum element-local vectors (n_el, d+1) onto the interior unknowns."""
        dofs = self.dof_of_vertex[self.elements]
        mask = dofs >= 0
        return np.bincount(dofs[mask], weights=local[mask], minlength=self.interior_node_count)


@dataclass(frozen=True, eq=False)
class GridFunction:
    space: FemSpace
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.space.interior_node_count,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, space needs "
                f"({self.space.interior_node_count},)")

    def __add__(self, other):
        return GridFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return GridFunction(self.space, self.coeffs - other.coeffs)


def _assemble(dimension, M, vertices, elements):
    on_boundary = np.any((vertices <= 0.0) | (vertices >= 1.0), axis=1)
    interior = np.flatnonzero(~on_boundary)
    dof_of_vertex = np.full(len(vertices), -1, dtype=np.int64)
    dof_of_vertex[interior] = np.arange(len(interior))
    space = FemSpace(dimension, M, vertices, elements, interior, dof_of_vertex,
                     sp.csr_matrix((0, 0)), sp.csr_matrix((0, 0)))
    measure, grads = space._element_geometry()
    k = dimension + 1
    local_stiff = measure[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    ref_mass = (np.ones((k, k)) + np.eye(k)) / ((k) * (k + 1))
    local_mass = measure[:, None, None] * ref_mass[None]

    dofs = dof_of_vertex[elements]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = len(interior)

    def _build(local):
        mat = sp.coo_matrix((local.ravel()[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
        mat.sum_duplicates()
        # assembly is symmetric up to summation order; make it exact
        return ((mat + mat.T) * 0.5).tocsr()

    return FemSpace(dimension, M, vertices, elements, interior, dof_of_vertex,
                    _build(local_mass), _build(local_stiff))


def build_interval_space(M: int) -> FemSpace:
    """Uniform P1 mesh of (0, 1) with M cells."""
    if M < 2:
        raise ValueError(f"need at least 2 subintervals, got {M}")
    vertices = np.linspace(0.0, 1.0, M + 1)[:, None]
    elements = np.stack([np.arange(M), np.arange(1, M + 1)], axis=1)
    return _assemble(1, M, vertices, elements)


def build_square_space(M: int) -> FemSpace:
    """Unit square split into M x M squares, each cut by its lower-left to
    upper-right diagonal. M must be even so that x = 1/2 is a mesh line."""
    if M < 2 or M % 2:
        raise ValueError(f"square mesh needs an even M >= 2, got {M}")
    t = np.linspace(0.0, 1.0, M + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(M), np.arange(M), indexing="xy")
    ll = (j * (M + 1) + i).ravel()
    lr, ul, ur = ll + 1, ll + M + 1, ll + M + 2
    lower = np.stack([ll, lr, ur], axis=1)
    upper = np.stack([ll, ur, ul], axis=1)
    elements = np.concatenate([lower, upper])
    return _assemble(2, M, vertices, elements)


def load_vector(space: FemSpace, f: Callable, degree: int = 2) -> np.ndarray:
    """Entries (f, phi_i) by elementwise quadrature of the given degree."""
    lam, w = space._quadrature(degree)
    measure, _ = space._element_geometry()
    p = space.vertices[space.elements]  # (n_el, k, d)
    pts = np.einsum("qk,ekd->eqd", lam, p)
    vals = space._evaluate(f, pts)  # (n_el, q)
    local = measure[:, None] * np.einsum("eq,q,qk->ek", vals, w, lam)
    return space._scatter(local)


def _solve_spd(mat, rhs):
    return splu(mat.tocsc()).solve(rhs)


def l2_project(space: FemSpace, f: Callable, degree: int = 2) -> GridFunction:
    """L2 projection: mass @ c = load(f)."""
    return GridFunction(space, _solve_spd(space.mass, load_vector(space, f, degree)))


def ritz_project(space: FemSpace, grad_f: Callable, degree: int = 4) -> GridFunction:
    """Ritz projection from the gradient of f: stiffness @ c = (grad f, grad phi_i).

    ``grad_f`` returns the derivative (1D) or a pair (fx, fy) (2D).
    """
    lam, w = space._quadrature(degree)
    measure, grads = space._element_geometry()
    p = space.vertices[space.elements]
    pts = np.einsum("qk,ekd->eqd", lam, p)
    if space.dimension == 1:
        g = np.asarray(grad_f(pts[..., 0]), dtype=float)[..., None] * np.ones(pts.shape)
    else:
        gx, gy = grad_f(pts[..., 0], pts[..., 1])
        g = np.stack(np.broadcast_arrays(gx, gy), axis=-1).astype(float)
    mean_grad = np.einsum("eqd,q->ed", g, w) * measure[:, None]
    local = np.einsum("ed,ekd->ek", mean_grad, grads)
    return GridFunction(space, _solve_spd(space.stiffness, space._scatter(local)))


def interpolate(space: FemSpace, f: Callable) -> GridFunction:
    """Nodal interpolant on the interior nodes."""
    pts = space.node_coords
    return GridFunction(space, space._evaluate(f, pts))


def l2_norm(u: GridFunction) -> float:
    c = u.coeffs
    return float(np.sqrt(max(c @ (u.space.mass @ c), 0.0)))


def field_l2_norm(space: FemSpace, f: Callable, degree: int = 4) -> float:
    """||f||_{L2} by elementwise quadrature on the mesh."""
    lam, w = space._quadrature(degree)
    measure, _ = space._element_geometry()
    p = space.vertices[space.elements]
    pts = np.einsum("qk,ekd->eqd", lam, p)
    vals = space._evaluate(f, pts)
    return float(np.sqrt(np.sum(measure * (vals**2 @ w))))
