"""P1-bubble velocity / P1 pressure spaces on a structured triangle mesh.

Velocity coefficient layout (length ``2 * (nv + nt)``)::

    [x at vertices | y at vertices | x bubbles | y bubbles]

Local element dofs are ordered ``c * 4 + a`` with component ``c`` and local
basis ``a`` (three barycentric hats then the bubble ``27 l1 l2 l3``).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .mesh import BoundaryTag, TriMesh, boundary_vertices
from .quadrature import QuadratureRule, triangle_quadrature

__all__ = [
    "ShapeTable",
    "ElementData",
    "DofMap",
    "shape_table",
    "element_data",
    "build_dofmap",
    "locate_points",
    "evaluate_fe_function",
    "evaluate_velocity_gradient",
    "interpolate_velocity",
    "interpolate_pressure",
]

_REF_HAT_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _basis(bary: np.ndarray):
    """Values ``(m, 4)`` and reference gradients ``(m, 4, 2)`` at barycentric points."""
    bary = np.atleast_2d(bary)
    l1, l2, l3 = bary[:, 0], bary[:, 1], bary[:, 2]
    vals = np.column_stack([l1, l2, l3, 27.0 * l1 * l2 * l3])
    grads = np.empty((len(bary), 4, 2))
    grads[:, :3, :] = _REF_HAT_GRADS
    grads[:, 3, :] = 27.0 * (
        np.outer(l2 * l3, _REF_HAT_GRADS[0])
        + np.outer(l1 * l3, _REF_HAT_GRADS[1])
        + np.outer(l1 * l2, _REF_HAT_GRADS[2])
    )
    return vals, grads


@dataclass(frozen=True)
class ShapeTable:
    """Basis values and reference gradients at the points of a rule."""

    rule: QuadratureRule
    values: np.ndarray  # (nq, 4)
    ref_grads: np.ndarray  # (nq, 4, 2)


def shape_table(rule: QuadratureRule) -> ShapeTable:
    vals, grads = _basis(rule.points)
    return ShapeTable(rule, vals, grads)


@dataclass(frozen=True, eq=False)
class ElementData:
    """Per-element geometry and physical basis gradients at quadrature points."""

    table: ShapeTable
    det: np.ndarray  # (nt,)  twice the triangle area
    inv_jac: np.ndarray  # (nt, 2, 2)
    grads: np.ndarray  # (nt, nq, 4, 2)
    wdet: np.ndarray  # (nt, nq) quadrature weight times |J|
    qpoints: np.ndarray  # (nt, nq, 2)


def _jacobians(mesh: TriMesh):
    p = mesh.vertices[mesh.triangles]
    J = np.empty((mesh.n_triangles, 2, 2))
    J[:, :, 0] = p[:, 1] - p[:, 0]
    J[:, :, 1] = p[:, 2] - p[:, 0]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    return p, det, inv


def element_data(mesh: TriMesh, degree: int = 6) -> ElementData:
    """Cached element data for `mesh` with a triangle rule of `degree`."""
    key = ("element_data", degree)
    if key in mesh._cache:
        return mesh._cache[key]
    table = shape_table(triangle_quadrature(degree))
    p, det, inv = _jacobians(mesh)
    # grad_x phi = grad_ref phi . J^{-1}
    grads = np.einsum("qam,tmk->tqak", table.ref_grads, inv)
    wdet = np.outer(det, table.rule.weights)
    qpoints = np.einsum("qv,tvk->tqk", table.rule.points, p)
    data = ElementData(table, det, inv, grads, wdet, qpoints)
    mesh._cache[key] = data
    return data


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering of velocity, pressure and slip-multiplier unknowns.

    Global order is ``[velocity | pressure | multiplier | mean row]``.
    ``constrained`` flags velocity dofs fixed to ``constrained_values``:
    both components at no-slip vertices and the normal (y) component at
    slip vertices.
    """

    n_vertices: int
    n_triangles: int
    cell_dofs: np.ndarray  # (nt, 8)
    constrained: np.ndarray  # bool (n_velocity,)
    constrained_values: np.ndarray  # (n_velocity,)
    multiplier_vertices: np.ndarray  # (n_mult,) sorted by x
    slip_edges: np.ndarray  # (n_slip_edges, 2)
    vertex_to_multiplier: np.ndarray  # (nv,), -1 where no multiplier dof

    @property
    def n_velocity(self) -> int:
        return 2 * (self.n_vertices + self.n_triangles)

    @property
    def n_pressure(self) -> int:
        return self.n_vertices

    @property
    def n_multiplier(self) -> int:
        return len(self.multiplier_vertices)

    @property
    def pressure_offset(self) -> int:
        return self.n_velocity

    @property
    def multiplier_offset(self) -> int:
        return self.n_velocity + self.n_pressure

    @property
    def mean_constraint_row(self) -> int:
        return self.multiplier_offset + self.n_multiplier

    @property
    def free_velocity(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained)

    @property
    def n_free_velocity(self) -> int:
        return int(self.n_velocity - self.constrained.sum())

    @property
    def n_system(self) -> int:
        """Size of the reduced saddle-point system (free velocity, pressure, mean row)."""
        return self.n_free_velocity + self.n_pressure + 1

    @property
    def constrained_dofs(self) -> dict[int, float]:
        idx = np.flatnonzero(self.constrained)
        return {int(i): float(self.constrained_values[i]) for i in idx}

    def tangential_velocity(self, u: np.ndarray) -> np.ndarray:
        """x-component of `u` at the multiplier vertices."""
        return u[self.multiplier_vertices]

    def with_constraints(self, mask, values) -> DofMap:
        """Copy with a different set of constrained velocity dofs and values."""
        mask = np.asarray(mask, dtype=bool).copy()
        values = np.asarray(values, dtype=float).copy()
        if mask.shape != (self.n_velocity,) or values.shape != (self.n_velocity,):
            raise ValueError("constraint arrays must have one entry per velocity dof")
        if mask[2 * self.n_vertices :].any():
            raise ValueError("bubble dofs cannot be constrained")
        return replace(self, constrained=mask, constrained_values=values)


def build_dofmap(mesh: TriMesh) -> DofMap:
    nv, nt = mesh.n_vertices, mesh.n_triangles
    tri = mesh.triangles
    bub = np.arange(nt)
    cell = np.column_stack(
        [tri, 2 * nv + bub, nv + tri, 2 * nv + nt + bub]
    ).astype(np.int64)

    g0 = np.array(sorted(boundary_vertices(mesh, BoundaryTag.GAMMA0)), dtype=np.int64)
    g1 = np.array(sorted(boundary_vertices(mesh, BoundaryTag.GAMMA1)), dtype=np.int64)
    constrained = np.zeros(2 * (nv + nt), dtype=bool)
    constrained[g0] = True
    constrained[nv + g0] = True
    constrained[nv + g1] = True

    # corners of the slip side are no-slip vertices and carry no multiplier
    mult = np.setdiff1d(g1, g0)
    mult = mult[np.argsort(mesh.vertices[mult, 0], kind="stable")]
    v2m = np.full(nv, -1, dtype=np.int64)
    v2m[mult] = np.arange(len(mult))
    slip_edges = mesh.boundary_edges[mesh.edge_tags == int(BoundaryTag.GAMMA1)]

    for a in (cell, constrained, mult, v2m):
        a.setflags(write=False)
    return DofMap(
        nv, nt, cell, constrained, np.zeros(2 * (nv + nt)), mult, slip_edges, v2m
    )


def locate_points(mesh: TriMesh, points, tol: float = 1e-12):
    """Containing triangle and barycentric coordinates, by direct grid lookup."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x0, x1, y0, y1 = mesh.bounds
    outside = (
        (pts[:, 0] < x0 - tol) | (pts[:, 0] > x1 + tol)
        | (pts[:, 1] < y0 - tol) | (pts[:, 1] > y1 + tol)
    )
    if outside.any():
        bad = pts[np.argmax(outside)]
        raise ValueError(f"point ({bad[0]}, {bad[1]}) lies outside the mesh domain")
    s = (pts[:, 0] - x0) / (x1 - x0) * mesh.nx
    t = (pts[:, 1] - y0) / (y1 - y0) * mesh.ny
    i = np.clip(np.floor(s), 0, mesh.nx - 1).astype(np.int64)
    j = np.clip(np.floor(t), 0, mesh.ny - 1).astype(np.int64)
    fs = np.clip(s - i, 0.0, 1.0)
    ft = np.clip(t - j, 0.0, 1.0)
    lower = fs >= ft
    tri = 2 * (j * mesh.nx + i) + (~lower)
    bary = np.where(
        lower[:, None],
        np.column_stack([1.0 - fs, fs - ft, ft]),
        np.column_stack([1.0 - ft, fs, ft - fs]),
    )
    return tri, bary


def _local_coefs(u: np.ndarray, mesh: TriMesh, tri: np.ndarray):
    nv, nt = mesh.n_vertices, mesh.n_triangles
    verts = mesh.triangles[tri]
    cx = np.column_stack([u[verts], u[2 * nv + tri]])
    cy = np.column_stack([u[nv + verts], u[2 * nv + nt + tri]])
    return cx, cy


def evaluate_fe_function(u, p, mesh: TriMesh, points):
    """Velocity and pressure values of discrete fields at `points`.

    Returns ``(U, P)`` with shapes ``(m, 2)`` and ``(m,)``; a single point
    gives ``(2,)`` and a float. `p` may be None.
    """
    single = np.ndim(points) == 1
    tri, bary = locate_points(mesh, points)
    vals, _ = _basis(bary)
    cx, cy = _local_coefs(np.asarray(u), mesh, tri)
    U = np.column_stack([(vals * cx).sum(1), (vals * cy).sum(1)])
    P = None
    if p is not None:
        P = (bary * np.asarray(p)[mesh.triangles[tri]]).sum(1)
    if single:
        return U[0], (None if P is None else float(P[0]))
    return U, P


def evaluate_velocity_gradient(u, mesh: TriMesh, points) -> np.ndarray:
    """``G[m, c, k] = d u_c / d x_k`` at `points`."""
    tri, bary = locate_points(mesh, points)
    _, ref = _basis(bary)
    if "inv_jac" not in mesh._cache:
        mesh._cache["inv_jac"] = _jacobians(mesh)[2]
    inv = mesh._cache["inv_jac"]
    grads = np.einsum("pam,pmk->pak", ref, inv[tri])
    cx, cy = _local_coefs(np.asarray(u), mesh, tri)
    G = np.empty((len(tri), 2, 2))
    G[:, 0, :] = np.einsum("pa,pak->pk", cx, grads)
    G[:, 1, :] = np.einsum("pa,pak->pk", cy, grads)
    return G


def interpolate_velocity(mesh: TriMesh, fn) -> np.ndarray:
    """Nodal P1 interpolant of ``fn(x, y) -> (ux, uy)``; bubble coefficients zero."""
    nv, nt = mesh.n_vertices, mesh.n_triangles
    ux, uy = fn(mesh.vertices[:, 0], mesh.vertices[:, 1])
    u = np.zeros(2 * (nv + nt))
    u[:nv] = ux
    u[nv : 2 * nv] = uy
    return u


def interpolate_pressure(mesh: TriMesh, fn) -> np.ndarray:
    return np.asarray(fn(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float) * np.ones(
        mesh.n_vertices
    )
