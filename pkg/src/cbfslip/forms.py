"""Variational forms, their Newton linearisations and global assembly.

Velocity-velocity matrices are indexed ``[test dof, trial dof]`` over the
full velocity numbering of `DofMap`; constraints are applied only when the
saddle-point system is formed in `assemble_system`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .fespace import DofMap, element_data
from .mesh import TriMesh
from .linalg import SaddleSolver
from .quadrature import edge_quadrature

__all__ = [
    "FrictionLaw",
    "ProblemParams",
    "AssembledSystem",
    "omega",
    "assemble_a",
    "assemble_a0",
    "assemble_d",
    "assemble_pressure_mass",
    "pressure_mean_vector",
    "assemble_forcing",
    "assemble_convection_newton",
    "assemble_damping_newton",
    "assemble_newton",
    "assemble_slip_rhs",
    "assemble_system",
    "EPS_REG",
    "VOLUME_DEGREE",
    "EDGE_DEGREE",
]

EPS_REG = 1e-10
VOLUME_DEGREE = 6
EDGE_DEGREE = 5


@dataclass(frozen=True)
class FrictionLaw:
    """Slip coefficient ``omega(t) = (a - b) exp(-rho t) + b``."""

    a: float
    b: float
    rho: float

    def __post_init__(self):
        if not (self.a > self.b > 0.0):
            raise ValueError(f"friction law needs a > b > 0, got a={self.a}, b={self.b}")
        if not self.rho > 0.0:
            raise ValueError(f"friction decay rate must be positive, got rho={self.rho}")

    def __call__(self, t):
        return omega(t, self)


def omega(t, law: FrictionLaw):
    """Slip coefficient at tangential speed ``t >= 0``; decreasing, range ``(b, a]``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("tangential speed must be nonnegative")
    val = (law.a - law.b) * np.exp(-law.rho * t) + law.b
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ProblemParams:
    """Physical coefficients.

    ``mu`` viscosity, ``alpha`` Darcy, ``beta`` Forchheimer with exponent
    ``r``, ``kappa <= 0`` pumping with exponent ``q``. A ``friction`` of
    None switches the slip boundary to free slip.
    """

    mu: float
    alpha: float = 0.0
    beta: float = 0.0
    kappa: float = 0.0
    r: float = 3.0
    q: float = 1.0
    friction: FrictionLaw | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.kappa > 0:
            raise ValueError(f"kappa must be nonpositive, got {self.kappa}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.kappa != 0 and not (1 <= self.q < self.r):
            raise ValueError(f"pumping exponent needs 1 <= q < r, got q={self.q}, r={self.r}")

    def damping_terms(self):
        """``(coefficient, exponent)`` pairs of the nonlinear damping terms in use."""
        terms = []
        if self.beta != 0:
            terms.append((self.beta, self.r))
        if self.kappa != 0:
            terms.append((self.kappa, self.q))
        return terms


# ---------------------------------------------------------------- patterns


class _Scatter:
    """Precomputed COO -> CSR map for a fixed element connectivity."""

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        key = rows * shape[1] + cols
        uniq, self.inv = np.unique(key, return_inverse=True)
        self.indices = (uniq % shape[1]).astype(np.int32)
        self.indptr = np.searchsorted(uniq // shape[1], np.arange(shape[0] + 1)).astype(np.int32)
        self.shape = shape
        self.nnz = len(uniq)

    def __call__(self, vals) -> sp.csr_matrix:
        data = np.bincount(self.inv, weights=np.ravel(vals), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)

    def vector(self, rows, vals, n):
        return np.bincount(np.ravel(rows), weights=np.ravel(vals), minlength=n)


def _vv_scatter(mesh: TriMesh, dofmap: DofMap) -> _Scatter:
    key = "vv_scatter"
    if key not in mesh._cache:
        cd = dofmap.cell_dofs
        rows = np.broadcast_to(cd[:, :, None], (len(cd), 8, 8))
        cols = np.broadcast_to(cd[:, None, :], (len(cd), 8, 8))
        mesh._cache[key] = _Scatter(rows, cols, (dofmap.n_velocity, dofmap.n_velocity))
    return mesh._cache[key]


def _cached(mesh, key, build):
    if key not in mesh._cache:
        mesh._cache[key] = build()
    return mesh._cache[key]


def _vv_assemble(mesh, dofmap, Ke):
    return _vv_scatter(mesh, dofmap)(Ke)


def _vec_assemble(dofmap, Fe):
    return np.bincount(dofmap.cell_dofs.ravel(), weights=Fe.ravel(), minlength=dofmap.n_velocity)


# ---------------------------------------------------------------- static forms


def assemble_a(mesh: TriMesh, dofmap: DofMap, degree: int = VOLUME_DEGREE) -> sp.csr_matrix:
    """``a(u, v) = int 2 eps(u) : eps(v)``."""

    def build():
        ed = element_data(mesh, degree)
        wg = ed.wdet[:, :, None, None] * ed.grads
        K = np.zeros((mesh.n_triangles, 2, 4, 2, 4))
        lap = np.einsum("tqak,tqbk->tba", wg, ed.grads)
        K[:, 0, :, 0, :] += lap
        K[:, 1, :, 1, :] += lap
        # d_d phi_a * d_c phi_b for test (d, b), trial (c, a)
        K += np.einsum("tqad,tqbc->tdbca", wg, ed.grads)
        return _vv_assemble(mesh, dofmap, K.reshape(-1, 8, 8))

    return _cached(mesh, ("a", degree), build)


def _mass_local(mesh, degree):
    ed = element_data(mesh, degree)
    vals = ed.table.values
    mm = np.einsum("tq,qa,qb->tba", ed.wdet, vals, vals)
    K = np.zeros((mesh.n_triangles, 2, 4, 2, 4))
    K[:, 0, :, 0, :] = mm
    K[:, 1, :, 1, :] = mm
    return K.reshape(-1, 8, 8)


def assemble_a0(mesh: TriMesh, dofmap: DofMap, degree: int = VOLUME_DEGREE) -> sp.csr_matrix:
    """Velocity mass matrix ``a0(u, v) = int u . v``."""
    return _cached(
        mesh, ("a0", degree), lambda: _vv_assemble(mesh, dofmap, _mass_local(mesh, degree))
    )


def assemble_d(mesh: TriMesh, dofmap: DofMap, degree: int = VOLUME_DEGREE) -> sp.csr_matrix:
    """``d(v, q) = -int q div v``; rows pressure dofs, columns velocity dofs."""

    def build():
        ed = element_data(mesh, degree)
        psi = ed.table.values[:, :3]
        # De[t, k, c, a] = -sum_q w psi_k d_c phi_a
        De = -np.einsum("tq,qk,tqac->tkca", ed.wdet, psi, ed.grads)
        rows = np.broadcast_to(mesh.triangles[:, :, None], (mesh.n_triangles, 3, 8))
        cols = np.broadcast_to(dofmap.cell_dofs[:, None, :], (mesh.n_triangles, 3, 8))
        return _Scatter(rows, cols, (dofmap.n_pressure, dofmap.n_velocity))(De.reshape(-1, 3, 8))

    return _cached(mesh, ("d", degree), build)


def assemble_pressure_mass(mesh: TriMesh, degree: int = VOLUME_DEGREE) -> sp.csr_matrix:
    def build():
        ed = element_data(mesh, degree)
        psi = ed.table.values[:, :3]
        Me = np.einsum("tq,qk,ql->tkl", ed.wdet, psi, psi)
        rows = np.broadcast_to(mesh.triangles[:, :, None], (mesh.n_triangles, 3, 3))
        cols = np.broadcast_to(mesh.triangles[:, None, :], (mesh.n_triangles, 3, 3))
        return _Scatter(rows, cols, (mesh.n_vertices, mesh.n_vertices))(Me)

    return _cached(mesh, ("mp", degree), build)


def pressure_mean_vector(mesh: TriMesh) -> np.ndarray:
    """``m_j = int psi_j dx`` for the P1 pressure basis."""
    area = np.abs(mesh.signed_areas())
    return np.bincount(
        mesh.triangles.ravel(), weights=np.repeat(area / 3.0, 3), minlength=mesh.n_vertices
    )


def assemble_forcing(mesh: TriMesh, dofmap: DofMap, f, degree: int = VOLUME_DEGREE) -> np.ndarray:
    """``(f, v)`` by quadrature of the callback ``f(x, y) -> (fx, fy)``."""
    ed = element_data(mesh, degree)
    x = ed.qpoints[..., 0]
    y = ed.qpoints[..., 1]
    fx, fy = f(x, y)
    fq = np.stack([np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape)], axis=-1)
    Fe = np.einsum("tq,tqd,qb->tdb", ed.wdet, fq, ed.table.values)
    return _vec_assemble(dofmap, Fe.reshape(-1, 8))


# ---------------------------------------------------------------- Newton terms


def assemble_newton(
    mesh: TriMesh,
    dofmap: DofMap,
    u_n,
    convection: bool = True,
    damping=(),
    degree: int = VOLUME_DEGREE,
    eps_reg: float = EPS_REG,
):
    """Linearised convection and damping terms about `u_n` in one pass.

    `damping` is a sequence of ``(c, s)`` pairs. Returns ``(matrix, rhs)``.
    """
    for _, s in damping:
        if s < 1:
            raise ValueError(f"damping exponent must be >= 1, got {s}")
    u_n = np.asarray(u_n, dtype=float)
    if not np.all(np.isfinite(u_n)):
        raise ValueError("linearisation point has non-finite entries")
    ed = element_data(mesh, degree)
    coef = np.ascontiguousarray(u_n[dofmap.cell_dofs])
    dc = np.array([c for c, _ in damping], dtype=float)
    ds = np.array([s for _, s in damping], dtype=float)
    Ke, Fe = _kernels.newton_local(
        ed.table.values, ed.grads, ed.wdet, coef, bool(convection), dc, ds, float(eps_reg)
    )
    return _vv_assemble(mesh, dofmap, Ke), _vec_assemble(dofmap, Fe)


def assemble_convection_newton(mesh: TriMesh, dofmap: DofMap, u_n, degree: int = VOLUME_DEGREE):
    """``w -> b(w, u_n, v) + b(u_n, w, v)`` and the right-hand side ``b(u_n, u_n, v)``."""
    return assemble_newton(mesh, dofmap, u_n, convection=True, damping=(), degree=degree)


def assemble_damping_newton(
    mesh: TriMesh, dofmap: DofMap, u_n, c: float, s: float, degree: int = VOLUME_DEGREE
):
    """Linearisation of ``c |u|^(s-1) u`` about `u_n`.

    Matrix: ``w -> c [|u_n|^(s-1) w + (s-1) |u_n|^(s-3) (u_n . w) u_n]``;
    right-hand side ``c (s-1) |u_n|^(s-1) u_n``.
    """
    if s < 1:
        raise ValueError(f"damping exponent must be >= 1, got {s}")
    return assemble_newton(mesh, dofmap, u_n, convection=False, damping=[(c, s)], degree=degree)


# ---------------------------------------------------------------- slip term


def _slip_lambda_index(dofmap: DofMap) -> np.ndarray:
    """Multiplier index used at each slip-edge endpoint.

    Corner vertices carry no multiplier dof; they take the value of the
    adjacent slip vertex. -1 means zero (a one-cell slip side).
    """
    e = dofmap.slip_edges
    idx = dofmap.vertex_to_multiplier[e].copy()
    idx[:, 0] = np.where(idx[:, 0] < 0, idx[:, 1], idx[:, 0])
    idx[:, 1] = np.where(idx[:, 1] < 0, idx[:, 0], idx[:, 1])
    return idx


def assemble_slip_rhs(
    mesh: TriMesh,
    dofmap: DofMap,
    u_n,
    lambda_n,
    friction: FrictionLaw | None,
    degree: int = EDGE_DEGREE,
) -> np.ndarray:
    """``-int_slip omega(|u_tau,n|) lambda v_tau dS`` on the x-component rows."""
    out = np.zeros(dofmap.n_velocity)
    lam = np.asarray(lambda_n, dtype=float)
    if friction is None or dofmap.n_multiplier == 0 or len(dofmap.slip_edges) == 0:
        return out
    if lam.shape != (dofmap.n_multiplier,):
        raise ValueError(f"expected {dofmap.n_multiplier} multiplier values, got {lam.shape}")
    u_n = np.asarray(u_n, dtype=float)
    rule = edge_quadrature(degree)
    e = dofmap.slip_edges
    li = _slip_lambda_index(dofmap)
    lam_end = np.where(li >= 0, lam[np.maximum(li, 0)], 0.0)  # (ne, 2)
    ut_end = u_n[e]  # x-components at the two endpoints
    length = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
    phi = rule.points  # (nq, 2) edge hat values
    ut_q = ut_end @ phi.T  # (ne, nq)
    lam_q = lam_end @ phi.T
    integrand = omega(np.abs(ut_q), friction) * lam_q * rule.weights * length[:, None]
    contrib = -integrand @ phi  # (ne, 2)
    np.add.at(out, e.ravel(), contrib.ravel())
    return out


# ---------------------------------------------------------------- system


@dataclass(eq=False)
class AssembledSystem:
    """Reduced saddle-point system over ``[free velocity | pressure | mean]``."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: DofMap
    base_rhs: np.ndarray = field(repr=False)
    velocity_matrix: sp.csr_matrix = field(repr=False)

    @property
    def n_free(self) -> int:
        return self.dof_map.n_free_velocity

    def velocity_rhs(self, velocity_load: np.ndarray) -> np.ndarray:
        """System right-hand side with an extra load on the full velocity numbering."""
        b = self.base_rhs.copy()
        b[: self.n_free] += velocity_load[self.dof_map.free_velocity]
        return b

    def bubble_pairs(self) -> np.ndarray:
        """System indices ``(x, y)`` of the bubble unknowns of each element."""
        nt = self.dof_map.n_triangles
        t = np.arange(nt)
        return np.column_stack([self.n_free - 2 * nt + t, self.n_free - nt + t])

    @property
    def pressure_slice(self) -> slice:
        return slice(self.n_free, self.n_free + self.dof_map.n_pressure)

    def make_solver(self, **kwargs) -> SaddleSolver:
        return SaddleSolver(self.matrix, self.bubble_pairs(), self.pressure_slice, **kwargs)

    def split(self, x: np.ndarray):
        """Full velocity vector (constraints filled in), pressure, mean multiplier."""
        dm = self.dof_map
        u = dm.constrained_values.copy()
        u[dm.free_velocity] = x[: self.n_free]
        p = x[self.n_free : self.n_free + dm.n_pressure]
        return u, p, float(x[-1])

    def constraint_residuals(self, x: np.ndarray):
        """Max discrete divergence residual and pressure mean for a solution `x`."""
        A = self.matrix
        nf, npr = self.n_free, self.dof_map.n_pressure
        r = A[nf:] @ x - self.rhs[nf:]
        return float(np.abs(r[:npr]).max(initial=0.0)), float(abs(r[npr]))


def _reduce(dofmap, K, F, D, m):
    free = dofmap.free_velocity
    con = np.flatnonzero(dofmap.constrained)
    g = dofmap.constrained_values[con]
    Kff = K[free][:, free]
    Df = D[:, free]
    rhs_u = F[free]
    rhs_p = np.zeros(dofmap.n_pressure)
    if np.any(g != 0):
        rhs_u = rhs_u - K[free][:, con] @ g
        rhs_p = rhs_p - D[:, con] @ g
    mcol = sp.csr_matrix(m.reshape(-1, 1))
    A = sp.bmat([[Kff, Df.T, None], [Df, None, mcol], [None, mcol.T, None]], format="csr")
    A.sort_indices()
    b = np.concatenate([rhs_u, rhs_p, [0.0]])
    return A, b


def assemble_system(
    mesh: TriMesh,
    dofmap: DofMap,
    params: ProblemParams,
    u_n,
    lambda_n,
    f,
    *,
    degree: int = VOLUME_DEGREE,
    edge_degree: int = EDGE_DEGREE,
    forcing_vector: np.ndarray | None = None,
) -> AssembledSystem:
    """Linearised system about `u_n` with the slip load of `lambda_n`.

    Velocity block ``mu a + alpha a0 + Newton(convection) + Newton(damping)``;
    right-hand side ``(f, v)`` + Newton terms + slip load. Constrained velocity
    dofs are eliminated. `f` may be None when `forcing_vector` is given or the
    flow is unforced.
    """
    u_n = np.zeros(dofmap.n_velocity) if u_n is None else np.asarray(u_n, dtype=float)
    K = params.mu * assemble_a(mesh, dofmap, degree)
    if params.alpha:
        K = K + params.alpha * assemble_a0(mesh, dofmap, degree)
    if forcing_vector is not None:
        F = np.array(forcing_vector, dtype=float)
    elif f is not None:
        F = assemble_forcing(mesh, dofmap, f, degree)
    else:
        F = np.zeros(dofmap.n_velocity)
    damping = params.damping_terms()
    if np.any(u_n != 0) or any(s == 1 for _, s in damping):
        Kn, Fn = assemble_newton(mesh, dofmap, u_n, True, damping, degree)
        K = K + Kn
        F = F + Fn
    D = assemble_d(mesh, dofmap, degree)
    m = pressure_mean_vector(mesh)
    A, b_base = _reduce(dofmap, K, F, D, m)
    system = AssembledSystem(A, b_base, dofmap, b_base, K)
    if lambda_n is not None and params.friction is not None:
        slip = assemble_slip_rhs(mesh, dofmap, u_n, lambda_n, params.friction, edge_degree)
        system.rhs = system.velocity_rhs(slip)
    return system
