"""Self-check suites: pointwise monotonicity, quadrature exactness, Stokes
patch test and the discrete inf-sup diagnostic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fespace import build_dofmap, interpolate_velocity
from .forms import (
    VOLUME_DEGREE,
    ProblemParams,
    assemble_a,
    assemble_d,
    assemble_pressure_mass,
    assemble_system,
)
from .mesh import unit_square_mesh
from .quadrature import edge_quadrature, triangle_quadrature

__all__ = [
    "CheckResult",
    "monotonicity_slack",
    "sample_pairs",
    "check_monotonicity",
    "check_quadrature",
    "patch_test",
    "check_patch",
    "inf_sup_constant",
    "check_inf_sup",
    "run_checks",
]

MONOTONICITY_TOL = -1e-12
PATCH_TOL = 1e-9
REQUIRED_VOLUME_DEGREE = 6
REQUIRED_EDGE_DEGREE = 5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


# ---------------------------------------------------------------- monotonicity


def _power(x, r):
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    return n ** (r - 1) * x


def monotonicity_slack(x, y, r: float):
    """Relative slack of both pointwise inequalities for ``C(x) = |x|^(r-1) x``.

    Returns ``(s1, s2)`` where, with ``L = (C(x) - C(y)).(x - y)``,

    * ``s1 = (L - (|x|^(r-1) + |y|^(r-1)) |x-y|^2 / 2) / scale``
    * ``s2 = (L - 2^(1-r) |x-y|^(r+1)) / scale``

    and ``scale = |L| + |rhs|`` (1 where both vanish), so roundoff shows
    up as slack of order machine epsilon regardless of magnitude.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    nd = np.linalg.norm(d, axis=-1)
    L = np.sum((_power(x, r) - _power(y, r)) * d, axis=-1)
    nx = np.linalg.norm(x, axis=-1)
    ny = np.linalg.norm(y, axis=-1)
    rhs1 = 0.5 * (nx ** (r - 1) + ny ** (r - 1)) * nd**2
    rhs2 = 2.0 ** (1 - r) * nd ** (r + 1)

    def rel(lhs, rhs):
        scale = np.abs(lhs) + np.abs(rhs)
        return (lhs - rhs) / np.where(scale > 0, scale, 1.0)

    return rel(L, rhs1), rel(L, rhs2)


def sample_pairs(rng: np.random.Generator, n: int):
    """Random vector pairs in R^2 mixing scales, near-equal and opposite pairs."""
    mag = 10.0 ** rng.uniform(-3, 2, size=(n, 2))
    ang = rng.uniform(0, 2 * np.pi, size=(n, 2))
    x = mag[:, :1] * np.column_stack([np.cos(ang[:, 0]), np.sin(ang[:, 0])])
    y = mag[:, 1:] * np.column_stack([np.cos(ang[:, 1]), np.sin(ang[:, 1])])
    k = n // 5
    # nearly equal, exactly opposite, and one vector at the origin
    y[:k] = x[:k] * (1 + 1e-3 * rng.standard_normal((k, 1)))
    y[k : 2 * k] = -x[k : 2 * k]
    y[2 * k : 3 * k] = 0.0
    return x, y


def check_monotonicity(seed: int = 0, n_pairs: int = 10_000, exponents=(1, 2, 3, 4, 5)):
    rng = np.random.default_rng(seed)
    out = []
    for r in exponents:
        x, y = sample_pairs(rng, n_pairs)
        s1, s2 = monotonicity_slack(x, y, r)
        ok = s1.min() >= MONOTONICITY_TOL and s2.min() >= MONOTONICITY_TOL
        out.append(
            CheckResult(
                f"monotonicity r={r}",
                bool(ok),
                f"min slack {s1.min():.2e} (two-sided), {s2.min():.2e} (power)",
            )
        )
    return out


# ---------------------------------------------------------------- quadrature


def _triangle_monomial(i: int, j: int) -> float:
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


def check_quadrature(volume_degree: int = VOLUME_DEGREE, edge_degree: int = 5):
    """Whether the assembly rules integrate the monomials they must.

    Volume terms pair P1-bubble functions (degree up to 6) and the edge
    terms integrate the slip load (degree up to 5 in the polynomial part).
    """
    results = []
    rule = triangle_quadrature(volume_degree)
    xy = rule.reference_coords()
    worst = 0.0
    for d in range(REQUIRED_VOLUME_DEGREE + 1):
        for i in range(d + 1):
            j = d - i
            q = float(rule.weights @ (xy[:, 0] ** i * xy[:, 1] ** j))
            worst = max(worst, abs(q - _triangle_monomial(i, j)))
    results.append(
        CheckResult(
            f"triangle rule (requested degree {volume_degree})",
            worst <= 1e-14,
            f"max monomial error {worst:.1e} up to degree {REQUIRED_VOLUME_DEGREE}",
        )
    )
    erule = edge_quadrature(edge_degree)
    t = erule.points[:, 1]
    worst = max(
        abs(float(erule.weights @ t**k) - 1.0 / (k + 1)) for k in range(REQUIRED_EDGE_DEGREE + 1)
    )
    results.append(
        CheckResult(
            f"edge rule (requested degree {edge_degree})",
            worst <= 1e-14,
            f"max monomial error {worst:.1e} up to degree {REQUIRED_EDGE_DEGREE}",
        )
    )
    return results


# ---------------------------------------------------------------- patch test


def _patch_field(x, y):
    return 1.0 + 2.0 * x + 3.0 * y, -1.0 + 0.5 * x - 2.0 * y


def patch_test(n: int = 4, mu: float = 1.0, degree: int = VOLUME_DEGREE):
    """Max nodal error of a Stokes solve whose exact solution is discrete.

    Velocity ``(1 + 2x + 3y, -1 + x/2 - 2y)`` (divergence free), pressure 0,
    no forcing, Dirichlet data on the whole boundary. Returns
    ``(velocity error, pressure error)``.
    """
    mesh = unit_square_mesh(n)
    dm = build_dofmap(mesh)
    exact = interpolate_velocity(mesh, _patch_field)
    nv = mesh.n_vertices
    on_boundary = np.zeros(nv, dtype=bool)
    on_boundary[np.unique(mesh.boundary_edges)] = True
    mask = np.concatenate([on_boundary, on_boundary, np.zeros(2 * mesh.n_triangles, bool)])
    dm = dm.with_constraints(mask, np.where(mask, exact, 0.0))
    system = assemble_system(mesh, dm, ProblemParams(mu=mu), None, None, None, degree=degree)
    x = system.make_solver().solve(system.rhs)
    u, p, _ = system.split(x)
    return float(np.abs(u - exact).max()), float(np.abs(p).max())


def check_patch(degree: int = VOLUME_DEGREE):
    eu, ep = patch_test(degree=degree)
    return [
        CheckResult(
            "Stokes patch test",
            max(eu, ep) <= PATCH_TOL,
            f"nodal max error velocity {eu:.1e}, pressure {ep:.1e}",
        )
    ]


# ---------------------------------------------------------------- inf-sup


def inf_sup_constant(n: int, degree: int = VOLUME_DEGREE) -> float:
    """Smallest nonzero discrete inf-sup value on the n x n mesh.

    Velocities vanish on the whole boundary and are measured in the
    ``||eps(v)||`` norm; pressures in L2. The value is the square root of
    the second smallest generalised eigenvalue of ``D A^-1 D^T`` against the
    pressure mass matrix, the smallest being the constant mode.
    """
    mesh = unit_square_mesh(n)
    dm = build_dofmap(mesh)
    nv = mesh.n_vertices
    on_boundary = np.zeros(nv, dtype=bool)
    on_boundary[np.unique(mesh.boundary_edges)] = True
    free = np.flatnonzero(
        ~np.concatenate([on_boundary, on_boundary, np.zeros(2 * mesh.n_triangles, bool)])
    )
    A = 0.5 * assemble_a(mesh, dm, degree)[free][:, free]
    D = assemble_d(mesh, dm, degree)[:, free]
    lu = spla.splu(sp.csc_matrix(A))
    X = lu.solve(np.asarray(D.T.todense()))
    S = np.asarray(D @ X)
    S = 0.5 * (S + S.T)
    Mp = assemble_pressure_mass(mesh, degree).toarray()
    ev = sla.eigh(S, Mp, eigvals_only=True)
    if abs(ev[0]) > 1e-8 * ev[-1]:
        raise RuntimeError(f"expected a single constant pressure mode, got {ev[:2]}")
    return float(np.sqrt(ev[1]))


def check_inf_sup(sizes=(4, 8, 16), degree: int = VOLUME_DEGREE):
    vals = [inf_sup_constant(n, degree) for n in sizes]
    ok = all(v > 0 for v in vals) and min(vals) >= 0.5 * vals[0]
    detail = ", ".join(f"n={n}: {v:.4f}" for n, v in zip(sizes, vals))
    return [CheckResult("discrete inf-sup", bool(ok), detail)], vals


# ---------------------------------------------------------------- driver


def run_checks(seed: int = 0, volume_degree: int = VOLUME_DEGREE, edge_degree: int = 5):
    """All suites; the degree arguments are the quadrature used by assembly."""
    suites = [
        ("monotonicity", lambda: check_monotonicity(seed)),
        ("quadrature", lambda: check_quadrature(volume_degree, edge_degree)),
        ("Stokes patch test", lambda: check_patch(volume_degree)),
        ("discrete inf-sup", lambda: check_inf_sup(degree=volume_degree)[0]),
    ]
    results = []
    for name, run in suites:
        try:
            results += run()
        except Exception as exc:  # a crashing suite is a failed check
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
