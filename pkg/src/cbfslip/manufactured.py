"""Manufactured solutions, their forcing, and the convergence-study harness.

All three velocity fields have the separable stream-function form
``u = (-X(x) Y'(y), X'(x) Y(y))``, which is divergence free by construction,
so one set of closed-form derivative formulas covers every case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .fespace import (
    build_dofmap,
    element_data,
    evaluate_fe_function,
    evaluate_velocity_gradient,
)
from .forms import FrictionLaw, ProblemParams
from .mesh import TriMesh, unit_square_mesh
from .solver import DiscreteState, IterationReport, SolverConfig, solve_cbfed

__all__ = [
    "Factor",
    "ManufacturedCase",
    "ConvergenceRow",
    "CASES",
    "get_case",
    "forcing",
    "error_norms",
    "observed_order",
    "convergence_table",
    "convergence_csv",
    "write_convergence_csv",
    "solve_case",
    "fill_orders",
    "StudyResult",
    "format_sci",
    "CSV_HEADER",
]

CSV_HEADER = "grid,e_l2_u,ord_l2_u,e_V_u,ord_V_u,e_l2_p,ord_l2_p"

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Factor:
    """A 1D function with its first three derivatives."""

    f: Callable
    d1: Callable
    d2: Callable
    d3: Callable


def _cubic(sign: float) -> Factor:
    # sign * (t^3 - t^2)
    return Factor(
        lambda t: sign * (t**3 - t**2),
        lambda t: sign * (3 * t**2 - 2 * t),
        lambda t: sign * (6 * t - 2),
        lambda t: sign * 6.0 + 0 * t,
    )


# 1 - cos(2 pi t), scaled by `c`
def _cosine(c: float) -> Factor:
    k = TWO_PI
    return Factor(
        lambda t: c * (1 - np.cos(k * t)),
        lambda t: c * k * np.sin(k * t),
        lambda t: c * k * k * np.cos(k * t),
        lambda t: -c * k**3 * np.sin(k * t),
    )


def _bilinear_pressure():
    p = lambda x, y: (2 * x - 1) * (2 * y - 1)
    gp = lambda x, y: (2 * (2 * y - 1), 2 * (2 * x - 1))
    return p, gp


def _cosine_pressure():
    p = lambda x, y: TWO_PI * (np.cos(TWO_PI * y) - np.cos(TWO_PI * x))
    gp = lambda x, y: (
        TWO_PI**2 * np.sin(TWO_PI * x),
        -(TWO_PI**2) * np.sin(TWO_PI * y),
    )
    return p, gp


@dataclass(frozen=True)
class ManufacturedCase:
    """A manufactured velocity/pressure pair with its physical setup."""

    name: str
    X: Factor
    Y: Factor
    p0: Callable
    grad_p0: Callable
    params: ProblemParams
    eta: float
    grids: tuple
    n_ref: int

    def u0(self, x, y):
        X, Y = self.X, self.Y
        return -X.f(x) * Y.d1(y), X.d1(x) * Y.f(y)

    def grad_u0(self, x, y):
        """``((du1/dx, du1/dy), (du2/dx, du2/dy))``."""
        X, Y = self.X, self.Y
        return (
            (-X.d1(x) * Y.d1(y), -X.f(x) * Y.d2(y)),
            (X.d2(x) * Y.f(y), X.d1(x) * Y.d1(y)),
        )

    def laplacian_u0(self, x, y):
        X, Y = self.X, self.Y
        return (
            -X.d2(x) * Y.d1(y) - X.f(x) * Y.d3(y),
            X.d3(x) * Y.f(y) + X.d1(x) * Y.d2(y),
        )

    def div_u0(self, x, y):
        g = self.grad_u0(x, y)
        return g[0][0] + g[1][1]

    def with_params(self, **changes) -> ManufacturedCase:
        return replace(self, params=replace(self.params, **changes))

    def forcing(self, x, y):
        return forcing(self, x, y)


def forcing(case: ManufacturedCase, x, y):
    """``-mu lap u + (u.grad)u + alpha u + sum c |u|^(s-1) u + grad p`` at (x, y)."""
    P = case.params
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u1, u2 = case.u0(x, y)
    (a11, a12), (a21, a22) = case.grad_u0(x, y)
    l1, l2 = case.laplacian_u0(x, y)
    g1, g2 = case.grad_p0(x, y)
    f1 = -P.mu * l1 + (u1 * a11 + u2 * a12) + P.alpha * u1 + g1
    f2 = -P.mu * l2 + (u1 * a21 + u2 * a22) + P.alpha * u2 + g2
    mag = np.sqrt(u1 * u1 + u2 * u2)
    for c, s in P.damping_terms():
        w = mag ** (s - 1.0)
        f1 = f1 + c * w * u1
        f2 = f2 + c * w * u2
    return f1, f2


def _make_cases():
    p_lin, gp_lin = _bilinear_pressure()
    p_cos, gp_cos = _cosine_pressure()
    ex1 = ManufacturedCase(
        "ex1",
        _cubic(1.0),
        _cubic(1.0),
        p_lin,
        gp_lin,
        ProblemParams(mu=1.2, alpha=2.0, beta=1.5, kappa=0.0, r=3.0,
                      friction=FrictionLaw(1.55, 1.53, 8.0)),
        eta=1.0,
        grids=(5, 10, 15, 20, 25, 30),
        n_ref=160,
    )
    ex2 = ManufacturedCase(
        "ex2",
        _cosine(1.0),
        _cosine(-1.0 / TWO_PI),
        p_cos,
        gp_cos,
        ProblemParams(mu=0.8, alpha=1.5, beta=2.0, kappa=-1.2, r=3.0, q=2.0,
                      friction=FrictionLaw(5.01, 5.00, 8.0)),
        eta=1.0,
        grids=(5, 10, 15, 20, 25, 30),
        n_ref=160,
    )
    ex3 = ManufacturedCase(
        "ex3",
        _cubic(-1.0),
        _cubic(1.0),
        p_lin,
        gp_lin,
        ProblemParams(mu=1.0, alpha=0.5, beta=1.2, kappa=-1.0, r=4.0, q=3.0,
                      friction=FrictionLaw(3.25, 3.20, 6.0)),
        eta=0.8,
        grids=(8, 16, 24, 32, 40, 48),
        n_ref=192,
    )
    return {c.name: c for c in (ex1, ex2, ex3)}


CASES = _make_cases()


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; expected one of {sorted(CASES)}") from None


# ---------------------------------------------------------------- errors


def _fe_at_quadrature(mesh: TriMesh, u, p, degree: int):
    """Values, strain and pressure of a discrete field at the mesh's own
    quadrature points, plus the points and weights."""
    ed = element_data(mesh, degree)
    dm = build_dofmap(mesh)
    vals = ed.table.values  # (nq, 4)
    coef = u[dm.cell_dofs]  # (nt, 8)
    ux = coef[:, :4] @ vals.T
    uy = coef[:, 4:] @ vals.T
    U = np.stack([ux, uy], axis=-1)
    G = np.stack(
        [np.einsum("ta,tqak->tqk", coef[:, :4], ed.grads),
         np.einsum("ta,tqak->tqk", coef[:, 4:], ed.grads)],
        axis=2,
    )
    P = p[mesh.triangles] @ vals[:, :3].T
    return U, G, P, ed.qpoints, ed.wdet


def _sym(G):
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def error_norms(
    coarse_mesh: TriMesh,
    coarse: DiscreteState,
    fine_mesh: TriMesh,
    fine: DiscreteState,
    *,
    degree: int = 6,
    require_nested: bool = True,
):
    """L2 velocity, V-norm (``||eps(.)||``) velocity and L2 pressure errors.

    The integrals use the coarse mesh's quadrature with the fine solution
    evaluated pointwise. Pressures are compared as stored (both have zero
    mean by construction).

    Raises
    ------
    ValueError
        If `require_nested` and the fine grid is not an integer refinement
        of the coarse one.
    """
    if require_nested:
        if fine_mesh.nx % coarse_mesh.nx or fine_mesh.ny % coarse_mesh.ny:
            raise ValueError(
                f"reference grid {fine_mesh.nx}x{fine_mesh.ny} is not a refinement of "
                f"{coarse_mesh.nx}x{coarse_mesh.ny}"
            )
    U, G, P, pts, w = _fe_at_quadrature(coarse_mesh, coarse.u, coarse.p, degree)
    flat = pts.reshape(-1, 2)
    Uf, Pf = evaluate_fe_function(fine.u, fine.p, fine_mesh, flat)
    Gf = evaluate_velocity_gradient(fine.u, fine_mesh, flat)
    shape = pts.shape[:2]
    du = U - Uf.reshape(*shape, 2)
    de = _sym(G) - _sym(Gf.reshape(*shape, 2, 2))
    dp = P - Pf.reshape(shape)
    e_u = np.sqrt(np.sum(w * np.sum(du * du, axis=-1)))
    e_v = np.sqrt(np.sum(w * np.sum(de * de, axis=(-1, -2))))
    e_p = np.sqrt(np.sum(w * dp * dp))
    return float(e_u), float(e_v), float(e_p)


def observed_order(e1: float, e2: float, h1: float, h2: float) -> float:
    """``log(e1/e2) / log(h1/h2)``; NaN when an error vanishes."""
    if e1 <= 0 or e2 <= 0 or not (np.isfinite(e1) and np.isfinite(e2)):
        return float("nan")
    return math.log(e1 / e2) / math.log(h1 / h2)


@dataclass
class ConvergenceRow:
    grid: int
    e_l2_u: float
    e_v_u: float
    e_l2_p: float
    ord_l2_u: float | None = None
    ord_v_u: float | None = None
    ord_l2_p: float | None = None

    @property
    def h(self) -> float:
        return 1.0 / self.grid


@dataclass
class StudyResult:
    rows: list
    reports: dict = field(default_factory=dict)
    reference_report: IterationReport | None = None

    @property
    def all_reports(self):
        out = dict(self.reports)
        if self.reference_report is not None:
            out["ref"] = self.reference_report
        return out


def fill_orders(rows: Sequence[ConvergenceRow]) -> None:
    for prev, row in zip(rows, rows[1:]):
        row.ord_l2_u = observed_order(prev.e_l2_u, row.e_l2_u, prev.h, row.h)
        row.ord_v_u = observed_order(prev.e_v_u, row.e_v_u, prev.h, row.h)
        row.ord_l2_p = observed_order(prev.e_l2_p, row.e_l2_p, prev.h, row.h)


def solve_case(case: ManufacturedCase, n: int, config: SolverConfig | None = None):
    """Solve `case` on the n x n unit-square mesh."""
    mesh = unit_square_mesh(n)
    config = config or SolverConfig(eta=case.eta)
    state, report = solve_cbfed(mesh, case.params, config, case.forcing)
    return mesh, state, report


def convergence_table(
    case: ManufacturedCase,
    grids: Sequence[int] | None = None,
    n_ref: int | None = None,
    config: SolverConfig | None = None,
    *,
    require_nested: bool = False,
    solve=solve_case,
    callback=None,
) -> StudyResult:
    """Errors of each grid against the `n_ref` reference, with observed orders.

    `solve(case, n, config)` must return ``(mesh, state, report)``. The
    optional `callback(tag, n, report)` sees every finished solve.
    """
    grids = list(case.grids if grids is None else grids)
    n_ref = case.n_ref if n_ref is None else n_ref
    if not grids:
        raise ValueError("empty grid list")
    if any(b <= a for a, b in zip(grids, grids[1:])):
        raise ValueError(f"grids must be strictly increasing, got {grids}")
    if grids[-1] > n_ref:
        raise ValueError(f"reference grid {n_ref} is coarser than {grids[-1]}")
    if require_nested and any(n_ref % n for n in grids):
        raise ValueError(f"grids {grids} do not all divide n_ref = {n_ref}")
    ref_mesh, ref_state, ref_report = solve(case, n_ref, config)
    if callback:
        callback("ref", n_ref, ref_report)
    result = StudyResult([], reference_report=ref_report)
    for n in grids:
        if n == n_ref:
            mesh, state, report = ref_mesh, ref_state, ref_report
        else:
            mesh, state, report = solve(case, n, config)
        if callback:
            callback("grid", n, report)
        errs = error_norms(mesh, state, ref_mesh, ref_state, require_nested=require_nested)
        result.rows.append(ConvergenceRow(n, *errs))
        result.reports[n] = report
    fill_orders(result.rows)
    return result


def format_sci(v) -> str:
    """4 significant digits in scientific notation; empty for missing/NaN."""
    if v is None:
        return ""
    v = float(v)
    if not math.isfinite(v):
        return "nan"
    return f"{v:.3e}"


def convergence_csv(rows: Sequence[ConvergenceRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r.grid),
                    format_sci(r.e_l2_u),
                    format_sci(r.ord_l2_u),
                    format_sci(r.e_v_u),
                    format_sci(r.ord_v_u),
                    format_sci(r.e_l2_p),
                    format_sci(r.ord_l2_p),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> None:
    with open(path, "w") as fh:
        fh.write(convergence_csv(rows))
