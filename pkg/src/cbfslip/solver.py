"""Outer Newton linearisation with an inner Uzawa loop for the slip multiplier."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .fespace import DofMap, build_dofmap
from .forms import (
    EDGE_DEGREE,
    VOLUME_DEGREE,
    ProblemParams,
    assemble_a0,
    assemble_forcing,
    assemble_slip_rhs,
    assemble_system,
)
from .linalg import SaddleSolver, SolveError
from .mesh import TriMesh

__all__ = [
    "SolverConfig",
    "DiscreteState",
    "InnerReport",
    "IterationReport",
    "ConstraintViolation",
    "project_lambda",
    "uzawa_step",
    "solve_cbfed",
    "complementarity",
]

log = logging.getLogger(__name__)

CONSTRAINT_TOL = 1e-9


class ConstraintViolation(AssertionError):
    """A runtime invariant of the iteration failed."""


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 1.0
    eps_outer: float = 1e-8
    eps_inner: float = 1e-8
    max_outer: int = 50
    max_inner: int = 20
    relative_outer: bool = False
    warm_start: bool = True

    def __post_init__(self):
        # eta = 0 is accepted so the multiplier can be frozen in tests
        if self.eta < 0:
            raise ValueError(f"Uzawa step must be positive, got {self.eta}")
        if not (self.eps_outer > 0 and self.eps_inner > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class DiscreteState:
    u: np.ndarray
    p: np.ndarray
    lam: np.ndarray

    @classmethod
    def zeros(cls, dofmap: DofMap) -> DiscreteState:
        return cls(
            np.zeros(dofmap.n_velocity), np.zeros(dofmap.n_pressure), np.zeros(dofmap.n_multiplier)
        )


@dataclass
class InnerReport:
    iterations: int = 0
    increments: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    converged: bool = False
    constraint_residual: float = 0.0


@dataclass
class IterationReport:
    """Per-outer-iteration history of a nonlinear solve."""

    records: list = field(default_factory=list)
    converged: bool = False

    @property
    def outer_iters(self) -> int:
        return len(self.records)

    @property
    def inner_iters(self) -> list:
        return [r["inner"] for r in self.records]

    @property
    def final_increment(self) -> float:
        return self.records[-1]["increment"] if self.records else float("nan")

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def project_lambda(lam) -> np.ndarray:
    """Nodewise projection onto ``{|lambda| <= 1}``."""
    lam = np.asarray(lam, dtype=float)
    return lam / np.maximum(1.0, np.abs(lam))


def _l2(M, v) -> float:
    return float(np.sqrt(max(v @ (M @ v), 0.0)))


def _check_state(system, x, lam, where):
    div_res, mean_res = system.constraint_residuals(x)
    if div_res > CONSTRAINT_TOL or mean_res > CONSTRAINT_TOL:
        raise ConstraintViolation(
            f"{where}: divergence residual {div_res:.2e}, pressure mean {mean_res:.2e}"
        )
    if lam is not None and lam.size and np.abs(lam).max() > 1.0:
        raise ConstraintViolation(f"{where}: multiplier outside the unit ball")
    return div_res, mean_res


def uzawa_step(
    state: DiscreteState,
    mesh: TriMesh,
    dofmap: DofMap,
    params: ProblemParams,
    config: SolverConfig,
    f=None,
    *,
    forcing_vector=None,
    outer_index: int = 0,
    lam0=None,
    linear_solver: SaddleSolver | None = None,
    degree: int = VOLUME_DEGREE,
    edge_degree: int = EDGE_DEGREE,
):
    """One outer step: linearise about ``state.u`` and run the Uzawa loop.

    The linearised matrix does not depend on the multiplier, so it is
    factorised once and reused for every inner solve. Passing the
    `linear_solver` of the previous outer step lets its factors be reused
    while they still meet the residual contract. Returns the new
    `DiscreteState` (velocity, pressure and updated multiplier of the last
    inner iterate), an `InnerReport` and the linear solver.
    """
    if forcing_vector is None and f is not None:
        forcing_vector = assemble_forcing(mesh, dofmap, f, degree)
    system = assemble_system(
        mesh, dofmap, params, state.u, None, None,
        degree=degree, forcing_vector=forcing_vector,
    )
    M = assemble_a0(mesh, dofmap, degree)
    try:
        if linear_solver is None:
            lu = system.make_solver()
        else:
            lu = linear_solver
            lu.update(system.matrix)
    except SolveError as exc:
        raise SolveError(f"outer iteration {outer_index}: {exc}") from exc

    lam = np.array(state.lam if lam0 is None else lam0, dtype=float)
    report = InnerReport()
    u_prev = None
    u = p = None
    for ell in range(config.max_inner):
        if params.friction is not None:
            b = system.velocity_rhs(
                assemble_slip_rhs(mesh, dofmap, state.u, lam, params.friction, edge_degree)
            )
        else:
            b = system.base_rhs
        try:
            x = lu.solve(b)
        except SolveError as exc:
            raise SolveError(f"outer iteration {outer_index}, inner {ell}: {exc}") from exc
        system.rhs = b
        div_res, mean_res = _check_state(system, x, None, f"outer {outer_index}, inner {ell}")
        report.constraint_residual = max(report.constraint_residual, div_res, mean_res)
        u, p, _ = system.split(x)
        report.residuals.append(lu.last_residual)
        report.iterations = ell + 1
        lam = project_lambda(lam + config.eta * dofmap.tangential_velocity(u))
        if lam.size and np.abs(lam).max() > 1.0:
            raise ConstraintViolation("multiplier outside the unit ball after projection")
        if u_prev is not None:
            inc = _l2(M, u - u_prev)
            report.increments.append(inc)
            if inc <= config.eps_inner:
                report.converged = True
                break
        u_prev = u
    return DiscreteState(u, p, lam), report, lu


def solve_cbfed(
    mesh: TriMesh,
    params: ProblemParams,
    config: SolverConfig | None = None,
    f=None,
    *,
    dofmap: DofMap | None = None,
    initial: DiscreteState | None = None,
    degree: int = VOLUME_DEGREE,
    edge_degree: int = EDGE_DEGREE,
):
    """Nested Newton/Uzawa iteration from ``u = 0``, ``lambda = 0``.

    Stops when the L2 velocity increment drops to ``eps_outer`` (divided by
    the current velocity norm if ``relative_outer``) or at ``max_outer``;
    hitting the cap returns the last state with ``report.converged = False``.
    A failed linear solve or a violated runtime invariant propagates with
    the partial report attached as ``exc.report``.
    """
    config = config or SolverConfig()
    dofmap = dofmap or build_dofmap(mesh)
    state = initial or DiscreteState.zeros(dofmap)
    forcing = assemble_forcing(mesh, dofmap, f, degree) if f is not None else None
    M = assemble_a0(mesh, dofmap, degree)
    report = IterationReport()
    lu = None
    for n in range(config.max_outer):
        lam0 = state.lam if config.warm_start else np.zeros(dofmap.n_multiplier)
        try:
            new, inner, lu = uzawa_step(
                state, mesh, dofmap, params, config,
                forcing_vector=forcing, outer_index=n, lam0=lam0, linear_solver=lu,
                degree=degree, edge_degree=edge_degree,
            )
        except (SolveError, ConstraintViolation) as exc:
            exc.report = report
            raise
        inc = _l2(M, new.u - state.u)
        norm = _l2(M, new.u)
        rel = inc / norm if norm > 0 else inc
        report.records.append(
            {
                "outer": n,
                "inner": inner.iterations,
                "inner_converged": inner.converged,
                "increment": inc,
                "relative_increment": rel,
                "linear_residual": max(inner.residuals) if inner.residuals else 0.0,
                "constraint_residual": inner.constraint_residual,
            }
        )
        log.debug("outer %d: inner %d, increment %.3e", n, inner.iterations, inc)
        state = new
        if (rel if config.relative_outer else inc) <= config.eps_outer:
            report.converged = True
            break
    return state, report


def complementarity(state: DiscreteState, dofmap: DofMap, tol: float = 1e-6):
    """Fraction of multiplier nodes with ``|lambda| = 1`` or a vanishing slip.

    A node passes when ``| |lambda| - 1 | <= tol`` or
    ``|u_tau| <= tol * max |u_tau|``. Returns ``(fraction, n_pass, n_total)``.
    """
    ut = np.abs(dofmap.tangential_velocity(state.u))
    lam = np.abs(state.lam)
    if ut.size == 0:
        return 1.0, 0, 0
    ok = (np.abs(lam - 1.0) <= tol) | (ut <= tol * ut.max())
    return float(ok.mean()), int(ok.sum()), int(ok.size)
