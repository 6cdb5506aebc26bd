"""Acceptance criteria 1-9, each reported as one PASS/FAIL line.

The three convergence studies run once per session (a few minutes in
total) and feed criteria 1, 2, 3, 4 and 7.
"""
import time

import numpy as np
import pytest

from cbfslip.checks import check_monotonicity, inf_sup_constant, patch_test
from cbfslip.fespace import build_dofmap
from cbfslip.manufactured import convergence_csv, convergence_table, get_case
from cbfslip.mesh import unit_square_mesh
from cbfslip.solver import SolverConfig, complementarity, solve_cbfed
from conftest import ACCEPTANCE_LINES
from fd_oracle import momentum_operator

L2U_BAND = (1.8, 2.2)
V_BAND = (0.85, 1.25)
P_BAND = (1.7, 2.3)
# coarse-row L2 velocity errors of the published tables
COARSE_L2U = {"ex1": 3.778e-03, "ex2": 1.209e-01, "ex3": 1.529e-03}


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


class Study:
    def __init__(self, name):
        self.case = get_case(name)
        self.finals = {}
        t0 = time.perf_counter()
        self.result = convergence_table(self.case, solve=self._solve)
        self.seconds = time.perf_counter() - t0

    def _solve(self, case, n, config):
        mesh = unit_square_mesh(n)
        dm = build_dofmap(mesh)
        state, report = solve_cbfed(mesh, case.params, SolverConfig(eta=case.eta), case.forcing,
                                    dofmap=dm)
        self.finals[n] = (dm, state, report)
        return mesh, state, report


@pytest.fixture(scope="module")
def studies():
    out = {}
    for name in ("ex1", "ex2", "ex3"):
        out[name] = Study(name)
        print(f"\n{name} ({out[name].seconds:.0f}s)\n{convergence_csv(out[name].result.rows)}")
    return out


def _order_failures(study):
    bad = []
    for row in study.result.rows[-3:]:
        for label, val, (lo, hi) in (
            ("L2 u", row.ord_l2_u, L2U_BAND),
            ("V u", row.ord_v_u, V_BAND),
            ("L2 p", row.ord_l2_p, P_BAND),
        ):
            if not (lo <= val <= hi):
                bad.append(f"{study.case.name} n={row.grid} {label} order {val:.2f}")
    return bad


def _module_band_note(studies):
    # the manufactured module states a looser pressure band than criteria 1-2
    ok = all(0.9 <= r.ord_l2_p <= 2.3 for s in studies for r in s.result.rows[-3:])
    return f"; pressure orders {'inside' if ok else 'outside'} the module band [0.9, 2.3]"


def _orders_text(study):
    return "; ".join(
        f"n={r.grid} ({r.ord_l2_u:.2f}, {r.ord_v_u:.2f}, {r.ord_l2_p:.2f})"
        for r in study.result.rows[-3:]
    )


def test_criterion_1_ex1_orders(studies):
    s = studies["ex1"]
    bad = _order_failures(s)
    if s.seconds > 900:
        bad.append(f"runtime {s.seconds:.0f}s")
    record(1, not bad, f"ex1 orders {_orders_text(s)} in {s.seconds:.0f}s"
           + (f"; out of band: {', '.join(bad)}" if bad else "") + _module_band_note([s]))


def test_criterion_2_ex2_ex3_orders(studies):
    bad, parts = [], []
    for name in ("ex2", "ex3"):
        s = studies[name]
        bad += _order_failures(s)
        e = s.result.rows[0].e_l2_u
        ratio = max(e, COARSE_L2U[name]) / min(e, COARSE_L2U[name])
        if ratio > 2:
            bad.append(f"{name} coarse L2 u {e:.3e} vs {COARSE_L2U[name]:.3e}")
        parts.append(f"{name} {_orders_text(s)}, coarse ratio {ratio:.2f}")
    record(2, not bad, "; ".join(parts) + (f"; out of band: {', '.join(bad)}" if bad else "")
           + _module_band_note([studies["ex2"], studies["ex3"]]))


def test_criterion_3_iteration_caps(studies):
    bad = []
    for name, s in studies.items():
        for n, (_, _, rep) in sorted(s.finals.items()):
            late = [k for k in rep.inner_iters[1:] if k >= 20]
            if not rep.converged or rep.outer_iters >= 50:
                bad.append(f"{name} n={n} outer cap")
            if late:
                bad.append(f"{name} n={n} {len(late)} capped inner loops")
    n_runs = sum(len(s.finals) for s in studies.values())
    record(3, not bad, f"{n_runs} runs" + (f"; {', '.join(bad)}" if bad else ""))


def test_criterion_4_multiplier(studies):
    bad, worst = [], 1.0
    for name, s in studies.items():
        for n, (dm, state, _) in sorted(s.finals.items()):
            if np.abs(state.lam).max(initial=0.0) > 1.0:
                bad.append(f"{name} n={n} |lambda| > 1")
            frac, k, tot = complementarity(state, dm)
            worst = min(worst, frac)
            if frac < 0.95:
                bad.append(f"{name} n={n} {k}/{tot}")
    record(4, not bad, f"feasibility held in every projection; worst complementarity {worst:.0%}"
           + (f"; below 95%: {', '.join(bad)}" if bad else ""))


def test_criterion_5_monotonicity():
    t0 = time.perf_counter()
    res = check_monotonicity(seed=0, n_pairs=10_000)
    dt = time.perf_counter() - t0
    ok = all(r.passed for r in res) and dt <= 1.0
    record(5, ok, f"r=1..5, 10^4 pairs each, {dt:.2f}s; " + "; ".join(r.detail for r in res[:1]))


def test_criterion_6_patch():
    eu, ep = patch_test()
    record(6, max(eu, ep) <= 1e-9, f"nodal max error velocity {eu:.1e}, pressure {ep:.1e}")


def test_criterion_7_constraints(studies):
    worst = max(
        rec["constraint_residual"]
        for s in studies.values()
        for _, _, rep in s.finals.values()
        for rec in rep.records
    )
    record(7, worst <= 1e-9, f"max divergence/mean residual over all solves {worst:.1e}")


def test_criterion_8_forcing_oracle():
    rng = np.random.default_rng(8)
    worst = 0.0
    for name in ("ex1", "ex2", "ex3"):
        case = get_case(name)
        x, y = rng.uniform(0.02, 0.98, (2, 100))
        f = np.asarray(case.forcing(x, y))
        ref = momentum_operator(case.u0, case.p0, case.params, x, y)
        rel = np.linalg.norm(f - ref, axis=0) / np.maximum(np.linalg.norm(ref, axis=0), 1e-300)
        worst = max(worst, float(rel.max()))
    record(8, worst <= 1e-6, f"max relative deviation {worst:.1e} over 3 x 100 points")


def test_criterion_9_inf_sup():
    vals = [inf_sup_constant(n) for n in (4, 8, 16)]
    ok = min(vals) > 0 and min(vals) >= 0.5 * vals[0]
    record(9, ok, ", ".join(f"n={n}: {v:.4f}" for n, v in zip((4, 8, 16), vals)))
