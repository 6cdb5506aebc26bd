import math

import numpy as np
import pytest

from cbfslip.fespace import build_dofmap, interpolate_velocity
from cbfslip.forms import (
    FrictionLaw,
    ProblemParams,
    assemble_a,
    assemble_a0,
    assemble_convection_newton,
    assemble_d,
    assemble_damping_newton,
    assemble_forcing,
    assemble_pressure_mass,
    assemble_slip_rhs,
    assemble_system,
    omega,
    pressure_mean_vector,
)
from cbfslip.mesh import unit_square_mesh

EX1_LAW = FrictionLaw(1.55, 1.53, 8.0)


def _interp(mesh, fn):
    return interpolate_velocity(mesh, fn)


# ---------------------------------------------------------------- omega


def test_omega_values():
    assert omega(0.0, EX1_LAW) == 1.55
    assert omega(10.0, EX1_LAW) - 1.53 <= 0.02 * math.exp(-80) + 1e-16
    law3 = FrictionLaw(3.25, 3.20, 6.0)
    assert omega(0.1, law3) == pytest.approx(0.05 * math.exp(-0.6) + 3.20, rel=1e-15)
    assert law3(0.1) == omega(0.1, law3)


def test_omega_decreasing_and_bounded():
    t = np.linspace(0, 2, 200)
    w = omega(t, EX1_LAW)
    assert (np.diff(w) < 0).all()
    assert ((w > 1.53) & (w <= 1.55)).all()


@pytest.mark.parametrize("args", [(1.0, 1.0, 1.0), (1.0, 2.0, 1.0), (2.0, 1.0, 0.0), (1.0, 0.0, 1.0)])
def test_friction_law_validation(args):
    with pytest.raises(ValueError):
        FrictionLaw(*args)


def test_omega_rejects_negative_speed():
    with pytest.raises(ValueError):
        omega(-1.0, EX1_LAW)


# ---------------------------------------------------------------- bilinear forms


def test_a_examples(mesh4):
    m, dm = mesh4
    A = assemble_a(m, dm)
    assert abs(A - A.T).max() <= 1e-14
    u = _interp(m, lambda x, y: (1.0 + 0 * x, 0 * y))
    assert abs(u @ A @ u) <= 1e-12
    u = _interp(m, lambda x, y: (x, -y))
    assert u @ A @ u == pytest.approx(4.0, abs=1e-12)


def test_a_rotation_has_no_strain(mesh4):
    m, dm = mesh4
    A = assemble_a(m, dm)
    u = _interp(m, lambda x, y: (-y, x))
    assert abs(u @ A @ u) <= 1e-12


def test_mass_examples(mesh4):
    m, dm = mesh4
    M = assemble_a0(m, dm)
    u = _interp(m, lambda x, y: (1.0 + 0 * x, 0 * y))
    assert u @ M @ u == pytest.approx(1.0, abs=1e-13)
    u = _interp(m, lambda x, y: (x, 0 * y))
    assert u @ M @ u == pytest.approx(1 / 3, abs=1e-12)
    np.linalg.cholesky(M.toarray())


def test_d_examples(mesh4):
    m, dm = mesh4
    D = assemble_d(m, dm)
    u = _interp(m, lambda x, y: (y, x))
    assert np.abs(D @ u).max() <= 1e-12
    u = _interp(m, lambda x, y: (x, y))
    assert np.ones(m.n_vertices) @ D @ u == pytest.approx(-2.0, abs=1e-12)


def test_d_bubble_column_closed_form():
    # -int_T q div(b e_k) = int_T b dq/dx_k = (9/20) |T| dq/dx_k for the
    # bubble b = 27 l1 l2 l3 scaled to one at the barycentre
    m = unit_square_mesh(3)
    dm = build_dofmap(m)
    D = assemble_d(m, dm).toarray()
    nv, nt = m.n_vertices, m.n_triangles
    area = m.signed_areas()
    rng = np.random.default_rng(0)
    q = rng.standard_normal(nv)
    for t in (0, 5, 17):
        P = m.vertices[m.triangles[t]]
        grad = np.linalg.solve(np.column_stack([np.ones(3), P]), q[m.triangles[t]])[1:]
        expect = 0.45 * area[t] * grad
        got = [q @ D[:, 2 * nv + t], q @ D[:, 2 * nv + nt + t]]
        np.testing.assert_allclose(got, expect, rtol=1e-12, atol=1e-14)


def test_pressure_mass_and_mean():
    m = unit_square_mesh(3)
    Mp = assemble_pressure_mass(m)
    one = np.ones(m.n_vertices)
    assert one @ Mp @ one == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(pressure_mean_vector(m), Mp @ one, atol=1e-14)


def test_forcing_constant():
    m = unit_square_mesh(2)
    dm = build_dofmap(m)
    F = assemble_forcing(m, dm, lambda x, y: (2.0 + 0 * x, -1.0 + 0 * y))
    u = _interp(m, lambda x, y: (1.0 + 0 * x, 1.0 + 0 * y))
    assert u @ F == pytest.approx(1.0, abs=1e-13)


# ---------------------------------------------------------------- Newton terms


def test_convection_zero(mesh4):
    m, dm = mesh4
    K, F = assemble_convection_newton(m, dm, np.zeros(dm.n_velocity))
    assert abs(K).max() == 0.0 and np.abs(F).max() == 0.0


def test_convection_constant_state(mesh4):
    # grad u_n = 0 leaves w -> (u_n . grad) w, and the rhs (u_n . grad) u_n vanishes
    m, dm = mesh4
    c = 0.7
    un = _interp(m, lambda x, y: (c + 0 * x, 0 * y))
    K, F = assemble_convection_newton(m, dm, un)
    w = _interp(m, lambda x, y: (x, y))
    v = _interp(m, lambda x, y: (y, 1.0 + 0 * x))
    # c d/dx (x, y) = (c, 0), against v: c int y
    assert v @ K @ w == pytest.approx(c / 2, abs=1e-12)
    assert np.abs(F).max() <= 1e-14


def test_convection_symbolic_oracle(mesh4):
    # u_n = (y, x), w = (x, 0), v = (0, x):
    # (u_n . grad) w + (w . grad) u_n = (y, 0) + (0, x); dotted with v gives x^2
    m, dm = mesh4
    un = _interp(m, lambda x, y: (y, x))
    w = _interp(m, lambda x, y: (x, 0 * y))
    v = _interp(m, lambda x, y: (0 * x, x))
    K, F = assemble_convection_newton(m, dm, un)
    assert v @ K @ w == pytest.approx(1 / 3, abs=1e-10)
    # rhs (u_n . grad) u_n = (x, y) against v: int x y
    assert v @ F == pytest.approx(1 / 4, abs=1e-10)


def test_damping_linear_exponent(mesh4):
    m, dm = mesh4
    un = np.random.default_rng(2).standard_normal(dm.n_velocity)
    K, F = assemble_damping_newton(m, dm, un, 2.5, 1.0)
    M = assemble_a0(m, dm)
    assert abs(K - 2.5 * M).max() <= 1e-13
    assert np.abs(F).max() <= 1e-14


def test_damping_zero_state(mesh4):
    m, dm = mesh4
    for s in (3.0, 4.0):
        K, F = assemble_damping_newton(m, dm, np.zeros(dm.n_velocity), 1.0, s)
        assert abs(K).max() == 0.0 and np.abs(F).max() == 0.0


def test_damping_constant_state(mesh4):
    m, dm = mesh4
    e = _interp(m, lambda x, y: (1.0 + 0 * x, 0 * y))
    K, F = assemble_damping_newton(m, dm, e, 1.0, 3.0)
    assert e @ K @ e == pytest.approx(3.0, abs=1e-10)
    # rhs c (s-1) |u|^(s-1) u against v = (1, 0)
    assert e @ F == pytest.approx(2.0, abs=1e-10)


def test_damping_rejects_small_exponent(mesh4):
    m, dm = mesh4
    with pytest.raises(ValueError):
        assemble_damping_newton(m, dm, np.zeros(dm.n_velocity), 1.0, 0.5)


# ---------------------------------------------------------------- slip load


def test_slip_rhs_examples():
    m = unit_square_mesh(5)
    dm = build_dofmap(m)
    un = np.zeros(dm.n_velocity)
    assert np.abs(assemble_slip_rhs(m, dm, un, np.zeros(dm.n_multiplier), EX1_LAW)).max() == 0
    lam = np.ones(dm.n_multiplier)
    r = assemble_slip_rhs(m, dm, un, lam, EX1_LAW)
    top = np.flatnonzero(m.vertices[:, 1] == 1.0)
    assert r[top].sum() == pytest.approx(-1.55, abs=1e-12)
    assert np.abs(np.delete(r, top)).max() == 0.0
    lam = np.random.default_rng(3).uniform(-1, 1, dm.n_multiplier)
    np.testing.assert_array_equal(
        assemble_slip_rhs(m, dm, un, -lam, EX1_LAW), -assemble_slip_rhs(m, dm, un, lam, EX1_LAW)
    )


def test_slip_rhs_shape_check():
    m = unit_square_mesh(3)
    dm = build_dofmap(m)
    with pytest.raises(ValueError):
        assemble_slip_rhs(m, dm, np.zeros(dm.n_velocity), np.zeros(5), EX1_LAW)


# ---------------------------------------------------------------- systems


def test_stokes_zero_solution():
    m = unit_square_mesh(3)
    dm = build_dofmap(m)
    s = assemble_system(m, dm, ProblemParams(mu=1.0), None, None, None)
    x = s.make_solver().solve(s.rhs)
    assert np.abs(x).max() == 0.0


def test_system_dimension_n2():
    m = unit_square_mesh(2)
    dm = build_dofmap(m)
    s = assemble_system(m, dm, ProblemParams(mu=1.0), None, None, None)
    assert s.matrix.shape == (dm.n_free_velocity + 9 + 1,) * 2
    # free velocity: x at (0.5,0.5), (0.5,1); y at (0.5,0.5); all 16 bubbles
    assert dm.n_free_velocity == 3 + 16


def _full_dirichlet(m, dm, fn):
    nv = m.n_vertices
    b = np.zeros(nv, bool)
    b[np.unique(m.boundary_edges)] = True
    mask = np.concatenate([b, b, np.zeros(2 * m.n_triangles, bool)])
    exact = _interp(m, fn)
    return dm.with_constraints(mask, np.where(mask, exact, 0.0)), exact


def test_patch_shear_flow():
    m = unit_square_mesh(4)
    dm, exact = _full_dirichlet(m, build_dofmap(m), lambda x, y: (y, 0 * x))
    s = assemble_system(m, dm, ProblemParams(mu=1.3), None, None, None)
    u, p, _ = s.split(s.make_solver().solve(s.rhs))
    assert np.abs(u - exact).max() <= 1e-9
    assert np.abs(p).max() <= 1e-9


def test_constant_pressure_gradient_patch():
    # linear pressure needs a matching body force: grad p = (1, 2)
    m = unit_square_mesh(4)
    dm, exact = _full_dirichlet(m, build_dofmap(m), lambda x, y: (x, -y))
    p_exact = m.vertices[:, 0] + 2 * m.vertices[:, 1] - 1.5
    s = assemble_system(m, dm, ProblemParams(mu=1.0), None, None,
                        lambda x, y: (1.0 + 0 * x, 2.0 + 0 * y))
    u, p, _ = s.split(s.make_solver().solve(s.rhs))
    assert np.abs(u - exact).max() <= 1e-9
    assert np.abs(p - p_exact).max() <= 1e-9


def test_constraint_residuals():
    m = unit_square_mesh(4)
    dm = build_dofmap(m)
    params = ProblemParams(mu=1.0, alpha=1.0, beta=1.0, r=3, friction=EX1_LAW)
    un = np.random.default_rng(5).standard_normal(dm.n_velocity) * ~dm.constrained
    s = assemble_system(m, dm, params, un, np.full(dm.n_multiplier, 0.5),
                        lambda x, y: (np.sin(x), np.cos(y)))
    x = s.make_solver().solve(s.rhs)
    div, mean = s.constraint_residuals(x)
    assert div <= 1e-10 and mean <= 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        ProblemParams(mu=0.0)
    with pytest.raises(ValueError):
        ProblemParams(mu=1.0, kappa=0.5)
