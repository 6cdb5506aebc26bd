import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from cbfslip.fespace import build_dofmap
from cbfslip.forms import FrictionLaw, ProblemParams, assemble_system
from cbfslip.linalg import (
    Factorization,
    ResidualContractError,
    SaddleSolver,
    SingularMatrixError,
    csr_from_coo,
    solve,
    spmv,
    write_matrix_market,
)
from cbfslip.mesh import unit_square_mesh


def test_spmv_small():
    np.testing.assert_array_equal(spmv(sp.identity(4, format="csr"), np.arange(4.0)), np.arange(4.0))
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 3.0]]))
    np.testing.assert_array_equal(spmv(A, np.ones(2)), [3.0, 3.0])


def test_spmv_dense_oracle(rng):
    A = sp.random(50, 50, density=0.1, random_state=7, format="csr")
    x = rng.standard_normal(50)
    ref = A.toarray() @ x
    assert np.linalg.norm(spmv(A, x) - ref) <= 1e-13 * np.linalg.norm(ref)


def test_spmv_mismatch():
    with pytest.raises(ValueError):
        spmv(sp.identity(3, format="csr"), np.ones(4))


def test_csr_from_coo_sums_duplicates():
    A = csr_from_coo([0, 0, 1, 0], [1, 1, 0, 0], [1.0, 2.0, 5.0, 4.0], (2, 2))
    np.testing.assert_array_equal(A.toarray(), [[4.0, 3.0], [5.0, 0.0]])
    assert A.has_sorted_indices and A.nnz == 3


def test_solve_identity(rng):
    b = rng.standard_normal(6)
    np.testing.assert_array_equal(solve(sp.identity(6, format="csr"), b), b)


def test_solve_spd_closed_form():
    # tridiag(-1, 2, -1) of size 3 has inverse [[3,2,1],[2,4,2],[1,2,3]] / 4
    A = sp.csr_matrix(np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]]))
    b = np.array([1.0, -2.0, 0.5])
    inv = np.array([[3.0, 2, 1], [2, 4, 2], [1, 2, 3]]) / 4
    np.testing.assert_allclose(solve(A, b), inv @ b, atol=1e-12)


def test_singular_detected():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        solve(A, np.ones(2))


def test_residual_contract():
    # roundoff in a dense solve cannot meet an absurd tolerance
    A = sp.csr_matrix(np.random.default_rng(0).standard_normal((30, 30)))
    f = Factorization(A, tol=1e-30, refine=1)
    with pytest.raises(ResidualContractError):
        f.solve(np.ones(30))
    assert f.last_residual > 1e-30


def test_factorization_input_checks():
    with pytest.raises(ValueError):
        Factorization(sp.csr_matrix(np.ones((2, 3))))
    f = Factorization(sp.identity(2, format="csr"))
    with pytest.raises(ValueError):
        f.solve(np.array([1.0, np.nan]))


def _stokes(n, un=None, seed=0):
    m = unit_square_mesh(n)
    dm = build_dofmap(m)
    params = ProblemParams(mu=1.2, alpha=2.0, beta=1.5, r=3, friction=FrictionLaw(1.55, 1.53, 8.0))
    if un is not None:
        un = np.random.default_rng(seed).standard_normal(dm.n_velocity) * ~dm.constrained * un
    s = assemble_system(m, dm, params, un, np.full(dm.n_multiplier, 0.3),
                        lambda x, y: (np.sin(3 * x) + y, x * y))
    return s


@pytest.mark.parametrize("n", [2, 4, 7])
def test_saddle_solver_matches_direct(n):
    s = _stokes(n)
    x = s.make_solver().solve(s.rhs)
    ref = spla.spsolve(sp.csc_matrix(s.matrix), s.rhs)
    np.testing.assert_allclose(x, ref, atol=1e-10 * np.abs(ref).max())


def test_stokes_end_to_end_residual():
    s = _stokes(4)
    solver = s.make_solver()
    x = solver.solve(s.rhs)
    assert solver.last_residual <= 1e-10
    div, mean = s.constraint_residuals(x)
    assert div <= 1e-10 and mean <= 1e-10


def test_saddle_solver_reuse_and_refactor():
    s0 = _stokes(6, un=0.01)
    solver = s0.make_solver()
    solver.solve(s0.rhs)
    assert solver.n_factorizations == 1
    # a small perturbation is absorbed by refinement with the old factors
    s1 = _stokes(6, un=0.0101)
    solver.update(s1.matrix)
    x = solver.solve(s1.rhs)
    assert solver.last_residual <= 1e-10
    np.testing.assert_allclose(x, spla.spsolve(sp.csc_matrix(s1.matrix), s1.rhs), atol=1e-9)
    # a large change forces a new factorisation
    s2 = _stokes(6, un=5.0, seed=3)
    solver.update(s2.matrix)
    x = solver.solve(s2.rhs)
    assert solver.n_factorizations >= 2
    assert solver.last_residual <= 1e-10


def test_saddle_solver_structure_checks():
    s = _stokes(3)
    A = s.matrix.tolil()
    i, j = s.bubble_pairs()[0][0], s.bubble_pairs()[1][0]
    A[i, j] = A[j, i] = 1.0  # couples bubbles of different elements
    with pytest.raises(ValueError):
        SaddleSolver(A.tocsr(), s.bubble_pairs(), s.pressure_slice)


def test_matrix_market(tmp_path):
    s = _stokes(2)
    path = tmp_path / "A.mtx"
    write_matrix_market(s.matrix, path, comment=" test")
    assert path.read_text().splitlines()[0] == "%%MatrixMarket matrix coordinate real general"
    B = scipy.io.mmread(str(path))
    assert abs(B - s.matrix).max() == 0.0
