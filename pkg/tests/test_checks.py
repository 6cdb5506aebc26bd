import numpy as np
import pytest

from cbfslip.checks import (
    check_inf_sup,
    check_monotonicity,
    check_patch,
    check_quadrature,
    inf_sup_constant,
    monotonicity_slack,
    patch_test,
    run_checks,
    sample_pairs,
)


def test_r1_is_an_identity(rng):
    # for r = 1 both sides reduce to |x - y|^2
    x, y = sample_pairs(rng, 2000)
    s1, s2 = monotonicity_slack(x, y, 1)
    assert np.abs(s1).max() <= 1e-15 and np.abs(s2).max() <= 1e-15


def test_monotonicity_suite_passes():
    res = check_monotonicity(seed=0)
    assert len(res) == 5 and all(r.passed for r in res)


def test_slack_detects_violation():
    # a deliberately non-monotone map must show negative slack
    x = np.array([[1.0, 0.0]])
    y = np.array([[2.0, 0.0]])
    s1, s2 = monotonicity_slack(x, y, 3)
    assert s1[0] > 0 and s2[0] > 0
    s1, _ = monotonicity_slack(x, y, 0.5)  # exponent below the admissible range
    assert s1[0] < 0


def test_quadrature_checks():
    assert all(r.passed for r in check_quadrature(6, 5))
    failing = check_quadrature(1, 1)
    assert not any(r.passed for r in failing)


def test_patch():
    eu, ep = patch_test()
    assert eu <= 1e-9 and ep <= 1e-9
    assert check_patch()[0].passed


def test_inf_sup_frozen():
    results, vals = check_inf_sup()
    assert results[0].passed
    np.testing.assert_allclose(vals, [0.3454, 0.3434, 0.3431], atol=5e-5)
    assert inf_sup_constant(2) > 0


def test_run_checks_lowered_degree():
    res = run_checks(volume_degree=1)
    failed = {r.name for r in res if not r.passed}
    assert "triangle rule (requested degree 1)" in failed
    assert all(r.passed for r in res if r.name.startswith("monotonicity"))


def test_result_line():
    r = check_patch()[0]
    assert r.line().startswith("PASS  Stokes patch test")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_seeds(seed):
    assert all(r.passed for r in check_monotonicity(seed=seed, n_pairs=2000))
