import pytest

from cbfslip.config import ConfigError, RunConfig, load_config, parse_config, parse_grids


def test_defaults():
    cfg = parse_config("")
    assert cfg.case == "ex1" and cfg.n == 10
    sc = cfg.solver_config()
    assert (sc.eta, sc.max_outer, sc.max_inner, sc.eps_outer) == (1.0, 50, 20, 1e-8)


def test_preset_eta():
    assert parse_config("case = ex3").solver_config().eta == 0.8


def test_flat_keys_and_comments():
    cfg = parse_config("""
    # a comment
    case = ex2
    grids = 5, 10,20
    n_ref = 80   ; trailing comment
    max_inner = 30
    warm_start = no
    """.replace("\n    ", "\n"))
    assert cfg.case == "ex2" and cfg.grids == (5, 10, 20) and cfg.n_ref == 80
    assert cfg.solver_config().max_inner == 30 and not cfg.warm_start


def test_physics_override():
    cfg = parse_config("case = ex1\nmu = 2.5\nrho = 4")
    p = cfg.problem()
    assert p.mu == 2.5 and p.friction.rho == 4.0 and p.friction.a == 1.55


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="'colour'"):
        parse_config("case = ex1\ncolour = blue")


def test_unknown_section():
    with pytest.raises(ConfigError, match="section"):
        parse_config("[run]\ncase = ex1\n[extra]\nx = 1")


@pytest.mark.parametrize(
    "text",
    ["case = ex7", "n = ten", "warm_start = maybe", "grids = 5,x", "mu = -1", "n = 0", "eta = -2",
     "case = custom\nalpha = 1", "case = custom\nmu = 1\na = 2"],
)
def test_invalid_values(text):
    with pytest.raises(ConfigError):
        parse_config(text).validate()


def test_custom_case():
    cfg = parse_config("case = custom\nmu = 1\na = 2\nb = 1\nrho = 3\ngrids = 4,8").validate()
    assert cfg.forcing() is None and cfg.manufactured() is None
    assert cfg.problem().friction.b == 1.0
    assert cfg.study_n_ref() == 32


def test_parse_grids():
    assert parse_grids("5,10,15") == (5, 10, 15)
    with pytest.raises(ConfigError):
        parse_grids(",")


def test_load_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_runconfig_is_plain_dataclass():
    assert RunConfig().volume_degree == 6 and RunConfig().edge_degree == 5
