"""Strict flat key/value run configuration."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .forms import EDGE_DEGREE, VOLUME_DEGREE, FrictionLaw, ProblemParams
from .manufactured import CASES, ManufacturedCase, get_case
from .solver import SolverConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "parse_grids"]


class ConfigError(ValueError):
    pass


_PHYSICS = ("mu", "alpha", "beta", "kappa", "r", "q", "a", "b", "rho")


@dataclass
class RunConfig:
    """Everything a CLI command needs.

    ``case`` is a preset name (``ex1``, ``ex2``, ``ex3``) or ``custom``; a
    custom case takes its physics from the ``physics`` overrides and runs
    with zero forcing. Physics keys given for a preset override the preset.
    """

    case: str = "ex1"
    physics: dict = field(default_factory=dict)
    eta: float | None = None
    eps_outer: float = 1e-8
    eps_inner: float = 1e-8
    max_outer: int = 50
    max_inner: int = 20
    relative_outer: bool = False
    warm_start: bool = True
    n: int = 10
    grids: tuple | None = None
    n_ref: int | None = None
    require_nested: bool = False
    out: str = "out"
    seed: int = 0
    volume_degree: int = VOLUME_DEGREE
    edge_degree: int = EDGE_DEGREE
    export_mesh: bool = False
    export_matrix: bool = False

    def problem(self) -> ProblemParams:
        if self.case == "custom":
            missing = [k for k in ("mu",) if k not in self.physics]
            if missing:
                raise ConfigError(f"custom case needs key(s): {', '.join(missing)}")
            ph = dict(self.physics)
            fr = {k: ph.pop(k) for k in ("a", "b", "rho") if k in ph}
            friction = None
            if fr:
                if len(fr) != 3:
                    raise ConfigError("friction needs all of a, b, rho")
                friction = FrictionLaw(fr["a"], fr["b"], fr["rho"])
            return ProblemParams(friction=friction, **ph)
        return self.manufactured().params

    def manufactured(self) -> ManufacturedCase | None:
        if self.case == "custom":
            return None
        base = get_case(self.case)
        ph = dict(self.physics)
        fr = {k: ph.pop(k) for k in ("a", "b", "rho") if k in ph}
        params = replace(base.params, **ph)
        if fr:
            old = base.params.friction
            params = replace(params, friction=FrictionLaw(
                fr.get("a", old.a), fr.get("b", old.b), fr.get("rho", old.rho)))
        return replace(base, params=params)

    def forcing(self):
        case = self.manufactured()
        return None if case is None else case.forcing

    def solver_config(self) -> SolverConfig:
        eta = self.eta
        if eta is None:
            case = self.manufactured()
            eta = 1.0 if case is None else case.eta
        return SolverConfig(
            eta=eta,
            eps_outer=self.eps_outer,
            eps_inner=self.eps_inner,
            max_outer=self.max_outer,
            max_inner=self.max_inner,
            relative_outer=self.relative_outer,
            warm_start=self.warm_start,
        )

    def study_grids(self):
        if self.grids is not None:
            return list(self.grids)
        case = self.manufactured()
        if case is None:
            raise ConfigError("a custom case needs an explicit grid list")
        return list(case.grids)

    def study_n_ref(self) -> int:
        if self.n_ref is not None:
            return self.n_ref
        case = self.manufactured()
        if case is None:
            return 4 * max(self.study_grids())
        return case.n_ref

    def validate(self) -> RunConfig:
        """Build every derived object once so errors surface before a run."""
        try:
            self.problem()
            self.solver_config()
            if self.n < 1:
                raise ValueError(f"n must be >= 1, got {self.n}")
            if self.grids is not None and any(g < 1 for g in self.grids):
                raise ValueError(f"grid sizes must be >= 1, got {self.grids}")
            if self.n_ref is not None and self.n_ref < 1:
                raise ValueError(f"n_ref must be >= 1, got {self.n_ref}")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return self


def parse_grids(text: str) -> tuple:
    try:
        grids = tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise ConfigError(f"grids must be comma-separated integers, got {text!r}") from None
    if not grids:
        raise ConfigError("empty grid list")
    return grids


def _bool(key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _convert(key: str, text: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    try:
        if key in _PHYSICS:
            return float(text)
        if key == "case":
            name = text.strip().lower()
            if name != "custom" and name not in CASES:
                raise ConfigError(f"case: unknown value {text!r}")
            return name
        if key == "grids":
            return parse_grids(text)
        kind = kinds[key]
        if kind == "bool":
            return _bool(key, text)
        if kind == "int" or kind == "int | None":
            return int(text)
        if kind == "float" or kind == "float | None":
            return float(text)
        return text.strip()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


_KEYS = {f.name for f in fields(RunConfig)} - {"physics"}


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` lines (``#``/``;`` comments, optional ``[run]``)."""
    body = text if text.lstrip().startswith("[") else "[run]\n" + text
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(body)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    extra = [s for s in cp.sections() if s != "run"]
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(extra)}")
    cfg = RunConfig()
    if not cp.has_section("run"):
        return cfg
    for key, value in cp.items("run"):
        if key in _PHYSICS:
            cfg.physics[key] = _convert(key, value)
        elif key in _KEYS:
            setattr(cfg, key, _convert(key, value))
        else:
            raise ConfigError(f"unknown key {key!r}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
