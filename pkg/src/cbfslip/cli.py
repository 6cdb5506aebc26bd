"""Command-line front end: ``cbfslip solve|convergence|check``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import ConfigError, RunConfig, load_config, parse_grids
from .fespace import build_dofmap
from .forms import assemble_system, omega
from .linalg import SolveError, write_matrix_market
from .manufactured import convergence_table, write_convergence_csv
from .mesh import unit_square_mesh, write_mesh
from .solver import ConstraintViolation, IterationReport, complementarity, solve_cbfed
from .svgplot import write_convergence_svg

__all__ = ["main", "build_parser", "cmd_solve", "cmd_convergence", "cmd_check"]

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("cbfslip")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for solver failure here
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run configuration")
    common.add_argument("--preset", choices=("ex1", "ex2", "ex3"), help="built-in example")
    common.add_argument("--out", help="output directory")
    common.add_argument("--grids", help="comma-separated mesh sizes, e.g. 5,10,20")
    common.add_argument("--nref", type=int, help="reference mesh size")
    common.add_argument("--n", type=int, help="mesh size for a single solve")
    common.add_argument("--seed", type=int, help="seed for the sampling checks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="cbfslip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve once and write the fields")
    sub.add_parser("convergence", parents=[common], help="run a convergence study")
    sub.add_parser("check", parents=[common], help="run the self-check suites")
    return parser


def resolve_config(args) -> RunConfig:
    """Config file first, then command-line flags on top."""
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.preset:
        cfg.case = args.preset
    if args.out:
        cfg.out = args.out
    if args.grids:
        cfg.grids = parse_grids(args.grids)
    if args.nref is not None:
        cfg.n_ref = args.nref
    if args.n is not None:
        cfg.n = args.n
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _write_table(path: Path, header: str, columns) -> None:
    data = np.column_stack(columns) if len(columns[0]) else np.empty((0, len(columns)))
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10e")


def _summary(report: IterationReport) -> str:
    return (
        f"outer iterations {report.outer_iters} "
        f"({'converged' if report.converged else 'cap reached'}), "
        f"final increment {report.final_increment:.3e}, "
        f"max inner {max(report.inner_iters, default=0)}"
    )


def cmd_solve(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.problem()
    mesh = unit_square_mesh(cfg.n)
    dm = build_dofmap(mesh)
    report_path = out / "report.jsonl"
    if cfg.export_mesh:
        write_mesh(mesh, out / "mesh.txt")
    try:
        state, report = solve_cbfed(
            mesh, params, cfg.solver_config(), cfg.forcing(), dofmap=dm,
            degree=cfg.volume_degree, edge_degree=cfg.edge_degree,
        )
    except (SolveError, ConstraintViolation) as exc:
        getattr(exc, "report", IterationReport()).write_jsonl(report_path)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    report.write_jsonl(report_path)

    nv = mesh.n_vertices
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    _write_table(out / "nodes.csv", "x,y,u_x,u_y,p",
                 [x, y, state.u[:nv], state.u[nv : 2 * nv], state.p])
    ut = dm.tangential_velocity(state.u)
    xs = mesh.vertices[dm.multiplier_vertices, 0]
    if params.friction is not None:
        shear = omega(np.abs(ut), params.friction) * state.lam
    else:
        shear = np.zeros_like(ut)
    _write_table(out / "gamma1.csv", "x,u_tau,lambda,omega_lambda", [xs, ut, state.lam, shear])
    if cfg.export_matrix:
        system = assemble_system(mesh, dm, params, state.u, None, None,
                                 degree=cfg.volume_degree)
        write_matrix_market(system.matrix, out / "matrix.mtx",
                            comment=f" linearised system, n={cfg.n}")
    frac, n_pass, n_total = complementarity(state, dm)
    print(_summary(report))
    print(f"complementarity: {n_pass}/{n_total} slip nodes ({frac:.1%})")
    if not report.converged:
        print("warning: outer iteration cap reached before the tolerance", file=sys.stderr)
    print(f"wrote {out}/nodes.csv, {out}/gamma1.csv, {report_path}")
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    case = cfg.manufactured()
    if case is None:
        raise ConfigError("convergence needs a preset case (ex1, ex2 or ex3)")
    solver_cfg = cfg.solver_config()
    t0 = time.perf_counter()

    def solve(case, n, config):
        mesh = unit_square_mesh(n)
        state, report = solve_cbfed(
            mesh, case.params, config, case.forcing,
            degree=cfg.volume_degree, edge_degree=cfg.edge_degree,
        )
        return mesh, state, report

    def progress(tag, n, report):
        label = "reference" if tag == "ref" else "grid"
        print(f"{label} {n}: {_summary(report)} [{time.perf_counter() - t0:.0f}s]", flush=True)

    report_path = out / f"report_{cfg.case}.jsonl"
    try:
        result = convergence_table(
            case, cfg.study_grids(), cfg.study_n_ref(), solver_cfg,
            require_nested=cfg.require_nested, solve=solve, callback=progress,
        )
    except (SolveError, ConstraintViolation) as exc:
        partial = getattr(exc, "report", None)
        if partial is not None:
            partial.write_jsonl(report_path)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    with open(report_path, "w") as fh:
        for key, rep in result.all_reports.items():
            tag = {"grid": cfg.study_n_ref(), "reference": True} if key == "ref" else {"grid": key}
            for rec in rep.records:
                fh.write(json.dumps({**tag, **rec}) + "\n")
    csv_path = out / f"convergence_{cfg.case}.csv"
    svg_path = out / f"convergence_{cfg.case}.svg"
    write_convergence_csv(result.rows, csv_path)
    write_convergence_svg(result.rows, svg_path, title=f"{cfg.case}: error vs h")
    print(csv_path.read_text(), end="")
    print(f"wrote {csv_path}, {svg_path}, {report_path}")
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    results = run_checks(cfg.seed, cfg.volume_degree, cfg.edge_degree)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_CHECK
    print(f"all {len(results)} checks passed")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "check": cmd_check}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
