"""Compare the compiled and numpy element kernels.

    python benchmarks/bench_kernels.py [--sizes 20,40,80] [--repeat 5]

Times the Newton element kernel (convection plus two damping terms, as in
the pumping examples) and the CSR matrix-vector product on the assembled
system, for each available backend, and checks that the outputs agree.
"""
import argparse
import time

import numpy as np

from cbfslip._kernels import available_backends
from cbfslip.fespace import build_dofmap, element_data
from cbfslip.forms import ProblemParams, assemble_system
from cbfslip.mesh import unit_square_mesh


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="20,40,80")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy backend only")
    damp_c = np.array([1.2, -1.0])
    damp_s = np.array([4.0, 3.0])

    header = f"{'kernel':<8}{'n':>5}{'elements':>10}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}{'max diff':>11}"
    print(header)
    for n in (int(s) for s in args.sizes.split(",")):
        mesh = unit_square_mesh(n)
        dm = build_dofmap(mesh)
        ed = element_data(mesh, 6)
        u = np.random.default_rng(n).standard_normal(dm.n_velocity)
        coef = np.ascontiguousarray(u[dm.cell_dofs])
        system = assemble_system(mesh, dm, ProblemParams(mu=1.0, beta=1.2, r=4.0), u, None, None)
        A = system.matrix
        x = np.random.default_rng(0).standard_normal(A.shape[1])

        rows = {
            "newton": lambda mod: mod.newton_local(
                ed.table.values, ed.grads, ed.wdet, coef, True, damp_c, damp_s, 1e-10
            )[0],
            "spmv": lambda mod: mod.csr_spmv(
                A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, x
            ),
        }
        for name, run in rows.items():
            times, outs = [], []
            for mod in backends.values():
                t, out = best_of(lambda: run(mod), args.repeat)
                times.append(t)
                outs.append(out)
            line = f"{name:<8}{n:>5}{mesh.n_triangles:>10}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if len(times) > 1:
                diff = float(np.abs(outs[0] - outs[1]).max())
                line += f"{times[0] / times[1]:>9.1f}x{diff:>11.1e}"
            print(line)


if __name__ == "__main__":
    main()
