"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from tresca_lab._kernels import _fallback
from tresca_lab.assembly import ProblemData, assemble_all
from tresca_lab.mesh import build_unit_square_mesh
from tresca_lab.oracle import build_step_problem
from tresca_lab.state import DIRICHLET

try:
    from tresca_lab._kernels import _core
except ImportError:
    _core = None


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_triplets(n, repeat):
    m = build_unit_square_mesh(n, n)
    out = {"python": _best(lambda: _fallback.p1_triplets(m.nodes, m.triangles), repeat)}
    if _core is not None:
        out["compiled"] = _best(lambda: _core.p1_triplets(m.nodes, m.triangles), repeat)
    return f"p1_triplets mesh({n},{n})", out


def bench_sweep(n, repeat, sweeps=20):
    ops = assemble_all(build_unit_square_mesh(n, n))
    data = ProblemData(q=2.0, n_steps=4)
    prob = build_step_problem(ops, data, np.zeros(ops.n), np.zeros(ops.gamma3_nodes.size), DIRICHLET)

    def run(mod):
        x = np.zeros(prob.c.size)
        for _ in range(sweeps):
            mod.cd_sweep(prob.A_dense, prob.c, prob.tau, x)

    out = {"python": _best(lambda: run(_fallback), repeat)}
    if _core is not None:
        out["compiled"] = _best(lambda: run(_core), repeat)
    return f"cd_sweep x{sweeps} mesh({n},{n}) n={prob.c.size}", out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':40s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, t in (bench_triplets(16, args.repeat), bench_triplets(64, args.repeat),
                    bench_sweep(4, args.repeat), bench_sweep(8, args.repeat)):
        c = t.get("compiled")
        cs = f"{c:13.3e}" if c is not None else f"{'-':>13s}"
        sp = f"{t['python'] / c:8.1f}" if c else f"{'-':>8s}"
        print(f"{name:40s} {t['python']:12.3e} {cs} {sp}")


if __name__ == "__main__":
    main()
