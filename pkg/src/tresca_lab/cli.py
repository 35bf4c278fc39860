"""Command-line front end.

    tresca-lab <command> [--config path] [--out dir] [--set key=value ...]

Every command writes CSV artifacts to the output directory and prints one
``PASS``/``FAIL`` line per verdict. The exit status is 0 iff all verdicts
pass, 1 on a failed verdict or solver error, 2 on usage/config errors.
"""

import argparse
import io
import os
import sys

import numpy as np

from .assembly import assemble_all
from .config import ConfigError, defaults, parse_config
from .control import kkt_violation, optimize
from .lab import (
    HypothesisError, convexity_check, gradient_check, max_principle_check,
    monotonicity_check, optimal_runs, oracle_compare, strictly_decreasing, sweep_eps,
    sweep_h_fixed_control, sweep_h_optimal, trace_convergence_check,
)
from .mesh import build_unit_square_mesh
from .output import atomic_write, csv_text
from .state import (
    DIRICHLET, TRAJECTORY_COLUMNS, NewtonError, Robin, StateSolver, constant_control, dump_vist,
    trajectory_rows, tresca_diagnostic,
)

COMMANDS = (
    "solve", "optimize", "sweep-h", "sweep-h-optimal", "sweep-eps", "check-convexity",
    "check-monotonicity", "check-maxprinciple", "check-trace", "gradcheck", "oracle-compare",
    "paper-suite",
)


class Context:
    """Everything a command needs, built once from the config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.echo = cfg.echo()
        self.out = cfg["output.dir"]
        self.data = cfg.problem_data()
        self.ops = assemble_all(build_unit_square_mesh(cfg["mesh.nx"], cfg["mesh.ny"]))
        self.data.check_compatibility(self.ops.mesh)
        self.variant = Robin(cfg["solver.h"]) if cfg["solver.variant"] == "robin" else DIRICHLET
        self.verdicts = []
        self.files = []
        self._runs = None

    def control(self, value):
        return constant_control(self.ops, self.data, value)

    def write(self, name, data):
        path = os.path.join(self.out, name)
        atomic_write(path, data)
        self.files.append(path)

    def report(self, rep, filename):
        self.write(filename, rep.to_csv())
        for k, v in rep.verdicts.items():
            self.verdict(f"{rep.name}.{k}", v)

    def verdict(self, name, ok):
        self.verdicts.append((name, bool(ok)))
        print(f"{'PASS' if ok else 'FAIL'} {name}")

    def optimal(self):
        if self._runs is None:
            c = self.cfg
            self._runs = optimal_runs(
                self.ops, self.data, c["sweep.h_list"], tol=c["opt.tol"], max_iters=c["opt.max_iters"],
                f_init=self.control(c["opt.f_init"]), workers=c["workers"],
            )
        return self._runs


# ---------------------------------------------------------------------------
# commands


def cmd_solve(ctx):
    traj = StateSolver(ctx.ops, ctx.data, ctx.variant).solve(ctx.control(ctx.cfg["control.f"]))
    ctx.write("trajectory.csv", csv_text(ctx.echo, TRAJECTORY_COLUMNS, trajectory_rows(traj, ctx.ops)))
    buf = io.BytesIO()
    dump_vist(traj.u, buf)
    ctx.write("trajectory.vist", buf.getvalue())
    diag = tresca_diagnostic(traj, ctx.ops, ctx.data)
    ctx.write("tresca.csv", csv_text(ctx.echo, ("time_level", "node_index", "u_value", "flux", "status"),
                                     diag.rows()))
    ctx.verdict("solve.finite", np.all(np.isfinite(traj.u)))
    ctx.verdict("solve.flux_bounded", diag.flux_bounded)
    ctx.verdict("solve.slip_sign_consistent", diag.slip_sign_consistent)


def cmd_optimize(ctx):
    c = ctx.cfg
    res = optimize(ctx.data, ctx.variant, f_init=ctx.control(c["opt.f_init"]), ops=ctx.ops,
                   tol=c["opt.tol"], max_iters=c["opt.max_iters"])
    ctx.write("opt_trace.csv", csv_text(ctx.echo, ("iter", "J", "grad_norm", "step"), res.cost_history))
    nodes = ctx.ops.mesh.nodes
    g3 = ctx.ops.gamma3_nodes
    rows = [(n + 1, int(i), nodes[i, 0], nodes[i, 1], res.f_opt[n, k])
            for n in range(res.f_opt.shape[0]) for k, i in enumerate(g3)]
    ctx.write("control.csv", csv_text(ctx.echo, ("time_level", "node_index", "x", "y", "f_value"), rows))
    Js = [r[1] for r in res.cost_history]
    print(f"J(f_opt) = {res.J_opt!r} after {res.iterations} iterations")
    ctx.verdict("optimize.converged", res.converged)
    ctx.verdict("optimize.feasible", np.all(res.f_opt <= 0))
    ctx.verdict("optimize.cost_decreasing", len(Js) < 2 or strictly_decreasing(Js))
    ctx.verdict("optimize.kkt", kkt_violation(res.f_opt, res.grad_opt) <= 1e-6)


def cmd_sweep_h(ctx):
    c = ctx.cfg
    ctx.report(sweep_h_fixed_control(ctx.ops, ctx.data, ctx.control(c["control.f"]), c["sweep.h_list"],
                                     rel_tol_h=c["lab.rel_tol_h"], lambda1=c["lab.lambda1"],
                                     workers=c["workers"], config=ctx.echo), "sweep_h.csv")


def cmd_sweep_h_optimal(ctx):
    ctx.report(sweep_h_optimal(ctx.ops, ctx.data, ctx.cfg["sweep.h_list"],
                               rel_tol_h=ctx.cfg["lab.rel_tol_h"], runs=ctx.optimal(), config=ctx.echo),
               "sweep_h_optimal.csv")


def cmd_check_trace(ctx):
    ctx.report(trace_convergence_check(ctx.ops, ctx.data, ctx.cfg["sweep.h_list"], runs=ctx.optimal(),
                                       config=ctx.echo), "trace.csv")


def cmd_sweep_eps(ctx):
    c = ctx.cfg
    ctx.report(sweep_eps(ctx.ops, ctx.data, ctx.control(c["control.f"]), c["sweep.eps_list"],
                         variant=ctx.variant, workers=c["workers"], config=ctx.echo), "sweep_eps.csv")


def _pair(ctx):
    return ctx.control(ctx.cfg["check.f1"]), ctx.control(ctx.cfg["check.f2"])


def cmd_check_convexity(ctx):
    f1, f2 = _pair(ctx)
    ctx.report(convexity_check(ctx.ops, ctx.data, f1, f2, ctx.cfg["check.mu_list"], variant=ctx.variant,
                               config=ctx.echo), "convexity.csv")


def cmd_check_monotonicity(ctx):
    f1, f2 = _pair(ctx)
    ctx.report(monotonicity_check(ctx.ops, ctx.data, f1, f2, ctx.cfg["check.mu_list"],
                                  tol_order=ctx.cfg["lab.tol_order"], variant=ctx.variant,
                                  config=ctx.echo), "monotonicity.csv")


def cmd_check_maxprinciple(ctx):
    ctx.report(max_principle_check(ctx.ops, ctx.data, ctx.control(ctx.cfg["control.f"]),
                                   tol=ctx.cfg["lab.tol_order"], variant=ctx.variant, config=ctx.echo),
               "max_principle.csv")


def cmd_gradcheck(ctx):
    c = ctx.cfg
    rng = np.random.default_rng(c["seed"])
    f = -rng.uniform(0.0, 1.0, size=ctx.control(0.0).shape)
    ctx.report(gradient_check(ctx.ops, ctx.data, f, variant=ctx.variant, n_coords=c["gradcheck.n_coords"],
                              delta=c["gradcheck.delta"], seed=c["seed"], config=ctx.echo),
               "gradcheck.csv")


def cmd_oracle_compare(ctx):
    c = ctx.cfg
    ops = assemble_all(build_unit_square_mesh(c["oracle.nx"], c["oracle.ny"]))
    data = ctx.data.replace(q=c["oracle.q"], n_steps=c["oracle.steps"])
    f = np.zeros((data.n_steps, ops.gamma3_nodes.size))
    ctx.report(oracle_compare(ops, data, f, c["oracle.eps_list"], variant=ctx.variant, config=ctx.echo),
               "oracle_compare.csv")


def cmd_paper_suite(ctx):
    for fn in (cmd_sweep_h, cmd_sweep_h_optimal, cmd_check_trace, cmd_sweep_eps, cmd_check_convexity,
               cmd_check_monotonicity, cmd_check_maxprinciple, cmd_gradcheck, cmd_oracle_compare):
        fn(ctx)
    ctx.write("verdicts.csv", csv_text(ctx.echo, ("check", "pass"), ctx.verdicts))


DISPATCH = {
    "solve": cmd_solve,
    "optimize": cmd_optimize,
    "sweep-h": cmd_sweep_h,
    "sweep-h-optimal": cmd_sweep_h_optimal,
    "sweep-eps": cmd_sweep_eps,
    "check-convexity": cmd_check_convexity,
    "check-monotonicity": cmd_check_monotonicity,
    "check-maxprinciple": cmd_check_maxprinciple,
    "check-trace": cmd_check_trace,
    "gradcheck": cmd_gradcheck,
    "oracle-compare": cmd_oracle_compare,
    "paper-suite": cmd_paper_suite,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tresca-lab",
        description="Boundary optimal control of parabolic Tresca-friction problems",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    return parser


def dispatch(command, cfg):
    """Run ``command``; returns ``(exit_status, context)``."""
    if command not in DISPATCH:
        raise ValueError(f"unknown command {command!r}")
    ctx = Context(cfg)
    try:
        DISPATCH[command](ctx)
    except (NewtonError, HypothesisError, RuntimeError, ValueError) as exc:
        print(f"ERROR {command}: {exc}", file=sys.stderr)
        return 1, ctx
    ok = all(v for _, v in ctx.verdicts)
    return (0 if ok else 1), ctx


def load_config(path=None, overrides=(), out=None):
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = defaults()
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, _, v = item.partition("=")
        pairs.append((k.strip(), v))
    if out is not None:
        pairs.append(("output.dir", out))
    return cfg.with_overrides(pairs) if pairs else cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set, args.out)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status, _ = dispatch(args.command, cfg)
    return status


if __name__ == "__main__":
    sys.exit(main())
