"""Numerical checks of the convergence and structure results.

Every check returns a :class:`SweepReport`: rows of metrics ordered by the
swept parameter, boolean verdicts computed only from those rows, and
runtimes (kept out of the CSV so reruns are byte-identical).
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import coercivity_lower_bound, profile_values
from .control import cost_from_state, finite_difference_check, optimize
from .mesh import GAMMA1
from .output import csv_text
from .oracle import build_step_problem, oracle_trajectory, solve_step_oracle
from .state import (
    BOUNDARY, DIRICHLET, Robin, StateSolver, norm_F, norm_Hcal, norm_Linf_H, norm_trace,
    norm_Vcal,
)

TOL_ORDER = 1e-8
REL_TOL_H = 0.05


class HypothesisError(ValueError):
    """Data violate the sign hypotheses g >= 0, b >= 0, u_b >= 0, f <= 0."""


@dataclass(eq=False)
class SweepReport:
    name: str
    columns: tuple
    rows: list
    verdicts: dict
    config: str = ""
    runtimes: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.verdicts.values())

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self):
        return csv_text(self.config, self.columns, self.rows)

    def summary_lines(self):
        for k, v in self.verdicts.items():
            yield f"{'PASS' if v else 'FAIL'} {self.name}.{k}"


def strictly_decreasing(vals):
    return len(vals) >= 2 and all(b < a for a, b in zip(vals, vals[1:]))


def decreasing_to_fraction(vals, rel_tol):
    return strictly_decreasing(vals) and vals[-1] < rel_tol * vals[0]


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _timed(fn):
    def run(x):
        t0 = time.perf_counter()
        out = fn(x)
        return out, time.perf_counter() - t0
    return run


def _echo(data, extra=""):
    s = (f"g={data.g[0]}:{data.g[1]!r} b={data.b[1]!r} u_b={data.u_b[0]}:{data.u_b[1]!r} "
         f"q={data.q!r} T={data.T!r} steps={data.n_steps} M={data.M_reg!r} eps={data.eps!r}")
    return s + (" " + extra if extra else "")


def require_sign_hypotheses(ops, data, *controls):
    if not data.sign_hypotheses(ops.mesh):
        raise HypothesisError("sign hypotheses require g >= 0, b >= 0 and u_b >= 0")
    for f in controls:
        if np.any(np.asarray(f) > 0):
            raise HypothesisError("controls must lie in F_- (f <= 0)")


# ---------------------------------------------------------------------------
# regularization


def sweep_eps(ops, data, f, eps_list, variant=DIRICHLET, workers=None, config=None):
    """Cauchy differences of the smoothed states along a decreasing eps list."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2 or any(e <= 0 for e in eps_list) or not strictly_decreasing(eps_list):
        raise ValueError("eps_list must be strictly decreasing, positive, length >= 2")
    data.check_compatibility(ops.mesh)
    runs = _map(_timed(lambda e: StateSolver(ops, data, variant, e).solve(f)), eps_list, workers)
    dt = data.dt
    rows = []
    for k in range(len(eps_list) - 1):
        d = runs[k][0].u - runs[k + 1][0].u
        rows.append((eps_list[k], eps_list[k + 1], norm_Vcal(d, ops, dt), norm_Linf_H(d, ops)))
    report = SweepReport(
        "sweep_eps",
        ("eps_coarse", "eps_fine", "cauchy_Vcal", "cauchy_Linf_H"),
        rows,
        {},
        config or _echo(data, f"variant={variant.label()}"),
        [t for _, t in runs],
    )
    report.verdicts["cauchy_Vcal_decreasing"] = strictly_decreasing(report.column("cauchy_Vcal"))
    report.verdicts["cauchy_Linf_H_decreasing"] = strictly_decreasing(report.column("cauchy_Linf_H"))
    return report


def oracle_compare(ops, data, f, eps_list, variant=DIRICHLET, config=None):
    """Smoothed Newton steps against the exact-friction oracle.

    For every level the step is taken from the oracle's own previous state,
    so the error isolates the smoothing. Also reports the trajectory gap.
    """
    eps_list = [float(e) for e in eps_list]
    f = np.asarray(f, dtype=float)
    t0 = time.perf_counter()
    u_or = oracle_trajectory(ops, data, f, variant)
    rows, runtimes = [], [time.perf_counter() - t0]
    for eps in eps_list:
        t0 = time.perf_counter()
        solver = StateSolver(ops, data, variant, eps)
        step_err = max(
            float(np.max(np.abs(solver.step(u_or[n - 1], f[n - 1]) - u_or[n])))
            for n in range(1, data.n_steps + 1)
        )
        traj = solver.solve(f)
        rows.append((eps, step_err, norm_Linf_H(traj.u - u_or, ops), step_err / eps))
        runtimes.append(time.perf_counter() - t0)
    report = SweepReport(
        "oracle_compare",
        ("eps", "step_err_inf", "traj_err_Linf_H", "step_err_over_eps"),
        rows, {}, config or _echo(data, f"variant={variant.label()}"), runtimes,
    )
    errs = report.column("step_err_inf")
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    report.info["ratios"] = ratios
    report.info["C_observed"] = max(report.column("step_err_over_eps"))
    report.verdicts["errors_decreasing"] = strictly_decreasing(errs)
    report.verdicts["ratio_near_2"] = bool(ratios) and all(1.6 <= r <= 2.4 for r in ratios)
    report.verdicts["final_below_1e-3"] = errs[-1] < 1e-3
    return report


def oracle_step_agreement(ops, data, u_prev, f_n, eps, variant=DIRICHLET):
    """Infinity-norm gap between one Newton step and one oracle step."""
    prob = build_step_problem(ops, data, u_prev, f_n, variant)
    x = prob.lift(solve_step_oracle(prob))
    y = StateSolver(ops, data, variant, eps).step(u_prev, f_n)
    return float(np.max(np.abs(x - y)))


# ---------------------------------------------------------------------------
# h -> infinity


def sweep_h_fixed_control(ops, data, f, h_list, rel_tol_h=REL_TOL_H, lambda1=1.0, workers=None,
                          config=None):
    """Robin states against the Dirichlet state for a fixed control."""
    h_list = _check_h(h_list)
    data.check_compatibility(ops.mesh)
    t0 = time.perf_counter()
    u_f = StateSolver(ops, data, DIRICHLET).solve(f)
    t_dir = time.perf_counter() - t0
    runs = _map(_timed(lambda h: StateSolver(ops, data, Robin(h)).solve(f)), h_list, workers)
    dt = data.dt
    b = profile_values(data.b, ops.mesh.nodes)
    rows = []
    for h, (traj, _) in zip(h_list, runs):
        d = traj.u - u_f.u
        rows.append((
            h,
            norm_Vcal(d, ops, dt),
            norm_Linf_H(d, ops),
            norm_trace(traj.u - b[None, :], ops, dt, GAMMA1),
            coercivity_lower_bound(h, lambda1),
        ))
    report = SweepReport(
        "sweep_h_fixed_control",
        ("h", "err_Vcal", "err_Linf_H", "err_trace_gamma1", "coercivity_bound"),
        rows, {}, config or _echo(data), [t_dir] + [t for _, t in runs],
    )
    for m in ("err_Vcal", "err_Linf_H", "err_trace_gamma1"):
        report.verdicts[f"{m}_converging"] = decreasing_to_fraction(report.column(m), rel_tol_h)
    tr = report.column("err_trace_gamma1")
    report.info["trace_ratios"] = [a / b if b > 0 else math.inf for a, b in zip(tr, tr[1:])]
    return report


def _check_h(h_list):
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2 or any(h <= 0 for h in h_list) or not all(b > a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly increasing, positive, length >= 2")
    return h_list


@dataclass(eq=False)
class OptimalRuns:
    h_list: list
    dirichlet: object
    robin: list
    runtimes: list


def optimal_runs(ops, data, h_list, tol=1e-8, max_iters=500, f_init=None, workers=None):
    """Optimal controls of the Dirichlet problem and of every Robin(h) problem."""
    h_list = _check_h(h_list)
    require_sign_hypotheses(ops, data)
    data.check_compatibility(ops.mesh)
    variants = [DIRICHLET] + [Robin(h) for h in h_list]
    runs = _map(
        _timed(lambda v: optimize(data, v, f_init=f_init, ops=ops, tol=tol, max_iters=max_iters)),
        variants, workers,
    )
    return OptimalRuns(h_list, runs[0][0], [r for r, _ in runs[1:]], [t for _, t in runs])


def sweep_h_optimal(ops, data, h_list, rel_tol_h=REL_TOL_H, runs=None, config=None, **kw):
    runs = runs or optimal_runs(ops, data, h_list, **kw)
    dt = data.dt
    ref = runs.dirichlet
    rows = []
    for h, res in zip(runs.h_list, runs.robin):
        d = res.state_opt.u - ref.state_opt.u
        rows.append((
            h,
            norm_F(res.f_opt - ref.f_opt, ops, dt),
            norm_Vcal(d, ops, dt),
            norm_Linf_H(d, ops),
            norm_trace(d, ops, dt, GAMMA1),
            abs(res.J_opt - ref.J_opt),
            res.J_opt,
            bool(res.converged),
        ))
    report = SweepReport(
        "sweep_h_optimal",
        ("h", "err_f_F", "err_Vcal", "err_Linf_H", "err_trace_gamma1", "J_gap", "J_h", "converged"),
        rows, {}, config or _echo(data), list(runs.runtimes),
        {"J_opt": ref.J_opt, "dirichlet_converged": bool(ref.converged)},
    )
    for m in ("err_f_F", "err_Vcal", "err_Linf_H", "err_trace_gamma1"):
        report.verdicts[f"{m}_converging"] = decreasing_to_fraction(report.column(m), rel_tol_h)
    gaps = report.column("J_gap")
    J_opt = ref.J_opt
    final_ok = gaps[-1] < 1e-8 if J_opt < 1e-6 else gaps[-1] < 0.01 * J_opt
    report.verdicts["J_gap_converging"] = strictly_decreasing(gaps) and final_ok
    report.verdicts["all_converged"] = bool(ref.converged) and all(report.column("converged"))
    return report


def trace_convergence_check(ops, data, h_list, runs=None, config=None, **kw):
    """Full-boundary trace gap of the optimal Robin states."""
    runs = runs or optimal_runs(ops, data, h_list, **kw)
    dt = data.dt
    rows = []
    for h, res in zip(runs.h_list, runs.robin):
        d = res.state_opt.u - runs.dirichlet.state_opt.u
        rows.append((h, norm_trace(d, ops, dt, BOUNDARY), norm_trace(d, ops, dt, GAMMA1)))
    report = SweepReport(
        "trace_convergence",
        ("h", "err_trace_boundary", "err_trace_gamma1"),
        rows, {}, config or _echo(data), list(runs.runtimes),
    )
    full = report.column("err_trace_boundary")
    report.verdicts["boundary_trace_decreasing"] = strictly_decreasing(full)
    report.verdicts["boundary_dominates_gamma1"] = all(
        a >= b for a, b in zip(full, report.column("err_trace_gamma1"))
    )
    return report


# ---------------------------------------------------------------------------
# convexity, ordering, maximum principle


def _segment_states(ops, data, f1, f2, mu_list, variant):
    solver = StateSolver(ops, data, variant)
    u1 = solver.solve(f1)
    u2 = solver.solve(f2)
    mids = []
    for mu in mu_list:
        if mu == 0.0:
            mids.append(u2)
        elif mu == 1.0:
            mids.append(u1)
        else:
            mids.append(solver.solve(mu * f1 + (1 - mu) * f2))
    return u1, u2, mids


def convexity_check(ops, data, f1, f2, mu_list=(0.25, 0.5, 0.75), variant=DIRICHLET, config=None):
    """Gap ``mu J(f1) + (1-mu) J(f2) - J(f3)`` against its certified lower bound."""
    f1, f2 = np.asarray(f1, dtype=float), np.asarray(f2, dtype=float)
    require_sign_hypotheses(ops, data, f1, f2)
    data.check_compatibility(ops.mesh)
    mu_list = [float(m) for m in mu_list]
    if any(not 0.0 <= m <= 1.0 for m in mu_list):
        raise ValueError("mu values must lie in [0, 1]")
    t0 = time.perf_counter()
    u1, u2, mids = _segment_states(ops, data, f1, f2, mu_list, variant)
    dt = data.dt
    J1 = cost_from_state(u1, f1, ops, data)
    J2 = cost_from_state(u2, f2, ops, data)
    du = norm_Hcal(u1.u - u2.u, ops, dt) ** 2
    df = norm_F(f1 - f2, ops, dt) ** 2
    tol_convex = 1e-10 * max(1.0, abs(J1) + abs(J2))
    rows = []
    for mu, um in zip(mu_list, mids):
        f3 = mu * f1 + (1 - mu) * f2
        J3 = cost_from_state(um, f3, ops, data)
        gap = mu * J1 + (1 - mu) * J2 - J3
        ctrl = 0.5 * data.M_reg * mu * (1 - mu) * df
        lower = 0.5 * mu * (1 - mu) * du + ctrl
        rows.append((mu, gap, lower, ctrl, gap - lower))
    report = SweepReport(
        "convexity", ("mu", "gap", "lower_bound", "control_term", "slack"),
        rows, {}, config or _echo(data), [time.perf_counter() - t0],
        {"J1": J1, "J2": J2, "tol_convex": tol_convex, "dist_F_sq": df},
    )
    report.verdicts["gap_above_lower_bound"] = all(r[1] >= r[2] - tol_convex for r in rows)
    report.verdicts["gap_above_control_term"] = all(r[1] >= r[3] - 1e-10 for r in rows)
    return report


def monotonicity_check(ops, data, f1, f2, mu_list=(0.25, 0.5, 0.75), tol_order=TOL_ORDER,
                       variant=DIRICHLET, config=None):
    """Ordering ``0 <= u4(mu) <= u3(mu)`` of combined-control vs combined states."""
    f1, f2 = np.asarray(f1, dtype=float), np.asarray(f2, dtype=float)
    require_sign_hypotheses(ops, data, f1, f2)
    data.check_compatibility(ops.mesh)
    mu_list = [float(m) for m in mu_list]
    t0 = time.perf_counter()
    u1, u2, mids = _segment_states(ops, data, f1, f2, mu_list, variant)
    rows = []
    for mu, u4 in zip(mu_list, mids):
        u3 = mu * u1.u + (1 - mu) * u2.u
        gap = u3 - u4.u
        rows.append((mu, float(np.min(u4.u)), float(np.min(gap)), float(np.max(gap))))
    report = SweepReport(
        "monotonicity", ("mu", "min_u4", "min_u3_minus_u4", "max_u3_minus_u4"),
        rows, {}, config or _echo(data), [time.perf_counter() - t0], {"tol_order": tol_order},
    )
    report.verdicts["u4_nonnegative"] = all(r[1] >= -tol_order for r in rows)
    report.verdicts["u4_below_u3"] = all(r[2] >= -tol_order for r in rows)
    return report


def max_principle_check(ops, data, f, tol=TOL_ORDER, variant=DIRICHLET, config=None):
    """Nonnegativity of the state under the sign hypotheses (checked before solving)."""
    f = np.asarray(f, dtype=float)
    require_sign_hypotheses(ops, data, f)
    data.check_compatibility(ops.mesh)
    t0 = time.perf_counter()
    traj = StateSolver(ops, data, variant).solve(f)
    rows = [(n, float(np.min(traj.u[n]))) for n in range(traj.u.shape[0])]
    report = SweepReport(
        "max_principle", ("time_level", "min_u"), rows, {},
        config or _echo(data, f"variant={variant.label()}"), [time.perf_counter() - t0],
    )
    report.info["min_u"] = min(r[1] for r in rows)
    report.verdicts["nonnegative"] = report.info["min_u"] >= -tol
    return report


def gradient_check(ops, data, f, variant=DIRICHLET, n_coords=5, delta=1e-5, seed=0, rtol=1e-4,
                   config=None):
    t0 = time.perf_counter()
    out = finite_difference_check(data, f, variant, ops=ops, n_coords=n_coords, delta=delta, seed=seed)
    report = SweepReport(
        "gradcheck", ("time_level", "gamma3_index", "fd", "adjoint", "rel_error"),
        out, {}, config or _echo(data, f"variant={variant.label()} delta={delta!r} seed={seed}"),
        [time.perf_counter() - t0],
    )
    report.verdicts["rel_error_below_tol"] = all(r[4] < rtol for r in out)
    return report
