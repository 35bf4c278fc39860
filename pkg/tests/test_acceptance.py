"""Acceptance suite: one test, and one PASS/FAIL summary line, per criterion.

The summary lines are printed in the "acceptance criteria" section at the
end of the pytest run.
"""

import filecmp
import os
import time

import numpy as np
import pytest

from tresca_lab.assembly import ProblemData, assemble_all
from tresca_lab.cli import main
from tresca_lab.lab import (
    convexity_check, gradient_check, max_principle_check, monotonicity_check, optimal_runs,
    oracle_compare, sweep_eps, sweep_h_fixed_control, sweep_h_optimal, trace_convergence_check,
)
from tresca_lab.mesh import build_unit_square_mesh
from tresca_lab.state import constant_control, zero_control

import invariants

H_LIST = (1.0, 10.0, 100.0, 1000.0)


@pytest.fixture(scope="module")
def ops():
    return assemble_all(build_unit_square_mesh(8, 8))


@pytest.fixture(scope="module")
def data():
    # reference suite: mesh(8,8), T = 1, 16 steps, g = 1, b = u_b = 0, q = 0.1, M = 1, eps = 1e-2
    return ProblemData()


@pytest.fixture(scope="module")
def optimal(ops, data):
    t0 = time.perf_counter()
    runs = optimal_runs(ops, data, H_LIST)
    return runs, time.perf_counter() - t0


def test_criterion_1_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    ops4 = assemble_all(build_unit_square_mesh(4, 4))
    d = ProblemData(g=1.0, q=2.0, n_steps=4)
    rep = oracle_compare(ops4, d, zero_control(ops4, d), (1e-2, 5e-3, 2.5e-3))
    elapsed = time.perf_counter() - t0
    errs = rep.column("step_err_inf")
    ok = rep.passed and elapsed < 10
    acceptance("criterion 1 (oracle equivalence)", ok,
               f"errors={['%.3e' % e for e in errs]} ratios={['%.3f' % r for r in rep.info['ratios']]} "
               f"time={elapsed:.2f}s")
    assert rep.verdicts["errors_decreasing"]
    assert all(1.6 <= r <= 2.4 for r in rep.info["ratios"])
    assert errs[-1] < 1e-3
    assert elapsed < 10


def test_criterion_2_gradient(acceptance, ops, data):
    t0 = time.perf_counter()
    f = -np.random.default_rng(0).uniform(0, 1, size=zero_control(ops, data).shape)
    rep = gradient_check(ops, data, f, n_coords=5, delta=1e-5, seed=0)
    elapsed = time.perf_counter() - t0
    rel = rep.column("rel_error")
    ok = data.eps == 1e-2 and max(rel) < 1e-4 and elapsed < 30
    acceptance("criterion 2 (adjoint gradient vs finite differences)", ok,
               f"max_rel={max(rel):.2e} time={elapsed:.2f}s")
    assert max(rel) < 1e-4 and elapsed < 30


def test_criterion_3_robin_to_dirichlet_fixed_control(acceptance, ops, data):
    t0 = time.perf_counter()
    rep = sweep_h_fixed_control(ops, data, constant_control(ops, data, -0.5), H_LIST)
    elapsed = time.perf_counter() - t0
    e = rep.column("err_Vcal")
    ok = all(b < a for a, b in zip(e, e[1:])) and e[-1] < 0.05 * e[0] and elapsed < 60
    acceptance("criterion 3 (fixed-control h sweep)", ok,
               f"err_Vcal={['%.3e' % v for v in e]} time={elapsed:.2f}s")
    assert ok


def test_criterion_4_optimal_controls(acceptance, ops, data, optimal):
    runs, t_opt = optimal
    t0 = time.perf_counter()
    rep = sweep_h_optimal(ops, data, H_LIST, runs=runs)
    elapsed = t_opt + time.perf_counter() - t0
    ef = rep.column("err_f_F")
    gaps = rep.column("J_gap")
    J_opt = rep.info["J_opt"]
    f_ok = all(b < a for a, b in zip(ef, ef[1:])) and ef[-1] < 0.05 * ef[0]
    final = gaps[-1] < 1e-8 if J_opt < 1e-6 else gaps[-1] < 0.01 * J_opt
    j_ok = all(b < a for a, b in zip(gaps, gaps[1:])) and final
    ok = f_ok and j_ok and elapsed < 600
    acceptance("criterion 4 (optimal controls and optimal costs over h)", ok,
               f"control_part={'PASS' if f_ok else 'FAIL'} err_f_F={ef} "
               f"J_part={'PASS' if j_ok else 'FAIL'} J_gap={['%.3e' % g for g in gaps]} "
               f"J_opt={J_opt:.5f} time={elapsed:.2f}s")
    # every run converged; the optimal controls are identically zero, so the
    # control-gap series is all zeros and cannot be strictly decreasing
    assert rep.verdicts["all_converged"]
    assert j_ok
    assert f_ok, f"control gaps {ef} are not strictly decreasing"


def test_criterion_5_boundary_trace(acceptance, ops, data, optimal):
    runs, _ = optimal
    rep = trace_convergence_check(ops, data, H_LIST, runs=runs)
    e = rep.column("err_trace_boundary")
    ok = all(b < a for a, b in zip(e, e[1:]))
    acceptance("criterion 5 (full-boundary trace over h)", ok, f"err={['%.3e' % v for v in e]}")
    assert ok


def test_criterion_6_structure(acceptance, ops, data):
    f1, f2 = zero_control(ops, data), constant_control(ops, data, -1.0)
    mus = (0.25, 0.5, 0.75)
    conv = convexity_check(ops, data, f1, f2, mus)
    conv_ok = all(gap >= ctrl - 1e-10 for _, gap, _, ctrl, _ in conv.rows)
    mono = monotonicity_check(ops, data, f1, f2, mus, tol_order=1e-8)
    mp = max_principle_check(ops, data, constant_control(ops, data, -0.5), tol=1e-10)
    ok = conv_ok and mono.passed and mp.info["min_u"] >= -1e-10
    acceptance("criterion 6 (convexity, ordering, maximum principle)", ok,
               f"min_slack={min(r[1] - r[3] for r in conv.rows):.3e} "
               f"min_u3-u4={min(r[2] for r in mono.rows):.3e} min_u={mp.info['min_u']:.3e}")
    assert conv_ok and mono.passed and mp.passed


def test_criterion_7_regularization(acceptance, ops, data):
    rep = sweep_eps(ops, data, constant_control(ops, data, -0.5), (0.1, 0.05, 0.025, 0.0125))
    c = rep.column("cauchy_Vcal")
    ok = all(b < a for a, b in zip(c, c[1:]))
    acceptance("criterion 7 (eps Cauchy differences)", ok, f"cauchy_Vcal={['%.3e' % v for v in c]}")
    assert ok


def test_criterion_8_invariants_and_reruns(acceptance, tmp_path):
    failures = []
    for check in invariants.ALL:
        try:
            check(seed=0)
        except AssertionError as exc:
            failures.append(f"{check.__name__}: {exc}")
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    status_a = main(["paper-suite", "--out", str(a)])
    status_b = main(["paper-suite", "--out", str(b)])
    names = sorted(os.listdir(a))
    same = names == sorted(os.listdir(b)) and all(
        filecmp.cmp(a / n, b / n, shallow=False) for n in names
    )
    ok = not failures and same and status_a == status_b and len(names) >= 7
    acceptance("criterion 8 (invariant suites, byte-identical paper-suite reruns)", ok,
               f"invariant_failures={len(failures)} artifacts={len(names)} identical={same}")
    assert not failures, failures
    assert same and status_a == status_b and len(names) >= 7
