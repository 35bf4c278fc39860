import numpy as np
import pytest

from tresca_lab.assembly import ProblemData, assemble_all
from tresca_lab.lab import (
    HypothesisError, convexity_check, decreasing_to_fraction, gradient_check,
    max_principle_check, monotonicity_check, optimal_runs, oracle_compare, oracle_step_agreement,
    strictly_decreasing, sweep_eps, sweep_h_fixed_control, sweep_h_optimal,
    trace_convergence_check,
)
from tresca_lab.mesh import build_unit_square_mesh
from tresca_lab.state import constant_control, zero_control

H_LIST = (1.0, 10.0, 100.0, 1000.0)


@pytest.fixture(scope="module")
def suite(ops8):
    data = ProblemData()
    return data, optimal_runs(ops8, data, H_LIST)


def test_helpers():
    assert strictly_decreasing([3, 2, 1]) and not strictly_decreasing([1, 1])
    assert not strictly_decreasing([1])
    assert decreasing_to_fraction([1.0, 0.5, 0.01], 0.05)
    assert not decreasing_to_fraction([1.0, 0.5, 0.1], 0.05)


def test_zero_data_sweeps(ops4):
    data = ProblemData(g=0.0, q=0.5, n_steps=4)
    f = zero_control(ops4, data)
    rep = sweep_h_fixed_control(ops4, data, f, H_LIST)
    assert all(v == 0 for r in rep.rows for v in r[1:4])
    rep = sweep_eps(ops4, data, f, (0.1, 0.05))
    assert rep.rows[0][2:] == (0.0, 0.0)
    rep = sweep_h_optimal(ops4, data, H_LIST)
    assert all(r[1] == 0 and r[5] == 0 for r in rep.rows)
    assert all(v == 0 for r in trace_convergence_check(ops4, data, H_LIST).rows for v in r[1:])
    assert max_principle_check(ops4, data, f).info["min_u"] == 0.0


def test_sweep_h_fixed_control_example(ops8):
    data = ProblemData(g=1.0, b=0.5, u_b=0.5, q=0.5)
    rep = sweep_h_fixed_control(ops8, data, constant_control(ops8, data, -0.5),
                                (1, 4, 16, 64, 256, 1024))
    assert rep.verdicts["err_Vcal_converging"]
    assert rep.column("err_Vcal")[-1] < 0.05 * rep.column("err_Vcal")[0]
    assert len(rep.info["trace_ratios"]) == 5


def test_bad_h_list(ops4):
    data = ProblemData(n_steps=2)
    with pytest.raises(ValueError):
        sweep_h_fixed_control(ops4, data, zero_control(ops4, data), (10.0, 1.0))


def test_optimal_sweep_consistency(ops8, suite):
    # the fixed-control path fed with f_op reproduces the optimal-path state metrics
    data, runs = suite
    opt = sweep_h_optimal(ops8, data, H_LIST, runs=runs)
    fixed = sweep_h_fixed_control(ops8, data, runs.dirichlet.f_opt, H_LIST)
    assert all(np.array_equal(r.f_opt, runs.dirichlet.f_opt) for r in runs.robin)
    for name in ("err_Vcal", "err_Linf_H", "err_trace_gamma1"):
        np.testing.assert_allclose(opt.column(name), fixed.column(name), rtol=0, atol=1e-12)


def test_optimal_sweep_j_gap(ops8, suite):
    data, runs = suite
    rep = sweep_h_optimal(ops8, data, H_LIST, runs=runs)
    assert rep.verdicts["J_gap_converging"] and rep.verdicts["all_converged"]
    assert rep.verdicts["err_Vcal_converging"]


def test_trace_check(ops8, suite):
    data, runs = suite
    rep = trace_convergence_check(ops8, data, H_LIST, runs=runs)
    assert rep.passed


def test_convexity_endpoints_and_degenerate(ops4):
    data = ProblemData(g=1.0, q=0.5, n_steps=4)
    f1, f2 = zero_control(ops4, data), constant_control(ops4, data, -1.0)
    rep = convexity_check(ops4, data, f1, f2, (0.0, 1.0))
    assert rep.column("gap") == [0.0, 0.0]
    rep = convexity_check(ops4, data, f2, f2, (0.5,))
    assert rep.rows[0][1] == pytest.approx(0.0, abs=1e-14) and rep.rows[0][2] == 0.0


def test_convexity_example(ops8):
    data = ProblemData(g=1.0, q=0.5)
    rep = convexity_check(ops8, data, zero_control(ops8, data), constant_control(ops8, data, -1.0))
    assert rep.info["dist_F_sq"] == pytest.approx(2.0)
    for mu, gap, _, ctrl, _ in rep.rows:
        assert ctrl == pytest.approx(mu * (1 - mu))
        assert gap >= ctrl - 1e-10
    assert rep.passed


def test_monotonicity(ops8):
    data = ProblemData(g=1.0, q=0.5)
    f1, f2 = zero_control(ops8, data), constant_control(ops8, data, -1.0)
    rep = monotonicity_check(ops8, data, f1, f2, (0.0, 0.5, 1.0))
    assert rep.rows[0][2:] == (0.0, 0.0) and rep.rows[2][2:] == (0.0, 0.0)
    assert rep.rows[1][1] >= -1e-8 and rep.rows[1][2] >= -1e-8
    assert rep.passed


def test_hypotheses_rejected(ops4):
    data = ProblemData(g=-1.0, q=0.5, n_steps=2)
    f = zero_control(ops4, data)
    for call in (lambda: max_principle_check(ops4, data, f),
                 lambda: convexity_check(ops4, data, f, f),
                 lambda: optimal_runs(ops4, data, H_LIST)):
        with pytest.raises(HypothesisError):
            call()
    with pytest.raises(HypothesisError):
        max_principle_check(ops4, ProblemData(n_steps=2), f + 1.0)


def test_max_principle_example(ops8):
    data = ProblemData(g=1.0, q=0.5)
    assert max_principle_check(ops8, data, zero_control(ops8, data), tol=1e-10).passed


def test_sweep_eps_example(ops8):
    data = ProblemData(g=1.0, q=0.5)
    rep = sweep_eps(ops8, data, constant_control(ops8, data, -0.5), (0.1, 0.05, 0.025, 0.0125))
    assert rep.passed


def test_sweep_workers_identical(ops8):
    data = ProblemData(g=1.0, q=0.5)
    f = constant_control(ops8, data, -0.5)
    a = sweep_h_fixed_control(ops8, data, f, H_LIST, workers=1).to_csv()
    b = sweep_h_fixed_control(ops8, data, f, H_LIST, workers=4).to_csv()
    assert a == b


def test_oracle_compare_small():
    ops = assemble_all(build_unit_square_mesh(4, 4))
    data = ProblemData(g=1.0, q=2.0, n_steps=4)
    rep = oracle_compare(ops, data, zero_control(ops, data), (1e-2, 5e-3, 2.5e-3))
    assert rep.passed
    assert rep.info["C_observed"] < 1.0


def test_oracle_step_agreement_example(ops4):
    data = ProblemData(g=1.0, q=1.0, n_steps=4)
    gap = oracle_step_agreement(ops4, data, np.zeros(ops4.n), np.zeros(ops4.gamma3_nodes.size), 1e-6)
    assert gap < 1e-4


def test_gradient_check(ops4):
    data = ProblemData(g=1.0, q=0.5, n_steps=4)
    f = -np.random.default_rng(1).uniform(0, 1, size=zero_control(ops4, data).shape)
    rep = gradient_check(ops4, data, f)
    assert rep.passed and len(rep.rows) == 5
