import io

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from tresca_lab.assembly import ProblemData
from tresca_lab.mesh import GAMMA1, GAMMA3
from tresca_lab.state import (
    BOUNDARY, DIRICHLET, NewtonError, Robin, StateSolver, constant_control, dump_vist, load_vist,
    norm_F, norm_Hcal, norm_Linf_H, norm_trace, norm_Vcal, solve_state, tresca_diagnostic,
    zero_control,
)

import invariants


def test_zero_data_zero_solution(ops4):
    data = ProblemData(g=0.0, q=0.3, n_steps=3)
    for variant in (DIRICHLET, Robin(2.0)):
        traj = solve_state(data, zero_control(ops4, data), variant, ops4)
        assert np.all(traj.u == 0)
        rep = tresca_diagnostic(traj, ops4, data)
        assert rep.stick.all() and np.all(rep.flux == 0)


def test_dirichlet_trace_equals_b(ops4):
    data = ProblemData(b=0.5, u_b=0.5, q=0.5, n_steps=4)
    traj = solve_state(data, constant_control(ops4, data, -0.5), DIRICHLET, ops4)
    assert np.all(traj.u[1:, ops4.gamma1_nodes] == 0.5)


def test_high_friction_sticks(ops4):
    # huge q: Gamma2 behaves as if pinned to zero
    data = ProblemData(g=1.0, q=1e6, eps=1e-3, n_steps=1)
    solver = StateSolver(ops4, data)
    u = solver.step(solver.u0, np.zeros(ops4.gamma3_nodes.size))
    assert np.max(np.abs(u[ops4.gamma2_nodes])) < 1e-6
    pinned = np.setdiff1d(np.arange(ops4.n), np.union1d(ops4.gamma1_nodes, ops4.gamma2_nodes))
    H = (ops4.M_mass / data.dt + ops4.K_stiff).tocsc()[pinned][:, pinned]
    ref = np.zeros(ops4.n)
    ref[pinned] = spla.spsolve(H.tocsc(), solver.Mg[pinned])
    assert np.max(np.abs(u - ref)) < 1e-5


def test_maximum_principle_example(ops8):
    data = ProblemData(g=1.0, q=0.01)
    traj = solve_state(data, zero_control(ops8, data), DIRICHLET, ops8)
    assert traj.u.min() >= -1e-10


def test_newton_iterations_small(ops8):
    data = ProblemData(g=1.0, q=0.5, eps=1e-6)
    traj = StateSolver(ops8, data).solve(constant_control(ops8, data, -0.5))
    assert max(traj.newton_iters) <= 20


def test_newton_failure_annotated(ops4):
    data = ProblemData(g=1.0, q=0.5, eps=1e-8, max_newton_iters=1, tol_newton=1e-14)
    with pytest.raises(NewtonError) as info:
        StateSolver(ops4, data).solve(constant_control(ops4, data, -0.5))
    assert "time level 1" in str(info.value) and info.value.level == 1
    assert len(info.value.trace) == 2


def test_control_shape_checked(ops4):
    data = ProblemData(n_steps=3)
    with pytest.raises(ValueError):
        StateSolver(ops4, data).solve(np.zeros((2, ops4.gamma3_nodes.size)))


def test_slip_sign(ops8):
    data = ProblemData(g=1.0, q=0.1)
    traj = StateSolver(ops8, data).solve(constant_control(ops8, data, -0.5))
    rep = tresca_diagnostic(traj, ops8, data)
    assert rep.flux_bounded and rep.slip_sign_consistent
    assert (~rep.stick).any()


def test_norm_examples(ops2):
    data = ProblemData(n_steps=4)
    u = np.ones((5, ops2.n))
    assert norm_Hcal(u, ops2, data.dt) == pytest.approx(1.0, abs=1e-14)
    assert norm_Vcal(u, ops2, data.dt) == pytest.approx(1.0, abs=1e-13)
    assert norm_Linf_H(u, ops2) == pytest.approx(1.0)
    assert norm_trace(u, ops2, data.dt, BOUNDARY) == pytest.approx(2.0)
    assert norm_trace(u, ops2, data.dt, GAMMA3) == pytest.approx(np.sqrt(2.0))
    f = -np.ones((4, ops2.gamma3_nodes.size))
    assert norm_F(f, ops2, data.dt) == pytest.approx(np.sqrt(2.0))
    for fn in (norm_Hcal, norm_Vcal):
        assert fn(np.zeros_like(u), ops2, data.dt) == 0.0


def test_robin_validation():
    with pytest.raises(ValueError):
        Robin(0.0)
    assert Robin(10.0).label() != DIRICHLET.label()


def test_vist_roundtrip(ops4):
    data = ProblemData(g=1.0, q=0.5, n_steps=2)
    traj = StateSolver(ops4, data).solve(constant_control(ops4, data, -0.5))
    buf = io.BytesIO()
    dump_vist(traj.u, buf)
    raw = buf.getvalue()
    assert raw[:4] == b"VIST" and len(raw) == 16 + 8 * traj.u.size
    back = load_vist(io.BytesIO(raw))
    assert back.tobytes() == traj.u.tobytes()
    with pytest.raises(ValueError):
        load_vist(io.BytesIO(b"XXXX" + raw[4:]))
    with pytest.raises(ValueError):
        load_vist(io.BytesIO(raw[:-8]))


def test_robin_trace_gap_shrinks(ops8):
    data = ProblemData(g=1.0, b=0.5, u_b=0.5, q=0.5)
    f = constant_control(ops8, data, -0.5)
    errs = [norm_trace(StateSolver(ops8, data, Robin(h)).solve(f).u - 0.5, ops8, data.dt, GAMMA1)
            for h in (1.0, 10.0, 100.0, 1000.0)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_invariants():
    invariants.check_state()
