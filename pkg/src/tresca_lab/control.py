"""Reduced costs, discrete adjoint gradient and projected-gradient optimizer.

Controls are arrays of shape ``(n_steps, n_gamma3)`` holding nodal flux
values on Gamma3 at time levels ``1..n_steps``. Gradients are returned in
the Riesz form of the discrete F inner product ``dt * sum_i w_i f_i g_i``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .state import DIRICHLET, StateSolver, norm_F, norm_Hcal, zero_control


class OptimizationError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


def project_Fminus(f):
    """Componentwise ``min(f, 0)``."""
    return np.minimum(np.asarray(f, dtype=float), 0.0)


def cost_from_state(traj, f, ops, data):
    return 0.5 * norm_Hcal(traj, ops, data.dt) ** 2 + 0.5 * data.M_reg * norm_F(f, ops, data.dt) ** 2


def cost(data, f, variant=DIRICHLET, ops=None, solver=None):
    """``J(f) = |u_f|_H^2 / 2 + M |f|_F^2 / 2`` through the regularized state."""
    solver = solver or StateSolver(ops, data, variant)
    traj = solver.solve(f)
    return cost_from_state(traj, f, solver.ops, data)


def adjoint_solve(solver, traj):
    """Backward sweep ``(M/dt + A + D_n) p_n = M u_n + (M/dt) p_{n+1}``, ``p_{N+1} = 0``.

    ``D_n`` is the smoothed-friction Hessian at ``u_n``; Dirichlet nodes
    carry a homogeneous condition. Returns an array of shape (N+1, n) with
    row 0 unused (zero).
    """
    ops, data = solver.ops, solver.data
    if traj.u.shape != (data.n_steps + 1, ops.n) or traj.variant != solver.variant:
        raise ValueError("trajectory does not match the solver's data/variant")
    if traj.eps_used != solver.eps:
        raise ValueError("trajectory was computed with a different eps")
    N = data.n_steps
    free = solver.free
    eps2 = solver.eps ** 2
    p = np.zeros((N + 1, ops.n))
    p_next = np.zeros(free.size)
    for n in range(N, 0, -1):
        xs = traj.u[n][free][solver.g2_pos]
        diag = np.zeros(free.size)
        diag[solver.g2_pos] = solver.tau * eps2 / (eps2 + xs * xs) ** 1.5
        rhs = (ops.M_mass @ traj.u[n])[free] + solver.M_dt_free @ p_next
        p_free = spla.spsolve((solver.H + sp.diags(diag, format="csc")).tocsc(), rhs)
        p[n, free] = p_free
        p_next = p_free
    return p


def reduced_gradient(data, f, variant=DIRICHLET, ops=None, solver=None, return_all=False):
    """Riesz gradient ``M f - p`` on Gamma3 nodes (F inner product)."""
    solver = solver or StateSolver(ops, data, variant)
    f = np.asarray(f, dtype=float)
    traj = solver.solve(f)
    p = adjoint_solve(solver, traj)
    grad = data.M_reg * f - p[1:, solver.ops.gamma3_nodes]
    if return_all:
        return grad, cost_from_state(traj, f, solver.ops, data), traj
    return grad


@dataclass(eq=False)
class OptimizationResult:
    f_opt: np.ndarray
    state_opt: object
    J_opt: float
    converged: bool
    variant: object
    cost_history: list = field(default_factory=list)
    grad_opt: np.ndarray = None

    @property
    def iterations(self):
        return len(self.cost_history) - 1


def optimize(data, variant=DIRICHLET, f_init=None, ops=None, tol=1e-8, max_iters=500,
             step0=1.0, backtrack=0.5, sigma=1e-4, max_backtracks=30, solver=None):
    """Projected gradient with Armijo backtracking on ``F_-``.

    Stops when ``|f - P(f - grad)|_F < tol``. ``cost_history`` rows are
    ``(iteration, J, projected-gradient norm, accepted step)``; the step of
    the last row is 0.
    """
    solver = solver or StateSolver(ops, data, variant)
    ops = solver.ops
    dt = data.dt
    f = project_Fminus(zero_control(ops, data) if f_init is None else f_init)
    grad, J, traj = reduced_gradient(data, f, solver=solver, return_all=True)
    history = []
    for it in range(max_iters + 1):
        pg = norm_F(f - project_Fminus(f - grad), ops, dt)
        if pg < tol:
            history.append((it, J, pg, 0.0))
            return OptimizationResult(f, traj, J, True, variant, history, grad)
        if it == max_iters:
            break
        s = step0
        accepted = False
        try:
            for _ in range(max_backtracks + 1):
                f_new = project_Fminus(f - s * grad)
                d = f_new - f
                slope = dt * np.sum(ops.w_gamma3[None, :] * grad * d)
                g_new, J_new, traj_new = reduced_gradient(data, f_new, solver=solver, return_all=True)
                if J_new <= J + sigma * slope and J_new < J:
                    accepted = True
                    break
                s *= backtrack
        except RuntimeError as exc:
            raise OptimizationError(f"iteration {it}: {exc}", history) from exc
        history.append((it, J, pg, s if accepted else 0.0))
        if not accepted:
            # no further decrease resolvable at this precision
            return OptimizationResult(f, traj, J, False, variant, history, grad)
        f, grad, J, traj = f_new, g_new, J_new, traj_new
    return OptimizationResult(f, traj, J, False, variant, history, grad)


def kkt_violation(f, grad):
    """Largest violation of the first-order conditions on ``F_-``.

    Where ``f = 0`` only perturbations ``d <= 0`` are feasible, so optimality
    needs ``grad <= 0`` there; where ``f < 0`` it needs ``grad = 0``.
    """
    f, grad = np.asarray(f), np.asarray(grad)
    active = f >= 0
    v_act = np.max(np.maximum(grad[active], 0.0), initial=0.0)
    v_free = np.max(np.abs(grad[~active]), initial=0.0)
    return float(max(v_act, v_free))


def finite_difference_check(data, f, variant=DIRICHLET, ops=None, n_coords=5, delta=1e-5, seed=0,
                            solver=None):
    """Central differences of J along random unit coordinates vs the adjoint gradient.

    Returns a list of ``(level, gamma3_index, fd, adjoint, rel_error)``.
    """
    solver = solver or StateSolver(ops, data, variant)
    ops = solver.ops
    f = np.asarray(f, dtype=float)
    grad = reduced_gradient(data, f, solver=solver)
    rng = np.random.default_rng(seed)
    # Dirichlet corner nodes on Gamma3 do not influence the state; skip them
    active = np.flatnonzero(solver.g3_pos_full >= 0)
    out = []
    for _ in range(n_coords):
        n = int(rng.integers(data.n_steps))
        i = int(active[rng.integers(active.size)])
        e = np.zeros_like(f)
        e[n, i] = 1.0
        jp = cost(data, f + delta * e, solver=solver)
        jm = cost(data, f - delta * e, solver=solver)
        fd = (jp - jm) / (2 * delta)
        adj = float(data.dt * ops.w_gamma3[i] * grad[n, i])
        out.append((n + 1, i, float(fd), adj, abs(fd - adj) / abs(adj)))
    return out
