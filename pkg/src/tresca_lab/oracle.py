"""Dense coordinate-descent reference solver for the unsmoothed step problem.

The per-step problem with the exact friction term is

    min_x  0.5 x'Ax - c'x + sum_i tau_i |x_i|

with ``A`` symmetric positive definite. Each coordinate minimization has a
closed soft-threshold form, and the nonsmooth part is separable, so cyclic
coordinate descent converges to the unique minimizer. Everything here is
assembled densely and independently of the sparse Newton path.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .assembly import profile_values
from .state import Dirichlet, Robin


class OracleError(RuntimeError):
    pass


def soft_threshold_update(a, c, tau):
    """Minimizer of ``0.5 a x^2 - c x + tau |x|``."""
    if not a > 0:
        raise ValueError(f"curvature must be positive, got a={a}")
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got tau={tau}")
    return float(np.sign(c) * max(0.0, abs(c) - tau) / a)


@dataclass(frozen=True, eq=False)
class DenseStepProblem:
    A_dense: np.ndarray
    c: np.ndarray
    tau: np.ndarray
    free: np.ndarray = None
    fixed: np.ndarray = None
    fixed_values: np.ndarray = None
    n_full: int = None

    def __post_init__(self):
        A = np.ascontiguousarray(self.A_dense, dtype=np.float64)
        object.__setattr__(self, "A_dense", A)
        object.__setattr__(self, "c", np.ascontiguousarray(self.c, dtype=np.float64))
        object.__setattr__(self, "tau", np.ascontiguousarray(self.tau, dtype=np.float64))
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != self.c.size:
            raise ValueError("A_dense must be square and match c")
        if self.tau.shape != self.c.shape:
            raise ValueError("tau must match c")
        if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(A), initial=0.0)):
            raise ValueError("A_dense is not symmetric")
        if np.any(np.diag(A) <= 0):
            raise ValueError("A_dense needs a strictly positive diagonal")
        if np.any(self.tau < 0):
            raise ValueError("tau must be nonnegative")

    def objective(self, x):
        return float(0.5 * x @ self.A_dense @ x - self.c @ x + self.tau @ np.abs(x))

    def lift(self, x):
        if self.free is None:
            return x.copy()
        u = np.empty(self.n_full)
        u[self.free] = x
        u[self.fixed] = self.fixed_values
        return u


def build_step_problem(ops, data, u_prev, f_n, variant):
    """Dense eliminated step problem with ``tau_i = w_i q`` on Gamma2."""
    n = ops.n
    dt = data.dt
    M = ops.M_mass.toarray()
    K = ops.K_stiff.toarray()
    nodes = ops.mesh.nodes
    b_val = data.b[1]
    c_full = M @ (np.asarray(u_prev, dtype=float) / dt + profile_values(data.g, nodes))
    c_full[ops.gamma3_nodes] -= ops.w_gamma3 * np.asarray(f_n, dtype=float)
    tau_full = np.zeros(n)
    tau_full[ops.gamma2_nodes] = data.q * ops.w_gamma2
    S = M / dt + K
    if isinstance(variant, Robin):
        S[ops.gamma1_nodes, ops.gamma1_nodes] += variant.h * ops.w_gamma1
        c_full[ops.gamma1_nodes] += variant.h * ops.w_gamma1 * b_val
        fixed = np.array([], dtype=np.int64)
    elif isinstance(variant, Dirichlet):
        fixed = np.asarray(ops.gamma1_nodes)
    else:
        raise TypeError(f"unknown variant {variant!r}")
    free = np.setdiff1d(np.arange(n), fixed)
    fixed_values = np.full(fixed.size, b_val)
    c = c_full[free] - S[np.ix_(free, fixed)] @ fixed_values
    return DenseStepProblem(
        S[np.ix_(free, free)], c, tau_full[free],
        free=free, fixed=fixed, fixed_values=fixed_values, n_full=n,
    )


def certificate(prob, x, tol=1e-8):
    """Largest subdifferential violation at ``x`` (0 means exact optimality)."""
    r = prob.A_dense @ x - prob.c
    nz = x != 0
    viol = np.zeros_like(x)
    viol[nz] = np.abs(r[nz] + prob.tau[nz] * np.sign(x[nz]))
    viol[~nz] = np.maximum(np.abs(r[~nz]) - prob.tau[~nz], 0.0)
    return float(np.max(viol, initial=0.0))


def solve_step_oracle(prob, tol=1e-12, max_sweeps=100_000, x0=None, check_monotone=True,
                      cert_tol=1e-8):
    """Cyclic coordinate descent until the sweep change drops below ``tol``."""
    x = np.zeros(prob.c.size) if x0 is None else np.array(x0, dtype=np.float64)
    obj = prob.objective(x)
    change = np.inf
    for sweep in range(max_sweeps):
        change = _kernels.cd_sweep(prob.A_dense, prob.c, prob.tau, x)
        if check_monotone:
            new = prob.objective(x)
            if new > obj + 1e-13 * max(1.0, abs(obj)):
                raise OracleError(f"objective increased at sweep {sweep}: {obj!r} -> {new!r}")
            obj = new
        if change < tol:
            break
    else:
        raise OracleError(f"sweep budget exhausted; last change {change:.3e}")
    viol = certificate(prob, x)
    if viol > cert_tol:
        raise OracleError(f"optimality certificate violated by {viol:.3e}")
    return x


def oracle_trajectory(ops, data, f, variant):
    """Exact-friction trajectory by repeated oracle steps (tiny meshes only)."""
    f = np.asarray(f, dtype=float)
    N = data.n_steps
    u = np.empty((N + 1, ops.n))
    u[0] = profile_values(data.u_b, ops.mesh.nodes)
    for n in range(1, N + 1):
        prob = build_step_problem(ops, data, u[n - 1], f[n - 1], variant)
        u[n] = prob.lift(solve_step_oracle(prob))
    return u
