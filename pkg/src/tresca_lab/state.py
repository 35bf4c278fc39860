"""Backward-Euler solution of the Dirichlet and Robin friction state problems.

Each time step minimizes the strictly convex energy

    E(v) = |v - u_prev|_M^2 / (2 dt) + v'Av / 2 + Phi_eps(v on Gamma2)
           - g'M v + sum_{Gamma3} w f v  [- h sum_{Gamma1} w b v]

with a damped Newton iteration. Dirichlet nodes (Gamma1) are eliminated
and lifted to ``b``; the Robin variant keeps all nodes and adds ``h B``.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import profile_values
from .mesh import GAMMA1, GAMMA2, GAMMA3


# ---------------------------------------------------------------------------
# variants


@dataclass(frozen=True)
class Dirichlet:
    def label(self):
        return "dirichlet"


@dataclass(frozen=True)
class Robin:
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"Robin coefficient must satisfy h > 0, got h={self.h}")

    def label(self):
        return f"robin(h={self.h!r})"


DIRICHLET = Dirichlet()


class NewtonError(RuntimeError):
    """Newton iteration failed; ``trace`` holds the residual history."""

    def __init__(self, message, trace, level=None):
        super().__init__(message)
        self.trace = list(trace)
        self.level = level


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Nodal states at levels ``0..n_steps`` (``u`` has shape (n_steps+1, n))."""

    u: np.ndarray
    variant: object
    eps_used: float
    dt: float
    newton_iters: tuple = ()

    @property
    def n_steps(self):
        return self.u.shape[0] - 1


# ---------------------------------------------------------------------------
# solver


class StateSolver:
    """Per-step operators of one (ops, data, variant) triple.

    Instances are read-only after construction and may be shared between
    threads.
    """

    def __init__(self, ops, data, variant=DIRICHLET, eps=None):
        self.ops = ops
        self.data = data
        self.variant = variant
        self.eps = data.eps if eps is None else float(eps)
        if not self.eps > 0:
            raise ValueError(f"regularization requires eps > 0, got {self.eps}")
        n = ops.n
        dt = data.dt
        self.dt = dt
        self.M_dt = (ops.M_mass / dt).tocsr()
        self.Mg = ops.M_mass @ profile_values(data.g, ops.mesh.nodes)
        self.u0 = profile_values(data.u_b, ops.mesh.nodes)
        b_val = data.b[1]

        if isinstance(variant, Dirichlet):
            A = ops.K_stiff
            fixed = ops.gamma1_nodes
            self.extra_load = np.zeros(n)
        elif isinstance(variant, Robin):
            A = (ops.K_stiff + variant.h * ops.B_gamma1).tocsr()
            fixed = np.array([], dtype=np.int64)
            self.extra_load = np.zeros(n)
            self.extra_load[ops.gamma1_nodes] = variant.h * ops.w_gamma1 * b_val
        else:
            raise TypeError(f"unknown variant {variant!r}")
        self.A = A.tocsr()
        H_full = (self.M_dt + self.A).tocsr()
        mask = np.ones(n, dtype=bool)
        mask[fixed] = False
        self.free = np.flatnonzero(mask)
        self.fixed = np.asarray(fixed, dtype=np.int64)
        self.fixed_values = np.full(self.fixed.size, b_val)
        self.H = H_full[self.free][:, self.free].tocsc()
        self.H_fixed = H_full[self.free][:, self.fixed].tocsr()
        self.M_dt_free = self.M_dt[self.free][:, self.free].tocsr()

        # Gamma2 and Gamma3 positions inside the free vector
        pos = -np.ones(n, dtype=np.int64)
        pos[self.free] = np.arange(self.free.size)
        g2 = pos[ops.gamma2_nodes]
        keep2 = g2 >= 0
        self.g2_pos = g2[keep2]
        self.tau = data.q * ops.w_gamma2[keep2]
        self.g3_pos_full = pos[ops.gamma3_nodes]

    # -- per-step pieces -------------------------------------------------

    def control_load(self, f_n):
        """Full-length vector ``sum_{Gamma3} w_i f_i e_i``."""
        load = np.zeros(self.ops.n)
        load[self.ops.gamma3_nodes] = self.ops.w_gamma3 * np.asarray(f_n, dtype=float)
        return load

    def linear_term(self, u_prev, f_n):
        """Right-hand side ``c`` of the reduced step energy on free nodes."""
        c_full = self.M_dt @ u_prev + self.Mg - self.control_load(f_n) + self.extra_load
        c = c_full[self.free]
        if self.fixed.size:
            c = c - self.H_fixed @ self.fixed_values
        return c

    def lift(self, x):
        u = np.empty(self.ops.n)
        u[self.free] = x
        u[self.fixed] = self.fixed_values
        return u

    def reduced_energy(self, x, c):
        xs = x[self.g2_pos]
        return 0.5 * x @ (self.H @ x) - c @ x + np.sum(self.tau * np.sqrt(self.eps**2 + xs * xs))

    def step_energy(self, v, u_prev, f_n):
        """Full per-step energy of a nodal vector ``v`` (fixed nodes as given)."""
        ops = self.ops
        d = v - u_prev
        vs = v[ops.gamma2_nodes]
        return float(
            0.5 * d @ (self.M_dt @ d)
            + 0.5 * v @ (self.A @ v)
            + np.sum(self.data.q * ops.w_gamma2 * np.sqrt(self.eps**2 + vs * vs))
            - self.Mg @ v
            + self.control_load(f_n) @ v
            - self.extra_load @ v
        )

    def step(self, u_prev, f_n, return_iters=False):
        """Minimize the step energy starting from ``u_prev``."""
        u_prev = np.asarray(u_prev, dtype=float)
        c = self.linear_term(u_prev, f_n)
        x = u_prev[self.free].copy()
        eps2 = self.eps * self.eps
        tol = self.data.tol_newton
        trace = []
        n_free = self.free.size
        idx = self.g2_pos
        for it in range(self.data.max_newton_iters + 1):
            xs = x[idx]
            s = np.sqrt(eps2 + xs * xs)
            grad = self.H @ x - c
            grad[idx] += self.tau * xs / s
            res = float(np.max(np.abs(grad))) if n_free else 0.0
            trace.append(res)
            if not np.isfinite(res):
                raise NewtonError("non-finite Newton residual", trace)
            if res < tol:
                out = self.lift(x)
                return (out, it) if return_iters else out
            if it == self.data.max_newton_iters:
                break
            diag = np.zeros(n_free)
            diag[idx] = self.tau * eps2 / s**3
            J = (self.H + sp.diags(diag, format="csc")).tocsc()
            try:
                dx = spla.spsolve(J, -grad)
            except RuntimeError as exc:
                raise NewtonError(f"linear solve failed: {exc}", trace) from exc
            if not np.all(np.isfinite(dx)):
                raise NewtonError("linear solve produced non-finite values", trace)
            x = self._line_search(x, dx, grad, c)
        raise NewtonError(
            f"Newton did not converge in {self.data.max_newton_iters} iterations "
            f"(last residual {trace[-1]:.3e}, eps={self.eps:g})",
            trace,
        )

    def _line_search(self, x, dx, grad, c):
        e0 = self.reduced_energy(x, c)
        x_new = x + dx
        e1 = self.reduced_energy(x_new, c)
        slack = 1e-14 * max(1.0, abs(e0))
        if e1 <= e0 + slack:
            return x_new
        slope = grad @ dx
        alpha = 1.0
        for _ in range(30):
            alpha *= 0.5
            x_new = x + alpha * dx
            if self.reduced_energy(x_new, c) <= e0 + 1e-4 * alpha * slope + slack:
                return x_new
        return x_new

    def solve(self, f):
        """Full trajectory for a control ``f`` of shape (n_steps, n_gamma3)."""
        f = np.asarray(f, dtype=float)
        N = self.data.n_steps
        if f.shape != (N, self.ops.gamma3_nodes.size):
            raise ValueError(
                f"control must have shape {(N, self.ops.gamma3_nodes.size)}, got {f.shape}"
            )
        u = np.empty((N + 1, self.ops.n))
        u[0] = self.u0
        iters = []
        for n in range(1, N + 1):
            try:
                u[n], k = self.step(u[n - 1], f[n - 1], return_iters=True)
            except NewtonError as exc:
                raise NewtonError(f"time level {n}: {exc}", exc.trace, level=n) from exc
            iters.append(k)
        u.setflags(write=False)
        return StateTrajectory(u, self.variant, self.eps, self.dt, tuple(iters))


def zero_control(ops, data):
    return np.zeros((data.n_steps, ops.gamma3_nodes.size))


def constant_control(ops, data, value):
    return np.full((data.n_steps, ops.gamma3_nodes.size), float(value))


def solve_step(ops, data, u_prev, f_n, variant=DIRICHLET, eps=None):
    return StateSolver(ops, data, variant, eps).step(u_prev, f_n)


def solve_state(data, f, variant=DIRICHLET, ops=None, eps=None):
    """Trajectory ``u[0] = u_b``, ``u[n] = step(u[n-1], f[n-1])``."""
    if ops is None:
        raise ValueError("assembled operators are required")
    data.check_compatibility(ops.mesh)
    return StateSolver(ops, data, variant, eps).solve(f)


# ---------------------------------------------------------------------------
# friction diagnostic


@dataclass(frozen=True, eq=False)
class TrescaReport:
    """Regularized friction flux on Gamma2 for levels ``1..n_steps``.

    ``flux`` and ``u`` have shape (n_steps, n_gamma2); ``stick`` is boolean.
    """

    nodes: np.ndarray
    u: np.ndarray
    flux: np.ndarray
    stick: np.ndarray
    q: float
    stick_tol: float

    @property
    def max_abs_flux(self):
        return float(np.max(np.abs(self.flux))) if self.flux.size else 0.0

    @property
    def flux_bounded(self):
        return self.max_abs_flux <= self.q + 1e-12

    @property
    def slip_sign_consistent(self):
        slip = ~self.stick
        return bool(np.all(self.flux[slip] * self.u[slip] > 0))

    def rows(self):
        for n in range(self.u.shape[0]):
            for k, node in enumerate(self.nodes):
                yield (n + 1, int(node), self.u[n, k], self.flux[n, k],
                       "stick" if self.stick[n, k] else "slip")


def tresca_diagnostic(traj, ops, data, stick_tol=None):
    eps = traj.eps_used
    stick_tol = 10.0 * eps if stick_tol is None else stick_tol
    u = np.asarray(traj.u[1:, ops.gamma2_nodes])
    flux = data.q * u / np.sqrt(eps * eps + u * u)
    return TrescaReport(ops.gamma2_nodes, u, flux, np.abs(u) < stick_tol, data.q, stick_tol)


# ---------------------------------------------------------------------------
# discrete space-time norms (right-endpoint rule in time, levels 1..N)


def _levels(u):
    u = u.u if isinstance(u, StateTrajectory) else np.asarray(u, dtype=float)
    return u[1:]


def norm_Hcal(u, ops, dt):
    U = _levels(u)
    return float(np.sqrt(dt * np.einsum("ni,ni->", U, (ops.M_mass @ U.T).T)))


def norm_Vcal(u, ops, dt):
    U = _levels(u)
    G = ops.M_mass + ops.K_stiff
    return float(np.sqrt(max(dt * np.einsum("ni,ni->", U, (G @ U.T).T), 0.0)))


def norm_Linf_H(u, ops):
    U = _levels(u)
    vals = np.einsum("ni,ni->n", U, (ops.M_mass @ U.T).T)
    return float(np.sqrt(max(np.max(vals), 0.0))) if vals.size else 0.0


def norm_F(f, ops, dt):
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(dt * np.sum(ops.w_gamma3[None, :] * f * f)))


def inner_F(f1, f2, ops, dt):
    return float(dt * np.sum(ops.w_gamma3[None, :] * np.asarray(f1) * np.asarray(f2)))


BOUNDARY = "boundary"


def norm_trace(u, ops, dt, tag):
    """``L2((0,T) x Gamma)`` norm; ``tag="boundary"`` sums over all three parts."""
    tags = (GAMMA1, GAMMA2, GAMMA3) if tag == BOUNDARY else (tag,)
    U = _levels(u)
    total = 0.0
    for t in tags:
        vals = U[:, ops.nodes_of(t)]
        total += dt * np.sum(ops.weights_of(t)[None, :] * vals * vals)
    return float(np.sqrt(total))


def difference_quotient_norm(traj, ops):
    """Discrete ``L2(0,T;H)`` norm of the time derivative (diagnostic only)."""
    du = np.diff(traj.u, axis=0) / traj.dt
    return float(np.sqrt(traj.dt * np.einsum("ni,ni->", du, (ops.M_mass @ du.T).T)))


# ---------------------------------------------------------------------------
# export

VIST_MAGIC = b"VIST"
VIST_VERSION = 1


def trajectory_rows(traj, ops):
    nodes = ops.mesh.nodes
    for n in range(traj.u.shape[0]):
        for i in range(traj.u.shape[1]):
            yield (n, i, nodes[i, 0], nodes[i, 1], traj.u[n, i])


TRAJECTORY_COLUMNS = ("time_level", "node_index", "x", "y", "u_value")


def dump_vist(u, fileobj):
    """Write ``u`` as: magic, u32 version, u32 rows, u32 cols, row-major f64 (little-endian)."""
    u = np.ascontiguousarray(np.asarray(u, dtype="<f8"))
    if u.ndim != 2:
        raise ValueError("trajectory dump expects a 2D array")
    fileobj.write(VIST_MAGIC)
    fileobj.write(struct.pack("<III", VIST_VERSION, u.shape[0], u.shape[1]))
    fileobj.write(u.tobytes(order="C"))


def load_vist(fileobj):
    head = fileobj.read(4)
    if head != VIST_MAGIC:
        raise ValueError(f"bad magic {head!r}")
    version, rows, cols = struct.unpack("<III", fileobj.read(12))
    if version != VIST_VERSION:
        raise ValueError(f"unsupported VIST version {version}")
    buf = fileobj.read(8 * rows * cols)
    if len(buf) != 8 * rows * cols:
        raise ValueError("truncated VIST payload")
    return np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy()
