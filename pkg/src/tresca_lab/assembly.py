"""P1 finite element operators, problem data and the friction functional.

The friction term on Gamma2 is discretized with the lumped trace weights,
so both the exact functional ``sum_i w_i q |v_i|`` and its smoothing
``sum_i w_i q sqrt(eps^2 + v_i^2)`` are separable across nodes.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .mesh import GAMMA1, GAMMA2, GAMMA3, boundary_nodes, trace_weights


# ---------------------------------------------------------------------------
# data profiles


def parse_profile(value):
    """Normalize a data profile to ``("const", v)`` or ``("bump", v)``.

    Accepts a number, ``"const:<v>"``, ``"bump:<v>"``, ``"bump"`` or a
    numeric string.
    """
    if isinstance(value, tuple) and len(value) == 2 and value[0] in ("const", "bump"):
        return (value[0], float(value[1]))
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return ("const", float(value))
    if isinstance(value, str):
        text = value.strip()
        if ":" in text:
            kind, _, num = text.partition(":")
            kind = kind.strip()
            if kind not in ("const", "bump"):
                raise ValueError(f"unknown profile {kind!r}; catalog is const:<v>, bump:<v>")
            return (kind, float(num))
        if text == "bump":
            return ("bump", 1.0)
        return ("const", float(text))
    raise ValueError(f"cannot interpret profile {value!r}")


def profile_text(profile):
    kind, v = parse_profile(profile)
    return f"{kind}:{v!r}"


def profile_values(profile, nodes):
    """Nodal values of a profile; ``bump:v`` is ``16 v x(1-x) y(1-y)``."""
    kind, v = parse_profile(profile)
    nodes = np.asarray(nodes, dtype=float)
    if kind == "const":
        return np.full(nodes.shape[0], v)
    x, y = nodes[:, 0], nodes[:, 1]
    return v * 16.0 * x * (1.0 - x) * y * (1.0 - y)


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class ProblemData:
    """Given data of the state and control problems.

    ``g``, ``b`` and ``u_b`` are profiles (see :func:`parse_profile`); they
    are constant in time. Newton tolerances travel with the data so that a
    single object fully determines a state solve.
    """

    g: object = 1.0
    b: object = 0.0
    u_b: object = 0.0
    q: float = 0.1
    T: float = 1.0
    n_steps: int = 16
    M_reg: float = 1.0
    eps: float = 1e-2
    tol_newton: float = 1e-10
    max_newton_iters: int = 50

    def __post_init__(self):
        for name in ("g", "b", "u_b"):
            object.__setattr__(self, name, parse_profile(getattr(self, name)))
        if not self.q > 0:
            raise ValueError(f"Tresca coefficient must satisfy q > 0, got q={self.q}")
        if not self.T > 0:
            raise ValueError(f"final time must satisfy T > 0, got T={self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if not self.M_reg > 0:
            raise ValueError(f"cost weight must satisfy M > 0, got M={self.M_reg}")
        if not self.eps > 0:
            raise ValueError(f"regularization must satisfy eps > 0, got eps={self.eps}")
        if self.b[0] != "const":
            raise ValueError("b must be a constant profile (its trace on Gamma1 is used)")

    @property
    def dt(self):
        return self.T / self.n_steps

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return ProblemData(**kw)

    def check_compatibility(self, mesh, tol=1e-12):
        """Reject data whose initial value differs from ``b`` on Gamma1."""
        g1 = boundary_nodes(mesh, GAMMA1)
        ub = profile_values(self.u_b, mesh.nodes[g1])
        bv = profile_values(self.b, mesh.nodes[g1])
        if np.max(np.abs(ub - bv)) > tol:
            raise ValueError("compatibility condition u_b = b on Gamma1 violated")

    def sign_hypotheses(self, mesh):
        """True when g >= 0, b >= 0 and u_b >= 0 at every node."""
        return bool(
            np.all(profile_values(self.g, mesh.nodes) >= 0)
            and self.b[1] >= 0
            and np.all(profile_values(self.u_b, mesh.nodes) >= 0)
        )


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class AssembledOperators:
    mesh: object
    M_mass: sp.csr_matrix
    K_stiff: sp.csr_matrix
    B_gamma1: sp.csr_matrix
    gamma1_nodes: np.ndarray
    gamma2_nodes: np.ndarray
    gamma3_nodes: np.ndarray
    w_gamma1: np.ndarray
    w_gamma2: np.ndarray
    w_gamma3: np.ndarray
    areas: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.M_mass.shape[0]

    def nodes_of(self, tag):
        return {GAMMA1: self.gamma1_nodes, GAMMA2: self.gamma2_nodes, GAMMA3: self.gamma3_nodes}[tag]

    def weights_of(self, tag):
        return {GAMMA1: self.w_gamma1, GAMMA2: self.w_gamma2, GAMMA3: self.w_gamma3}[tag]

    def boundary_mass(self, tag):
        """Diagonal lumped boundary mass on the full node set."""
        d = np.zeros(self.n)
        d[self.nodes_of(tag)] = self.weights_of(tag)
        return sp.diags(d, format="csr")


def _clean(mat, rtol=1e-13):
    mat = mat.tocsr()
    mat.sum_duplicates()
    scale = np.max(np.abs(mat.data)) if mat.nnz else 1.0
    mat.data[np.abs(mat.data) <= rtol * scale] = 0.0
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def assemble_all(mesh):
    """Stiffness, consistent mass and lumped boundary operators of ``mesh``."""
    rows, cols, kv, mv, areas = _kernels.p1_triplets(
        np.ascontiguousarray(mesh.nodes, dtype=np.float64),
        np.ascontiguousarray(mesh.triangles, dtype=np.int64),
    )
    if np.any(areas <= 0.0):
        bad = int(np.flatnonzero(areas <= 0.0)[0])
        raise ValueError(f"degenerate triangle {bad} (zero area)")
    n = mesh.n_nodes
    K = _clean(sp.coo_matrix((kv, (rows, cols)), shape=(n, n)))
    M = _clean(sp.coo_matrix((mv, (rows, cols)), shape=(n, n)))
    nodes = {t: boundary_nodes(mesh, t) for t in (GAMMA1, GAMMA2, GAMMA3)}
    weights = {t: trace_weights(mesh, t) for t in (GAMMA1, GAMMA2, GAMMA3)}
    d1 = np.zeros(n)
    d1[nodes[GAMMA1]] = weights[GAMMA1]
    B1 = sp.diags(d1, format="csr")
    B1.eliminate_zeros()
    for arr in (*nodes.values(), *weights.values(), areas):
        arr.setflags(write=False)
    return AssembledOperators(
        mesh=mesh,
        M_mass=M,
        K_stiff=K,
        B_gamma1=B1,
        gamma1_nodes=nodes[GAMMA1],
        gamma2_nodes=nodes[GAMMA2],
        gamma3_nodes=nodes[GAMMA3],
        w_gamma1=weights[GAMMA1],
        w_gamma2=weights[GAMMA2],
        w_gamma3=weights[GAMMA3],
        areas=areas,
    )


# ---------------------------------------------------------------------------
# friction functional


def phi_exact(v_trace, data, ops):
    """Lumped ``int_{Gamma2} q |v| ds``; ``v_trace`` follows ``ops.gamma2_nodes``."""
    v = np.asarray(v_trace, dtype=float)
    return float(np.sum(ops.w_gamma2 * data.q * np.abs(v)))


def _eps_of(data, eps):
    eps = data.eps if eps is None else eps
    if not eps > 0:
        raise ValueError(f"regularization requires eps > 0, got {eps}")
    return eps


def phi_eps(v_trace, data, ops, eps=None):
    """Smoothed friction ``sum_i w_i q sqrt(eps^2 + v_i^2)``."""
    eps = _eps_of(data, eps)
    v = np.asarray(v_trace, dtype=float)
    return float(np.sum(ops.w_gamma2 * data.q * np.sqrt(eps * eps + v * v)))


def phi_eps_grad(v_trace, data, ops, eps=None):
    eps = _eps_of(data, eps)
    v = np.asarray(v_trace, dtype=float)
    return ops.w_gamma2 * data.q * v / np.sqrt(eps * eps + v * v)


def phi_eps_hess_diag(v_trace, data, ops, eps=None):
    eps = _eps_of(data, eps)
    v = np.asarray(v_trace, dtype=float)
    return ops.w_gamma2 * data.q * eps * eps / (eps * eps + v * v) ** 1.5


def coercivity_lower_bound(h, lambda1=1.0):
    """Guaranteed coercivity constant ``lambda1 * min(1, h)`` of the Robin form."""
    if not h > 0 or not lambda1 > 0:
        raise ValueError(f"need h > 0 and lambda1 > 0, got h={h}, lambda1={lambda1}")
    return lambda1 * min(1.0, h)
