import numpy as np
import pytest

from tresca_lab.assembly import (
    ProblemData, assemble_all, coercivity_lower_bound, parse_profile, phi_eps, phi_eps_grad,
    phi_eps_hess_diag, phi_exact, profile_values,
)
from tresca_lab.mesh import GAMMA1, GAMMA2, GAMMA3, build_unit_square_mesh

import invariants


def test_mass_and_stiffness(ops4):
    one = np.ones(ops4.n)
    assert one @ ops4.M_mass @ one == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(ops4.K_stiff @ one, 0.0, atol=1e-13)
    x = ops4.mesh.nodes[:, 0]
    # |grad x|^2 integrated over the square
    assert x @ ops4.K_stiff @ x == pytest.approx(1.0, abs=1e-13)
    assert abs(ops4.M_mass - ops4.M_mass.T).max() == 0
    assert np.all(np.linalg.eigvalsh(ops4.M_mass.toarray()) > 0)


def test_boundary_mass(ops4):
    one = np.ones(ops4.n)
    assert one @ ops4.B_gamma1 @ one == pytest.approx(1.0)
    assert ops4.boundary_mass(GAMMA3).diagonal().sum() == pytest.approx(2.0)
    assert ops4.weights_of(GAMMA2).sum() == pytest.approx(1.0)


def test_profiles():
    assert parse_profile("0.5") == ("const", 0.5)
    assert parse_profile("const:2") == ("const", 2.0)
    assert parse_profile("bump") == ("bump", 1.0)
    nodes = np.array([[0.5, 0.5], [0.0, 0.3]])
    np.testing.assert_allclose(profile_values(("bump", 2.0), nodes), [2.0, 0.0])
    with pytest.raises(ValueError):
        parse_profile("wave:1")


def test_problem_data_validation():
    with pytest.raises(ValueError):
        ProblemData(q=0.0)
    with pytest.raises(ValueError):
        ProblemData(T=-1.0)
    with pytest.raises(ValueError):
        ProblemData(eps=0.0)
    d = ProblemData(T=2.0, n_steps=8)
    assert d.dt == 0.25


def test_compatibility(ops2):
    with pytest.raises(ValueError):
        ProblemData(b=0.5, u_b=0.0).check_compatibility(ops2.mesh)
    ProblemData(b=0.5, u_b=0.5).check_compatibility(ops2.mesh)


def test_phi_values(ops2):
    data = ProblemData(q=2.0)
    v = np.array([1.0, -1.0, 0.0])
    # weights on Gamma2 of the 2x2 mesh: 1/4, 1/2, 1/4
    assert phi_exact(v, data, ops2) == pytest.approx(2.0 * 0.75)
    assert phi_eps(v, data, ops2, 1e-8) == pytest.approx(1.5, abs=1e-7)
    np.testing.assert_allclose(phi_eps_grad(v, data, ops2, 1e-12), [0.5, -1.0, 0.0], atol=1e-9)
    assert np.all(phi_eps_hess_diag(v, data, ops2) > 0)
    with pytest.raises(ValueError):
        phi_eps(v, data, ops2, eps=-1.0)


def test_coercivity_bound():
    assert coercivity_lower_bound(0.5) == 0.5
    assert coercivity_lower_bound(10.0, lambda1=2.0) == 2.0
    with pytest.raises(ValueError):
        coercivity_lower_bound(0.0)


def test_degenerate_triangle_rejected():
    m = build_unit_square_mesh(1, 1)
    bad = type(m)(m.nodes, np.array([[0, 1, 1], [0, 3, 2]]), m.facets, m.facet_tags, 1, 1)
    with pytest.raises(ValueError):
        assemble_all(bad)


def test_invariants():
    invariants.check_assembly()
