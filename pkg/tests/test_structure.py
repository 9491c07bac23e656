import numpy as np
import pytest

from conftest import manifold, points
from qs3.catalog import _block_diag, product_3qs, quaternion_right, sphere_3sasakian
from qs3.errors import StructureDefectError
from qs3.forms import skew_spectrum
from qs3.geometry import ChartedManifold, d_form_at
from qs3.structure import (
    check_ac3_relations,
    check_invariant_foliations,
    check_quasi_sasakian,
    eta_jet,
    rank_at,
    reeb_constant,
    split_eval,
    structure_eval,
)

CATALOG = ["flat7", "flat11", "sphere7", "sphere11", "csasakian7:c=4", "product11"]
NONZERO_C = ["sphere7", "sphere11", "csasakian7:c=4", "product11"]


def perturbed_phi1(M, eps=1e-3, seed=0):
    E = np.random.default_rng(seed).standard_normal((M.dim, M.dim))
    bump = np.zeros((3, M.dim, M.dim))
    bump[0] = eps * E
    return ChartedManifold(name=M.name + "-perturbed", dim=M.dim, domain_radius=M.domain_radius,
                           field_g=M.field_g, field_phi=lambda u: M.field_phi(u) + bump,
                           field_xi=M.field_xi, meta=dict(M.meta))


def warped_product():
    """Product chart with the flat factor rescaled by 1 + u_0^2 / 2: not a Riemannian product."""
    P = product_3qs(1, 1)
    S = sphere_3sasakian(1)

    def g(w):
        f = 1 + 0.5 * w[0] * w[0]
        return _block_diag(S.field_g(w[:7]), f * np.eye(4))

    return ChartedManifold(name="warped11", dim=11, domain_radius=1.5, field_g=g,
                           field_phi=P.field_phi, field_xi=P.field_xi, meta=dict(P.meta))


def test_flat_structure_exact():
    ev = structure_eval(manifold("flat7"), np.zeros(7))
    np.testing.assert_array_equal(ev.eta @ ev.xi.T, np.eye(3))


@pytest.mark.parametrize("name", ["sphere7", "product11", "csasakian7:c=4"])
def test_structure_invariants(name):
    M = manifold(name)
    for p in points(M, 4):
        ev = structure_eval(M, p)
        d = M.dim
        assert np.abs(ev.eta @ ev.xi.T - np.eye(3)).max() <= 1e-9
        for a in range(3):
            assert np.abs(ev.phi[a] @ ev.phi[a] + np.eye(d) - np.outer(ev.xi[a], ev.eta[a])).max() <= 1e-9
            Phi = ev.Phi[a].to_matrix()
            np.testing.assert_allclose(Phi, 0.5 * (ev.g @ ev.phi[a] - (ev.g @ ev.phi[a]).T), atol=1e-10)


def test_structure_defect_named():
    M = perturbed_phi1(manifold("sphere7"), eps=1e-3)
    with pytest.raises(StructureDefectError) as err:
        structure_eval(M, points(M, 1)[0])
    assert "phi_1" in err.value.relation


@pytest.mark.parametrize("name", CATALOG)
def test_ac3_relations(name):
    M = manifold(name)
    for p in points(M, 4):
        stat = check_ac3_relations(M, p)
        if name.startswith("flat"):
            assert stat.max_abs == 0.0
        else:
            assert stat.normalized <= 1e-9


def test_ac3_negative_control():
    M = perturbed_phi1(manifold("sphere7"))
    assert check_ac3_relations(M, points(M, 1)[0]).max_abs >= 1e-4


@pytest.mark.parametrize("name", CATALOG)
def test_quasi_sasakian(name, rng):
    M = manifold(name)
    for p in points(M, 3):
        for a in (1, 2, 3):
            normality, dphi = check_quasi_sasakian(M, p, a, rng)
            if name.startswith("flat"):
                assert (normality, dphi) == (0.0, 0.0)
            else:
                assert normality <= 1e-8 and dphi <= 1e-8


@pytest.mark.parametrize("name,c", [("flat7", 0.0), ("sphere7", 2.0), ("sphere11", 2.0),
                                    ("csasakian7:c=4", 4.0), ("product11", 2.0)])
def test_reeb_constant(name, c):
    M = manifold(name)
    assert reeb_constant(M, points(M, 4)) == pytest.approx(c, abs=1e-9)


@pytest.mark.parametrize("name,rank", [("flat7", 1), ("flat11", 1), ("sphere7", 7),
                                       ("sphere11", 11), ("product11", 7)])
def test_rank(name, rank):
    M = manifold(name)
    for p in points(M, 2):
        assert [rank_at(M, p, a) for a in (1, 2, 3)] == [rank] * 3


def test_deta_kernel_on_sphere(sphere7):
    p = points(sphere7, 1)[0]
    eta = eta_jet(sphere7, p)[0]
    A = d_form_at(sphere7, eta, p, 1).to_matrix()
    r, ker = skew_spectrum(A)
    assert r == 6 and ker.shape == (1, 7)
    xi1 = sphere7.values(p)[2][0]
    cos = abs(ker[0] @ xi1) / np.linalg.norm(xi1)
    assert cos == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("name", NONZERO_C)
def test_spectral_gap(name):
    M = manifold(name)
    for p in points(M, 2):
        A = d_form_at(M, eta_jet(M, p)[0], p, 1).to_matrix()
        s = np.linalg.svd(A, compute_uv=False)
        nonzero = s[s > 1e-7 * s[0]]
        assert nonzero.min() >= 1e-1 * s[0]


def test_split_sphere(sphere7):
    for p in points(sphere7, 2):
        sp = split_eval(sphere7, p)
        assert (sp.l, sp.m, sp.rank, sp.degenerate) == (1, 0, 7, False)
        assert np.abs(sp.P_E4m).max() <= 1e-12
        np.testing.assert_allclose(sp.psi, sphere7.values(p)[1], atol=1e-12)
        assert np.abs(sp.theta).max() <= 1e-12


def test_split_product(product11):
    J = -quaternion_right(1)
    for p in points(product11, 2):
        sp = split_eval(product11, p)
        assert (sp.l, sp.m, sp.rank) == (1, 1, 7)
        assert np.trace(sp.P_E4m) == pytest.approx(4.0, abs=1e-10)
        want = np.zeros((3, 11, 11))
        want[:, 7:, 7:] = J
        np.testing.assert_allclose(sp.theta, want, atol=1e-10)


def test_split_flat_degenerate(flat7):
    sp = split_eval(flat7, np.zeros(7))
    assert sp.degenerate and sp.c == 0.0 and sp.rank == 1


@pytest.mark.parametrize("name", NONZERO_C)
def test_psi_algebra(name):
    M = manifold(name)
    for p in points(M, 3):
        sp = split_eval(M, p)
        g = M.values(p)[0]
        for a in range(3):
            psi = sp.psi[a]
            assert np.abs(psi @ psi @ psi + psi).max() <= 1e-9
            gp2 = g @ psi @ psi
            assert np.abs(gp2 - gp2.T).max() <= 1e-9


def test_projectors_seed_independent(product11):
    p = points(product11, 1)[0]
    base = split_eval(product11, p)
    for seed in range(3):
        sp = split_eval(product11, p, rng=np.random.default_rng(seed))
        for name in ("P_E4m", "P_E4l3", "P_E4l", "P_V"):
            assert np.abs(getattr(sp, name) - getattr(base, name)).max() <= 1e-8
        assert np.abs(sp.P_E4m_jet.grad - base.P_E4m_jet.grad).max() <= 1e-8


@pytest.mark.parametrize("name,tol", [("sphere7", 1e-9), ("product11", 1e-8), ("csasakian7:c=4", 1e-9)])
def test_invariant_foliations(name, tol, rng):
    M = manifold(name)
    for p in points(M, 3):
        assert check_invariant_foliations(M, p, rng=rng).normalized <= tol


def test_foliation_negative_control(rng):
    M = warped_product()
    p = points(M, 1)[0]
    p[0] = 0.5
    assert check_invariant_foliations(M, p, rng=rng).max_abs >= 1e-4
