import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import manifold, points
from qs3.errors import DegeneratePlaneError, DegreeError, DomainError
from qs3.geometry import (
    ChartedManifold,
    christoffel_fd,
    cov_deriv_at,
    d_form_at,
    lie_bracket_at,
    nijenhuis_at,
    riemann_at,
    riemann_fd,
    sectional,
)
from qs3.jet import jeinsum, jet_vars, recip, stack

CATALOG = ["flat7", "sphere7", "csasakian7:c=4", "product11"]


def chart(dim, g, name="chart", radius=np.inf, phi=None, xi=None):
    phi = phi if phi is not None else (lambda u: np.zeros((3, dim, dim)))
    xi = xi if xi is not None else (lambda u: np.zeros((3, dim)))
    return ChartedManifold(name=name, dim=dim, domain_radius=radius, field_g=g,
                           field_phi=phi, field_xi=xi)


def round_sphere2(u):
    # stereographic unit 2-sphere: g = 4 / (1 + |u|^2)^2 delta
    f = 2 * recip(1 + u @ u)
    return np.eye(2) * (f * f)


S2 = chart(2, round_sphere2, "S2")


def test_euclidean_is_flat():
    M = chart(3, lambda u: np.eye(3))
    geom = riemann_at(M, np.array([0.3, -0.2, 1.0]))
    assert not geom.gamma.any() and not geom.riem.any()
    assert sectional(M, np.zeros(3), np.eye(3)[0], np.eye(3)[1]) == 0.0


def test_sphere2_christoffel_closed_form():
    p = np.array([0.4, -0.7])
    s = 1 + p @ p
    df = -2 * p / s          # g = exp(2f) delta
    want = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                want[k, i, j] = ((k == i) * df[j] + (k == j) * df[i] - (i == j) * df[k])
    np.testing.assert_allclose(riemann_at(S2, p).gamma, want, atol=1e-14)


def test_sphere2_curvature_one():
    p = np.array([0.4, -0.7])
    geom = riemann_at(S2, p)
    g = geom.g
    want = np.einsum("ik,jl->ijkl", g, g) - np.einsum("il,jk->ijkl", g, g)
    np.testing.assert_allclose(geom.riem, want, atol=1e-13)
    assert geom.sectional(np.array([1.0, 0.2]), np.array([0.3, -1.0])) == pytest.approx(1.0, abs=1e-13)


def test_degenerate_plane():
    with pytest.raises(DegeneratePlaneError):
        riemann_at(S2, np.zeros(2)).sectional(np.ones(2), 2 * np.ones(2))


def test_domain_error():
    M = chart(2, round_sphere2, radius=1.0)
    with pytest.raises(DomainError):
        riemann_at(M, np.array([2.0, 0.0]))


@pytest.mark.parametrize("name", CATALOG)
def test_fd_oracle_agreement(name):
    M = manifold(name)
    for p in points(M, 3):
        geom = riemann_at(M, p)
        g_fd, r_fd = christoffel_fd(M, p), riemann_fd(M, p)
        assert np.abs(g_fd - geom.gamma).max() <= 1e-5 * max(1.0, np.abs(geom.gamma).max())
        assert np.abs(r_fd - geom.riem).max() <= 1e-5 * max(1.0, np.abs(geom.riem).max())


@pytest.mark.parametrize("name", CATALOG)
def test_curvature_symmetries_and_bianchi(name):
    M = manifold(name)
    for p in points(M, 4):
        R = riemann_at(M, p).riem
        scale = max(1.0, np.abs(R).max())
        for res in (R + np.swapaxes(R, 0, 1), R + np.swapaxes(R, 2, 3),
                    R - np.transpose(R, (2, 3, 0, 1)),
                    R + np.transpose(R, (1, 2, 0, 3)) + np.transpose(R, (2, 0, 1, 3))):
            assert np.abs(res).max() <= 1e-9 * scale


@pytest.mark.parametrize("name", ["sphere7", "product11"])
def test_metric_compatibility(name, rng):
    M = manifold(name)
    d = M.dim
    A, B = rng.standard_normal((2, d, d))
    a, b = rng.standard_normal((2, d))
    for p in points(M, 3):
        u = jet_vars(p)
        Y, Z = A @ u + a, B @ u + b
        G, _, _ = M.jets(p)
        gYZ = jeinsum("i,i->", jeinsum("ij,j->i", G, Z), Y)
        geom = riemann_at(M, p)
        X = rng.standard_normal(d)
        nY = cov_deriv_at(M, lambda v: A @ v + a, "1,0", X, p, geom)
        nZ = cov_deriv_at(M, lambda v: B @ v + b, "1,0", X, p, geom)
        lhs = nY @ geom.g @ Z.val + Y.val @ geom.g @ nZ
        assert lhs == pytest.approx(float(gYZ.grad @ X), abs=1e-9 * max(1.0, abs(lhs)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_sectional_basis_invariance(seed):
    rng = np.random.default_rng(seed)
    M = manifold("product11")
    p = points(M, 1, seed=seed % 1000)[0]
    geom = riemann_at(M, p)
    X, Y = rng.standard_normal((2, M.dim))
    a, b, c, e = rng.uniform(-2, 2, 4)
    if abs(a * e - b * c) < 0.1:
        a, e = a + 1.0, e + 1.0
        if abs(a * e - b * c) < 0.1:
            return
    k0 = geom.sectional(X, Y)
    k1 = geom.sectional(a * X + b * Y, c * X + e * Y)
    assert abs(k1 - k0) <= 1e-10 * max(1.0, abs(k0))


def test_lie_bracket_of_linear_fields(rng):
    M = chart(4, lambda u: np.eye(4))
    A, B = rng.standard_normal((2, 4, 4))
    p = rng.standard_normal(4)
    got = lie_bracket_at(M, lambda u: A @ u, lambda u: B @ u, p)
    np.testing.assert_allclose(got, (B @ A - A @ B) @ p, atol=1e-13)
    e = np.eye(4)
    assert not lie_bracket_at(M, lambda u: e[0] + 0 * u, lambda u: e[1] + 0 * u, p).any()


def test_reeb_bracket_on_sphere(sphere7):
    for p in points(sphere7, 3):
        xi = sphere7.values(p)[2]
        for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            br = lie_bracket_at(sphere7, lambda u, a=a: sphere7.field_xi(u)[a],
                                lambda u, b=b: sphere7.field_xi(u)[b], p)
            np.testing.assert_allclose(br, 2 * xi[c], atol=1e-9)


def test_exterior_derivative_examples():
    M = chart(3, lambda u: np.eye(3))
    p = np.array([0.2, 0.5, -0.1])

    def x1dx2(u):
        return stack([0 * u[0], u[0], 0 * u[0]])

    dw = d_form_at(M, x1dx2, p, 1)
    np.testing.assert_array_equal(dw.to_matrix(), np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 0]]))

    def df(u):
        # f = x0^2 x1 + 3 x1 x2^3
        return stack([2 * u[0] * u[1], u[0] * u[0] + 3 * u[2] * u[2] * u[2], 9 * u[1] * u[2] * u[2]])

    assert d_form_at(M, df, p, 1).norm() <= 1e-12

    with pytest.raises(DegreeError):
        d_form_at(M, df, p, 3)


def test_d_squared_zero():
    M = chart(3, lambda u: np.eye(3))
    p = np.array([0.3, -0.6, 0.8])

    def dw(u):
        # w = (x1 x2^2, x0^3, x0 x1 x2); entries are d_i w_j - d_j w_i
        x0, x1, x2 = u[0], u[1], u[2]
        zero = 0 * x0
        a01 = 3 * x0 * x0 - x2 * x2          # d_0 w_1 - d_1 w_0
        a02 = x1 * x2 - 2 * x1 * x2          # d_0 w_2 - d_2 w_0
        a12 = x0 * x2 - 0 * x2               # d_1 w_2 - d_2 w_1
        return stack([stack([zero, a01, a02]), stack([-a01, zero, a12]),
                      stack([-a02, -a12, zero])])

    assert d_form_at(M, dw, p, 2).norm() <= 1e-12

    def not_closed(u):
        x0 = u[0]
        zero = 0 * x0
        return stack([stack([zero, u[2], zero]), stack([-u[2], zero, zero]),
                      stack([zero, zero, zero])])

    assert d_form_at(M, not_closed, p, 2).components[0] == pytest.approx(1.0)


def test_nijenhuis_constant_structures(flat7):
    rng = np.random.default_rng(3)
    for a in (1, 2, 3):
        X, Y = rng.standard_normal((2, 7))
        assert not nijenhuis_at(flat7, a, X, Y, np.zeros(7)).any()
    J = -np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], float)
    M = chart(4, lambda u: np.eye(4), phi=lambda u: np.stack([J, J, J]))
    X, Y = rng.standard_normal((2, 4))
    assert not nijenhuis_at(M, 1, X, Y, rng.standard_normal(4)).any()


def test_parallel_reeb_on_flat(flat7):
    p = points(flat7, 1)[0]
    for a in range(3):
        v = cov_deriv_at(flat7, lambda u, a=a: flat7.field_xi(u)[a], "1,0", np.ones(7), p)
        assert not np.any(v)


def test_covariant_identity_tensor(sphere7, rng):
    p = points(sphere7, 1)[0]
    v = cov_deriv_at(sphere7, lambda u: np.eye(7) + 0 * u[0], "1,1", rng.standard_normal(7), p)
    assert np.abs(v).max() <= 1e-14
