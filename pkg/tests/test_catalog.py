import numpy as np
import pytest

from conftest import manifold, points
from qs3.catalog import (
    flat_cosymplectic,
    homothety,
    product_3qs,
    quaternion_right,
    resolve,
    sphere_3sasakian,
)
from qs3.errors import DomainError, ManifoldSpecError, ParameterError
from qs3.geometry import riemann_at
from qs3.identities import classify_chsc
from qs3.structure import rank_at, reeb_constant


def test_quaternion_relations():
    Ri, Rj, Rk = quaternion_right(2)
    eye = np.eye(8)
    for R in (Ri, Rj, Rk):
        np.testing.assert_array_equal(R @ R, -eye)
        np.testing.assert_array_equal(R.T, -R)
    np.testing.assert_array_equal(Ri @ Rj, -Rk)
    np.testing.assert_array_equal(Rj @ Rk, -Ri)
    np.testing.assert_array_equal(Rk @ Ri, -Rj)


def test_flat_member():
    M = flat_cosymplectic(1)
    assert M.dim == 7
    p = points(M, 1)[0]
    assert rank_at(M, p, 1) == 1
    assert reeb_constant(M, [p]) == 0.0
    assert not riemann_at(M, p).riem.any()


def test_sphere_orientation_not_swapped():
    assert sphere_3sasakian(1).meta["orientation_swapped"] is False


def test_sphere_constant_curvature():
    M = sphere_3sasakian(1)
    for p in points(M, 4):
        geom = riemann_at(M, p)
        g = geom.g
        want = np.einsum("ik,jl->ijkl", g, g) - np.einsum("il,jk->ijkl", g, g)
        assert np.abs(geom.riem - want).max() <= 1e-8


def test_sphere_domain():
    M = sphere_3sasakian(1)
    with pytest.raises(DomainError):
        M.jets(np.full(7, 1.0))


def test_field_evaluation_deterministic():
    M = sphere_3sasakian(1)
    p = points(M, 1)[0]
    a, b = M.values(p), M.values(p.copy())
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_homothety_c2_is_identity():
    S = sphere_3sasakian(1)
    H = homothety(S, 2.0)
    for p in points(S, 2):
        for x, y in zip(S.values(p), H.values(p)):
            np.testing.assert_array_equal(x, y)


def test_homothety_round_trip():
    S = sphere_3sasakian(1)
    back = homothety(homothety(S, 4.0), 2.0)
    for p in points(S, 4):
        g0, _, xi0 = S.values(p)
        g1, _, xi1 = back.values(p)
        assert np.abs(g1 - g0).max() <= 1e-12
        assert np.abs(xi1 - xi0).max() <= 1e-12
        assert np.abs(xi1 @ g1 - xi0 @ g0).max() <= 1e-12


def test_homothety_scaling():
    H = homothety(sphere_3sasakian(1), 4.0)
    assert H.name == "csasakian7:c=4"
    assert reeb_constant(H, points(H, 3)) == pytest.approx(4.0, abs=1e-8)
    with pytest.raises(ParameterError):
        homothety(sphere_3sasakian(1), 0.0)
    with pytest.raises(ParameterError):
        homothety(flat_cosymplectic(1), 2.0)


def test_product_member():
    M = product_3qs(1, 1)
    assert M.dim == 11
    p = points(M, 1)[0]
    assert [rank_at(M, p, a) for a in (1, 2, 3)] == [7, 7, 7]
    assert reeb_constant(M, [p]) == pytest.approx(2.0, abs=1e-9)
    assert classify_chsc(M, points(M, 8)).verdict == "NonConstantHSC"
    with pytest.raises(ParameterError):
        product_3qs(1, 0)


@pytest.mark.parametrize("name,dim", [("flat7", 7), ("flat11", 11), ("sphere7", 7), ("sphere11", 11),
                                      ("csasakian7:c=4", 7), ("csasakian7:c=0.5", 7),
                                      ("product11", 11)])
def test_resolve(name, dim):
    assert resolve(name).dim == dim


@pytest.mark.parametrize("name", ["sphere8", "csasakian8:c=2", "csasakian7:c=0", "", "flat"])
def test_resolve_rejects(name):
    with pytest.raises(ManifoldSpecError):
        resolve(name)
