"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (lines also show without ``-s``).
"""

import functools

import numpy as np
import pytest

from conftest import manifold, points
from qs3.forms import AltForm, wedge_rank
from qs3.geometry import christoffel_fd, cov_deriv_at, d_form_at, riemann_at, riemann_fd
from qs3.identities import phi_sectional_sum_check, point_context
from qs3.report import RunConfig, run_suite
from qs3.stats import IdentityId
from qs3.structure import EVEN_PERMS, eta_jet, random_unit, rank_at, reeb_constant

CATALOG = ["flat7", "flat11", "sphere7", "sphere11", "csasakian7:c=4", "product11"]
SUITE_IDS = [i.value for i in IdentityId if i is not IdentityId.PHI_SECTIONAL_SUM]


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


@functools.lru_cache(maxsize=None)
def default_report(name):
    return run_suite(RunConfig(name)).to_dict()


def sample(M, n=16):
    return points(M, n, seed=2024)


def sectional_deviation(M, target, n_planes):
    rng = np.random.default_rng(5)
    worst, planes = 0.0, 0
    pts = sample(M)
    for i in range(n_planes):
        p = pts[i % len(pts)]
        geom = riemann_at(M, p)
        X, Y = rng.standard_normal((2, M.dim))
        worst = max(worst, abs(geom.sectional(X, Y) - target))
        planes += 1
    return worst, planes


def test_criterion_01_sphere_curvature(verdict):
    M = manifold("sphere7")
    worst, planes = sectional_deviation(M, 1.0, 64)
    c = reeb_constant(M, sample(M))
    ok = worst <= 1e-7 and planes >= 50 and abs(c - 2.0) <= 1e-9
    verdict(1, ok, f"sphere7 |K - 1| max {worst:.2e} over {planes} planes, c = {c:.15g}")


def test_criterion_02_homothety(verdict):
    M = manifold("csasakian7:c=4")
    worst, planes = sectional_deviation(M, 4.0, 64)
    c = reeb_constant(M, sample(M))
    ok = worst <= 1e-6 and abs(c - 4.0) <= 1e-8
    verdict(2, ok, f"csasakian7:c=4 |K - 4| max {worst:.2e} over {planes} planes, c = {c:.15g}")


def test_criterion_03_flat(verdict):
    M = manifold("flat7")
    pts = sample(M)
    riem = max(np.abs(riemann_at(M, p).riem).max() for p in pts)
    ranks = {rank_at(M, p, a) for p in pts for a in (1, 2, 3)}
    c = reeb_constant(M, pts)
    rng = np.random.default_rng(3)
    nabla_xi = max(np.abs(cov_deriv_at(M, lambda u, a=a: M.field_xi(u)[a], "1,0",
                                       rng.standard_normal(7), p)).max()
                   for p in pts for a in range(3))
    ok = riem <= 1e-10 and ranks == {1} and c == 0.0 and nabla_xi == 0.0
    verdict(3, ok, f"flat7 max|R| {riem:.1e}, ranks {sorted(ranks)}, c = {c}, max|nabla xi| {nabla_xi:.1e}")


def test_criterion_04_identity_suite(verdict):
    worst, details = 0.0, []
    ok = True
    for name in ("sphere7", "csasakian7:c=4", "product11"):
        rows = [r for r in default_report(name)["checks"] if r["id"] in SUITE_IDS]
        assert len(rows) == 3 * len(SUITE_IDS)
        w = max(r["normalized"] for r in rows)
        ok &= w <= 1e-8 and not any(r["vacuous"] for r in rows)
        details.append(f"{name} {w:.1e}")
    flat_rows = [r for r in default_report("flat7")["checks"] if r["id"] in SUITE_IDS]
    ok &= all(r["vacuous"] for r in flat_rows)
    verdict(4, ok, "max normalized: " + ", ".join(details) + f"; flat7 vacuous {len(flat_rows)}/{len(flat_rows)}")


def test_criterion_05_phi_sectional_sum(verdict):
    M = manifold("product11")
    rng = np.random.default_rng(11)
    errs = []
    for p in sample(M, 4):
        ctx = point_context(M, p)
        g = ctx.g
        for _ in range(4):
            Xl = random_unit(rng, g, ctx.split.P_E4l)
            Xm = random_unit(rng, g, ctx.split.P_E4m)
            errs.append(abs(phi_sectional_sum_check(M, p, Xl, ctx)[0] - 3.0))
            errs.append(abs(phi_sectional_sum_check(M, p, Xm, ctx)[0]))
            t = rng.uniform()
            X = np.sqrt(t) * Xl + np.sqrt(1 - t) * Xm
            errs.append(abs(phi_sectional_sum_check(M, p, X, ctx)[0] - 3 * t * t))
    S = manifold("sphere7")
    s_errs = []
    for p in sample(S, 4):
        ctx = point_context(S, p)
        for _ in range(4):
            X = random_unit(rng, ctx.g, ctx.split.P_H)
            s_errs.append(abs(phi_sectional_sum_check(S, p, X, ctx)[0] - 3.0))
    ok = max(errs) <= 1e-7 and max(s_errs) <= 1e-7
    verdict(5, ok, f"product11 max err {max(errs):.1e} (E4l, E4m, mixed), sphere7 max err {max(s_errs):.1e}")


def test_criterion_06_classification(verdict):
    want = {"sphere7": ("ThreeCSasakian", 2.0, 1.0), "csasakian7:c=4": ("ThreeCSasakian", 4.0, 4.0),
            "flat7": ("ThreeCosymplecticFlat", 0.0, 0.0), "product11": ("NonConstantHSC", 2.0, None)}
    ok, got = True, []
    for name, (v, c, k) in want.items():
        cls = default_report(name)["classification"]
        match = cls["verdict"] == v and abs(cls["c"] - c) <= 1e-8
        if k is not None:
            match &= abs(cls["k"] - k) <= 1e-8
        ok &= match
        got.append(f"{name} -> {cls['label']}")
    verdict(6, ok, "; ".join(got))


def test_criterion_07_rank(verdict):
    M = manifold("product11")
    ranks = {(i, a): rank_at(M, p, a) for i, p in enumerate(sample(M, 4)) for a in (1, 2, 3)}
    ok = set(ranks.values()) == {7}
    agree = []
    for name in ("flat7", "sphere7", "csasakian7:c=4"):
        N = manifold(name)
        for p in sample(N, 4):
            eta = eta_jet(N, p)
            for a in (1, 2, 3):
                deta = d_form_at(N, eta[a - 1], p, 1)
                brute = wedge_rank(AltForm.from_covector(eta.val[a - 1]), deta)
                agree.append(brute == rank_at(N, p, a, cross_check=False))
    ok &= all(agree)
    verdict(7, ok, f"product11 ranks {sorted(set(ranks.values()))}; matrix vs wedge agree {sum(agree)}/{len(agree)}")


def test_criterion_08_convention_consistency(verdict):
    worst, pairing = 0.0, 0.0
    for name in ("sphere7", "sphere11", "csasakian7:c=4", "product11"):
        M = manifold(name)
        pts = sample(M, 6)
        c = reeb_constant(M, pts)
        for p in pts:
            ctx = point_context(M, p, c)
            g = ctx.g
            for a in range(3):
                A = ctx.deta[a]
                B = c * (g @ ctx.split.psi[a])
                B = 0.5 * (B - B.T)
                worst = max(worst, np.abs(A - B).max() / max(1.0, np.abs(A).max(), np.abs(B).max()))
            xi = ctx.struct.xi
            for a, b, cc in EVEN_PERMS:
                pairing = max(pairing, abs(xi[a - 1] @ ctx.deta[cc - 1] @ xi[b - 1] + c))
    ok = worst <= 1e-8 and pairing <= 1e-8
    verdict(8, ok, f"max |d eta - c Psi| {worst:.1e}; max |d eta_c(xi_a, xi_b) + c| {pairing:.1e}")


def test_criterion_09_fd_oracle(verdict):
    worst = {}
    for name in CATALOG:
        M = manifold(name)
        w = 0.0
        for p in sample(M, 10):
            geom = riemann_at(M, p)
            for fd, exact in ((christoffel_fd(M, p), geom.gamma), (riemann_fd(M, p), geom.riem)):
                w = max(w, np.abs(fd - exact).max() / max(1.0, np.abs(exact).max()))
        worst[name] = w
    ok = max(worst.values()) <= 1e-5
    verdict(9, ok, "max relative FD gap " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_10_determinism(verdict):
    cfg = RunConfig("product11")
    a = run_suite(cfg).to_json()
    b = run_suite(RunConfig("product11")).to_json()
    verdict(10, a == b, f"two product11 runs, {len(a)} bytes each, identical = {a == b}")
