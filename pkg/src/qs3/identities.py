"""Pointwise verification of the curvature identities of 3-quasi-Sasakian manifolds.

Every check evaluates both sides independently at a chart point for random
arguments and records a :class:`~qs3.stats.ResidualStat`.  Left-hand sides come
from the jet pipeline (curvature, covariant derivatives); right-hand sides are
assembled from the pointwise tensors of :func:`~qs3.structure.split_eval`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DegeneratePlaneError, PreconditionError
from .geometry import cov_deriv_at, d_form_at, riemann_at
from .jet import jeinsum
from .stats import IdentityId, ResidualStat
from .structure import (
    EVEN_PERMS,
    eta_jet,
    random_unit,
    rank_at,
    reeb_constant,
    split_eval,
    structure_eval,
)

__all__ = [
    "PointContext",
    "point_context",
    "identity_residual",
    "reeb_curvature_residual",
    "phi_commutator_residual",
    "p_tensor_residual",
    "phi4_residual",
    "phi_sectional",
    "phi_sectional_sum_check",
    "phi_sectional_partial_sums",
    "reeb_sectional_check",
    "horizontal_section_spread",
    "Classification",
    "classify_chsc",
]

HORIZONTAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PointContext:
    """Everything the identity checks need at one point."""

    manifold: object
    point: np.ndarray
    c: float
    geom: object
    struct: object
    split: object
    xi_jet: object
    eta_jet: object
    deta: tuple = field(repr=False)

    @property
    def g(self):
        return self.geom.g

    @property
    def degenerate(self):
        return self.split.degenerate

    def tensors(self, alpha):
        a = alpha - 1
        return (self.struct.phi[a], self.struct.xi[a], self.struct.eta[a],
                self.split.psi[a], self.g @ self.split.psi[a])


def point_context(M, p, c=None, rng=None):
    p = M.check_point(p)
    if c is None:
        c = reeb_constant(M, [p])
    geom = riemann_at(M, p)
    struct = structure_eval(M, p)
    split = split_eval(M, p, c, rng=rng)
    _, _, XI = M.jets(p)
    ETA = eta_jet(M, p)
    deta = tuple(d_form_at(M, ETA[a], p, 1).to_matrix() for a in range(3))
    return PointContext(M, p, float(c), geom, struct, split, XI, ETA, deta)


def _ctx(M, p, ctx):
    return ctx if ctx is not None else point_context(M, p)


# -- individual identities (one trial each) ------------------------------

def _sym_psi2(ctx, a, X, Y, stat):
    _, _, _, psi, _ = ctx.tensors(a)
    g = ctx.g
    psi2 = psi @ psi
    lhs, rhs = (psi2 @ X) @ g @ Y, X @ g @ (psi2 @ Y)
    stat.add(lhs - rhs, lhs, rhs, args=(X, Y))


def _psi_cube(ctx, a, X, Y, stat):
    _, _, _, psi, _ = ctx.tensors(a)
    lhs = psi @ psi @ psi @ X
    stat.add(lhs + psi @ X, lhs, psi @ X, args=(X,))


def _nabla_eta(ctx, a, X, Y, stat):
    _, _, _, _, Psm = ctx.tensors(a)
    M, p, c = ctx.manifold, ctx.point, ctx.c
    lhs = cov_deriv_at(M, ctx.eta_jet[a - 1], "0,1", X, p, ctx.geom) @ Y
    rhs = 0.5 * c * (X @ Psm @ Y)
    stat.add(lhs - rhs, lhs, rhs, args=(X, Y))


def _deta_cpsi(ctx, a, X, Y, stat):
    _, _, _, _, Psm = ctx.tensors(a)
    lhs = X @ ctx.deta[a - 1] @ Y
    rhs = ctx.c * (X @ Psm @ Y)
    stat.add(lhs - rhs, lhs, rhs, args=(X, Y))


def _nabla_xi(ctx, a, X, Y, stat):
    _, _, _, psi, _ = ctx.tensors(a)
    lhs = cov_deriv_at(ctx.manifold, ctx.xi_jet[a - 1], "1,0", X, ctx.point, ctx.geom)
    rhs = -0.5 * ctx.c * (psi @ X)
    stat.add(lhs - rhs, lhs, rhs, args=(X,))


def _nabla_psi(ctx, a, X, Y, stat):
    _, xi, eta, psi, _ = ctx.tensors(a)
    g, c = ctx.g, ctx.c
    T = cov_deriv_at(ctx.manifold, ctx.split.psi_jet[a - 1], "1,1", X, ctx.point, ctx.geom)
    lhs = T @ Y
    psi2X = psi @ psi @ X
    rhs = 0.5 * c * ((eta @ Y) * psi2X - (psi2X @ g @ Y) * xi)
    stat.add(lhs - rhs, lhs, rhs, args=(X, Y))


def _nabla_psi_sq(ctx, a, X, Y, stat):
    _, xi, eta, psi, Psm = ctx.tensors(a)
    pj = ctx.split.psi_jet[a - 1]
    psi2_jet = jeinsum("ij,jk->ik", pj, pj)
    T = cov_deriv_at(ctx.manifold, psi2_jet, "1,1", X, ctx.point, ctx.geom)
    lhs = T @ Y
    rhs = 0.5 * ctx.c * ((X @ Psm @ Y) * xi - (eta @ Y) * (psi @ X))
    stat.add(lhs - rhs, lhs, rhs, args=(X, Y))


def _r_xi_terms(ctx, a, X, Y):
    _, xi, eta, psi, _ = ctx.tensors(a)
    k = ctx.c ** 2 / 4
    lhs = ctx.geom.curvature(X, Y, xi)
    rhs = k * ((eta @ X) * (psi @ psi @ Y) - (eta @ Y) * (psi @ psi @ X))
    return lhs, rhs


def _r_phi_terms(ctx, a, X, Y, Z):
    phi, xi, eta, psi, Psm = ctx.tensors(a)
    R = ctx.geom.curvature
    k = ctx.c ** 2 / 4

    def Ps(U, V):
        return U @ Psm @ V

    lhs = R(X, Y, phi @ Z) - phi @ R(X, Y, Z)
    rhs = k * ((Ps(Y, psi @ Z) - (eta @ Y) * (eta @ Z)) * (psi @ X)
               - (Ps(X, psi @ Z) - (eta @ X) * (eta @ Z)) * (psi @ Y)
               - Ps(Y, Z) * (psi @ psi @ X)
               + Ps(X, Z) * (psi @ psi @ Y)
               + ((eta @ X) * Ps(Y, Z) - (eta @ Y) * Ps(X, Z)) * xi)
    return lhs, rhs


def _p_tensor(ctx, a, X, Y, Z, W):
    _, _, eta, psi, Psm = ctx.tensors(a)
    k = ctx.c ** 2 / 4

    def Ps(U, V):
        return U @ Psm @ V

    eX, eY, eZ, eW = eta @ X, eta @ Y, eta @ Z, eta @ W
    return k * (Ps(Y, Z) * Ps(X, psi @ W) - Ps(X, Z) * Ps(Y, psi @ W)
                + Ps(Y, psi @ Z) * Ps(X, W) - Ps(X, psi @ Z) * Ps(Y, W)
                - eX * eW * Ps(Y, Z) - eY * eZ * Ps(X, W)
                + eY * eW * Ps(X, Z) + eX * eZ * Ps(Y, W))


def _phi4_terms(ctx, a, X, Y, Z, W):
    phi, _, _, psi, Psm = ctx.tensors(a)
    R4 = ctx.geom.R4
    k = ctx.c ** 2 / 4

    def Ps(U, V):
        return U @ Psm @ V

    pX, pY, pZ, pW = phi @ X, phi @ Y, phi @ Z, phi @ W
    lhs = R4(pX, pY, pZ, pW)
    base = R4(X, Y, Z, W)
    tail = (Ps(Z, X) * Ps(W, psi @ pY) + Ps(Z, psi @ X) * Ps(W, pY)
            + Ps(pX, Z) * Ps(pY, psi @ pW) + Ps(pX, psi @ Z) * Ps(pY, pW))
    return lhs, base + k * tail, (lhs, base, k * tail)


def _require_horizontal(ctx, *vectors):
    PV = ctx.split.P_V
    for v in vectors:
        v = np.asarray(v, dtype=float)
        if np.abs(PV @ v).max() > HORIZONTAL_TOL * max(1.0, np.abs(v).max()):
            raise PreconditionError("argument is not horizontal (nonzero Reeb component)")


def reeb_curvature_residual(M, p, X, Y, alpha, ctx=None):
    """``R_XY xi = (c^2/4)(eta(X) psi^2 Y - eta(Y) psi^2 X)`` for one pair."""
    ctx = _ctx(M, p, ctx)
    lhs, rhs = _r_xi_terms(ctx, alpha, X, Y)
    stat = ResidualStat(IdentityId.R_XI.value, alpha, vacuous=ctx.degenerate)
    return stat.add(lhs - rhs, lhs, rhs, args=(X, Y))


def phi_commutator_residual(M, p, X, Y, Z, alpha, ctx=None):
    """Commutator ``R_XY phi - phi R_XY`` against its five-term expression."""
    ctx = _ctx(M, p, ctx)
    lhs, rhs = _r_phi_terms(ctx, alpha, X, Y, Z)
    stat = ResidualStat(IdentityId.R_PHI_COMMUTE.value, alpha, vacuous=ctx.degenerate)
    return stat.add(lhs - rhs, lhs, rhs, args=(X, Y, Z))


def p_tensor_residual(M, p, X, Y, Z, W, alpha, ctx=None):
    """Returns ``(stat, P_value)``."""
    ctx = _ctx(M, p, ctx)
    phi = ctx.struct.phi[alpha - 1]
    R4 = ctx.geom.R4
    t1, t2 = R4(X, Y, phi @ Z, W), R4(X, Y, Z, phi @ W)
    P = _p_tensor(ctx, alpha, X, Y, Z, W)
    stat = ResidualStat(IdentityId.P_IDENTITY.value, alpha, vacuous=ctx.degenerate)
    stat.add(t1 + t2 + P, t1, t2, P, args=(X, Y, Z, W))
    return stat, P


def phi4_residual(M, p, X, Y, Z, W, alpha, ctx=None):
    """Curvature on four phi-images of horizontal vectors."""
    ctx = _ctx(M, p, ctx)
    _require_horizontal(ctx, X, Y, Z, W)
    lhs, rhs, terms = _phi4_terms(ctx, alpha, X, Y, Z, W)
    stat = ResidualStat(IdentityId.PHI4.value, alpha, vacuous=ctx.degenerate)
    return stat.add(lhs - rhs, *terms, args=(X, Y, Z, W))


def phi_sectional(M, p, X, alpha, ctx=None):
    """``H_alpha(X) = g(R(X, phi X) phi X, X)`` for a horizontal unit ``X``."""
    ctx = _ctx(M, p, ctx)
    X = np.asarray(X, dtype=float)
    _require_horizontal(ctx, X)
    g = ctx.g
    if abs(X @ g @ X - 1.0) > 1e-8:
        raise PreconditionError("phi_sectional needs a g-unit vector")
    pX = ctx.struct.phi[alpha - 1] @ X
    if np.sqrt(pX @ g @ pX) <= 1e-10:
        raise DegeneratePlaneError("phi X vanishes")
    return ctx.geom.R4(X, pX, pX, X)


def phi_sectional_sum_check(M, p, X, ctx=None):
    """``(sum, predicted, residual)`` for the sum of the three phi-sectional curvatures."""
    ctx = _ctx(M, p, ctx)
    total = sum(phi_sectional(M, p, X, a, ctx) for a in (1, 2, 3))
    XE = ctx.split.P_E4l @ X
    predicted = 0.75 * ctx.c ** 2 * float(XE @ ctx.g @ XE) ** 2
    return total, predicted, abs(total - predicted)


def phi_sectional_partial_sums(M, p, X, ctx=None):
    """Cyclic partial identities behind the phi-sectional sum, plus their Bianchi closure.

    For each even permutation ``(a, b, c)`` compares ``-g(R(X, phi_c X) phi_a X, phi_b X)``
    with ``-H_c(X) + (c^2/4)|X_E4l|^4``; returns the three residuals and the
    residual of the first Bianchi identity tying the three left sides to zero.
    """
    ctx = _ctx(M, p, ctx)
    phi = ctx.struct.phi
    R4 = ctx.geom.R4
    XE = ctx.split.P_E4l @ X
    q = 0.25 * ctx.c ** 2 * float(XE @ ctx.g @ XE) ** 2
    lefts, res = [], []
    for a, b, c in EVEN_PERMS:
        pa, pb, pc = phi[a - 1] @ X, phi[b - 1] @ X, phi[c - 1] @ X
        left = -R4(X, pc, pa, pb)
        right = -R4(X, pc, pc, X) + q
        lefts.append(left)
        res.append(abs(left - right))
    return res, abs(sum(lefts))


def reeb_sectional_check(M, p, X, alpha, ctx=None):
    """``K(X, xi_alpha)`` against ``(c^2/4)|X_E4l|^2`` for horizontal unit ``X``."""
    ctx = _ctx(M, p, ctx)
    _require_horizontal(ctx, X)
    K = ctx.geom.sectional(X, ctx.struct.xi[alpha - 1])
    XE = ctx.split.P_E4l @ X
    expected = 0.25 * ctx.c ** 2 * float(XE @ ctx.g @ XE)
    return K, expected, abs(K - expected)


def horizontal_section_spread(M, p, X, ctx=None):
    """Sectional curvatures of the six planes spanned by pairs of ``X, phi_a X``."""
    ctx = _ctx(M, p, ctx)
    _require_horizontal(ctx, X)
    g = ctx.g
    vecs = [np.asarray(X, dtype=float)] + [ctx.struct.phi[a] @ X for a in range(3)]
    gram = np.array([[u @ g @ v for v in vecs] for u in vecs])
    if np.linalg.matrix_rank(gram, tol=1e-10 * max(1.0, np.abs(gram).max())) < 4:
        raise DegeneratePlaneError("horizontal section has dimension < 4")
    curv = [ctx.geom.sectional(vecs[i], vecs[j]) for i in range(4) for j in range(i + 1, 4)]
    return curv, max(curv) - min(curv)


# -- batch driver ---------------------------------------------------------

_TRIAL = {
    IdentityId.SYM_PSI2: _sym_psi2,
    IdentityId.PSI_CUBE: _psi_cube,
    IdentityId.NABLA_ETA: _nabla_eta,
    IdentityId.DETA_CPSI: _deta_cpsi,
    IdentityId.NABLA_XI: _nabla_xi,
    IdentityId.NABLA_PSI: _nabla_psi,
    IdentityId.NABLA_PSI_SQ: _nabla_psi_sq,
}


def identity_residual(M, p, ident, alpha, trials, rng, ctx=None):
    """Residual of one identity for one structure over ``trials`` random argument tuples."""
    ctx = _ctx(M, p, ctx)
    ident = IdentityId(ident)
    g = ctx.g
    stat = ResidualStat(ident.value, alpha, vacuous=ctx.degenerate)
    PH = ctx.split.P_H
    for _ in range(trials):
        if ident in _TRIAL:
            X, Y = random_unit(rng, g), random_unit(rng, g)
            _TRIAL[ident](ctx, alpha, X, Y, stat)
        elif ident is IdentityId.R_XI:
            X, Y = random_unit(rng, g), random_unit(rng, g)
            stat.merge(reeb_curvature_residual(M, p, X, Y, alpha, ctx))
        elif ident is IdentityId.R_PHI_COMMUTE:
            X, Y, Z = (random_unit(rng, g) for _ in range(3))
            stat.merge(phi_commutator_residual(M, p, X, Y, Z, alpha, ctx))
        elif ident is IdentityId.P_IDENTITY:
            X, Y, Z, W = (random_unit(rng, g) for _ in range(4))
            stat.merge(p_tensor_residual(M, p, X, Y, Z, W, alpha, ctx)[0])
        elif ident is IdentityId.PHI4:
            X, Y, Z, W = (random_unit(rng, g, PH) for _ in range(4))
            stat.merge(phi4_residual(M, p, X, Y, Z, W, alpha, ctx))
        elif ident is IdentityId.PHI_SECTIONAL_SUM:
            X = random_unit(rng, g, PH)
            total, predicted, res = phi_sectional_sum_check(M, p, X, ctx)
            stat.add(res, total, predicted, args=(X,))
    return stat


# -- classification -------------------------------------------------------

@dataclass
class Classification:
    verdict: str                 # ThreeCSasakian | ThreeCosymplecticFlat | NonConstantHSC
    c: float
    k: float | None
    rank: int
    evidence: dict = field(default_factory=dict)

    def label(self):
        if self.verdict == "ThreeCSasakian":
            return f"ThreeCSasakian(c={self.c:.12g}, k={self.k:.12g})"
        if self.verdict == "NonConstantHSC":
            lo, hi = self.evidence["witness"]
            return f"NonConstantHSC(values {{{lo:.12g}, {hi:.12g}}})"
        return self.verdict

    def to_dict(self):
        return {"verdict": self.verdict, "c": self.c, "k": self.k, "rank": self.rank,
                "label": self.label(), "evidence": self.evidence}


def classify_chsc(M, samples, tol=1e-8, rng=None, n_x=8, ctxs=None):
    """Decide between 3-c-Sasakian, flat 3-cosymplectic, and non-constant horizontal sectional curvature."""
    samples = [M.check_point(p) for p in samples]
    if len(samples) < 8 or n_x < 8:
        raise PreconditionError("classification needs >= 8 sample points and >= 8 directions each")
    rng = np.random.default_rng(0) if rng is None else rng
    c = reeb_constant(M, samples)
    rank = rank_at(M, samples[0], 1, cross_check=M.dim <= 7)
    ctxs = ctxs if ctxs is not None else [point_context(M, p, c) for p in samples]

    values, spreads = [], []
    lo = (np.inf, None)
    hi = (-np.inf, None)
    for i, (p, ctx) in enumerate(zip(samples, ctxs)):
        g = ctx.g
        probes = [random_unit(rng, g, ctx.split.P_H) for _ in range(n_x)]
        if not ctx.degenerate:
            for P in (ctx.split.P_E4l, ctx.split.P_E4m):
                if np.abs(P).max() > 0:
                    probes.append(random_unit(rng, g, P))
        point_vals = []
        for X in probes:
            curv, spread = horizontal_section_spread(M, p, X, ctx)
            point_vals.extend(curv)
            for v in curv:
                if v < lo[0]:
                    lo = (v, i)
                if v > hi[0]:
                    hi = (v, i)
        spreads.append(max(point_vals) - min(point_vals))
        values.extend(point_vals)

    scale = max(1.0, float(np.abs(values).max()))
    constant = (hi[0] - lo[0]) <= tol * scale
    evidence = {
        "per_point_spread": spreads,
        "hsc_min": lo[0],
        "hsc_max": hi[0],
        "witness": [lo[0], hi[0]],
        "witness_points": [lo[1], hi[1]],
        "n_points": len(samples),
        "n_directions": n_x,
    }
    maximal = rank == M.dim
    if constant:
        k = float(np.mean(values))
        if abs(c) <= tol:
            riem = max(float(np.abs(ctx.geom.riem).max()) for ctx in ctxs)
            evidence["max_riemann"] = riem
            if riem > tol:
                raise ConsistencyError(
                    f"constant horizontal sectional curvature with c = 0 but |Riem| = {riem:.3e}")
            return Classification("ThreeCosymplecticFlat", 0.0, 0.0, rank, evidence)
        expected = c * c / 4
        if not maximal:
            raise ConsistencyError(f"constant horizontal sectional curvature but rank {rank} < {M.dim}")
        worst = 0.0
        for p, ctx in zip(samples, ctxs):
            for _ in range(n_x):
                X, Y = random_unit(rng, ctx.g), random_unit(rng, ctx.g)
                worst = max(worst, abs(ctx.geom.sectional(X, Y) - expected))
        evidence["max_sectional_deviation"] = worst
        if worst > tol * max(1.0, expected) or abs(k - expected) > tol * max(1.0, expected):
            raise ConsistencyError(
                f"constant horizontal sectional curvature {k} but sectional curvature deviates "
                f"from c^2/4 = {expected} by {worst:.3e}")
        return Classification("ThreeCSasakian", c, expected, rank, evidence)
    if maximal and abs(c) > tol:
        raise ConsistencyError("maximal rank 3-quasi-Sasakian manifold with non-constant horizontal sectional curvature")
    return Classification("NonConstantHSC", c, None, rank, evidence)
