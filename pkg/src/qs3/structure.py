"""Almost contact metric 3-structures: relations, normality, Reeb constant, rank and splitting.

Index conventions follow :mod:`qs3.geometry`.  ``alpha`` arguments are 1-based
(1, 2, 3) to match the usual labelling of the three structures.  The tensor
fields ``psi_alpha`` and the projector fields are produced as jets whose value
and gradient are exact; their Hessian slots are NaN because nothing downstream
needs second derivatives of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConsistencyError,
    IndeterminateRankError,
    Not3QuasiSasakianError,
    StructureDefectError,
)
from .forms import AltForm, MetricFrame, skew_spectrum, wedge_rank
from .geometry import d_form_at, nijenhuis_from_jet, riemann_at
from .jet import Jet, jeinsum, jet_solve, jet_vars
from .stats import ResidualStat

__all__ = [
    "EVEN_PERMS",
    "Structure3Eval",
    "SplitEval",
    "structure_eval",
    "check_ac3_relations",
    "check_quasi_sasakian",
    "reeb_constant",
    "rank_at",
    "split_eval",
    "check_invariant_foliations",
    "eta_jet",
    "random_unit",
]

EVEN_PERMS = ((1, 2, 3), (2, 3, 1), (3, 1, 2))

STRUCTURE_TOL = 1e-6
KERNEL_TOL = 1e-7
KERNEL_GAP = 1e-3


def random_unit(rng, g, proj=None):
    """Random vector, optionally projected, normalized in the metric ``g``."""
    v = rng.standard_normal(g.shape[0])
    if proj is not None:
        v = proj @ v
    return v / np.sqrt(v @ g @ v)


def eta_jet(M, p):
    """``eta_alpha = g(xi_alpha, .)`` as a (3, d) jet."""
    G, _, XI = M.jets(p)
    return jeinsum("ak,kj->aj", XI, G)


@dataclass(frozen=True, eq=False)
class Structure3Eval:
    point: np.ndarray
    frame: MetricFrame
    phi: np.ndarray   # (3, d, d)
    xi: np.ndarray    # (3, d)
    eta: np.ndarray   # (3, d)
    Phi: tuple        # three AltForm 2-forms, Phi(X, Y) = g(X, phi Y)

    @property
    def g(self):
        return self.frame.g

    @property
    def dim(self):
        return self.g.shape[0]


def structure_eval(M, p, tol=STRUCTURE_TOL):
    """All structure tensors at ``p``; raises if a defining relation fails by more than ``tol``."""
    G, PHI, XI = M.jets(p)
    frame = MetricFrame.from_matrix(G.val)
    g = frame.g
    phi, xi = PHI.val, XI.val
    eta = xi @ g
    d = g.shape[0]
    Phi = tuple(AltForm.from_matrix(0.5 * (g @ phi[a] - (g @ phi[a]).T)) for a in range(3))

    res = np.abs(eta @ xi.T - np.eye(3)).max()
    if res > tol:
        raise StructureDefectError("eta_a(xi_b) = delta_ab", res)
    for a in range(3):
        res = np.abs(phi[a] @ phi[a] + np.eye(d) - np.outer(xi[a], eta[a])).max()
        if res > tol:
            raise StructureDefectError(f"phi_{a + 1}^2 = -Id + xi_{a + 1} (x) eta_{a + 1}", res)
        gp = g @ phi[a]
        res = np.abs(gp + gp.T).max()
        if res > tol:
            raise StructureDefectError(f"Phi_{a + 1} antisymmetric", res)
    return Structure3Eval(np.asarray(p, dtype=float), frame, phi, xi, eta, Phi)


def check_ac3_relations(M, p):
    """Worst residual over the quaternionic relations and metric compatibility."""
    G, PHI, XI = M.jets(p)
    g, phi, xi = G.val, PHI.val, XI.val
    eta = xi @ g
    d = g.shape[0]
    stat = ResidualStat("AC3_RELATIONS")
    for a, b, c in EVEN_PERMS:
        A, B, C = a - 1, b - 1, c - 1
        pa, pb = phi[A], phi[B]
        stat.add(phi[C] - pa @ pb + np.outer(xi[A], eta[B]), phi[C], pa @ pb)
        stat.add(phi[C] + pb @ pa - np.outer(xi[B], eta[A]), phi[C], pb @ pa)
        stat.add(xi[C] - pa @ xi[B], xi[C])
        stat.add(xi[C] + pb @ xi[A], xi[C])
        stat.add(eta[C] - eta[A] @ pb, eta[C])
        stat.add(eta[C] + eta[B] @ pa, eta[C])
    for a in range(3):
        stat.add(phi[a] @ phi[a] + np.eye(d) - np.outer(xi[a], eta[a]), phi[a] @ phi[a])
        stat.add(eta[a] @ xi[a] - 1.0, 1.0)
        # g(phi X, phi Y) - g(X, Y) + eta(X) eta(Y) for all X, Y at once
        stat.add(phi[a].T @ g @ phi[a] - g + np.outer(eta[a], eta[a]), g)
    return stat


def check_quasi_sasakian(M, p, alpha, rng=None, trials=8):
    """``(normality_residual, dPhi_residual)`` for structure ``alpha``."""
    rng = np.random.default_rng(0) if rng is None else rng
    G, PHI, XI = M.jets(p)
    phi = PHI[alpha - 1]
    eta = eta_jet(M, p)[alpha - 1]
    deta = d_form_at(M, eta, p, 1).to_matrix()
    g = G.val
    normality = 0.0
    for _ in range(trials):
        X = random_unit(rng, g)
        Y = random_unit(rng, g)
        n = nijenhuis_from_jet(phi, X, Y) + (X @ deta @ Y) * XI.val[alpha - 1]
        normality = max(normality, float(np.abs(n).max()))
    Phi = jeinsum("ik,kj->ij", G, phi)
    dPhi = d_form_at(M, Phi, p, 2)
    return normality, dPhi.norm()


def reeb_constant(M, points, tol=1e-8):
    """The constant ``c`` with ``[xi_a, xi_b] = c xi_c`` for even permutations."""
    coefs = []
    for p in points:
        G, _, XI = M.jets(p)
        g, xi = G.val, XI.val
        for a, b, c in EVEN_PERMS:
            br = XI[b - 1].grad @ xi[a - 1] - XI[a - 1].grad @ xi[b - 1]
            coef = float(br @ g @ xi[c - 1])
            orth = br - coef * xi[c - 1]
            scale = max(1.0, float(np.sqrt(br @ g @ br)))
            if np.sqrt(orth @ g @ orth) > tol * scale:
                raise Not3QuasiSasakianError(
                    f"[xi_{a}, xi_{b}] has a component orthogonal to xi_{c} "
                    f"({np.sqrt(orth @ g @ orth):.3e}) at {np.asarray(p).tolist()}"
                )
            coefs.append(coef)
    if not coefs:
        raise ValueError("reeb_constant needs at least one sample point")
    coefs = np.array(coefs)
    spread = coefs.max() - coefs.min()
    if spread > tol * max(1.0, np.abs(coefs).max()):
        raise Not3QuasiSasakianError(f"Reeb bracket coefficient is not constant (spread {spread:.3e})")
    return float(coefs.mean())


def rank_at(M, p, alpha, tol=KERNEL_TOL, cross_check=True):
    """Rank of ``eta_alpha``: SVD rank of ``d eta_alpha`` plus one if eta survives on its kernel."""
    eta = eta_jet(M, p)[alpha - 1]
    deta = d_form_at(M, eta, p, 1)
    A = deta.to_matrix()
    r, kernel = skew_spectrum(A, tol)
    ev = eta.val
    on_kernel = np.linalg.norm(kernel @ ev) if len(kernel) else 0.0
    rank = r + 1 if on_kernel > tol * max(np.linalg.norm(ev), 1e-300) else r
    if cross_check and M.dim <= 7:
        brute = wedge_rank(AltForm.from_covector(ev), deta)
        if brute != rank:
            raise ConsistencyError(f"matrix rank {rank} disagrees with wedge-power rank {brute}")
    return rank


def _first_order(val, grad):
    d = grad.shape[-1]
    return Jet(val, grad, np.full(val.shape + (d, d), np.nan))


def _deta_jets(M, p):
    """``d eta_alpha`` component matrices as first-order jets, shape (3, d, d)."""
    eta = eta_jet(M, p)
    H = eta.hess  # H[a, j, i, m] = d_m d_i eta_aj
    val = np.swapaxes(eta.grad, 1, 2) - eta.grad            # [a, i, j] = d_i eta_j - d_j eta_i
    grad = np.swapaxes(H, 1, 2) - H
    return _first_order(val, grad), eta


def _kernel_projector(S, g, rng=None):
    """g-orthogonal projector jet onto the kernel of a PSD matrix jet ``S`` of constant rank.

    The kernel near the point is spanned by ``K0 - R0 S_RR^{-1} S_RK``, written
    in the eigenbasis ``[K0 | R0]`` of ``S`` at the point.
    """
    d = S.shape[0]
    w, Q = np.linalg.eigh(S.val)
    top = max(w.max(), 0.0)
    small = w <= KERNEL_TOL * top
    if top == 0:
        small[:] = True
    near = (~small) & (w <= KERNEL_GAP * top)
    if near.any():
        raise IndeterminateRankError("no spectral gap between kernel and range of the d eta system", w)
    k = int(small.sum())
    if k == 0:
        return Jet.constant(np.zeros((d, d)), g.d), 0
    if k == d:
        return Jet.constant(np.eye(d), g.d), d
    K0, R0 = Q[:, small], Q[:, ~small]
    if rng is not None:
        Qr, _ = np.linalg.qr(rng.standard_normal((k, k)))
        K0 = K0 @ Qr
    SQ = jeinsum("ij,jk->ik", S, np.hstack([K0, R0]))
    Sp = jeinsum("ji,jk->ik", np.hstack([K0, R0]), SQ)
    S_RR = Sp[k:, k:]
    S_RK = Sp[k:, :k]
    coef = jet_solve(S_RR, S_RK)                              # (d-k, k)
    K = K0 - jeinsum("ij,jk->ik", R0, coef)                   # (d, k)
    gK = jeinsum("ij,jk->ik", g, K)
    KtgK = jeinsum("ji,jk->ik", K, gK)
    coef2 = jet_solve(KtgK, gK.T)                             # (KtgK)^{-1} K^T g
    return jeinsum("ij,jk->ik", K, coef2), k


@dataclass(frozen=True, eq=False)
class SplitEval:
    """Pointwise splitting ``TM = V + E^{4l} + E^{4m}`` and the tensors ``psi``, ``theta``.

    Arrays hold values; the ``*_jet`` fields keep first-order jets for covariant
    differentiation.
    """

    point: np.ndarray
    P_V: np.ndarray
    P_H: np.ndarray
    P_E4m: np.ndarray
    P_E4l3: np.ndarray
    P_E4l: np.ndarray
    psi: np.ndarray          # (3, d, d)
    theta: np.ndarray        # (3, d, d)
    Psi: tuple               # AltForm, Psi(X, Y) = g(X, psi Y)
    Theta: tuple
    c: float
    rank: int
    l: int
    m: int
    degenerate: bool
    psi_jet: Jet = field(repr=False)
    P_E4l3_jet: Jet = field(repr=False)
    P_E4m_jet: Jet = field(repr=False)
    invariant_residual: float = 0.0


def split_eval(M, p, c=None, rng=None, tol=1e-8):
    """Compute the splitting at ``p`` from the common kernel of the ``d eta_alpha``.

    For ``c = 0`` (3-cosymplectic) the split is degenerate: ``psi := phi o P_V``
    and ``theta := phi o P_H`` by convention.
    """
    p = M.check_point(p)
    if c is None:
        c = reeb_constant(M, [p])
    G, PHI, XI = M.jets(p)
    d = M.dim
    n = (d - 3) // 4
    g = G.val
    ETA = jeinsum("ak,kj->aj", XI, G)
    P_V_jet = jeinsum("ak,aj->kj", XI, ETA)
    eye = np.eye(d)
    degenerate = abs(c) <= 1e-12
    if degenerate:
        P_E4m_jet = eye - P_V_jet
        k = d - 3
    else:
        deta, eta = _deta_jets(M, p)
        eta1 = _first_order(eta.val, eta.grad)
        S = (jeinsum("aki,akj->ij", deta, deta) + jeinsum("ai,aj->ij", eta1, eta1))
        G1 = _first_order(G.val, G.grad)
        P_E4m_jet, k = _kernel_projector(S, G1, rng)
        if k % 4:
            raise ConsistencyError(f"common kernel of d eta has dimension {k}, not a multiple of 4")
    P_E4l3_jet = eye - P_E4m_jet
    proj = P_V_jet if degenerate else P_E4l3_jet
    psi_jet = jeinsum("aij,jk->aik", PHI, proj)

    P_V = P_V_jet.val
    P_E4m = P_E4m_jet.val
    P_E4l3 = P_E4l3_jet.val
    P_H = eye - P_V
    P_E4l = P_E4l3 - P_V
    phi = PHI.val
    psi = psi_jet.val
    theta = np.einsum("aij,jk->aik", phi, P_H if degenerate else P_E4m)
    Psi = tuple(AltForm.from_matrix(_skew(g @ psi[a])) for a in range(3))
    Theta = tuple(AltForm.from_matrix(_skew(g @ theta[a])) for a in range(3))

    m = k // 4 if not degenerate else n
    l = n - m
    rank = 1 if degenerate else 4 * l + 3

    # projector invariants and phi-invariance of E^{4m}
    res = 0.0
    for P in (P_V, P_H, P_E4m, P_E4l3, P_E4l):
        res = max(res, np.abs(P @ P - P).max(), np.abs(g @ P - (g @ P).T).max())
    if not degenerate:
        for a in range(3):
            res = max(res, np.abs(P_E4l3 @ phi[a] @ P_E4m).max())
    if res > tol:
        raise ConsistencyError(f"split invariants fail (residual {res:.3e})")

    return SplitEval(p, P_V, P_H, P_E4m, P_E4l3, P_E4l, psi, theta, Psi, Theta, float(c),
                     rank, l, m, degenerate, psi_jet, P_E4l3_jet, P_E4m_jet, float(res))


def _skew(A):
    return 0.5 * (A - A.T)


def check_invariant_foliations(M, p, split=None, rng=None, trials=8):
    """Total geodesy of ``E^{4l+3}`` and ``E^{4m}`` with vector fields extended by projection."""
    p = M.check_point(p)
    rng = np.random.default_rng(0) if rng is None else rng
    split = split_eval(M, p) if split is None else split
    geom = riemann_at(M, p)
    g = geom.g
    stat = ResidualStat("INVARIANT_FOLIATIONS")
    pairs = ((split.P_E4l3_jet, split.P_E4m), (split.P_E4m_jet, split.P_E4l3))
    for Pj, other in pairs:
        if not np.any(Pj.val):
            stat.add(0.0)
            continue
        for _ in range(trials):
            X0 = rng.standard_normal(M.dim)
            Y0 = rng.standard_normal(M.dim)
            X = Pj.val @ X0
            Y = Pj.val @ Y0
            dY = np.einsum("kjm,j->km", Pj.grad, Y0)   # d_m Y^k
            nab = geom.covariant(X, Y, dY)
            stat.add(other @ nab, nab, X, Y, args=(X, Y))
    return stat
