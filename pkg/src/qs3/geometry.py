"""Chart-based Riemannian geometry on top of the jet substrate.

Curvature conventions:

* ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``;
* the four-argument form is ``R(X, Y, Z, W) = g(R(X, Y)Z, W)``;
* the stored array ``PointGeometry.riem`` uses the classical index order
  ``riem[i, j, k, l] = g(R(e_i, e_j)e_l, e_k)``, so the unit sphere has
  ``riem[i, j, k, l] = g_ik g_jl - g_il g_jk`` and ``K(X, Y) = riem(X, Y, X, Y) / |X ^ Y|^2``.

Exterior derivatives carry no ``1/(k+1)`` factor:
``d omega(X, Y) = X omega(Y) - Y omega(X) - omega([X, Y])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import DegeneratePlaneError, DegreeError, DomainError, MetricError
from .forms import AltForm, MetricFrame
from .jet import Jet, jet_vars, value

__all__ = [
    "ChartedManifold",
    "PointGeometry",
    "christoffel_at",
    "riemann_at",
    "sectional",
    "lie_bracket_at",
    "d_form_at",
    "cov_deriv_at",
    "nijenhuis_at",
    "christoffel_fd",
    "riemann_fd",
    "metric_derivatives_fd",
]


@dataclass(frozen=True, eq=False)
class ChartedManifold:
    """A chart of a manifold carrying an almost contact metric 3-structure.

    The three field callables accept either a float array or a vector jet of
    chart coordinates and return, respectively, the metric ``(d, d)``, the
    stacked ``phi_1..phi_3`` as ``(3, d, d)`` (``phi[a][k, j]`` maps ``e_j`` to
    component ``k``), and the stacked Reeb fields ``(3, d)``.
    """

    name: str
    dim: int
    domain_radius: float
    field_g: Callable
    field_phi: Callable
    field_xi: Callable
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise DomainError(f"point shape {p.shape} != ({self.dim},)")
        if np.linalg.norm(p) > self.domain_radius:
            raise DomainError(
                f"point {p.tolist()} outside chart ball of radius {self.domain_radius}"
            )
        return p

    def jets(self, p):
        """``(g, phi, xi)`` as jets at ``p``; cached per point."""
        p = self.check_point(p)
        key = p.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            u = jet_vars(p)
            hit = (_as_jet(self.field_g(u), self.dim),
                   _as_jet(self.field_phi(u), self.dim),
                   _as_jet(self.field_xi(u), self.dim))
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def values(self, p):
        """Float evaluation of ``(g, phi, xi)`` without derivatives."""
        p = np.asarray(p, dtype=float)
        return (np.asarray(value(self.field_g(p))), np.asarray(value(self.field_phi(p))),
                np.asarray(value(self.field_xi(p))))


def _as_jet(x, d):
    return x if isinstance(x, Jet) else Jet.constant(x, d)


@dataclass(frozen=True, eq=False)
class PointGeometry:
    """Metric, Levi-Civita connection and curvature at one chart point."""

    point: np.ndarray
    frame: MetricFrame
    gamma: np.ndarray        # gamma[k, i, j] = Gamma^k_ij
    dgamma: np.ndarray       # dgamma[k, i, j, m] = d_m Gamma^k_ij
    rop: np.ndarray          # rop[l, k, i, j] = (R(e_i, e_j) e_k)^l
    riem: np.ndarray         # classical lowered order, see module docstring

    @property
    def g(self):
        return self.frame.g

    @property
    def g_inv(self):
        return self.frame.g_inv

    def curvature(self, X, Y, Z):
        """The vector ``R(X, Y)Z``."""
        return np.einsum("lkij,i,j,k->l", self.rop, X, Y, Z)

    def R4(self, X, Y, Z, W):
        """``g(R(X, Y)Z, W)``."""
        return float(self.curvature(X, Y, Z) @ self.g @ W)

    def sectional(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        g = self.g
        den = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
        if den <= 1e-10:
            raise DegeneratePlaneError(f"vectors span no 2-plane (|X^Y|^2 = {den:.3e})")
        return self.R4(X, Y, Y, X) / den

    def covariant(self, X, V, dV):
        """``nabla_X V`` given ``V`` and its coordinate Jacobian ``dV[k, i] = d_i V^k``."""
        return dV @ X + np.einsum("kij,i,j->k", self.gamma, X, V)


def _metric_frame(G):
    try:
        return MetricFrame.from_matrix(G)
    except MetricError:
        raise
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise MetricError(str(exc)) from exc


def _christoffel(g_inv, dg, ddg=None):
    """Gamma and optionally d Gamma from metric partials.

    ``dg[a, b, m] = d_m g_ab`` and ``ddg[a, b, m, n] = d_m d_n g_ab``.
    """
    first = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg)
                   - np.einsum("ijl->lij", dg))
    gamma = np.einsum("kl,lij->kij", g_inv, first)
    if ddg is None:
        return gamma, None
    dfirst = 0.5 * (np.einsum("jlim->lijm", ddg) + np.einsum("iljm->lijm", ddg)
                    - np.einsum("ijlm->lijm", ddg))
    dginv = -np.einsum("ka,abm,bl->klm", g_inv, dg, g_inv)
    dgamma = (np.einsum("klm,lij->kijm", dginv, first)
              + np.einsum("kl,lijm->kijm", g_inv, dfirst))
    return gamma, dgamma


def _curvature(gamma, dgamma, g):
    # (R(e_i, e_j) e_k)^l = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    d_term = np.einsum("ljki->lkij", dgamma)
    rop = (d_term - np.swapaxes(d_term, 2, 3)
           + np.einsum("lim,mjk->lkij", gamma, gamma)
           - np.einsum("ljm,mik->lkij", gamma, gamma))
    # riem[i, j, k, l] = g(R(e_i, e_j) e_l, e_k)
    riem = np.einsum("ka,alij->ijkl", g, rop)
    return rop, riem


def christoffel_at(M, p):
    """Christoffel symbols ``gamma[k, i, j]`` from jet partials of the metric."""
    return riemann_at(M, p).gamma


def riemann_at(M, p):
    G, _, _ = M.jets(p)
    frame = _metric_frame(G.val)
    gamma, dgamma = _christoffel(frame.g_inv, G.grad, G.hess)
    rop, riem = _curvature(gamma, dgamma, frame.g)
    return PointGeometry(np.asarray(p, dtype=float), frame, gamma, dgamma, rop, riem)


def sectional(M, p, X, Y):
    return riemann_at(M, p).sectional(X, Y)


def _field_jet(fieldfn, p, d):
    if isinstance(fieldfn, Jet):
        return fieldfn
    return _as_jet(fieldfn(jet_vars(p)), d)


def lie_bracket_at(M, A, B, p):
    """``[A, B]`` of two vector fields (callables or jets evaluated at ``p``)."""
    p = M.check_point(p)
    a = _field_jet(A, p, M.dim)
    b = _field_jet(B, p, M.dim)
    return b.grad @ a.val - a.grad @ b.val


def d_form_at(M, form, p, degree):
    """Exterior derivative of a 1- or 2-form field.

    ``form`` returns covector components ``(d,)`` for degree 1 and an
    antisymmetric component matrix ``(d, d)`` for degree 2.
    """
    if degree not in (1, 2):
        raise DegreeError(f"d_form_at supports degrees 1 and 2, got {degree}")
    p = M.check_point(p)
    w = _field_jet(form, p, M.dim)
    d = M.dim
    if degree == 1:
        dw = w.grad  # dw[j, i] = d_i w_j
        return AltForm.from_matrix(dw.T - dw)
    dw = w.grad  # dw[j, k, i] = d_i w_jk
    full = (np.einsum("jki->ijk", dw) + np.einsum("kij->ijk", dw)
            + np.einsum("ijk->ijk", dw))
    return AltForm(3, d, [full[i, j, k] for i, j, k in combinations(range(d), 3)])


def cov_deriv_at(M, fieldfn, valence, X, p, geom=None):
    """Covariant derivative ``nabla_X`` of a (1,0), (0,1) or (1,1) tensor field."""
    p = M.check_point(p)
    geom = geom if geom is not None else riemann_at(M, p)
    T = _field_jet(fieldfn, p, M.dim)
    X = np.asarray(X, dtype=float)
    gam = geom.gamma
    if valence == "1,0":
        return T.grad @ X + np.einsum("kij,i,j->k", gam, X, T.val)
    if valence == "0,1":
        return T.grad @ X - np.einsum("kij,i,k->j", gam, X, T.val)
    if valence == "1,1":
        return (T.grad @ X + np.einsum("kim,i,mj->kj", gam, X, T.val)
                - np.einsum("mij,i,km->kj", gam, X, T.val))
    raise ValueError(f"unsupported valence {valence!r}")


def nijenhuis_at(M, alpha, X, Y, p):
    """``[phi, phi](X, Y)`` for ``phi = phi_alpha``, ``alpha`` in 1..3."""
    _, PHI, _ = M.jets(p)
    phi = PHI[alpha - 1]
    return nijenhuis_from_jet(phi, X, Y)


def nijenhuis_from_jet(phi, X, Y):
    P, dP = phi.val, phi.grad  # dP[k, j, m] = d_m phi^k_j
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    PX, PY = P @ X, P @ Y
    term1 = np.einsum("kjm,m,j->k", dP, PX, Y)
    term2 = np.einsum("kim,m,i->k", dP, PY, X)
    curl = np.einsum("mji,i,j->m", dP, X, Y) - np.einsum("mij,i,j->m", dP, X, Y)
    return term1 - term2 - P @ curl


# -- finite-difference oracles -------------------------------------------

def metric_derivatives_fd(M, p, h=1e-4):
    """Central differences of the metric values: ``(g, dg, ddg)``."""
    p = np.asarray(p, dtype=float)
    d = M.dim

    def g_at(q):
        return np.asarray(value(M.field_g(q)), dtype=float)

    g0 = g_at(p)
    E = np.eye(d) * h
    plus = [g_at(p + E[m]) for m in range(d)]
    minus = [g_at(p - E[m]) for m in range(d)]
    dg = np.stack([(plus[m] - minus[m]) / (2 * h) for m in range(d)], axis=-1)
    ddg = np.empty((d, d, d, d))
    for m in range(d):
        ddg[:, :, m, m] = (plus[m] - 2 * g0 + minus[m]) / h ** 2
        for n in range(m + 1, d):
            v = (g_at(p + E[m] + E[n]) - g_at(p + E[m] - E[n])
                 - g_at(p - E[m] + E[n]) + g_at(p - E[m] - E[n])) / (4 * h * h)
            ddg[:, :, m, n] = v
            ddg[:, :, n, m] = v
    return g0, dg, ddg


def christoffel_fd(M, p, h=1e-4):
    g0, dg, _ = metric_derivatives_fd(M, p, h)
    gamma, _ = _christoffel(np.linalg.inv(g0), dg)
    return gamma


def riemann_fd(M, p, h=1e-4):
    """Classical-order Riemann tensor from second metric differences.

    Uses the closed form in ``d^2 g`` and Christoffel symbols of the first
    kind, independent of the ``d Gamma`` route used by :func:`riemann_at`.
    """
    g0, dg, ddg = metric_derivatives_fd(M, p, h)
    g_inv = np.linalg.inv(g0)
    first = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg)
                   - np.einsum("ijl->lij", dg))
    gamma = np.einsum("kl,lij->kij", g_inv, first)
    # R_ijkl = 1/2 (g_il,jk + g_jk,il - g_ik,jl - g_jl,ik)
    #          + g_mn (G^m_il G^n_jk - G^m_ik G^n_jl)
    second = 0.5 * (np.einsum("iljk->ijkl", ddg) + np.einsum("jkil->ijkl", ddg)
                    - np.einsum("ikjl->ijkl", ddg) - np.einsum("jlik->ijkl", ddg))
    quad = (np.einsum("mn,mil,njk->ijkl", g0, gamma, gamma)
            - np.einsum("mn,mik,njl->ijkl", g0, gamma, gamma))
    return second + quad
