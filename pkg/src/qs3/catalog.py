"""Concrete 3-quasi-Sasakian manifolds used to ground the verification suite."""

from __future__ import annotations

import re
import threading

import numpy as np

from .errors import ManifoldSpecError, ParameterError
from .geometry import ChartedManifold
from .jet import Jet, concatenate, jeinsum, recip, solve, stack, value

__all__ = [
    "quaternion_right",
    "reeb_block",
    "flat_cosymplectic",
    "sphere_3sasakian",
    "homothety",
    "product_3qs",
    "resolve",
    "CATALOG_NAMES",
]

CATALOG_NAMES = ("flat7", "flat11", "sphere7", "sphere11", "csasakian7:c=<value>", "product11")


def quaternion_right(n):
    """Right multiplication by i, j, k on H^n = R^{4n}, as three 4n x 4n matrices.

    A quaternion ``a + bi + cj + dk`` occupies four consecutive coordinates.
    These satisfy ``R_i R_j = R_{ji} = -R_k`` and cyclic permutations.
    """
    ri = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], float)
    rj = np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]], float)
    rk = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], float)
    eye = np.eye(n)
    return np.stack([np.kron(eye, r) for r in (ri, rj, rk)])


def reeb_block():
    """``phi_alpha`` restricted to span(xi_1, xi_2, xi_3): ``v -> e_alpha x v``."""
    out = np.zeros((3, 3, 3))
    for a in range(3):
        for b in range(3):
            out[a, :, b] = np.cross(np.eye(3)[a], np.eye(3)[b])
    return out


def _block_diag(a, b):
    """Block-diagonal of two square arrays (jets or floats) with trailing dims."""
    na, nb = value(a).shape[-1], value(b).shape[-1]
    lead = value(a).shape[:-2]
    za = np.zeros(lead + (na, nb))
    zb = np.zeros(lead + (nb, na))
    ax = len(lead)
    top = concatenate([a, za], axis=ax + 1)
    bot = concatenate([zb, b], axis=ax + 1)
    return concatenate([top, bot], axis=ax)


class _Shared:
    """Memoize the last evaluation so the three field callables share work."""

    def __init__(self, fn):
        self.fn = fn
        self._local = threading.local()

    def __call__(self, u):
        memo = self._local
        if getattr(memo, "arg", None) is not u:
            memo.out = self.fn(u)
            memo.arg = u
        return memo.out

    def field(self, i):
        return lambda u: self(u)[i]


def flat_cosymplectic(n=1):
    """R^{4n+3} with quaternionic structure on R^{4n} and Reeb fields d/dt_a."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    d = 4 * n + 3
    J = -quaternion_right(n)
    phi = np.zeros((3, d, d))
    phi[:, :4 * n, :4 * n] = J
    phi[:, 4 * n:, 4 * n:] = reeb_block()
    xi = np.zeros((3, d))
    xi[:, 4 * n:] = np.eye(3)
    g = np.eye(d)
    return ChartedManifold(
        name=f"flat{d}", dim=d, domain_radius=np.inf,
        field_g=lambda u: g, field_phi=lambda u: phi, field_xi=lambda u: xi,
        meta={"kind": "FlatCosymplectic", "n": n, "c": 0.0, "rank": 1, "l": 0, "m": n},
    )


def _sphere_fields(n, L):
    N = 4 * n + 3
    eye = np.eye(N)

    def fields(u):
        s = u @ u
        inv = recip(1 + s)
        inv2 = inv * inv
        x = concatenate([2 * u * inv, ((1 - s) * inv).reshape(1)])
        outer = jeinsum("a,j->aj", u, u) if isinstance(u, Jet) else np.outer(u, u)
        top = 2 * eye * inv - 4 * outer * inv2
        bottom = (-4 * u * inv2).reshape(1, N)
        Dx = concatenate([top, bottom])                          # (N+1, N)
        G = Dx.T @ Dx
        xperp = jeinsum("a,b->ab", x, x) if isinstance(x, Jet) else np.outer(x, x)
        proj = np.eye(N + 1) - xperp
        xi_amb = [L[a] @ x for a in range(3)]
        phi_amb = [-(proj @ (L[a] @ Dx)) for a in range(3)]      # (N+1, N) each
        rhs = concatenate([Dx.T @ stack(xi_amb, axis=1)]
                          + [Dx.T @ pa for pa in phi_amb], axis=1)
        sol = solve(G, rhs)
        xi = sol[:, 0:3].T
        phi = stack([sol[:, 3 + a * N: 3 + (a + 1) * N] for a in range(3)])
        return G, phi, xi

    return fields


def _orient(L):
    """Order (L1, L2, L3) so that [xi_1, xi_2] = +2 xi_3 on the sphere."""
    x = np.zeros(L.shape[-1])
    x[-1] = 1.0
    coef = ((L[1] @ L[0] - L[0] @ L[1]) @ x) @ (L[2] @ x)
    if coef > 0:
        return L, False
    return L[[0, 2, 1]], True


def sphere_3sasakian(n=1):
    """Standard 3-Sasakian S^{4n+3} in an inverse-stereographic chart."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    N = 4 * n + 3
    L, swapped = _orient(quaternion_right(n + 1))
    shared = _Shared(_sphere_fields(n, L))
    return ChartedManifold(
        name=f"sphere{N}", dim=N, domain_radius=1.5,
        field_g=shared.field(0), field_phi=shared.field(1), field_xi=shared.field(2),
        meta={"kind": "Sphere3Sasakian", "n": n, "c": 2.0, "rank": N, "l": n, "m": 0,
              "orientation_swapped": swapped},
    )


def homothety(M, c):
    """Rescale a 3-c0-Sasakian structure to a 3-c-Sasakian one.

    With ``lam = c / c0`` this sets ``xi' = lam xi``, ``eta' = eta / lam``,
    ``g' = g / lam^2``, ``phi' = phi``; for a 3-Sasakian input (``c0 = 2``) it
    is the inverse of the usual normalizing homothety.
    """
    if c == 0:
        raise ParameterError("homothety parameter c must be nonzero")
    c0 = M.meta.get("c", 2.0)
    if not c0:
        raise ParameterError(f"{M.name} has Reeb constant 0; no homothety applies")
    lam = float(c) / float(c0)
    g, phi, xi = M.field_g, M.field_phi, M.field_xi
    meta = dict(M.meta)
    meta.update({"kind": "Homothety", "c": float(c), "base": M.name})
    return ChartedManifold(
        name=f"csasakian{M.dim}:c={c:g}" if M.meta.get("kind") == "Sphere3Sasakian"
        else f"{M.name}@c={c:g}",
        dim=M.dim, domain_radius=M.domain_radius,
        field_g=lambda u: g(u) * (1.0 / lam ** 2),
        field_phi=phi,
        field_xi=lambda u: xi(u) * lam,
        meta=meta,
    )


def product_3qs(l=1, m=1):
    """S^{4l+3} x R^{4m}: sphere structure on the first factor, flat quaternionic on the second."""
    if l < 1 or m < 1:
        raise ParameterError(f"need l >= 1 and m >= 1, got l={l}, m={m}")
    S = sphere_3sasakian(l)
    ns, nf = S.dim, 4 * m
    d = ns + nf
    J = -quaternion_right(m)

    def fields(w):
        u = w[:ns]
        gs, phis, xis = S.field_g(u), S.field_phi(u), S.field_xi(u)
        g = _block_diag(gs, np.eye(nf))
        phi = _block_diag(phis, J)
        xi = concatenate([xis, np.zeros((3, nf))], axis=1)
        return g, phi, xi

    shared = _Shared(fields)
    return ChartedManifold(
        name=f"product{d}" if (l, m) == (1, 1) else f"product_l{l}_m{m}",
        dim=d, domain_radius=1.5,
        field_g=shared.field(0), field_phi=shared.field(1), field_xi=shared.field(2),
        meta={"kind": "Product3QS", "n": l + m, "c": 2.0, "rank": 4 * l + 3, "l": l, "m": m,
              "sphere_dim": ns},
    )


_CSASAKIAN = re.compile(r"^csasakian(\d+):c=([-+0-9.eE]+)$")


def resolve(name):
    """Catalog entry by CLI name."""
    fixed = {
        "flat7": lambda: flat_cosymplectic(1),
        "flat11": lambda: flat_cosymplectic(2),
        "sphere7": lambda: sphere_3sasakian(1),
        "sphere11": lambda: sphere_3sasakian(2),
        "product11": lambda: product_3qs(1, 1),
    }
    if name in fixed:
        return fixed[name]()
    m = _CSASAKIAN.match(name)
    if m:
        dim = int(m.group(1))
        if (dim - 3) % 4 or dim < 7:
            raise ManifoldSpecError(f"no 3-Sasakian sphere of dimension {dim}")
        try:
            c = float(m.group(2))
        except ValueError as exc:
            raise ManifoldSpecError(f"bad homothety constant in {name!r}") from exc
        if c == 0:
            raise ManifoldSpecError("csasakian needs c != 0")
        return homothety(sphere_3sasakian((dim - 3) // 4), c)
    raise ManifoldSpecError(f"unknown catalog manifold {name!r}")
