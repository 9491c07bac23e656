"""Point-local multilinear algebra.

Vectors and covectors at a point are plain 1-d numpy arrays.  Alternating
forms are stored densely over strictly increasing index tuples and evaluated
with the determinant convention, ``(dx^1 ^ dx^2)(e_1, e_2) = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import (
    DegreeError,
    DimensionError,
    IndeterminateRankError,
    MetricError,
    NotSkewError,
    RankDeficiencyError,
)

__all__ = [
    "AltForm",
    "MetricFrame",
    "wedge",
    "interior",
    "skew_spectrum",
    "orthonormalize",
    "wedge_rank",
]


@lru_cache(maxsize=None)
def _tuples(d, k):
    return tuple(combinations(range(d), k))


@lru_cache(maxsize=None)
def _index(d, k):
    return {t: n for n, t in enumerate(_tuples(d, k))}


def _perm_sign(seq):
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class AltForm:
    """Alternating k-form on R^d, one component per increasing k-tuple."""

    __slots__ = ("degree", "dim", "components")

    def __init__(self, degree, dim, components):
        if not 0 <= degree <= dim:
            raise DegreeError(f"degree {degree} out of range for dimension {dim}")
        comps = np.asarray(components, dtype=float)
        n = len(_tuples(dim, degree))
        if comps.shape != (n,):
            raise DimensionError(f"expected {n} components, got shape {comps.shape}")
        self.degree = degree
        self.dim = dim
        self.components = comps

    @classmethod
    def zero(cls, degree, dim):
        return cls(degree, dim, np.zeros(len(_tuples(dim, degree))))

    @classmethod
    def scalar(cls, c, dim):
        return cls(0, dim, [c])

    @classmethod
    def from_covector(cls, eta):
        eta = np.asarray(eta, dtype=float)
        return cls(1, eta.shape[0], eta)

    @classmethod
    def from_matrix(cls, A):
        """2-form with ``omega(X, Y) = X^T A Y`` for antisymmetric ``A``."""
        A = np.asarray(A, dtype=float)
        d = A.shape[0]
        return cls(2, d, [A[i, j] for i, j in _tuples(d, 2)])

    @classmethod
    def basis(cls, idx, dim):
        """``dx^{i1} ^ ... ^ dx^{ik}`` for an increasing index tuple."""
        idx = tuple(idx)
        form = cls.zero(len(idx), dim)
        form.components[_index(dim, len(idx))[idx]] = 1.0
        return form

    def tuples(self):
        return _tuples(self.dim, self.degree)

    def to_matrix(self):
        if self.degree != 2:
            raise DegreeError("to_matrix needs a 2-form")
        A = np.zeros((self.dim, self.dim))
        for (i, j), c in zip(self.tuples(), self.components):
            A[i, j] = c
            A[j, i] = -c
        return A

    def __call__(self, *vectors):
        if len(vectors) != self.degree:
            raise DegreeError(f"{self.degree}-form evaluated on {len(vectors)} vectors")
        if self.degree == 0:
            return float(self.components[0])
        M = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
        if M.shape[0] != self.dim:
            raise DimensionError(f"vector length {M.shape[0]} != {self.dim}")
        total = 0.0
        for I, c in zip(self.tuples(), self.components):
            if c:
                total += c * np.linalg.det(M[list(I), :])
        return total

    def __add__(self, other):
        self._same(other)
        return AltForm(self.degree, self.dim, self.components + other.components)

    def __sub__(self, other):
        self._same(other)
        return AltForm(self.degree, self.dim, self.components - other.components)

    def __neg__(self):
        return AltForm(self.degree, self.dim, -self.components)

    def __mul__(self, c):
        return AltForm(self.degree, self.dim, self.components * float(c))

    __rmul__ = __mul__

    def _same(self, other):
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise DegreeError(
                f"form mismatch: ({self.degree}, {self.dim}) vs ({other.degree}, {other.dim})"
            )

    def norm(self):
        return float(np.max(np.abs(self.components), initial=0.0))

    def __repr__(self):
        return f"AltForm(degree={self.degree}, dim={self.dim}, components={self.components!r})"


def wedge(omega, tau):
    """Exterior product, shuffle sum with unit coefficients."""
    if omega.dim != tau.dim:
        raise DimensionError(f"wedge of forms on R^{omega.dim} and R^{tau.dim}")
    d, k, l = omega.dim, omega.degree, tau.degree
    if k + l > d:
        raise DegreeError(f"wedge degree {k}+{l} exceeds dimension {d}")
    out = np.zeros(len(_tuples(d, k + l)))
    idx = _index(d, k + l)
    for I, a in zip(_tuples(d, k), omega.components):
        if not a:
            continue
        sI = set(I)
        for J, b in zip(_tuples(d, l), tau.components):
            if not b or sI.intersection(J):
                continue
            seq = I + J
            out[idx[tuple(sorted(seq))]] += _perm_sign(seq) * a * b
    return AltForm(k + l, d, out)


def interior(X, omega):
    """Contraction in the first slot: ``(i_X omega)(Y...) = omega(X, Y...)``."""
    k, d = omega.degree, omega.dim
    if k < 1:
        raise DegreeError("interior product of a 0-form")
    X = np.asarray(X, dtype=float)
    if X.shape != (d,):
        raise DimensionError(f"vector shape {X.shape} != ({d},)")
    idx = _index(d, k)
    out = np.zeros(len(_tuples(d, k - 1)))
    for n, J in enumerate(_tuples(d, k - 1)):
        acc = 0.0
        for i in range(d):
            if X[i] == 0 or i in J:
                continue
            K = tuple(sorted((i,) + J))
            # moving i from the front to its sorted slot
            acc += (-1) ** K.index(i) * X[i] * omega.components[idx[K]]
        out[n] = acc
    return AltForm(k - 1, d, out)


def skew_spectrum(A, tol=1e-7, guard=10.0):
    """Rank and orthonormal kernel basis of a skew-symmetric matrix.

    Singular values above ``tol * s_max`` count as nonzero.  Any singular value
    within a factor ``guard`` of that threshold makes the rank indeterminate.
    Kernel vectors are the rows of the returned ``(d - rank, d)`` array.
    """
    A = np.asarray(A, dtype=float)
    scale = np.linalg.norm(A)
    if np.linalg.norm(A + A.T) > tol * scale:
        raise NotSkewError(f"matrix is not skew: |A + A^T| = {np.linalg.norm(A + A.T):.3e}")
    d = A.shape[0]
    if scale == 0:
        return 0, np.eye(d)
    _, s, vt = np.linalg.svd(A)
    thresh = tol * s[0]
    near = (s > thresh / guard) & (s <= thresh * guard)
    if near.any():
        raise IndeterminateRankError("singular values too close to the rank threshold", s)
    rank = int(np.count_nonzero(s > thresh))
    if rank % 2:
        raise IndeterminateRankError("odd rank for a skew matrix", s)
    return rank, vt[rank:].copy()


@dataclass(frozen=True)
class MetricFrame:
    """Metric and its inverse at a point."""

    g: np.ndarray
    g_inv: np.ndarray

    @classmethod
    def from_matrix(cls, g, sym_tol=1e-12):
        g = np.asarray(g, dtype=float)
        scale = max(np.max(np.abs(g)), 1.0)
        if np.max(np.abs(g - g.T)) > sym_tol * scale:
            raise MetricError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise MetricError("metric is not positive-definite") from exc
        return cls(g, np.linalg.inv(g))

    @property
    def dim(self):
        return self.g.shape[0]

    def inner(self, X, Y):
        return float(X @ self.g @ Y)

    def norm(self, X):
        return float(np.sqrt(X @ self.g @ X))

    def lower(self, X):
        return self.g @ X

    def raise_(self, covector):
        return self.g_inv @ covector


def _sign_normalize(v, eps=1e-12):
    scale = np.max(np.abs(v))
    for c in v:
        if abs(c) > eps * scale:
            return v if c > 0 else -v
    return v


def orthonormalize(vectors, gf, tol=1e-10):
    """Gram-Schmidt with respect to ``gf.g``; output signs normalized."""
    out = []
    for v in vectors:
        v = np.asarray(v, dtype=float)
        n0 = gf.norm(v)
        w = v.copy()
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for e in out:
                w = w - gf.inner(e, w) * e
        n = gf.norm(w)
        if n0 == 0 or n <= tol * n0:
            raise RankDeficiencyError(f"vector {len(out)} is linearly dependent on its predecessors")
        out.append(_sign_normalize(w / n))
    return out


def wedge_rank(eta, deta, tol=1e-8):
    """Rank of a 1-form by brute-force wedge powers.

    Returns ``2p + 1`` when ``eta ^ (deta)^p != 0`` and ``(deta)^(p+1) = 0``,
    ``2p`` when ``(deta)^p != 0`` and ``eta ^ (deta)^p = 0``.
    """
    d = eta.dim
    unit = max(deta.norm(), 1e-300)
    power = AltForm.scalar(1.0, d)
    p = 0
    while 2 * (p + 1) <= d:
        nxt = wedge(power, deta)
        if nxt.norm() <= tol * unit ** (p + 1):
            break
        power, p = nxt, p + 1
    if 2 * p + 1 > d:
        return 2 * p
    top = wedge(eta, power)
    if top.norm() > tol * max(eta.norm(), 1e-300) * unit ** p:
        return 2 * p + 1
    return 2 * p
