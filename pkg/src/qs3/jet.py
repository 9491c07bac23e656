"""Second-order forward-mode jets.

A :class:`Jet` carries an array of values together with their gradient and
Hessian with respect to the ``d`` chart coordinates.  The trailing axes of
``grad`` (one axis of length ``d``) and ``hess`` (two axes) index the
coordinates; the leading axes mirror ``val``.  A scalar jet (``val.shape ==
()``) is what the rest of the package calls a ``Jet2``.

Arithmetic mixes freely with plain floats and numpy arrays, which are lifted
to constant jets.  Catalog fields are written against this duck-typed
interface so the same code can be evaluated on floats (finite-difference
oracles) or on jets (exact derivatives).
"""

from __future__ import annotations

import string

import numpy as np

from .errors import DimensionError, SingularEvaluationError, SingularSystemError

__all__ = [
    "Jet",
    "Jet2",
    "jet_var",
    "jet_vars",
    "jet_apply",
    "jet_solve",
    "jeinsum",
    "stack",
    "concatenate",
    "sqrt",
    "recip",
    "solve",
    "value",
    "PIVOT_FLOOR",
]

PIVOT_FLOOR = 1e-12


def _sym(h):
    return 0.5 * (h + np.swapaxes(h, -1, -2))


class Jet:
    """Array of second-order jets over ``d`` coordinates."""

    __slots__ = ("val", "grad", "hess")
    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, val, grad, hess):
        val = np.asarray(val, dtype=float)
        grad = np.asarray(grad, dtype=float)
        hess = np.asarray(hess, dtype=float)
        if grad.shape[:-1] != val.shape or hess.shape[:-2] != val.shape:
            raise DimensionError(
                f"inconsistent jet shapes {val.shape}, {grad.shape}, {hess.shape}"
            )
        d = grad.shape[-1]
        if hess.shape[-2:] != (d, d):
            raise DimensionError(f"hessian trailing shape {hess.shape[-2:]} != ({d}, {d})")
        self.val = val
        self.grad = grad
        self.hess = hess

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, val, d):
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros(val.shape + (d,)), np.zeros(val.shape + (d, d)))

    @property
    def d(self):
        return self.grad.shape[-1]

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Jet(val={self.val!r}, grad={self.grad!r}, hess={self.hess!r})"

    def _check(self, other):
        if isinstance(other, Jet):
            if other.d != self.d:
                raise DimensionError(f"jet dimension mismatch: {self.d} vs {other.d}")
            return other
        return None

    # -- ring operations --------------------------------------------------

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        o = self._check(other)
        if o is None:
            c = np.asarray(other, dtype=float)
            v = self.val + c
            return Jet(v, np.broadcast_to(self.grad, v.shape + (self.d,)),
                       np.broadcast_to(self.hess, v.shape + (self.d, self.d)))
        return Jet(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._check(other)
        if o is None:
            c = np.asarray(other, dtype=float)
            return Jet(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])
        av, bv = self.val, o.val
        ag, bg = self.grad, o.grad
        cross = ag[..., :, None] * bg[..., None, :]
        hess = (av[..., None, None] * o.hess + bv[..., None, None] * self.hess
                + cross + np.swapaxes(cross, -1, -2))
        return Jet(av * bv, av[..., None] * bg + bv[..., None] * ag, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.recip()
        c = np.asarray(other, dtype=float)
        if np.any(c == 0):
            raise SingularEvaluationError("div", c)
        return self * (1.0 / c)

    def __rtruediv__(self, other):
        return self.recip() * other

    def __pow__(self, n):
        return self.pow_int(n)

    def _chain(self, f0, f1, f2):
        g = self.grad
        hess = (f1[..., None, None] * self.hess
                + f2[..., None, None] * (g[..., :, None] * g[..., None, :]))
        return Jet(f0, f1[..., None] * g, hess)

    def recip(self):
        v = self.val
        if np.any(v == 0):
            raise SingularEvaluationError("recip", v)
        r = 1.0 / v
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def sqrt(self):
        v = self.val
        if np.any(v <= 0):
            raise SingularEvaluationError("sqrt", v)
        s = np.sqrt(v)
        return self._chain(s, 0.5 / s, -0.25 / (s * v))

    def pow_int(self, n):
        if int(n) != n:
            raise TypeError(f"pow_int needs an integer exponent, got {n!r}")
        n = int(n)
        if n < 0:
            return self.recip().pow_int(-n)
        v = self.val
        if n == 0:
            return Jet.constant(np.ones_like(v), self.d)
        if n == 1:
            return self
        f1 = n * v ** (n - 1)
        f2 = n * (n - 1) * v ** (n - 2)
        return self._chain(v ** n, f1, f2)

    # -- array plumbing ---------------------------------------------------

    def __getitem__(self, key):
        if key is Ellipsis or (isinstance(key, tuple) and Ellipsis in key):
            raise IndexError("Ellipsis indexing is not supported on jets")
        return Jet(self.val[key], self.grad[key], self.hess[key])

    def transpose(self, *axes):
        n = self.ndim
        if not axes:
            axes = tuple(reversed(range(n)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(self.val.transpose(axes), self.grad.transpose(axes + (n,)),
                   self.hess.transpose(axes + (n, n + 1)))

    @property
    def T(self):
        return self.transpose()

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        d = self.d
        return Jet(self.val.reshape(shape), self.grad.reshape(shape + (d,)),
                   self.hess.reshape(shape + (d, d)))

    def sum(self, axis=None):
        if axis is None:
            axis = tuple(range(self.ndim))
        return Jet(self.val.sum(axis=axis), self.grad.sum(axis=axis), self.hess.sum(axis=axis))

    def __matmul__(self, other):
        return _matmul(self, other)

    def __rmatmul__(self, other):
        return _matmul(other, self)


Jet2 = Jet


def value(x):
    """Value part of a jet, or ``x`` itself for plain numbers/arrays."""
    return x.val if isinstance(x, Jet) else np.asarray(x, dtype=float)


def jet_var(v, i, d):
    """Coordinate jet: value ``v``, gradient ``e_i``, zero Hessian."""
    if not 0 <= i < d:
        raise DimensionError(f"coordinate index {i} out of range for dimension {d}")
    grad = np.zeros(d)
    grad[i] = 1.0
    return Jet(float(v), grad, np.zeros((d, d)))


def jet_vars(point):
    """Vector jet of all chart coordinates at ``point``."""
    p = np.asarray(point, dtype=float)
    d = p.shape[0]
    return Jet(p, np.eye(d), np.zeros((d, d, d)))


def jet_apply(op, a, b=None):
    """Apply a named operation from the jet op set."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "recip":
        return recip(a)
    if op == "sqrt":
        return sqrt(a)
    if op == "pow_int":
        return a ** b if isinstance(a, Jet) else np.asarray(a, dtype=float) ** int(b)
    raise ValueError(f"unknown jet op {op!r}")


def sqrt(x):
    if isinstance(x, Jet):
        return x.sqrt()
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise SingularEvaluationError("sqrt", x)
    return np.sqrt(x)


def recip(x):
    if isinstance(x, Jet):
        return x.recip()
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise SingularEvaluationError("recip", x)
    return 1.0 / x


def _dim(*xs):
    ds = {x.d for x in xs if isinstance(x, Jet)}
    if len(ds) > 1:
        raise DimensionError(f"jet dimension mismatch: {sorted(ds)}")
    return ds.pop() if ds else None


def jeinsum(subscripts, a, b):
    """Two-operand ``einsum`` with product-rule propagation of derivatives."""
    d = _dim(a, b)
    if d is None:
        return np.einsum(subscripts, a, b)
    used = set(subscripts)
    free = [c for c in string.ascii_letters if c not in used]
    p, q = free[0], free[1]
    ins, out = subscripts.split("->")
    sa, sb = ins.split(",")
    if not isinstance(a, Jet):
        a_val = np.asarray(a, dtype=float)
        val = np.einsum(subscripts, a_val, b.val)
        grad = np.einsum(f"{sa},{sb}{p}->{out}{p}", a_val, b.grad)
        hess = np.einsum(f"{sa},{sb}{p}{q}->{out}{p}{q}", a_val, b.hess)
        return Jet(val, grad, _sym(hess))
    if not isinstance(b, Jet):
        b_val = np.asarray(b, dtype=float)
        val = np.einsum(subscripts, a.val, b_val)
        grad = np.einsum(f"{sa}{p},{sb}->{out}{p}", a.grad, b_val)
        hess = np.einsum(f"{sa}{p}{q},{sb}->{out}{p}{q}", a.hess, b_val)
        return Jet(val, grad, _sym(hess))
    val = np.einsum(subscripts, a.val, b.val)
    grad = (np.einsum(f"{sa}{p},{sb}->{out}{p}", a.grad, b.val)
            + np.einsum(f"{sa},{sb}{p}->{out}{p}", a.val, b.grad))
    cross = np.einsum(f"{sa}{p},{sb}{q}->{out}{p}{q}", a.grad, b.grad)
    hess = (np.einsum(f"{sa}{p}{q},{sb}->{out}{p}{q}", a.hess, b.val)
            + np.einsum(f"{sa},{sb}{p}{q}->{out}{p}{q}", a.val, b.hess)
            + cross + np.swapaxes(cross, -1, -2))
    return Jet(val, grad, _sym(hess))


def _matmul(a, b):
    na, nb = np.ndim(value(a)), np.ndim(value(b))
    if na == 1 and nb == 1:
        sub = "i,i->"
    elif na == 1:
        sub = "i,...ij->...j"
    elif nb == 1:
        sub = "...ij,j->...i"
    else:
        sub = "...ij,...jk->...ik"
    if "..." in sub:
        # jeinsum appends letters after the operand subscripts, so spell out
        # the batch axes explicitly instead of relying on an ellipsis
        batch_a = na - 2 if na >= 2 else 0
        batch_b = nb - 2 if nb >= 2 else 0
        nbatch = max(batch_a, batch_b)
        letters = "ABCDEFGH"[:nbatch]
        la, lb = letters[nbatch - batch_a:], letters[nbatch - batch_b:]
        sub = sub.replace("...ij,...jk->...ik", f"{la}ij,{lb}jk->{letters}ik")
        sub = sub.replace("...ij,j->...i", f"{la}ij,j->{la}i")
        sub = sub.replace("i,...ij->...j", f"i,{lb}ij->{lb}j")
    return jeinsum(sub, a, b)


def stack(items, axis=0):
    """Stack jets (or a mix of jets and constants) along a new leading-side axis."""
    items = list(items)
    d = _dim(*items)
    if d is None:
        return np.stack([np.asarray(x, dtype=float) for x in items], axis=axis)
    items = [x if isinstance(x, Jet) else Jet.constant(x, d) for x in items]
    nd = items[0].ndim + 1
    if axis < 0:
        axis += nd
    if not 0 <= axis < nd:
        raise np.exceptions.AxisError(axis, nd)
    return Jet(np.stack([x.val for x in items], axis=axis),
               np.stack([x.grad for x in items], axis=axis),
               np.stack([x.hess for x in items], axis=axis))


def concatenate(items, axis=0):
    items = list(items)
    d = _dim(*items)
    if d is None:
        return np.concatenate([np.asarray(x, dtype=float) for x in items], axis=axis)
    items = [x if isinstance(x, Jet) else Jet.constant(x, d) for x in items]
    nd = items[0].ndim
    if axis < 0:
        axis += nd
    return Jet(np.concatenate([x.val for x in items], axis=axis),
               np.concatenate([x.grad for x in items], axis=axis),
               np.concatenate([x.hess for x in items], axis=axis))


def jet_solve(A, b, pivot_floor=PIVOT_FLOOR):
    """Solve ``A x = b`` over the jet ring.

    Gaussian elimination with partial pivoting on value magnitude.  ``b`` may
    be a vector or a matrix of right-hand sides.  A pivot smaller than
    ``pivot_floor`` times the largest value-part of its column in the input
    matrix raises :class:`SingularSystemError`.
    """
    d = _dim(A, b)
    if d is None:
        d = 0
    A = A if isinstance(A, Jet) else Jet.constant(A, d)
    b = b if isinstance(b, Jet) else Jet.constant(b, d)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"jet_solve needs a square matrix, got {A.shape}")
    if b.shape[0] != n:
        raise DimensionError(f"right-hand side length {b.shape[0]} != {n}")
    vector_rhs = b.ndim == 1
    rhs = b.reshape(n, 1) if vector_rhs else b
    k = rhs.shape[1]
    colmax = np.max(np.abs(A.val), axis=0)
    rows = [concatenate([A[r], rhs[r]]) for r in range(n)]

    for col in range(n):
        mags = [abs(rows[r].val[col]) for r in range(col, n)]
        piv = col + int(np.argmax(mags))
        if colmax[col] == 0 or mags[piv - col] <= pivot_floor * colmax[col]:
            raise SingularSystemError(
                f"pivot {mags[piv - col]:.3e} in column {col} below floor "
                f"{pivot_floor:g} x {colmax[col]:.3e}"
            )
        rows[col], rows[piv] = rows[piv], rows[col]
        inv = rows[col][col].recip()
        for r in range(col + 1, n):
            f = rows[r][col] * inv
            if f.val == 0 and not f.grad.any() and not f.hess.any():
                continue
            rows[r] = rows[r] - f * rows[col]

    xs = [None] * n
    for i in reversed(range(n)):
        acc = rows[i][n:]
        if i < n - 1:
            acc = acc - jeinsum("j,jk->k", rows[i][i + 1:n], stack(xs[i + 1:]))
        xs[i] = acc * rows[i][i].recip()
    x = stack(xs)
    if d == 0:
        x = Jet(x.val, x.grad, x.hess)
    return x.reshape(n) if vector_rhs else x.reshape(n, k)


def solve(A, b):
    """Linear solve that dispatches to :func:`jet_solve` whenever a jet is involved."""
    if isinstance(A, Jet) or isinstance(b, Jet):
        return jet_solve(A, b)
    return np.linalg.solve(np.asarray(A, dtype=float), np.asarray(b, dtype=float))
