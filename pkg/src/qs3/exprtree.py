"""Declarative manifold spec files.

A spec file is JSON::

    {
      "schema": "qs3-manifold/1",
      "name": "my-manifold",
      "dim": 7,
      "domain_radius": 1.0,
      "c": 0.0,                      # optional expected Reeb constant
      "g":   [[expr, ...], ...],     # dim x dim
      "phi": [[[expr, ...], ...]] * 3,
      "xi":  [[expr, ...]] * 3
    }

Expressions are numbers, ``{"var": i}`` for the i-th chart coordinate, or
``{"op": name, "args": [...]}`` with ``name`` one of ``add``, ``sub``, ``mul``,
``div``, ``neg``, ``recip``, ``sqrt``, ``pow_int`` (which also takes an
integer ``"exp"``).  ``add`` and ``mul`` are n-ary; ``sub`` and ``div`` are
binary; the rest are unary.  Nothing is ever handed to a host-language
evaluator.
"""

from __future__ import annotations

import json
import math
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import ManifoldSpecError
from .geometry import ChartedManifold
from .jet import recip, sqrt, stack

SCHEMA = "qs3-manifold/1"

_ARITY = {"add": None, "mul": None, "sub": 2, "div": 2, "neg": 1, "recip": 1, "sqrt": 1,
          "pow_int": 1}


def compile_expr(expr, dim, where="expr"):
    """Compile an expression tree to a callable of the coordinate vector."""
    if isinstance(expr, bool):
        raise ManifoldSpecError(f"{where}: booleans are not expressions")
    if isinstance(expr, (int, float)):
        c = float(expr)
        if not math.isfinite(c):
            raise ManifoldSpecError(f"{where}: non-finite constant")
        return lambda u: c
    if not isinstance(expr, dict):
        raise ManifoldSpecError(f"{where}: expected number or object, got {type(expr).__name__}")
    if "var" in expr:
        i = expr["var"]
        if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < dim:
            raise ManifoldSpecError(f"{where}: coordinate index {i!r} out of range 0..{dim - 1}")
        return lambda u: u[i]
    op = expr.get("op")
    if op not in _ARITY:
        raise ManifoldSpecError(f"{where}: unknown op {op!r}")
    args = expr.get("args")
    if not isinstance(args, list) or not args:
        raise ManifoldSpecError(f"{where}: op {op!r} needs a non-empty 'args' list")
    arity = _ARITY[op]
    if arity is not None and len(args) != arity:
        raise ManifoldSpecError(f"{where}: op {op!r} takes {arity} argument(s), got {len(args)}")
    fs = [compile_expr(a, dim, f"{where}.{op}[{n}]") for n, a in enumerate(args)]

    if op == "add":
        return lambda u: reduce(lambda x, y: x + y, (f(u) for f in fs))
    if op == "mul":
        return lambda u: reduce(lambda x, y: x * y, (f(u) for f in fs))
    a = fs[0]
    if op == "sub":
        b = fs[1]
        return lambda u: a(u) - b(u)
    if op == "div":
        b = fs[1]
        return lambda u: a(u) * recip(b(u))
    if op == "neg":
        return lambda u: -a(u)
    if op == "recip":
        return lambda u: recip(a(u))
    if op == "sqrt":
        return lambda u: sqrt(a(u))
    n = expr.get("exp")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ManifoldSpecError(f"{where}: pow_int needs an integer 'exp'")
    if n >= 0:
        return lambda u: _ipow(a(u), n)
    return lambda u: recip(_ipow(a(u), -n))


def _ipow(x, n):
    if n == 0:
        return 1.0
    out = x
    for _ in range(n - 1):
        out = out * x
    return out


def _grid(data, shape, dim, where):
    arr = np.empty(shape, dtype=object)
    try:
        raw = np.array(data, dtype=object)
    except ValueError as exc:
        raise ManifoldSpecError(f"{where}: ragged array") from exc
    if raw.shape != shape:
        raise ManifoldSpecError(f"{where}: expected shape {shape}, got {raw.shape}")
    for idx in np.ndindex(*shape):
        arr[idx] = compile_expr(raw[idx], dim, f"{where}{list(idx)}")
    return arr


def _field(fns):
    def evaluate(u, fns=fns):
        if fns.ndim == 1:
            return stack([f(u) for f in fns])
        return stack([evaluate(u, sub) for sub in fns])
    return evaluate


def manifold_from_spec(spec):
    """Build a :class:`ChartedManifold` from a parsed spec dictionary."""
    if not isinstance(spec, dict):
        raise ManifoldSpecError("manifold spec must be a JSON object")
    if spec.get("schema", SCHEMA) != SCHEMA:
        raise ManifoldSpecError(f"unsupported schema {spec.get('schema')!r}")
    dim = spec.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 7 or (dim - 3) % 4:
        raise ManifoldSpecError(f"dim must be an integer of the form 4n+3 >= 7, got {dim!r}")
    radius = spec.get("domain_radius", 1.0)
    if not isinstance(radius, (int, float)) or radius <= 0:
        raise ManifoldSpecError("domain_radius must be a positive number")
    for key in ("g", "phi", "xi"):
        if key not in spec:
            raise ManifoldSpecError(f"missing field {key!r}")
    g = _field(_grid(spec["g"], (dim, dim), dim, "g"))
    phi = _field(_grid(spec["phi"], (3, dim, dim), dim, "phi"))
    xi = _field(_grid(spec["xi"], (3, dim), dim, "xi"))
    meta = {"kind": "SpecFile"}
    if "c" in spec:
        meta["c"] = float(spec["c"])
    return ChartedManifold(name=str(spec.get("name", "spec")), dim=dim,
                           domain_radius=float(radius), field_g=g, field_phi=phi,
                           field_xi=xi, meta=meta)


def load_manifold(path):
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifoldSpecError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifoldSpecError(f"{path} is not valid JSON: {exc}") from exc
    return manifold_from_spec(spec)
