"""Suite driver: sample points, run every check, assemble a deterministic report."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import resolve
from .errors import ParameterError, QS3Error
from .exprtree import load_manifold
from .geometry import christoffel_fd, riemann_fd
from .identities import (
    classify_chsc,
    identity_residual,
    phi_sectional_partial_sums,
    point_context,
    reeb_sectional_check,
)
from .stats import FORMULAS, IdentityId, ResidualStat
from .structure import (
    check_ac3_relations,
    check_invariant_foliations,
    check_quasi_sasakian,
    random_unit,
    rank_at,
    reeb_constant,
)

SCHEMA_VERSION = "qs3-report/1"
FD_POINTS = 10
FD_STEP = 1e-4
FD_TOL = 1e-5
CLASSIFY_MIN_POINTS = 8

# identities checked per structure; the phi-sectional sum couples all three
PER_ALPHA = [i for i in IdentityId if i is not IdentityId.PHI_SECTIONAL_SUM]

STRUCTURE_FORMULAS = {
    "AC3_RELATIONS": "phi_c = phi_a phi_b - eta_b (x) xi_a = -phi_b phi_a + eta_a (x) xi_b, "
                     "xi_c = phi_a xi_b, eta_c = eta_a o phi_b, g(phi X, phi Y) = g(X, Y) - eta(X) eta(Y)",
    "NORMALITY": "N_phi + d eta (x) xi = 0",
    "CLOSED_PHI": "d Phi = 0, Phi(X, Y) = g(X, phi Y)",
    "REEB_CONSTANT": "[xi_a, xi_b] = c xi_c, c matches the catalog value",
    "RANK_CONSISTENCY": "rank(eta_a) equal for a = 1, 2, 3 and equal to dim - 4m",
    "SPLIT_INVARIANTS": "projectors onto V, H, E^{4m}, E^{4l+3}, E^{4l} idempotent, g-symmetric, E^{4m} phi-invariant",
    "INVARIANT_FOLIATIONS": "nabla E^{4l+3} in E^{4l+3}, nabla E^{4m} in E^{4m}",
    "PHI_SECTIONAL_PARTIAL": "cyclic partial sums -R(X, phi_c X, phi_a X, phi_b X) = -H_c(X) + (c^2/4)|X_E4l|^4 "
                             "and their first-Bianchi closure",
    "REEB_SECTIONAL": "K(X, xi) = (c^2/4) g(X_E4l, X_E4l), X horizontal unit",
    "CURVATURE_SYMMETRIES": "R_ijkl = -R_jikl = -R_ijlk = R_klij, R_ijkl + R_jkil + R_kijl = 0",
    "FD_CHRISTOFFEL": "jet Christoffel symbols agree with central differences (step 1e-4), relative",
    "FD_RIEMANN": "jet Riemann tensor agrees with central differences (step 1e-4), relative",
    "CLASSIFICATION": "classification evidence consistent with the algebraic side conditions",
}


@dataclass
class RunConfig:
    manifold: str
    points: int = 16
    trials: int = 8
    seed: int = 42
    tol: float = 1e-8
    fd_check: bool = True
    out: str | None = None

    def validate(self):
        if not isinstance(self.points, int) or self.points < 1:
            raise ParameterError(f"points must be >= 1, got {self.points!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ParameterError(f"seed must be an unsigned integer, got {self.seed!r}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ParameterError(f"tol must be positive, got {self.tol!r}")
        return self

    def echo(self):
        return {"manifold": self.manifold, "points": self.points, "trials": self.trials,
                "seed": self.seed, "tol": self.tol, "fd_check": self.fd_check}


@dataclass
class CheckReport:
    manifold: dict
    checks: list
    classification: dict | None
    config: dict
    error: str | None = None
    version: str = __version__
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.error is None and all(row["pass"] for row in self.checks)

    def failures(self):
        return [row for row in self.checks if not row["pass"]]

    def to_dict(self):
        out = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": "qs3", "version": self.version},
            "seed": self.config["seed"],
            "config": self.config,
            "manifold": self.manifold,
            "checks": self.checks,
            "classification": self.classification,
            "passed": self.passed,
        }
        if self.error is not None:
            out["error"] = self.error
        out.update(self.extra)
        return out

    def to_json(self):
        return dumps(self.to_dict())


# -- deterministic JSON ---------------------------------------------------

def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0:
        return "0.0"
    s = format(x, ".17g")
    # keep floats recognizable as floats after a round trip
    return s if any(ch in s for ch in ".e") else s + ".0"


def _esc(s):
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _emit(obj, indent, level, parts):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        parts.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_num(obj))
    elif isinstance(obj, str):
        parts.append(_esc(obj))
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        keys = sorted(obj)
        for n, k in enumerate(keys):
            parts.append(pad + _esc(str(k)) + ": ")
            _emit(obj[k], indent, level + 1, parts)
            parts.append(",\n" if n < len(keys) - 1 else "\n")
        parts.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist() if isinstance(obj, np.ndarray) else obj)
        if not seq:
            parts.append("[]")
            return
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in seq):
            parts.append("[" + ", ".join(_num(v) if isinstance(v, (float, np.floating))
                                         else str(int(v)) for v in seq) + "]")
            return
        parts.append("[\n")
        for n, v in enumerate(seq):
            parts.append(pad)
            _emit(v, indent, level + 1, parts)
            parts.append(",\n" if n < len(seq) - 1 else "\n")
        parts.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON with sorted keys, 17 significant digits and ``null`` for non-finite floats."""
    parts = []
    _emit(obj, indent, 0, parts)
    parts.append("\n")
    return "".join(parts)


# -- driver ---------------------------------------------------------------

def load(spec):
    """Catalog name or path to a manifold spec file."""
    if spec.endswith(".json") or os.sep in spec or Path(spec).is_file():
        return load_manifold(spec)
    return resolve(spec)


def sample_points(M, n, seed_seq):
    """``n`` points uniformly in a ball strictly inside the chart domain."""
    rng = np.random.default_rng(seed_seq)
    radius = 0.9 * min(1.0, M.domain_radius)
    pts = []
    for _ in range(n):
        v = rng.standard_normal(M.dim)
        v /= np.linalg.norm(v)
        pts.append(v * radius * rng.random() ** (1.0 / M.dim))
    return pts


def thread_count(n_tasks):
    env = os.environ.get("QS3_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError as exc:
        raise ParameterError(f"QS3_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(cap, n_tasks))


def _stat(ident, alpha, residual, *terms, args=None):
    return ResidualStat(ident, alpha).add(residual, *terms, args=args)


def _curvature_symmetries(riem):
    stat = ResidualStat("CURVATURE_SYMMETRIES")
    stat.add(riem + np.swapaxes(riem, 0, 1), riem)
    stat.add(riem + np.swapaxes(riem, 2, 3), riem)
    stat.add(riem - np.transpose(riem, (2, 3, 0, 1)), riem)
    stat.add(riem + np.transpose(riem, (1, 2, 0, 3)) + np.transpose(riem, (2, 0, 1, 3)), riem)
    return stat


def _relative(name, approx, exact):
    # relative to the size of the exact tensor, floored at 1
    return ResidualStat(name).add(approx - exact, exact)


def _point_checks(M, p, index, c, config, seed_seq):
    """All per-point stats keyed by ``(id, alpha)``; deterministic given ``seed_seq``."""
    rng = np.random.default_rng(seed_seq)
    ctx = point_context(M, p, c, rng=rng)
    out = {}

    def put(stat):
        out[(stat.identity, stat.alpha)] = stat

    put(check_ac3_relations(M, p))
    for a in (1, 2, 3):
        normality, dphi = check_quasi_sasakian(M, p, a, rng, config.trials)
        put(_stat("NORMALITY", a, normality))
        put(_stat("CLOSED_PHI", a, dphi))

    ranks = [rank_at(M, p, a, cross_check=M.dim <= 7) for a in (1, 2, 3)]
    put(_stat("RANK_CONSISTENCY", None, max(abs(r - ctx.split.rank) for r in ranks),
              args=(ranks,)))
    put(_stat("SPLIT_INVARIANTS", None, ctx.split.invariant_residual))
    put(check_invariant_foliations(M, p, ctx.split, rng, config.trials))
    put(_curvature_symmetries(ctx.geom.riem))

    for ident in PER_ALPHA:
        for a in (1, 2, 3):
            put(identity_residual(M, p, ident, a, config.trials, rng, ctx))
    total = identity_residual(M, p, IdentityId.PHI_SECTIONAL_SUM, 1, config.trials, rng, ctx)
    total.alpha = None
    put(total)

    partial = ResidualStat("PHI_SECTIONAL_PARTIAL", vacuous=ctx.degenerate)
    g, PH = ctx.g, ctx.split.P_H
    for _ in range(config.trials):
        X = random_unit(rng, g, PH)
        res, closure = phi_sectional_partial_sums(M, p, X, ctx)
        partial.add(max(res + [closure]), args=(X,))
    put(partial)
    for a in (1, 2, 3):
        st = ResidualStat("REEB_SECTIONAL", a, vacuous=ctx.degenerate)
        for _ in range(config.trials):
            X = random_unit(rng, g, PH)
            K, expected, res = reeb_sectional_check(M, p, X, a, ctx)
            st.add(res, K, expected, args=(X,))
        put(st)

    if config.fd_check and index < FD_POINTS:
        put(_relative("FD_CHRISTOFFEL", christoffel_fd(M, p, FD_STEP), ctx.geom.gamma))
        put(_relative("FD_RIEMANN", riemann_fd(M, p, FD_STEP), ctx.geom.riem))
    return out, ctx, ranks


def _row(stat, tol, formula, point):
    alpha = "all" if stat.identity == IdentityId.PHI_SECTIONAL_SUM.value else stat.alpha
    return {
        "id": stat.identity,
        "alpha": alpha,
        "paper_ref": formula,
        "max_residual": stat.max_abs,
        "scale": stat.scale,
        "normalized": stat.normalized,
        "vacuous": bool(stat.vacuous),
        "pass": bool(stat.passed(tol)),
        "tol": tol,
        "n_trials": stat.n_trials,
        "worst_args": stat.worst_args,
        "worst_point": point,
    }


def _sort_key(row):
    a = row["alpha"]
    return (row["id"], 0 if a in (None, "all") else int(a))


def _merge(per_point, points):
    merged, where = {}, {}
    for i, stats in enumerate(per_point):
        for key in sorted(stats, key=lambda k: (k[0], k[1] or 0)):
            st = stats[key]
            if key not in merged:
                merged[key] = ResidualStat(st.identity, st.alpha, vacuous=st.vacuous)
                where[key] = i
            if st.max_abs > merged[key].max_abs or merged[key].n_trials == 0:
                where[key] = i
            merged[key].merge(st)
    return merged, {k: points[i].tolist() for k, i in where.items()}


def run_suite(config, progress=None):
    """Run every check on ``config.manifold`` and return a :class:`CheckReport`.

    Configuration problems (unknown manifold, bad parameters, malformed spec
    file) raise; numerical failures are reported in the returned report.
    """
    config.validate()
    M = load(config.manifold)
    say = progress or (lambda msg: None)
    root = np.random.SeedSequence(config.seed)
    pts_seq, cls_seq, point_root = root.spawn(3)
    points = sample_points(M, config.points, pts_seq)
    point_seqs = point_root.spawn(config.points)

    meta = {"name": M.name, "dim": M.dim, "kind": M.meta.get("kind"),
            "expected": {k: M.meta[k] for k in ("c", "rank", "l", "m") if k in M.meta}}
    if "orientation_swapped" in M.meta:
        meta["orientation_swapped"] = M.meta["orientation_swapped"]

    try:
        c = reeb_constant(M, points)
    except QS3Error as exc:
        meta.update({"rank": None, "c": None, "l": None, "m": None})
        return CheckReport(meta, [], None, config.echo(), error=f"{type(exc).__name__}: {exc}")

    say(f"{M.name}: c = {c:.12g}, {config.points} points x {config.trials} trials")

    def work(i):
        return _point_checks(M, points[i], i, c, config, point_seqs[i])

    try:
        with ThreadPoolExecutor(max_workers=thread_count(config.points)) as pool:
            results = list(pool.map(work, range(config.points)))
    except QS3Error as exc:
        meta.update({"rank": None, "c": c, "l": None, "m": None})
        return CheckReport(meta, [], None, config.echo(), error=f"{type(exc).__name__}: {exc}")

    per_point = [r[0] for r in results]
    ctxs = [r[1] for r in results]
    split = ctxs[0].split
    meta.update({"rank": split.rank, "c": c, "l": split.l, "m": split.m})
    say(f"{M.name}: rank {split.rank}, l = {split.l}, m = {split.m}")

    merged, worst_points = _merge(per_point, points)
    expected_c = M.meta.get("c")
    if expected_c is not None:
        merged[("REEB_CONSTANT", None)] = _stat("REEB_CONSTANT", None, c - expected_c, c, expected_c)
        worst_points[("REEB_CONSTANT", None)] = None
    rank_spread = max(ctx.split.rank for ctx in ctxs) - min(ctx.split.rank for ctx in ctxs)
    merged[("RANK_CONSISTENCY", None)].add(rank_spread)

    classification = None
    if config.points >= CLASSIFY_MIN_POINTS:
        cls_stat = ResidualStat("CLASSIFICATION")
        try:
            cls = classify_chsc(M, points, tol=config.tol, rng=np.random.default_rng(cls_seq),
                                ctxs=ctxs)
            classification = cls.to_dict()
            cls_stat.add(0.0)
            say(f"{M.name}: {cls.label()}")
        except QS3Error as exc:
            classification = {"verdict": None, "error": f"{type(exc).__name__}: {exc}"}
            cls_stat.add(np.inf)
        merged[("CLASSIFICATION", None)] = cls_stat
        worst_points[("CLASSIFICATION", None)] = None

    rows = []
    for key, stat in merged.items():
        ident = stat.identity
        if ident.startswith("FD_"):
            tol = max(config.tol, FD_TOL)
        else:
            tol = config.tol
        if ident in IdentityId.__members__:
            formula = FORMULAS[IdentityId(ident)]
        else:
            formula = STRUCTURE_FORMULAS[ident]
        rows.append(_row(stat, tol, formula, worst_points.get(key)))
    rows.sort(key=_sort_key)
    return CheckReport(meta, rows, classification, config.echo())


def classify_only(config, progress=None):
    """Sample points and run the classifier alone."""
    config.validate()
    if config.points < CLASSIFY_MIN_POINTS:
        raise ParameterError(f"classification needs at least {CLASSIFY_MIN_POINTS} points")
    M = load(config.manifold)
    root = np.random.SeedSequence(config.seed)
    pts_seq, cls_seq, _ = root.spawn(3)
    points = sample_points(M, config.points, pts_seq)
    if progress:
        progress(f"{M.name}: classifying from {config.points} points")
    return M, classify_chsc(M, points, tol=config.tol, rng=np.random.default_rng(cls_seq))


__all__ = ["RunConfig", "CheckReport", "run_suite", "classify_only", "dumps", "load",
           "sample_points"]
