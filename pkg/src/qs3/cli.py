"""``qs3`` command line: ``check``, ``classify`` and ``list``.

Exit codes: 0 when every check passes, 1 when any check fails (the report is
still written), 2 for configuration or spec-file errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .catalog import flat_cosymplectic, homothety, product_3qs, sphere_3sasakian
from .errors import (
    DimensionError,
    DomainError,
    ManifoldSpecError,
    ParameterError,
    QS3Error,
)
from .report import RunConfig, classify_only, dumps, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
CONFIG_ERRORS = (ManifoldSpecError, ParameterError, DomainError, DimensionError)


def _catalog_rows():
    entries = [
        ("flat7", flat_cosymplectic(1)),
        ("flat11", flat_cosymplectic(2)),
        ("sphere7", sphere_3sasakian(1)),
        ("sphere11", sphere_3sasakian(2)),
        ("csasakian7:c=<value>", homothety(sphere_3sasakian(1), 4.0)),
        ("product11", product_3qs(1, 1)),
    ]
    rows = []
    for name, M in entries:
        c = "<value>" if name.startswith("csasakian") else M.meta["c"]
        rows.append({"name": name, "dim": M.dim, "rank": M.meta["rank"], "c": c,
                     "kind": M.meta["kind"]})
    return rows


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _parser():
    p = argparse.ArgumentParser(prog="qs3", description="Verify curvature identities of "
                                "3-quasi-Sasakian manifolds at sampled chart points.")
    p.add_argument("--version", action="version", version=f"qs3 {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_opts(sp):
        sp.add_argument("--manifold", required=True, help="catalog name or manifold spec file")
        sp.add_argument("--points", type=int, default=16)
        sp.add_argument("--trials", type=int, default=8)
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--tol", type=_positive_float, default=1e-8)
        sp.add_argument("--no-fd", dest="fd_check", action="store_false",
                        help="skip the finite-difference oracle")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--quiet", action="store_true", help="no progress on stderr")

    run_opts(sub.add_parser("check", help="run the full verification suite"))
    run_opts(sub.add_parser("classify", help="classify by horizontal sectional curvature"))
    lp = sub.add_parser("list", help="list catalog manifolds")
    lp.add_argument("--json", action="store_true")
    return p


def _write(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches our config-error code
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG

    if args.command == "list":
        rows = _catalog_rows()
        if args.json:
            _write(dumps(rows), None)
        else:
            lines = [f"{'name':<22}{'dim':>4}{'rank':>6}  {'c':<9}kind"]
            lines += [f"{r['name']:<22}{r['dim']:>4}{r['rank']:>6}  {str(r['c']):<9}{r['kind']}"
                      for r in rows]
            _write("\n".join(lines) + "\n", None)
        return EXIT_OK

    config = RunConfig(args.manifold, args.points, args.trials, args.seed, args.tol,
                       args.fd_check, args.out)

    def progress(msg):
        if not args.quiet:
            print(msg, file=sys.stderr)

    try:
        if args.command == "check":
            report = run_suite(config, progress)
            _write(report.to_json(), config.out)
            for row in report.failures():
                progress(f"FAIL {row['id']} alpha={row['alpha']} normalized={row['normalized']:.3e}")
            if report.error:
                progress(f"error: {report.error}")
            return EXIT_OK if report.passed else EXIT_FAIL
        M, cls = classify_only(config, progress)
        print(cls.label(), file=sys.stderr)
        _write(dumps({"manifold": M.name, "seed": config.seed, "points": config.points,
                      "classification": cls.to_dict()}), config.out)
        return EXIT_OK
    except CONFIG_ERRORS as exc:
        print(f"qs3: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QS3Error as exc:
        print(f"qs3: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"qs3: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
