"""``mems`` command line interface.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.  ``MEMS_LOG`` (``error``, ``info`` or ``debug``) sets the log level.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError, MemsError
from ..geometry import Deflection, build_deflection_from_samples
from ..mechanics import parse_model, solve_field
from .audit import verify_inequalities
from .config import load_config
from .report import export_report
from .sweep import run_delta_sweep

log = logging.getLogger("reinforced_mems")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _setup_logging():
    level = os.environ.get("MEMS_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"MEMS_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_deflection(path: Path, cfg) -> Deflection:
    """JSON ``{"nodes", "values", "slopes"}`` or CSV with columns ``x,value,slope``."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read deflection {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
            if "deflection" in data:
                data = data["deflection"]
            u = Deflection.from_dict(data)
            if np.any(u.values < -cfg.device.H):
                raise ConfigError("deflection violates u >= -H")
            return u
        rows = list(csv.reader(text.splitlines()))
        if rows and rows[0] and not rows[0][0].strip().lstrip("-").replace(".", "", 1).isdigit():
            rows = rows[1:]
        return build_deflection_from_samples([tuple(map(float, r)) for r in rows if r], cfg.device)
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid deflection file {path}: {exc}") from exc


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    report = run_delta_sweep(cfg, jobs=args.jobs)
    minimizers = [(r.model, r.delta, r.deflection) for r in report.rows]
    audit = verify_inequalities(cfg, minimizers=minimizers)
    export_report(args.out, report, audit, cfg)
    log.info("sweep written to %s", args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = load_config(args.config)
    audit = verify_inequalities(cfg, n_samples=args.samples, seed=args.seed)
    export_report(args.out, None, audit, cfg)
    failed = audit.failures()
    for r in failed:
        log.error("audit failure: %s on %s (lhs=%.6g, rhs=%.6g)", r.name, r.sample, r.lhs, r.rhs)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    try:
        delta = parse_model(args.model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    u = _read_deflection(Path(args.deflection), cfg)
    sigma = cfg.sigma()
    bd = cfg.boundary_data(sigma)
    fld = solve_field(u, delta, bd, sigma, cfg.device)
    d = cfg.device
    nx, nz = cfg.comparison_grid
    top = float(np.max(u(np.linspace(-d.L, d.L, 20 * nx + 1))))
    xs = np.linspace(-d.L, d.L, nx + 1)
    zs = np.linspace(-d.H, top, nz + 1)
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    inside = Z <= u(X)
    theta = fld.theta_at(X, Z)
    psi = np.where(inside, theta + fld.lift(X, np.minimum(Z, u(X))), np.nan)
    out = open(args.out, "w", encoding="utf-8", newline="\n") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x", "z", "inside", "theta", "psi"])
        for x, z, ins, th, p in zip(X.ravel(), Z.ravel(), inside.ravel(), theta.ravel(), psi.ravel()):
            w.writerow(["%.17g" % x, "%.17g" % z, int(ins), "%.17g" % th, "%.17g" % p if ins else ""])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mems", description="Clamped-beam MEMS device with a thin dielectric layer.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="minimise for every layer thickness and the Robin limit")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("audit", help="audit the functional inequalities on random admissible profiles")
    a.add_argument("--config", required=True)
    a.add_argument("--samples", type=int, default=None)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_audit)

    v = sub.add_parser("solve", help="one field solve; writes the potential on the comparison grid as CSV")
    v.add_argument("--config", required=True)
    v.add_argument("--model", required=True, help="delta:<d> or reduced")
    v.add_argument("--deflection", required=True, help="JSON (nodes/values/slopes) or CSV (x,value,slope)")
    v.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    v.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _setup_logging()
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be at least 1")
        return args.func(args)
    except BrokenPipeError:  # output piped into a closed reader
        sys.stderr.close()
        return EXIT_OK
    except ConfigError as exc:
        print(f"mems: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MemsError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mems: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
