"""Deterministic report files.

Floats are written with 17 significant digits, lines end in LF and the
column order is fixed, so identical inputs produce identical bytes.  Wall
times are only written when the configuration asks for them.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional

from .audit import AuditReport
from .config import RunConfig
from .sweep import SweepReport, SweepRow

__all__ = ["SWEEP_HEADER", "AUDIT_HEADER", "export_report", "sweep_csv_text", "audit_csv_text"]

SWEEP_HEADER = ["delta", "e_mech", "e_elec", "e_total", "err_u_h2", "err_e", "err_psi", "touched", "iters", "wall_ms"]
AUDIT_HEADER = ["name", "sample", "lhs", "rhs", "margin", "pass"]


def _f(x: float) -> str:
    return "%.17g" % float(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _sweep_line(r: SweepRow) -> list:
    return [
        _f(0.0 if r.delta is None else r.delta),
        _f(r.e_mech),
        _f(r.e_elec),
        _f(r.e_total),
        _f(r.err_u_h2),
        _f(r.err_e),
        _f(r.err_psi),
        "1" if r.touched else "0",
        str(r.iters),
        "" if r.wall_ms is None else "%.3f" % r.wall_ms,
    ]


def sweep_csv_text(report: SweepReport) -> str:
    """Delta rows by decreasing delta, then the reduced model as a ``delta = 0`` sentinel row."""
    return _csv(SWEEP_HEADER, [_sweep_line(r) for r in report.rows] + [_sweep_line(report.reduced)])


def audit_csv_text(audit: AuditReport) -> str:
    return _csv(
        AUDIT_HEADER,
        [[r.name, r.sample, _f(r.lhs), _f(r.rhs), _f(r.margin), "1" if r.passed else "0"] for r in audit.rows],
    )


def _row_json(r: SweepRow) -> dict:
    return {
        "model": r.model,
        "delta": r.delta,
        "e_mech": r.e_mech,
        "e_elec": r.e_elec,
        "e_total": r.e_total,
        "e_total_at_zero": r.e_at_zero,
        "err_u_h2": r.err_u_h2,
        "err_e": r.err_e,
        "err_psi_l2": r.err_psi,
        "err_psi_h1_seminorm": r.err_psi_h1,
        "force_min": r.force_min,
        "touched": r.touched,
        "converged": r.converged,
        "iters": r.iters,
        "projected_grad_norm": r.projected_grad_norm,
        "basins": r.basins,
        "wall_ms": r.wall_ms,
        "deflection": r.deflection.to_dict(),
    }


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def export_report(
    out_dir,
    report: Optional[SweepReport] = None,
    audit: Optional[AuditReport] = None,
    config: Optional[RunConfig] = None,
) -> list[Path]:
    """Write ``sweep.csv``/``sweep.json`` (if a sweep is given), ``audit.csv`` and ``config_echo.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config if config is not None else (report.config if report is not None else None)
    written = []
    if report is not None:
        _write(out / "sweep.csv", sweep_csv_text(report))
        doc = {
            "config_hash": report.config_hash,
            "mesh": {k: getattr(report.config.device, k) for k in ("nx", "nz_free", "nz_layer", "quadrature_order")},
            "comparison_rectangle": {"z_min": -report.config.device.H, "height_M": report.M},
            "boundary_data": report.validation,
            "reduced": _row_json(report.reduced),
            "rows": [_row_json(r) for r in report.rows],
            "trends": {
                "err_u_h2_strictly_decreasing": report.strictly_decreasing("err_u_h2"),
                "err_e_strictly_decreasing": report.strictly_decreasing("err_e"),
                "err_psi_strictly_decreasing": report.strictly_decreasing("err_psi"),
            },
            "touchdown_note": "runs flagged touched reached the gap floor; touchdown states are outside the solver's scope",
        }
        _write(out / "sweep.json", json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
        written += [out / "sweep.csv", out / "sweep.json"]
    if audit is not None:
        _write(out / "audit.csv", audit_csv_text(audit))
        written.append(out / "audit.csv")
    if cfg is not None:
        echo = {"config_hash": cfg.config_hash(), "resolved": cfg.resolved(), "input": cfg.raw}
        if audit is not None:
            echo["audit_constants"] = audit.constants
            echo["audit_skipped"] = audit.skipped
        _write(out / "config_echo.json", json.dumps(echo, indent=2, sort_keys=True) + "\n")
        written.append(out / "config_echo.json")
    return written
