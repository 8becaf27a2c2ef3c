"""Configuration, the layer-thickness sweep, the inequality audit, reports and the CLI."""
from .audit import AuditReport, AuditRow, verify_inequalities
from .config import RunConfig, load_config, parse_config
from .report import export_report
from .sweep import SweepReport, SweepRow, run_delta_sweep

__all__ = [
    "AuditReport",
    "AuditRow",
    "RunConfig",
    "SweepReport",
    "SweepRow",
    "export_report",
    "load_config",
    "parse_config",
    "run_delta_sweep",
    "verify_inequalities",
]
