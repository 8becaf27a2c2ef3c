"""Numerical audit of the functional inequalities the convergence argument relies on."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..field_solver import lift_energy
from ..geometry import Deflection, sobolev_norms
from ..mechanics import electrostatic_force, solve_field, total_energy
from ..optimizer import random_clamped_profile
from .config import RunConfig, load_config

__all__ = ["AuditRow", "AuditReport", "verify_inequalities", "audit_constants"]

AUDIT_TOL = 1e-9


@dataclass(frozen=True)
class AuditRow:
    name: str
    sample: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + AUDIT_TOL * (1.0 + abs(self.rhs))


@dataclass
class AuditReport:
    rows: list
    constants: dict
    skipped: list = field(default_factory=list)

    @property
    def pass_rate(self) -> float:
        return 1.0 if not self.rows else sum(r.passed for r in self.rows) / len(self.rows)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def by_name(self, name: str) -> list:
        return [r for r in self.rows if r.name == name]

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def audit_constants(cfg: RunConfig, bd, sigma) -> dict:
    """Constants of the coercivity chain: lift bound ``c0`` and the lower-bound constant ``c1``."""
    d = cfg.device
    m = bd.m_const
    c0 = 3.0 * m * (1.0 + sigma.sigma_max) * max(1.0, 2.0 * d.L)
    c1 = float("nan")
    if d.a > 0:
        c1 = d.a / 8.0 + c0 + c0**2 * (1.0 + 16.0 * d.L**2) ** 2 / d.a
    return {
        "m": m,
        "K": bd.K_const,
        "sigma_max": sigma.sigma_max,
        "c0": c0,
        "c1": c1,
        "poincare": 4.0 * d.L,
        "w_min": cfg.w_range[0],
        "w_max": cfg.w_range[1],
    }


def _sample_profiles(cfg: RunConfig, n: int, seed: int) -> list[tuple[str, Deflection]]:
    """Canonical profiles followed by seeded random ones whose values stay inside ``w_range``."""
    d = cfg.device
    nodes = d.beam_nodes()
    lo, hi = cfg.w_range
    amp = 0.95 * min(-lo, hi) if lo < 0 < hi else 0.0
    bump = np.polynomial.Polynomial([1.0, 0.0, -2.0, 0.0, 1.0])
    dbump = bump.deriv()
    s = nodes / d.L
    vals, slopes = bump(s), dbump(s) / d.L
    vals[[0, -1]] = slopes[[0, -1]] = 0.0
    base = Deflection(nodes, vals, slopes)
    out = [("zero", Deflection.zeros(nodes)), ("bump_down", base * (-amp)), ("bump_up", base * amp)]
    rng = np.random.default_rng(seed)
    for k in range(n):
        out.append((f"random_{k:03d}", random_clamped_profile(nodes, rng, rng.uniform(0.0, amp))))
    return out


def verify_inequalities(
    config,
    n_samples: Optional[int] = None,
    seed: Optional[int] = None,
    minimizers: Iterable[tuple[str, float, Deflection]] = (),
) -> AuditReport:
    """Audit each inequality on canonical and random admissible profiles.

    ``minimizers`` are ``(label, delta, u)`` triples of solved layered-model
    minimisers; the force lower bound is checked on each of them.
    """
    cfg = load_config(config)
    n = cfg.audit_samples if n_samples is None else int(n_samples)
    seed = cfg.audit_seed if seed is None else int(seed)
    d = cfg.device
    sigma = cfg.sigma()
    bd = cfg.boundary_data(sigma)
    const = audit_constants(cfg, bd, sigma)
    q = d.quadrature_order
    rows: list[AuditRow] = []
    skipped: list[str] = []

    # closed-form canonical check for the Poincare inequality on H^1_0:
    # v = cos(pi x / (2L)) has |v| = sqrt(L), |v'| = (pi / (2L)) sqrt(L)
    rows.append(AuditRow("poincare", "cosine", np.sqrt(d.L), 4.0 * d.L * np.pi / (2.0 * d.L) * np.sqrt(d.L)))

    if d.a <= 0:
        skipped.append("coercivity: a = 0, the lower bound needs a > 0")

    for label, u in _sample_profiles(cfg, n, seed):
        n0, n1, n2 = sobolev_norms(u, q)
        rows.append(AuditRow("poincare", label, np.sqrt(n0), 4.0 * d.L * np.sqrt(n1)))
        rows.append(AuditRow("interpolation", label, n1, np.sqrt(n0 * n2)))
        for delta in d.delta_list:
            rows.append(AuditRow("lift_bound", f"{label}@{delta:g}", lift_energy(u, delta, bd, sigma, d), const["c0"] * (1.0 + n0 + n1)))
            e, fld = total_energy(u, delta, bd, sigma, d, return_field=True)
            if d.a > 0:
                lhs = 0.5 * d.beta * n2 + 0.25 * d.a * n1
                rows.append(AuditRow("coercivity", f"{label}@{delta:g}", lhs, e.e_total + const["c1"]))
            g = electrostatic_force(u, fld).minimum
            rows.append(AuditRow("force_bound", f"{label}@{delta:g}", -g, bd.K_const**2))

    for label, delta, u in minimizers:
        fld = solve_field(u, delta, bd, sigma, d)
        g = electrostatic_force(u, fld).minimum
        rows.append(AuditRow("force_bound", f"minimizer:{label}", -g, bd.K_const**2))
    return AuditReport(rows, const, skipped)
