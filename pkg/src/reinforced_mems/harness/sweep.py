"""The layer-thickness sweep: minimise the layered energies and compare with the Robin limit."""
from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..boundary_data import validate_compatibility
from ..exceptions import ConfigError, MaxItersExceeded, MemsError, NumericalFailure
from ..field_solver import PotentialField
from ..geometry import Deflection, h2_norm
from ..mechanics import electrostatic_force, model_tag, solve_field, total_energy
from ..optimizer import minimize_total, random_clamped_profile
from .config import RunConfig, load_config

__all__ = ["SweepRow", "SweepReport", "run_delta_sweep", "comparison_errors"]

log = logging.getLogger(__name__)


@dataclass
class SweepRow:
    delta: Optional[float]  # None for the reduced model
    deflection: Deflection
    e_mech: float
    e_elec: float
    e_total: float
    e_at_zero: float
    iters: int
    converged: bool
    touched: bool
    projected_grad_norm: float
    basins: list = field(default_factory=list)
    wall_ms: Optional[float] = None
    err_u_h2: float = 0.0
    err_e: float = 0.0
    err_psi: float = 0.0
    err_psi_h1: float = 0.0
    force_min: float = float("nan")

    @property
    def model(self) -> str:
        return model_tag(self.delta)


@dataclass
class SweepReport:
    rows: list  # delta rows sorted by decreasing delta
    reduced: SweepRow
    config: RunConfig
    config_hash: str
    M: float
    validation: dict

    def delta_rows(self) -> list:
        return list(self.rows)

    def errors(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def strictly_decreasing(self, name: str) -> bool:
        e = self.errors(name)
        return bool(np.all(np.diff(e) < 0))


def _minimize_one(cfg: RunConfig, delta: Optional[float]) -> SweepRow:
    """One model: best-of multistart minimisation from ``u = 0`` plus seeded random starts."""
    device = cfg.device
    sigma = cfg.sigma()
    bd = cfg.boundary_data(sigma)
    nodes = device.beam_nodes()
    t0 = time.perf_counter()
    inits = [Deflection.zeros(nodes)]
    rng = np.random.default_rng(cfg.optimizer.seed)
    for _ in range(cfg.multistart):
        inits.append(random_clamped_profile(nodes, rng, 0.3 * device.H))
    results = []
    for k, init in enumerate(inits):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MaxItersExceeded)
                res = minimize_total(delta, device, bd, sigma, init, cfg.optimizer)
        except MemsError as exc:
            raise NumericalFailure(f"{model_tag(delta)}, start {k}: {exc}") from exc
        results.append(res)
        if not res.converged:
            log.info("%s start %d stopped without convergence (pg=%.3e)", model_tag(delta), k, res.projected_grad_norm)
    best = min(results, key=lambda r: r.energy.e_total)
    e0 = total_energy(Deflection.zeros(nodes), delta, bd, sigma, device).e_total
    basins = sorted({round(r.energy.e_total, 10) for r in results})
    wall = (time.perf_counter() - t0) * 1e3
    return SweepRow(
        delta,
        best.u_star,
        best.energy.e_mech,
        best.energy.e_elec,
        best.energy.e_total,
        e0,
        best.iterations,
        best.converged,
        any(r.touched for r in results),
        best.projected_grad_norm,
        basins,
        wall if cfg.record_wall_time else None,
    )


def comparison_errors(
    field_delta: PotentialField, field_red: PotentialField, L: float, H: float, M: float, grid: tuple
) -> tuple[float, float]:
    """L2 and H1-seminorm distance of the homogeneous parts on ``D x (-H, -H + M)``.

    Both are extended by zero above their plates; the midpoint rule is used on
    a ``grid[0] x grid[1]`` cell grid.
    """
    nx, nz = grid
    xs = -L + (np.arange(nx) + 0.5) * (2 * L / nx)
    zs = -H + (np.arange(nz) + 0.5) * (M / nz)
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    a, ax, az = field_delta.theta_at(X, Z, with_gradient=True)
    b, bx, bz = field_red.theta_at(X, Z, with_gradient=True)
    cell = (2 * L / nx) * (M / nz)
    l2 = float(np.sqrt(np.sum((a - b) ** 2) * cell))
    h1 = float(np.sqrt(np.sum((ax - bx) ** 2 + (az - bz) ** 2) * cell))
    return l2, h1


def run_delta_sweep(config, jobs: int = 1) -> SweepReport:
    """Minimise the reduced energy and every layered energy from the same start and compare."""
    cfg = load_config(config)
    device = cfg.device
    sigma = cfg.sigma()
    bd = cfg.boundary_data(sigma)
    rep = validate_compatibility(bd, sigma, w_range=cfg.w_range)
    if not rep.passed:
        raise ConfigError(f"boundary-data family fails compatibility: {', '.join(rep.failures())}")
    deltas = sorted(device.delta_list, reverse=True)
    models = [None] + deltas
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            rows = list(pool.map(_minimize_one, [cfg] * len(models), models))
    else:
        rows = [_minimize_one(cfg, m) for m in models]
    reduced, drows = rows[0], rows[1:]

    M = max(float(np.max(r.deflection(np.linspace(-device.L, device.L, 20 * device.nx + 1)))) + device.H for r in rows)
    f_red = solve_field(reduced.deflection, None, bd, sigma, device)
    for r in drows:
        r.err_u_h2 = h2_norm(r.deflection - reduced.deflection)
        r.err_e = abs(r.e_total - reduced.e_total)
        f_d = solve_field(r.deflection, r.delta, bd, sigma, device)
        r.err_psi, r.err_psi_h1 = comparison_errors(f_d, f_red, device.L, device.H, M, cfg.comparison_grid)
        r.force_min = electrostatic_force(r.deflection, f_d).minimum
    validation = {
        "continuity": rep.continuity,
        "flux": rep.flux,
        "kbound0": rep.kbound0,
        "partials": rep.partials,
        "m": bd.m_const,
        "K": bd.K_const,
        "sigma_max": sigma.sigma_max,
    }
    return SweepReport(drows, reduced, cfg, cfg.config_hash(), M, validation)

