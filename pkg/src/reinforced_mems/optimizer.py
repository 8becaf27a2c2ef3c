"""Projected gradient descent for the total energy under the obstacle ``u >= -H``.

Descent directions are Riesz representatives of the energy gradient in the
discrete H^2 inner product (Gram matrix ``K2 + K1 + M`` on the clamped
Hermite dofs).  Feasibility is enforced nodally: values are clamped from
below and the slope is zeroed at every clamped node.  During descent the
floor is raised to ``-H + 2 eps_gap H``.  The factor two leaves room for
the cubic dipping between nodes, so field solves along the path do not trip
the mesh gap check at ``eps_gap H``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .boundary_data import BoundaryData, PermittivityProfile
from .exceptions import ConfigError, MaxItersExceeded, TouchdownGeometry
from .geometry import Deflection, DeviceConfig
from .mechanics import (
    EnergyBreakdown,
    gram_matrices,
    model_tag,
    parse_model,
    solve_field,
    total_energy,
    total_gradient,
)

__all__ = [
    "MinimizeOptions",
    "MinimizeResult",
    "project_obstacle",
    "minimize_total",
    "fd_gradient_check",
    "random_clamped_profile",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinimizeOptions:
    max_iters: int = 400
    grad_tol: Optional[float] = None  # None: 1e-6 * (1 + |E(init)|)
    step0: float = 1e-2
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    obstacle_mode: str = "nodal-projection"
    seed: int = 0
    gradient: str = "fd"  # "fd" (discrete envelope) or "force"
    max_backtracks: int = 40

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters must be positive")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ConfigError("grad_tol must be positive")
        if not self.step0 > 0:
            raise ConfigError("step0 must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ConfigError("armijo_c must lie in (0, 1)")
        if self.obstacle_mode != "nodal-projection":
            raise ConfigError(f"unsupported obstacle_mode {self.obstacle_mode!r}")
        if self.gradient not in ("fd", "force"):
            raise ConfigError(f"unknown gradient method {self.gradient!r}")


@dataclass(eq=False)
class MinimizeResult:
    u_star: Deflection
    energy: EnergyBreakdown
    iterations: int
    projected_grad_norm: float
    touched: bool
    converged: bool
    history: list = field(default_factory=list, repr=False)
    grad_tol: float = 0.0


def _project_dofs(c: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodal projection on the interior (value, slope) vector; returns (projected, active)."""
    out = c.copy()
    vals = out[0::2]
    active = vals <= floor
    vals[active] = floor
    out[1::2][active] = 0.0
    return out, active


def project_obstacle(u: Deflection, H: float, floor: Optional[float] = None) -> Deflection:
    """Clamp nodal values to ``>= -H`` (or ``>= floor``) and zero the slope where clamped.

    The clamped boundary dofs are never touched.
    """
    floor = -H if floor is None else floor
    c, _ = _project_dofs(u.free_dofs, floor)
    return Deflection.from_free_dofs(u.nodes, c)


def random_clamped_profile(nodes, rng: np.random.Generator, amplitude: float, degree: int = 3) -> Deflection:
    """Smooth random clamped profile ``(1 - (x/L)^2)^2 p(x/L)`` scaled to ``max|u| = amplitude``."""
    nodes = np.asarray(nodes, dtype=float)
    L = nodes[-1]
    p = np.polynomial.Polynomial(rng.standard_normal(degree + 1))
    bump = np.polynomial.Polynomial([1.0, 0.0, -2.0, 0.0, 1.0])
    f = bump * p
    df = f.deriv()
    s = nodes / L
    values, slopes = f(s), df(s) / L
    values[[0, -1]] = 0.0
    slopes[[0, -1]] = 0.0
    u = Deflection(nodes, values, slopes)
    m = u.max_abs()
    return u * (amplitude / m) if m > 0 else u


class _Objective:
    """Energy and gradient evaluations with a one-entry cache keyed on the dofs."""

    def __init__(self, model, bd, sigma, config, method):
        self.delta = parse_model(model)
        self.bd, self.sigma, self.config = bd, sigma, config
        self.method = method
        self.n_solves = 0
        self._key = None
        self._val = None

    def evaluate(self, u: Deflection):
        key = u.free_dofs.tobytes()
        if key != self._key:
            e, f = total_energy(u, self.delta, self.bd, self.sigma, self.config, return_field=True)
            self.n_solves += 1
            self._key, self._val = key, (e, f)
        return self._val

    def gradient(self, u: Deflection) -> np.ndarray:
        _, f = self.evaluate(u)
        return total_gradient(u, self.delta, self.bd, self.sigma, self.config, method=self.method, field=f)


def _riesz(G_lu, g):
    return sla.lu_solve(G_lu, g)


def _pg_norm(c, g, G, G_lu, floor):
    """Projected-gradient norm in the G metric: ``|c - P(c - G^{-1} g)|_G``."""
    r = c - _project_dofs(c - _riesz(G_lu, g), floor)[0]
    return float(np.sqrt(max(r @ G @ r, 0.0)))


def minimize_total(
    model,
    config: DeviceConfig,
    bd: BoundaryData,
    sigma: PermittivityProfile,
    init: Optional[Deflection] = None,
    opts: Optional[MinimizeOptions] = None,
) -> MinimizeResult:
    """Minimise the total energy over admissible clamped deflections."""
    opts = MinimizeOptions() if opts is None else opts
    delta = parse_model(model)
    method = opts.gradient
    if method == "force" and delta is None:
        method = "fd"
    nodes = config.beam_nodes()
    u = Deflection.zeros(nodes) if init is None else init
    if u.nodes.shape != nodes.shape or np.max(np.abs(u.nodes - nodes)) > 1e-12:
        raise ValueError("init must live on the configured beam grid")
    H = config.H
    floor = -H + 2.0 * config.eps_gap * H
    c = u.free_dofs
    if np.any(c[0::2] < -H):
        raise ValueError("init violates the obstacle u >= -H")
    c, active = _project_dofs(c, floor)
    u = Deflection.from_free_dofs(nodes, c)
    touched = bool(np.any(active))

    M, K1, K2 = gram_matrices(u, config)
    G = K2 + K1 + M
    G_lu = sla.lu_factor(G)
    obj = _Objective(delta, bd, sigma, config, method)

    energy, _ = obj.evaluate(u)
    E = energy.e_total
    tol = opts.grad_tol if opts.grad_tol is not None else 1e-6 * (1.0 + abs(E))
    g = obj.gradient(u)
    pg = _pg_norm(c, g, G, G_lu, floor)
    history = [(0, E, pg)]
    step = opts.step0
    it = 0
    converged = pg <= tol
    while not converged and it < opts.max_iters:
        it += 1
        d = -_riesz(G_lu, g)
        accepted = False
        for _ in range(opts.max_backtracks):
            c_new, act_new = _project_dofs(c + step * d, floor)
            u_new = Deflection.from_free_dofs(nodes, c_new)
            try:
                e_new, _ = obj.evaluate(u_new)
            except TouchdownGeometry:
                # the cubic dips below the floor between nodes; treat as a failed trial
                step *= opts.backtrack_factor
                continue
            if e_new.e_total <= E + opts.armijo_c * float(g @ (c_new - c)):
                accepted = True
                break
            step *= opts.backtrack_factor
        if not accepted:
            log.info("line search stalled at iteration %d (step %.3e)", it, step)
            break
        c, u, energy, E = c_new, u_new, e_new, e_new.e_total
        touched = touched or bool(np.any(act_new))
        g = obj.gradient(u)
        pg = _pg_norm(c, g, G, G_lu, floor)
        history.append((it, E, pg))
        log.debug("iter %d  E=%.12g  pg=%.3e  step=%.3e", it, E, pg, step)
        converged = pg <= tol
        step = min(step / opts.backtrack_factor, 1e3)
    if not converged and it >= opts.max_iters:
        warnings.warn(
            f"{model_tag(delta)}: no convergence in {opts.max_iters} iterations (pg={pg:.3e}, tol={tol:.3e})",
            MaxItersExceeded,
            stacklevel=2,
        )
    return MinimizeResult(u, energy, it, pg, touched, converged, history, tol)


def fd_gradient_check(
    u: Deflection,
    model,
    bd: BoundaryData,
    sigma: PermittivityProfile,
    config: DeviceConfig,
    directions: int = 5,
    eps: float = 1e-4,
    seed: int = 0,
    method: Optional[str] = None,
    amplitude: float = 0.1,
) -> float:
    """Largest relative mismatch between gradient pairings and central differences of the total energy.

    Directions are smooth random clamped profiles of sup-norm ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    delta = parse_model(model)
    field_ = solve_field(u, delta, bd, sigma, config)
    g = total_gradient(u, delta, bd, sigma, config, method=method, field=field_)
    worst = 0.0
    for _ in range(directions):
        v = random_clamped_profile(u.nodes, rng, amplitude)
        ep = total_energy(u + v * eps, delta, bd, sigma, config).e_total
        em = total_energy(u - v * eps, delta, bd, sigma, config).e_total
        fd = (ep - em) / (2 * eps)
        an = float(g @ v.free_dofs)
        worst = max(worst, abs(an - fd) / max(abs(fd), 1e-300))
    return worst
