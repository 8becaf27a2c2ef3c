"""Mechanical energy, electrostatic force and total energies of both models."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from ._fem import hermite_at
from .boundary_data import BoundaryData, PermittivityProfile
from .exceptions import ModelMismatch, NumericalFailure, TraceUnavailable
from .field_solver import (
    PotentialField,
    energy_reduced,
    energy_transmission,
    plate_hermite_pairing,
    solve_robin,
    solve_transmission,
)
from .geometry import Deflection, DeviceConfig, hermite_matrices, sobolev_norms

__all__ = [
    "EnergyBreakdown",
    "ForceProfile",
    "parse_model",
    "mechanical_energy",
    "mechanical_gradient",
    "electrostatic_force",
    "solve_field",
    "total_energy",
    "total_gradient",
]

Model = Union[str, float, None]


def parse_model(model: Model) -> Optional[float]:
    """``"reduced"``/``None`` -> None; ``0.1``/``"0.1"``/``"delta:0.1"`` -> 0.1."""
    if model is None:
        return None
    if isinstance(model, str):
        m = model.strip().lower()
        if m == "reduced":
            return None
        if m.startswith("delta:"):
            m = m[6:]
        try:
            model = float(m)
        except ValueError:
            raise ModelMismatch(f"unknown model {model!r}") from None
    d = float(model)
    if not 0.0 < d < 1.0:
        raise ModelMismatch(f"layer thickness must lie in (0, 1), got {d}")
    return d


def model_tag(delta: Optional[float]) -> str:
    return "reduced" if delta is None else f"delta:{delta:g}"


@dataclass(frozen=True)
class EnergyBreakdown:
    e_mech: float
    e_elec: float
    e_total: float
    model: str

    def as_dict(self) -> dict:
        return {"e_mech": self.e_mech, "e_elec": self.e_elec, "e_total": self.e_total, "model": self.model}


@dataclass(frozen=True, eq=False)
class ForceProfile:
    x: np.ndarray
    values: np.ndarray
    branch: np.ndarray  # "free" or "coincidence" per node

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))


def mechanical_energy(u: Deflection, config: DeviceConfig) -> float:
    """Bending plus tension plus stretching energy."""
    _, n1, n2 = sobolev_norms(u, config.quadrature_order)
    return 0.5 * config.beta * n2 + (0.5 * config.tau + 0.25 * config.a * n1) * n1


@lru_cache(maxsize=32)
def _gram(nodes: tuple, q: int):
    return hermite_matrices(np.array(nodes), q)


def gram_matrices(u: Deflection, config: DeviceConfig):
    """(mass, slope, curvature) Gram matrices restricted to the clamped dofs."""
    M, K1, K2 = _gram(tuple(u.nodes.tolist()), config.quadrature_order)
    s = slice(2, -2)
    return M[s, s], K1[s, s], K2[s, s]


def mechanical_gradient(u: Deflection, config: DeviceConfig) -> np.ndarray:
    """Derivative of the mechanical energy as a dual vector on the clamped Hermite dofs."""
    _, K1, K2 = gram_matrices(u, config)
    c = u.free_dofs
    n1 = float(c @ K1 @ c)
    return config.beta * (K2 @ c) + (config.tau + config.a * n1) * (K1 @ c)


def solve_field(u: Deflection, delta: Optional[float], bd: BoundaryData, sigma: PermittivityProfile, config):
    if delta is None:
        return solve_robin(u, bd, sigma, config)
    return solve_transmission(u, delta, bd, sigma, config)


def _force_free(field: PotentialField, x: np.ndarray) -> np.ndarray:
    bd = field.bd
    u, up, _ = field.deflection.evaluate(x)
    dz_psi = field.plate_dz_psi(x)
    fz, fw, fx = bd.h.fz(x, u, u), bd.h.fw(x, u, u), bd.h.fx(x, u, u)
    frak = 0.5 * (1.0 + up**2) * (dz_psi - fz - fw) ** 2
    return frak - 0.5 * (fx**2 + (fz + fw) ** 2)


def electrostatic_force(
    u: Deflection,
    field_delta: PotentialField,
    bd: Optional[BoundaryData] = None,
    sigma: Optional[PermittivityProfile] = None,
    delta: Optional[float] = None,
    layer_flux=None,
    coincidence_tol: float = 0.0,
) -> ForceProfile:
    """Electrostatic force ``g_delta(u)`` at the beam nodes.

    Off the coincidence set the plate trace of ``d(psi)/dz`` from the free
    region is used.  On it, ``layer_flux`` must give ``sigma_delta d(psi)/dz``
    on the layer side of ``z = -H`` (a callable of x or an array over the
    nodes).
    """
    if field_delta.model != "delta":
        raise ModelMismatch("the force formula is stated for the layered model")
    bd = field_delta.bd if bd is None else bd
    H = bd.H
    x = u.nodes
    w = u.values
    touch = w + H <= coincidence_tol
    g = np.empty_like(x)
    branch = np.where(touch, "coincidence", "free")
    if np.any(~touch):
        g[~touch] = _force_free(field_delta, x[~touch])
    if np.any(touch):
        if layer_flux is None:
            raise TraceUnavailable("coincidence nodes need a layer-side flux trace")
        flux = layer_flux(x) if callable(layer_flux) else np.asarray(layer_flux, dtype=float)
        xt = x[touch]
        wt = np.full_like(xt, -H)
        with np.errstate(divide="ignore", invalid="ignore"):
            fz, fw, fx = bd.h.fz(xt, wt, wt), bd.h.fw(xt, wt, wt), bd.h.fx(xt, wt, wt)
        if not np.all(np.isfinite(fz + fw + fx)):
            raise NumericalFailure(f"boundary data {bd.name} is singular at w = -H; no touchdown force")
        frak = 0.5 * (flux[touch] - fz - fw) ** 2
        g[touch] = frak - 0.5 * (fx**2 + (fz + fw) ** 2)
    return ForceProfile(x.copy(), g, branch)


def total_energy(
    u: Deflection,
    model: Model,
    bd: BoundaryData,
    sigma: PermittivityProfile,
    config: DeviceConfig,
    return_field: bool = False,
):
    """Mechanical plus electrostatic energy under the layered or reduced model."""
    delta = parse_model(model)
    field = solve_field(u, delta, bd, sigma, config)
    e_el = energy_reduced(field) if delta is None else energy_transmission(field)
    e_m = mechanical_energy(u, config)
    out = EnergyBreakdown(e_m, e_el, e_m + e_el, model_tag(delta))
    return (out, field) if return_field else out


def _check_grid(u: Deflection, field: PotentialField):
    xs = field.mesh.x
    if xs.shape != u.nodes.shape or np.max(np.abs(xs - u.nodes)) > 1e-12:
        raise ValueError("deflection nodes must coincide with the field mesh x-nodes")


def force_gradient(field: PotentialField) -> np.ndarray:
    """``v -> int g_delta(u) v dx`` on the clamped Hermite dofs."""
    u = field.deflection
    _check_grid(u, field)
    full = plate_hermite_pairing(field, lambda x: _force_free(field, x))
    return full[2:-2]


def envelope_gradient(field: PotentialField, eps: Optional[float] = None) -> np.ndarray:
    """Central differences of the electrostatic energy along every Hermite basis direction.

    The nodal coefficients of theta are held fixed while the deflection is
    perturbed: theta minimises the discrete functional, so by the envelope
    property this differentiates the discrete electrostatic energy without a
    re-solve.  Only the two columns touched by a basis function change.
    """
    u = field.deflection
    _check_grid(u, field)
    H = field.bd.H
    eps = 1e-6 * H if eps is None else eps
    nx = u.n_elements
    dG = np.zeros(2 * (nx + 1))
    signs = np.array([1.0, -1.0])
    for name, reg in field.regions.items():
        n, d1 = hermite_at(reg)  # (nx, qx, 4)
        # batch axis: (sign, k)
        du = signs[:, None, None, None] * eps * np.moveaxis(n, -1, 0)[None]
        dup = signs[:, None, None, None] * eps * np.moveaxis(d1, -1, 0)[None]
        uq = reg.uq[None, None] + du  # (2, 4, nx, qx)
        upq = reg.upq[None, None] + dup
        E = reg.column_energy(field.theta, uq, upq)  # (2, 4, nx)
        if name == "free" and field.robin is not None:
            E = E + field.robin.column_energy(field.theta, uq)
        d = (E[0] - E[1]) / (2 * eps)  # (4, nx)
        for k in range(4):
            np.add.at(dG, 2 * np.arange(nx) + k, d[k])
    return -dG[2:-2]


def total_gradient(
    u: Deflection,
    model: Model,
    bd: BoundaryData,
    sigma: PermittivityProfile,
    config: DeviceConfig,
    method: Optional[str] = None,
    field: Optional[PotentialField] = None,
) -> np.ndarray:
    """Gradient of the total energy on the clamped Hermite dofs.

    ``method="force"`` pairs the electrostatic force with the basis (layered
    model only); ``method="fd"`` differentiates the discrete electrostatic
    energy column by column.  Default: force for the layered model, fd for the
    reduced one.
    """
    delta = parse_model(model)
    if method is None:
        method = "fd" if delta is None else "force"
    if method == "force" and delta is None:
        raise ModelMismatch("no force formula for the reduced model; use method='fd'")
    if field is None:
        field = solve_field(u, delta, bd, sigma, config)
    g = mechanical_gradient(u, config)
    if method == "force":
        return g + force_gradient(field)
    if method == "fd":
        return g + envelope_gradient(field)
    raise ValueError(f"unknown gradient method {method!r}")
