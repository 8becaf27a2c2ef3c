"""Electrostatic field solves for the layered device and its Robin limit.

Both problems are solved as quadratic minimisations over the homogeneous
part ``theta = psi - lift``:

* layered model, on the composite mesh (layer + free region, shared
  interface nodes), ``1/2 int sigma_delta |grad(theta + h_{u,delta})|^2``
  with ``theta = 0`` on the whole boundary;
* Robin model, on the free region only,
  ``1/2 int |grad(theta + h_u)|^2 + 1/2 int_D sigma(x,-H) |theta + h_u - frak_h_u|^2 dx``
  with ``theta = 0`` on the plate and on the lateral walls.

Interface and Robin conditions then hold weakly, with no special stencils.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._fem import Region, RobinBoundary, hermite_at
from .boundary_data import BoundaryData, LiftField, PermittivityProfile, lift_with_gradient
from .exceptions import ModelMismatch, SingularSystem
from .geometry import Deflection, DeviceConfig, MeshPair, build_meshes, gauss_legendre

__all__ = [
    "PotentialField",
    "RecoveryResult",
    "solve_transmission",
    "solve_robin",
    "energy_transmission",
    "energy_reduced",
    "lift_energy",
    "build_recovery_sequence",
]


@dataclass(eq=False)
class PotentialField:
    """A solved electrostatic state for one deflection."""

    model: str  # "delta" or "reduced"
    delta: Optional[float]
    mesh: MeshPair
    theta: np.ndarray
    lift: LiftField
    functional_value: float
    residual: float
    regions: dict = field(repr=False)
    robin: Optional[RobinBoundary] = field(default=None, repr=False)
    config: Optional[DeviceConfig] = field(default=None, repr=False)
    sigma: Optional[PermittivityProfile] = field(default=None, repr=False)
    system: Optional[tuple] = field(default=None, repr=False)

    @property
    def deflection(self) -> Deflection:
        return self.mesh.deflection

    @property
    def bd(self) -> BoundaryData:
        return self.lift.bd

    @property
    def n_rows(self) -> int:
        return self.regions["free"].n_rows

    def nodal(self, region: str = "free") -> np.ndarray:
        """theta at the nodes of one region, shape (nx+1, n_eta)."""
        reg = self.regions[region]
        grid = self.theta.reshape(-1, self.n_rows)
        return grid[:, reg.row_offset : reg.row_offset + reg.ne + 1]

    def interface_trace(self) -> np.ndarray:
        """psi at the interface nodes ``z = -H``."""
        x = self.mesh.x
        w = self.deflection(x)
        h = self.bd.h.f(x, np.full_like(x, -self.bd.H), w)
        return self.nodal("free")[:, 0] + h

    def theta_at(self, x, z, with_gradient: bool = False):
        """theta (and its physical gradient) at arbitrary points; zero outside the device."""
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        shape = x.shape
        x, z = x.ravel(), z.ravel()
        val = np.zeros(x.size)
        gx = np.zeros(x.size)
        gz = np.zeros(x.size)
        H = self.bd.H
        u, up, _ = self.deflection.evaluate(np.clip(x, -self.mesh.x[-1], self.mesh.x[-1]))
        for name, reg in self.regions.items():
            if name == "free":
                t, tp = u + H, up
            else:
                t, tp = np.full_like(u, reg.delta), np.zeros_like(u)
            eta = (z - reg.mesh.bottom) / t
            inside = (eta >= 0.0) & (eta <= 1.0)
            if name == "free":
                inside &= z >= -H
            else:
                inside &= z < -H
            if not np.any(inside):
                continue
            xs, es, ts, tps = x[inside], eta[inside], t[inside], tp[inside]
            xn, en = reg.mesh.x, reg.mesh.eta
            i = np.clip(np.searchsorted(xn, xs, side="right") - 1, 0, reg.nx - 1)
            j = np.clip(np.searchsorted(en, es, side="right") - 1, 0, reg.ne - 1)
            xi = (xs - xn[i]) / reg.hx[i]
            s = (es - en[j]) / reg.he[j]
            th = reg.local_theta(self.theta)[i, j]  # (n, 4) ordering (p, r)
            c00, c01, c10, c11 = th.T
            v = (1 - xi) * (1 - s) * c00 + (1 - xi) * s * c01 + xi * (1 - s) * c10 + xi * s * c11
            dxi = ((1 - s) * (c10 - c00) + s * (c11 - c01)) / reg.hx[i]
            de = ((1 - xi) * (c01 - c00) + xi * (c11 - c10)) / reg.he[j]
            val[inside] = v
            gx[inside] = dxi - de * es * tps / ts
            gz[inside] = de / ts
        if with_gradient:
            return val.reshape(shape), gx.reshape(shape), gz.reshape(shape)
        return val.reshape(shape)

    def psi_at(self, x, z):
        """psi = theta + lift inside the device."""
        return self.theta_at(x, z) + self.lift(x, z)

    def plate_dz_theta(self, x) -> np.ndarray:
        """d(theta)/dz on the plate, extrapolated from the two top element rows."""
        reg = self.regions["free"]
        x = np.asarray(x, dtype=float)
        th = self.nodal("free")
        i = np.clip(np.searchsorted(reg.mesh.x, x, side="right") - 1, 0, reg.nx - 1)
        xi = (x - reg.mesh.x[i]) / reg.hx[i]

        def row_slope(j):
            d = (th[:, j + 1] - th[:, j]) / reg.he[j]
            return (1 - xi) * d[i] + xi * d[i + 1]

        n = reg.ne
        top = row_slope(n - 1)
        if n >= 2:
            below = row_slope(n - 2)
            # midpoints at 1 - he/2 and 1 - he - he'/2; linear extrapolation to eta = 1
            m1 = 1.0 - 0.5 * reg.he[n - 1]
            m2 = 1.0 - reg.he[n - 1] - 0.5 * reg.he[n - 2]
            dn = top + (top - below) * (1.0 - m1) / (m1 - m2)
        else:
            dn = top
        u = self.deflection(x)
        return dn / (u + self.bd.H)

    def plate_flux_nodes(self) -> np.ndarray:
        """Nodal values of ``(1 + u'^2) d(psi)/dz`` on the plate from the discrete reactions.

        The reaction ``(A theta + b)_i`` at a plate node equals
        ``int (1 + u'^2) psi_z phi_i dx - int u' T phi_i dx`` with ``T`` the
        tangential derivative of the plate data, so a P1 mass solve recovers
        the flux with second-order accuracy.  The two corner rows also carry
        wall flux and are replaced by linear extrapolation.
        """
        if self.system is None:
            raise ModelMismatch("field was built without its linear system")
        A, b = self.system
        reg = self.regions["free"]
        nxn = reg.nx + 1
        top = np.arange(nxn) * self.n_rows + self.n_rows - 1
        react = (A @ self.theta + b)[top]
        u = self.deflection
        xq = reg.xq
        w, wp, _ = u.evaluate(xq)
        f = self.bd.h
        T = f.fx(xq, w, w) + wp * (f.fz(xq, w, w) + f.fw(xq, w, w))
        xi = reg.tq
        hat = np.stack([1 - xi, xi], axis=-1)  # (qx, 2)
        loc = np.einsum("iq,qk->ik", wp * T * reg.wx, hat)
        rhs = react.copy()
        np.add.at(rhs, np.arange(reg.nx), loc[:, 0])
        np.add.at(rhs, np.arange(reg.nx) + 1, loc[:, 1])
        h = reg.hx
        M = np.zeros((nxn, nxn))
        idx = np.arange(reg.nx)
        M[idx, idx] += h / 3
        M[idx + 1, idx + 1] += h / 3
        M[idx, idx + 1] += h / 6
        M[idx + 1, idx] += h / 6
        if nxn < 4:
            return np.linalg.lstsq(M, rhs, rcond=None)[0]
        M[0, :] = 0.0
        M[-1, :] = 0.0
        M[0, :3] = [1.0, -2.0, 1.0]
        M[-1, -3:] = [1.0, -2.0, 1.0]
        rhs[0] = rhs[-1] = 0.0
        return np.linalg.solve(M, rhs)

    def plate_dz_psi(self, x) -> np.ndarray:
        """d(psi)/dz on the plate, from the reaction-based flux."""
        x = np.asarray(x, dtype=float)
        p = np.interp(x, self.mesh.x, self.plate_flux_nodes())
        _, up, _ = self.deflection.evaluate(x)
        return p / (1.0 + up**2)


def _free_dofs(n_nodes_x: int, n_rows: int, fixed_rows, fixed_cols=True) -> np.ndarray:
    grid = np.ones((n_nodes_x, n_rows), dtype=bool)
    if fixed_cols:
        grid[0, :] = grid[-1, :] = False
    for r in fixed_rows:
        grid[:, r] = False
    return np.flatnonzero(grid.ravel())


def _solve(A: sp.spmatrix, b: np.ndarray, free: np.ndarray, n_total: int):
    A = A.tocsc()
    Aff = A[free][:, free]
    bf = b[free]
    theta = np.zeros(n_total)
    if free.size:
        try:
            lu = spla.splu(Aff.tocsc(), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
        theta[free] = lu.solve(-bf)
        if not np.all(np.isfinite(theta)):
            raise SingularSystem("non-finite potential")
    r = Aff @ theta[free] + bf
    scale = np.linalg.norm(bf)
    residual = float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))
    return theta, residual, A


def _quadratic_value(A, b, c, theta) -> float:
    return float(0.5 * theta @ (A @ theta) + b @ theta + c)


def solve_transmission(
    u: Deflection, delta: float, bd: BoundaryData, sigma: PermittivityProfile, config: DeviceConfig
) -> PotentialField:
    """Potential of the layered device for deflection ``u`` and layer thickness ``delta``."""
    mesh = build_meshes(u, delta, config)
    nzl, nzf = config.nz_layer, config.nz_free
    n_rows = nzl + nzf + 1
    n_total = (config.nx + 1) * n_rows
    q = config.quadrature_order
    layer = Region("layer", mesh.layer_mesh, u, bd, sigma, delta, q, 0, n_rows)
    free = Region("free", mesh.free_mesh, u, bd, sigma, delta, q, nzl, n_rows)
    A1, b1, c1 = layer.assemble(n_total)
    A2, b2, c2 = free.assemble(n_total)
    A, b, c = A1 + A2, b1 + b2, c1 + c2
    dofs = _free_dofs(config.nx + 1, n_rows, fixed_rows=(0, n_rows - 1))
    theta, residual, A = _solve(A, b, dofs, n_total)
    return PotentialField(
        "delta",
        float(delta),
        mesh,
        theta,
        LiftField(bd, u, float(delta)),
        _quadratic_value(A, b, c, theta),
        residual,
        {"layer": layer, "free": free},
        None,
        config,
        sigma,
        (A, b),
    )


def solve_robin(u: Deflection, bd: BoundaryData, sigma: PermittivityProfile, config: DeviceConfig) -> PotentialField:
    """Potential of the reduced model (Robin condition on ``z = -H``)."""
    mesh = build_meshes(u, None, config)
    n_rows = config.nz_free + 1
    n_total = (config.nx + 1) * n_rows
    free = Region("free", mesh.free_mesh, u, bd, sigma, None, config.quadrature_order, 0, n_rows)
    robin = RobinBoundary(free)
    A1, b1, c1 = free.assemble(n_total)
    M, b2, c2 = robin.assemble(n_total)
    A, b, c = A1 + M, b1 + b2, c1 + c2
    dofs = _free_dofs(config.nx + 1, n_rows, fixed_rows=(n_rows - 1,))
    theta, residual, A = _solve(A, b, dofs, n_total)
    return PotentialField(
        "reduced", None, mesh, theta, LiftField(bd, u, None), _quadratic_value(A, b, c, theta), residual,
        {"free": free}, robin, config, sigma, (A, b),
    )


def _volume_integral(field: PotentialField, with_theta: bool = True) -> float:
    total = 0.0
    for reg in field.regions.values():
        d = reg.grad_fields(field.theta)
        gx = d["hx"] + (d["tx"] if with_theta else 0.0)
        gz = d["hz"] + (d["tz"] if with_theta else 0.0)
        total += float(np.sum(d["coef"] * d["w"] * (gx**2 + gz**2)))
    return total


def energy_transmission(field: PotentialField, u: Optional[Deflection] = None, delta: Optional[float] = None) -> float:
    """``-1/2 int sigma_delta |grad psi|^2`` integrated directly from psi."""
    if field.model != "delta":
        raise ModelMismatch("energy_transmission needs a layered-model field")
    if delta is not None and not np.isclose(delta, field.delta, rtol=0, atol=1e-15):
        raise ModelMismatch(f"field solved for delta={field.delta}, not {delta}")
    return -0.5 * _volume_integral(field)


def energy_reduced(field: PotentialField, u: Optional[Deflection] = None) -> float:
    """``-1/2 int |grad psi|^2 - 1/2 int_D sigma(x,-H) |psi(x,-H) - frak_h_u(x)|^2 dx``."""
    if field.model != "reduced":
        raise ModelMismatch("energy_reduced needs a reduced-model field")
    vol = _volume_integral(field)
    rb = field.robin
    tr = rb.trace(field.theta)
    bdry = float(np.sum(rb.s * rb.wx * (tr + rb.data()) ** 2))
    return -0.5 * (vol + bdry)


def lift_energy(
    u: Deflection,
    delta: Optional[float],
    bd: BoundaryData,
    sigma: PermittivityProfile,
    config: DeviceConfig,
) -> float:
    """``int sigma_delta |grad h_{u,delta}|^2`` (or the free-region integral when ``delta`` is None)."""
    mesh = build_meshes(u, delta, config)
    q = max(config.quadrature_order, 4)
    regs = [Region("free", mesh.free_mesh, u, bd, sigma, delta, q, 0, config.nz_free + 1)]
    if delta is not None:
        regs.append(Region("layer", mesh.layer_mesh, u, bd, sigma, delta, q, 0, config.nz_layer + 1))
    total = 0.0
    for reg in regs:
        x4, z4, w4, coef, *_ = reg.geometry()
        _, hx, hz = reg.lift(x4, z4)
        total += float(np.sum(coef * w4 * (hx**2 + hz**2)))
    return total


# ---------------------------------------------------------------------------
# recovery sequence for a fixed deflection


@dataclass
class RecoveryResult:
    theta_nodes: np.ndarray  # composite-mesh nodal values, shape (nx+1, nz_layer + nz_free + 1)
    g_delta: float
    layer_part: float
    free_part: float
    delta: float


def _cutoff(x, L, delta):
    r = L - np.abs(x)
    sq = np.sqrt(delta)
    tau = np.where(r > sq, 1.0, r / sq)
    dtau = np.where(r > sq, 0.0, -np.sign(x) / sq)
    return tau, dtau


def _recovery_layer_values(field, bd, delta, x, z, with_gradient):
    """theta_delta and (optionally) grad(theta_delta + h_{u,delta}) at layer points."""
    H = bd.H
    u, up, _ = field.deflection.evaluate(x)
    L = field.mesh.x[-1]
    tau, dtau = _cutoff(x, L, delta)
    zr = -2.0 * H - z  # reflection into the free region
    tb, tbx, tbz = field.theta_at(x, zr, with_gradient=True)
    s = (z + H + delta) / delta
    top = np.full_like(x, -H)
    hv_top, hx_top, _ = lift_with_gradient(bd, delta, "free", x, top, u, up)
    bot = np.full_like(x, -H - delta)
    hv_bot, hx_bot, _ = lift_with_gradient(bd, delta, "layer", x, bot, u, up)
    jump = hv_top - hv_bot
    hv, hx, hz = lift_with_gradient(bd, delta, "layer", x, z, u, up)
    theta = s * tb + s * jump * tau - (hv - hv_bot) * tau
    if not with_gradient:
        return theta
    djump = hx_top - hx_bot
    gx = s * tbx + s * (djump * tau + jump * dtau) - (hx - hx_bot) * tau - (hv - hv_bot) * dtau + hx
    gz = tb / delta + s * (-tbz) + jump * tau / delta + (1.0 - tau) * hz
    return theta, gx, gz


def build_recovery_sequence(
    theta: PotentialField,
    u: Optional[Deflection],
    delta: float,
    bd: Optional[BoundaryData] = None,
    quad_points: int = 6,
) -> tuple[RecoveryResult, float]:
    """Layered-model competitor built from a reduced-model ``theta`` for fixed ``u``.

    In the free region the competitor equals ``theta``; in the layer it is the
    affine blend of the reflected ``theta``, the interface jump of the lift
    (cut off near the walls over a width ``sqrt(delta)``) and the lift
    correction.  Returns the composite nodal values and ``G_delta`` of the
    competitor.
    """
    if theta.model != "reduced":
        raise ModelMismatch("the recovery sequence starts from a reduced-model theta")
    field = theta
    bd = field.bd if bd is None else bd
    config = field.config
    sigma = field.sigma
    H = bd.H
    build_meshes(field.deflection, delta, config)  # gap precondition
    L = field.mesh.x[-1]

    # free part equals the volume term of G for the same theta
    free_part = 0.5 * _volume_integral(field)

    # layer part: composite Gauss rule with breakpoints at every kink
    cut = L - np.sqrt(delta)
    xb = np.unique(np.concatenate([field.mesh.x, [c for c in (-cut, cut) if -L < c < L]]))
    tq, wq = gauss_legendre(quad_points)
    hx = np.diff(xb)
    X = (xb[:-1, None] + hx[:, None] * tq).ravel()
    WX = (hx[:, None] * wq).ravel()
    gap = field.deflection(X) + H
    eta_nodes = field.mesh.free_mesh.eta
    # reflected kinks: z = -H - eta_j * gap for eta_j * gap < delta
    zk = -H - eta_nodes[None, :] * gap[:, None]
    zk = np.clip(zk, -H - delta, -H)
    zb = np.sort(np.concatenate([zk, np.full((X.size, 1), -H - delta), np.full((X.size, 1), -H)], axis=1), axis=1)
    dz = np.diff(zb, axis=1)  # (P, K)
    Z = zb[:, :-1, None] + dz[..., None] * tq
    W = WX[:, None, None] * dz[..., None] * wq
    Xf = np.broadcast_to(X[:, None, None], Z.shape)
    _, gx, gz = _recovery_layer_values(field, bd, delta, Xf.ravel(), Z.ravel(), True)
    coef = delta * sigma(Xf.ravel(), Z.ravel())
    layer_part = 0.5 * float(np.sum(W.ravel() * coef * (gx**2 + gz**2)))

    # nodal values on the composite mesh
    nzl = config.nz_layer
    xn = field.mesh.x
    zeta = np.linspace(0.0, 1.0, nzl + 1)
    Xl = np.repeat(xn[:, None], nzl + 1, axis=1)
    Zl = np.broadcast_to(-H - delta + zeta[None, :] * delta, Xl.shape)
    layer_nodes = _recovery_layer_values(field, bd, delta, Xl.ravel(), Zl.ravel(), False).reshape(Xl.shape)
    layer_nodes[:, 0] = 0.0  # ground plate: exact zero up to roundoff
    free_nodes = field.nodal("free")
    nodes = np.concatenate([layer_nodes[:, :-1], free_nodes], axis=1)
    res = RecoveryResult(nodes, free_part + layer_part, layer_part, free_part, float(delta))
    return res, res.g_delta


def plate_hermite_pairing(field: PotentialField, g_at) -> np.ndarray:
    """``int_D g phi_k dx`` for every Hermite dof of the beam grid (full dof vector)."""
    reg = field.regions["free"]
    n, _ = hermite_at(reg)
    vals = g_at(reg.xq)  # (nx, qx)
    loc = np.einsum("iq,iqk->ik", vals * reg.wx, n)
    out = np.zeros(2 * (reg.nx + 1))
    for k in range(4):
        np.add.at(out, 2 * np.arange(reg.nx) + k, loc[:, k])
    return out
