"""Bilinear elements on vertically mapped tensor grids.

A region is the set ``bottom < z < bottom + t(x)``, mapped onto
``(x, eta) in D x (0, 1)`` by ``z = bottom + eta * t(x)``.  With
``phi(x, eta)`` bilinear on each reference cell the physical gradient is

    d/dx|_z = d/dx|_eta - eta * t'/t * d/deta,     d/dz = (1/t) d/deta

and the area element is ``t dx deta``.  The free region uses
``t = u + H`` (evaluated exactly at quadrature points, so the plate is not
polygonised); the layer uses ``t = delta``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .boundary_data import BoundaryData, PermittivityProfile, lift_with_gradient
from .geometry import Deflection, RegionMesh, gauss_legendre, hermite_basis

# local node k = 2 * p + r sits at (x-node i + p, eta-node j + r)
_P = np.array([0, 0, 1, 1])
_R = np.array([0, 1, 0, 1])


class Region:
    """Quadrature and basis data of one mapped region for a fixed deflection."""

    def __init__(
        self,
        kind: str,
        mesh: RegionMesh,
        u: Deflection,
        bd: BoundaryData,
        sigma: PermittivityProfile,
        delta,
        qorder: int,
        row_offset: int,
        n_rows: int,
    ):
        self.kind = kind
        self.mesh = mesh
        self.bd = bd
        self.sigma = sigma
        self.delta = delta
        self.H = bd.H
        self.row_offset = row_offset
        self.n_rows = n_rows
        x, eta = mesh.x, mesh.eta
        self.nx, self.ne = x.size - 1, eta.size - 1
        self.hx = np.diff(x)
        self.he = np.diff(eta)
        tq, wq = gauss_legendre(qorder)
        self.tq = tq
        self.xq = x[:-1, None] + self.hx[:, None] * tq[None, :]
        self.wx = self.hx[:, None] * wq[None, :]
        self.sq = tq
        self.etaq = eta[:-1, None] + self.he[:, None] * tq[None, :]
        self.we = self.he[:, None] * wq[None, :]
        uq, upq, _ = u.evaluate(self.xq)
        self.uq, self.upq = uq, upq
        # local -> global node numbers, shape (nx, ne, 4)
        i = np.arange(self.nx)[:, None, None]
        j = np.arange(self.ne)[None, :, None]
        self.dofs = (i + _P) * n_rows + row_offset + j + _R

    # shapes below: (..., nx, qx, ne, qe) with optional leading batch dims
    def _thickness(self, uq, upq):
        if self.kind == "free":
            return uq + self.H, upq
        return np.full_like(uq, self.delta), np.zeros_like(upq)

    def geometry(self, uq=None, upq=None):
        """Physical coordinates, weights, coefficient and basis gradients at quadrature points.

        Arrays have shape ``(..., nx, qx, ne, qe)``; gradients carry a trailing
        local-node axis of length 4.
        """
        uq = self.uq if uq is None else uq
        upq = self.upq if upq is None else upq
        t, tp = self._thickness(uq, upq)
        t4 = t[..., :, :, None, None]
        tp4 = tp[..., :, :, None, None]
        eta4 = self.etaq[None, None, :, :]
        x4 = np.broadcast_to(self.xq[:, :, None, None], t4.shape[:-2] + self.etaq.shape)
        z4 = self.mesh.bottom + eta4 * t4
        w4 = self.wx[:, :, None, None] * self.we[None, None, :, :] * t4
        if self.kind == "free":
            coef = np.ones_like(z4)
        else:
            coef = self.delta * self.sigma(x4, z4)
        xi, s = self.tq, self.sq
        nx_ = np.stack([1 - xi, xi], axis=-1)[:, _P]  # (qx, 4)
        dnx = np.stack([-1.0 / self.hx, 1.0 / self.hx], axis=-1)[:, _P]  # (nx, 4)
        ne_ = np.stack([1 - s, s], axis=-1)[:, _R]  # (qe, 4)
        dne = np.stack([-1.0 / self.he, 1.0 / self.he], axis=-1)[:, _R]  # (ne, 4)
        phi_x = dnx[:, None, None, None, :] * ne_[None, None, None, :, :]
        phi_e = nx_[None, :, None, None, :] * dne[None, None, :, None, :]
        gx = phi_x - phi_e * (eta4 * tp4 / t4)[..., None]
        gz = phi_e / t4[..., None]
        gz = np.broadcast_to(gz, gx.shape)
        return x4, z4, w4, coef, gx, gz, t4

    def lift(self, x4, z4, uq=None, upq=None):
        uq = self.uq if uq is None else uq
        upq = self.upq if upq is None else upq
        w = uq[..., :, :, None, None]
        wp = upq[..., :, :, None, None]
        return lift_with_gradient(self.bd, self.delta, self.kind, x4, z4, w, wp)

    def assemble(self, n_total: int):
        """Sparse stiffness, load vector and constant of ``1/2 int coef |grad(theta + lift)|^2``."""
        x4, z4, w4, coef, gx, gz, _ = self.geometry()
        _, hx, hz = self.lift(x4, z4)
        cw = coef * w4
        ke = np.einsum("iajbk,iajbl,iajb->ijkl", gx, gx, cw, optimize=True)
        ke += np.einsum("iajbk,iajbl,iajb->ijkl", gz, gz, cw, optimize=True)
        fe = np.einsum("iajbk,iajb->ijk", gx, cw * hx) + np.einsum("iajbk,iajb->ijk", gz, cw * hz)
        const = 0.5 * float(np.sum(cw * (hx**2 + hz**2)))
        rows = np.broadcast_to(self.dofs[..., :, None], ke.shape).ravel()
        cols = np.broadcast_to(self.dofs[..., None, :], ke.shape).ravel()
        A = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_total, n_total))
        b = np.bincount(self.dofs.ravel(), weights=fe.ravel(), minlength=n_total)
        return A, b, const

    def local_theta(self, theta: np.ndarray) -> np.ndarray:
        return theta[self.dofs]  # (nx, ne, 4)

    def theta_gradient(self, theta, gx, gz):
        th = self.local_theta(theta)[:, None, :, None, :]
        return np.sum(th * gx, axis=-1), np.sum(th * gz, axis=-1)

    def column_energy(self, theta: np.ndarray, uq=None, upq=None) -> np.ndarray:
        """``1/2 int coef |grad(theta + lift)|^2`` per x-column, batched over leading dims of ``uq``."""
        x4, z4, w4, coef, gx, gz, _ = self.geometry(uq, upq)
        _, hx, hz = self.lift(x4, z4, uq, upq)
        tx, tz = self.theta_gradient(theta, gx, gz)
        dens = coef * w4 * ((tx + hx) ** 2 + (tz + hz) ** 2)
        return 0.5 * dens.sum(axis=(-1, -2, -3))

    def grad_fields(self, theta: np.ndarray) -> dict:
        """Quadrature-point data for post-processing."""
        x4, z4, w4, coef, gx, gz, _ = self.geometry()
        hv, hx, hz = self.lift(x4, z4)
        tx, tz = self.theta_gradient(theta, gx, gz)
        return dict(x=x4, z=z4, w=w4, coef=coef, tx=tx, tz=tz, hx=hx, hz=hz, h=hv)


class RobinBoundary:
    """The interface term ``1/2 int sigma(x,-H) (theta + h_u - frak_h)^2 dx`` at ``eta = 0``."""

    def __init__(self, region: Region):
        self.region = region
        self.H = region.H
        self.xq, self.wx = region.xq, region.wx
        self.s = region.sigma(self.xq, np.full_like(self.xq, -self.H))
        xi = region.tq
        self.nb = np.stack([1 - xi, xi], axis=-1)  # (qx, 2)
        self.dofs = (np.arange(region.nx)[:, None] + np.arange(2)[None, :]) * region.n_rows + region.row_offset

    def data(self, uq=None):
        uq = self.region.uq if uq is None else uq
        bd = self.region.bd
        zH = np.full(np.shape(uq), -self.H)
        xq = np.broadcast_to(self.xq, np.shape(uq))
        return bd.h.f(xq, zH, uq) - bd.frak_h(xq, uq)

    def assemble(self, n_total: int):
        r = self.data()
        sw = self.s * self.wx
        me = np.einsum("qk,ql,iq->ikl", self.nb, self.nb, sw)
        fe = np.einsum("qk,iq->ik", self.nb, sw * r)
        const = 0.5 * float(np.sum(sw * r**2))
        rows = np.broadcast_to(self.dofs[:, :, None], me.shape).ravel()
        cols = np.broadcast_to(self.dofs[:, None, :], me.shape).ravel()
        M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n_total, n_total))
        b = np.bincount(self.dofs.ravel(), weights=fe.ravel(), minlength=n_total)
        return M, b, const

    def trace(self, theta: np.ndarray) -> np.ndarray:
        """theta at the boundary quadrature points, shape (nx, qx)."""
        return np.einsum("qk,ik->iq", self.nb, theta[self.dofs])

    def column_energy(self, theta: np.ndarray, uq=None) -> np.ndarray:
        tr = self.trace(theta)
        r = self.data(uq)
        return 0.5 * np.sum(self.s * self.wx * (tr + r) ** 2, axis=-1)


def hermite_at(region: Region):
    """Hermite shape functions (value, slope) at the region's x quadrature points."""
    n, d1, _ = hermite_basis(region.tq[None, :], region.hx[:, None])
    return n, d1  # (nx, qx, 4)
