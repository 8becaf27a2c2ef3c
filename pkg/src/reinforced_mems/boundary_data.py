"""Boundary-data families, the rescaled device lift and the permittivity.

A family is the pair ``(h_b, h)`` of functions of ``(x, z, w)`` where ``w``
is the plate deflection above ``x``: ``h_b`` lives on the reference layer
``z in [-H-1, -H]`` and ``h`` on ``z >= -H``.  Partial derivatives are
supplied analytically by the family constructors.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import DegenerateRange, OutOfDomain

__all__ = [
    "PermittivityProfile",
    "PartialField",
    "BoundaryData",
    "LiftField",
    "ValidationReport",
    "default_grounded_family",
    "series_capacitor_family",
    "validate_compatibility",
    "certify_growth_constants",
    "eval_h_delta",
    "sigma_delta",
    "lift_with_gradient",
]

Func = Callable[..., np.ndarray]


def _zeros(*args):
    return np.zeros(np.broadcast(*args).shape)


@dataclass(frozen=True, eq=False)
class PermittivityProfile:
    """Permittivity ``sigma(x, z)`` of the layer material on ``[-L, L] x [-H-1, -H]``."""

    sigma: Func
    dsigma_dx: Func
    L: float
    H: float
    sigma_max: float = field(init=False)
    label: str = "custom"

    def __post_init__(self):
        xs = np.linspace(-self.L, self.L, 201)
        zs = np.linspace(-self.H - 1.0, -self.H, 101)
        X, Z = np.meshgrid(xs, zs, indexing="ij")
        vals = np.broadcast_to(np.asarray(self.sigma(X, Z), dtype=float), X.shape)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("permittivity must be positive on the layer")
        object.__setattr__(self, "sigma_max", 1.0 + float(vals.max()))

    def __call__(self, x, z):
        return np.broadcast_to(np.asarray(self.sigma(x, z), dtype=float), np.broadcast(x, z).shape)

    def dx(self, x, z):
        return np.broadcast_to(np.asarray(self.dsigma_dx(x, z), dtype=float), np.broadcast(x, z).shape)

    @classmethod
    def constant(cls, s: float, L: float, H: float) -> "PermittivityProfile":
        s = float(s)
        return cls(lambda x, z: np.full(np.broadcast(x, z).shape, s), _zeros, L, H, label=f"constant({s:g})")

    @classmethod
    def affine(cls, c0: float, cx: float, cz: float, L: float, H: float) -> "PermittivityProfile":
        """``sigma = c0 + cx * x + cz * (z + H)``."""
        return cls(
            lambda x, z: c0 + cx * np.asarray(x) + cz * (np.asarray(z) + H),
            lambda x, z: np.full(np.broadcast(x, z).shape, float(cx)),
            L,
            H,
            label=f"affine({c0:g},{cx:g},{cz:g})",
        )


@dataclass(frozen=True, eq=False)
class PartialField:
    """A scalar function of ``(x, z, w)`` with its three partials."""

    f: Func
    fx: Func
    fz: Func
    fw: Func

    def __call__(self, x, z, w):
        return self.f(x, z, w)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    h_b: PartialField
    h: PartialField
    H: float
    m_const: float = float("nan")
    K_const: float = float("nan")
    w_range: Optional[tuple] = None
    name: str = "custom"

    def frak_h(self, x, w):
        """Robin datum ``h_b(x, -H-1, w)``."""
        return self.h_b.f(x, np.full(np.shape(x), -self.H - 1.0), w)

    def with_constants(self, m: float, K: float, w_range) -> "BoundaryData":
        return replace(self, m_const=float(m), K_const=float(K), w_range=tuple(map(float, w_range)))


def default_grounded_family(V: float, sigma: PermittivityProfile, H: float) -> BoundaryData:
    """Grounded family: potential ``V`` on the plate, ``0`` on the layer top and bottom.

    ``h = V (H+z)/(H+w)`` and ``h_b = V (z+H)(z+H+1) / (sigma(x,-H) (H+w))``.
    """
    V = float(V)

    def s(x):
        return sigma(x, np.full(np.shape(x), -H))

    def sx(x):
        return sigma.dx(x, np.full(np.shape(x), -H))

    def q(z):
        return (z + H) * (z + H + 1.0)

    h_b = PartialField(
        f=lambda x, z, w: V * q(z) / (s(x) * (H + w)),
        fx=lambda x, z, w: -V * q(z) * sx(x) / (s(x) ** 2 * (H + w)),
        fz=lambda x, z, w: V * (2.0 * (z + H) + 1.0) / (s(x) * (H + w)),
        fw=lambda x, z, w: -V * q(z) / (s(x) * (H + w) ** 2),
    )
    h = PartialField(
        f=lambda x, z, w: V * (H + z) / (H + w) + 0.0 * x,
        fx=lambda x, z, w: _zeros(x, z, w),
        fz=lambda x, z, w: V / (H + w) + 0.0 * (x + z),
        fw=lambda x, z, w: -V * (H + z) / (H + w) ** 2 + 0.0 * x,
    )
    return BoundaryData(h_b, h, float(H), name=f"default(V={V:g})")


def series_capacitor_family(V: float, sigma: PermittivityProfile, H: float) -> BoundaryData:
    """Family whose lift is the exact x-independent two-layer solution.

    With ``s = sigma(x, -H)`` and ``w`` the local deflection the potential is
    affine in the layer and in the free region, ``V`` on the plate and ``0``
    on the ground plate.
    """
    V = float(V)

    def s(x):
        return sigma(x, np.full(np.shape(x), -H))

    def sx(x):
        return sigma.dx(x, np.full(np.shape(x), -H))

    def den(x, w):
        return 1.0 + s(x) * (H + w)

    h = PartialField(
        f=lambda x, z, w: V * (1.0 + s(x) * (z + H)) / den(x, w),
        fx=lambda x, z, w: V * sx(x) * (z - w) / den(x, w) ** 2,
        fz=lambda x, z, w: V * s(x) / den(x, w) + 0.0 * z,
        fw=lambda x, z, w: -V * s(x) * (1.0 + s(x) * (z + H)) / den(x, w) ** 2,
    )
    h_b = PartialField(
        f=lambda x, z, w: V * (z + H + 1.0) / den(x, w),
        fx=lambda x, z, w: -V * (z + H + 1.0) * (H + w) * sx(x) / den(x, w) ** 2,
        fz=lambda x, z, w: V / den(x, w) + 0.0 * z,
        fw=lambda x, z, w: -V * s(x) * (z + H + 1.0) / den(x, w) ** 2,
    )
    return BoundaryData(h_b, h, float(H), name=f"series_capacitor(V={V:g})")


@dataclass
class ValidationReport:
    continuity: float
    flux: float
    kbound0: float
    partials: float
    tol: float = 1e-10
    partials_tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return (
            max(self.continuity, self.flux, self.kbound0) <= self.tol
            and self.partials <= self.partials_tol
        )

    def failures(self) -> list[str]:
        out = [k for k in ("continuity", "flux", "kbound0") if getattr(self, k) > self.tol]
        if self.partials > self.partials_tol:
            out.append("partials")
        return out


def _grid(L, w_range, n):
    xs = np.linspace(-L, L, n)
    ws = np.linspace(w_range[0], w_range[1], n)
    return np.meshgrid(xs, ws, indexing="ij")


def _partials_mismatch(pf: PartialField, x, z, w, scale: float) -> float:
    step = 1e-6 * scale
    worst = 0.0
    for k, deriv in enumerate((pf.fx, pf.fz, pf.fw)):
        args_p = [x, z, w]
        args_m = [x, z, w]
        args_p[k] = args_p[k] + step
        args_m[k] = args_m[k] - step
        fd = (pf.f(*args_p) - pf.f(*args_m)) / (2 * step)
        ref = np.asarray(deriv(x, z, w))
        err = np.abs(fd - ref) / (1.0 + np.abs(ref))
        worst = max(worst, float(err.max()))
    return worst


def validate_compatibility(
    bd: BoundaryData, sigma: PermittivityProfile, grid_density: int = 41, w_range=None
) -> ValidationReport:
    """Check the interface identities of the family on a grid over ``D x w_range``."""
    H = bd.H
    if w_range is None:
        w_range = bd.w_range if bd.w_range is not None else (-0.5 * H, H)
    X, W = _grid(sigma.L, w_range, grid_density)
    top = np.full_like(X, -H)
    bottom = np.full_like(X, -H - 1.0)
    continuity = np.abs(bd.h_b.f(X, top, W) - bd.h.f(X, top, W)).max()
    flux = np.abs(sigma(X, top) * bd.h_b.fz(X, top, W) - bd.h.fz(X, top, W)).max()
    kb0 = np.abs(bd.h_b.fw(X, bottom, W)).max()
    # interior sample points for the derivative cross-check
    Zb = -H - 1.0 + (np.arange(X.size).reshape(X.shape) % 7 + 0.5) / 7.0
    Zf = -H + (W + H) * ((np.arange(X.size).reshape(X.shape) % 5 + 0.5) / 5.0)
    scale = max(sigma.L, H, 1.0)
    partials = max(_partials_mismatch(bd.h_b, X, Zb, W, scale), _partials_mismatch(bd.h, X, Zf, W, scale))
    return ValidationReport(float(continuity), float(flux), float(kb0), float(partials))


def certify_growth_constants(bd: BoundaryData, sigma: PermittivityProfile, w_range, grid_density: int = 41):
    """Smallest ``(m, K)`` satisfying the growth bounds on a sampling grid.

    The free-region bounds are sampled for ``-H <= z <= w``, the part of the
    domain in which ``h(., ., u(x))`` is ever evaluated.
    """
    H = bd.H
    lo, hi = float(w_range[0]), float(w_range[1])
    if lo <= -H or hi < lo:
        raise DegenerateRange(f"w_range {w_range} must satisfy -H < w_min <= w_max")
    n = int(grid_density)
    xs = np.linspace(-sigma.L, sigma.L, n)
    ws = np.linspace(lo, hi, n)
    t = np.linspace(0.0, 1.0, n)
    X, W, T = np.meshgrid(xs, ws, t, indexing="ij")

    Zb = -H - 1.0 + T
    g1 = (np.abs(bd.h_b.fx(X, Zb, W)) + np.abs(bd.h_b.fz(X, Zb, W))) ** 2 / (1.0 + W**2)
    g2 = bd.h_b.fw(X, Zb, W) ** 2

    Zf = -H + T * (W + H)
    g3 = (np.abs(bd.h.fx(X, Zf, W)) + np.abs(bd.h.fz(X, Zf, W))) ** 2 * (H + W) / (1.0 + W**2)
    g4 = bd.h.fw(X, Zf, W) ** 2 * (H + W)
    m = max(float(np.max(g)) for g in (g1, g2, g3, g4))

    X2, W2 = np.meshgrid(xs, ws, indexing="ij")
    K = np.abs(bd.h.fx(X2, W2, W2)) + np.abs(bd.h.fz(X2, W2, W2) + bd.h.fw(X2, W2, W2))
    return m, float(np.max(K))


def eval_h_delta(bd: BoundaryData, delta: float, x, z, w):
    """Rescaled device lift: ``h_b`` stretched over the layer, ``h`` above it."""
    H = bd.H
    x, z, w = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, z, w)))
    if np.any(z < -H - delta - 1e-12 * max(1.0, H)):
        raise OutOfDomain("z below the ground plate")
    layer = z < -H
    zeta = np.where(layer, -H + (z + H) / delta, -H)
    zf = np.where(layer, -H, z)
    out = np.where(layer, bd.h_b.f(x, zeta, w), bd.h.f(x, zf, w))
    return out[()] if out.ndim == 0 else out


def sigma_delta(sigma: PermittivityProfile, delta: float, x, z):
    """Device permittivity: ``delta * sigma`` in the layer, 1 above."""
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    H = sigma.H
    zs = np.clip(z, -H - 1.0, -H)
    out = np.where(z < -H, delta * sigma(x, zs), 1.0)
    return out[()] if out.ndim == 0 else out


def lift_with_gradient(bd: BoundaryData, delta: Optional[float], region: str, x, z, w, wp):
    """Lift value and its (total) gradient at points of one region.

    ``w, wp`` are ``u(x), u'(x)``; ``region`` is ``"free"`` or ``"layer"``.
    In the layer ``z`` is the physical coordinate.
    """
    if region == "free":
        f = bd.h
        zz = z
        zscale = 1.0
    else:
        f = bd.h_b
        zz = -bd.H + (z + bd.H) / delta
        zscale = 1.0 / delta
    val = f.f(x, zz, w)
    gx = f.fx(x, zz, w) + wp * f.fw(x, zz, w)
    gz = zscale * f.fz(x, zz, w)
    return val, gx, gz


@dataclass(frozen=True, eq=False)
class LiftField:
    """Lift ``h_{u,delta}`` (``delta`` set) or ``h_u`` (``delta=None``) for one deflection."""

    bd: BoundaryData
    deflection: object
    delta: Optional[float] = None

    @property
    def model(self) -> str:
        return "reduced" if self.delta is None else f"delta:{self.delta:g}"

    def __call__(self, x, z):
        w = self.deflection(x)
        if self.delta is None:
            return self.bd.h.f(np.asarray(x, float), np.asarray(z, float), w)
        return eval_h_delta(self.bd, self.delta, x, z, w)

    def frak_h(self, x):
        return self.bd.frak_h(np.asarray(x, float), self.deflection(x))
