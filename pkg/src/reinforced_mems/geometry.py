"""Device geometry, clamped Hermite deflections and the composite meshes.

A deflection ``u`` lives on ``D = (-L, L)`` and is stored as nodal
``(value, slope)`` pairs of a cubic Hermite interpolant, which is
H^2-conforming.  The free region ``-H < z < u(x)`` is parametrised by a
vertical map onto the reference strip ``D x (0, 1)``; the dielectric layer
``D x (-H - delta, -H)`` is a plain tensor grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import BelowObstacle, ConfigError, NotClamped, OutOfDomain, TouchdownGeometry

__all__ = [
    "DeviceConfig",
    "Deflection",
    "RegionMesh",
    "MeshPair",
    "build_deflection_from_samples",
    "eval_deflection",
    "sobolev_norms",
    "coincidence_set",
    "build_meshes",
    "gauss_legendre",
    "hermite_basis",
    "hermite_matrices",
]


@dataclass(frozen=True)
class DeviceConfig:
    """Physical constants and discretisation sizes of the device."""

    L: float = 1.0
    H: float = 1.0
    beta: float = 1.0
    tau: float = 0.1
    a: float = 1.0
    delta_list: tuple = (0.2, 0.1, 0.05)
    eps_gap: float = 1e-3
    nx: int = 48
    nz_free: int = 16
    nz_layer: int = 16
    quadrature_order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "delta_list", tuple(float(d) for d in self.delta_list))
        for name in ("L", "H", "beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("tau", "a"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if not all(0.0 < d < 1.0 for d in self.delta_list):
            raise ConfigError(f"every delta must lie in (0, 1), got {self.delta_list}")
        if not self.eps_gap > 0:
            raise ConfigError("eps_gap must be positive")
        for name in ("nx", "nz_free", "nz_layer"):
            if int(getattr(self, name)) < 2:
                raise ConfigError(f"{name} must be at least 2")
        if int(self.quadrature_order) < 1:
            raise ConfigError("quadrature_order must be positive")

    @property
    def width(self) -> float:
        return 2.0 * self.L

    def beam_nodes(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.nx + 1)


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    pts, wts = np.polynomial.legendre.leggauss(int(order))
    return 0.5 * (pts + 1.0), 0.5 * wts


def hermite_basis(t: np.ndarray, h) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cubic Hermite shape functions on an element of length ``h``.

    Returns arrays of shape ``t.shape + (4,)`` for the value, first and
    second x-derivatives, ordered (left value, left slope, right value,
    right slope).
    """
    t, h = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(h, dtype=float))
    h = h[..., None]
    t = t[..., None]
    one = np.ones_like(t)
    n = np.concatenate(
        [1 - 3 * t**2 + 2 * t**3, t - 2 * t**2 + t**3, 3 * t**2 - 2 * t**3, -(t**2) + t**3], axis=-1
    ) * np.concatenate([one, h * one, one, h * one], axis=-1)
    d1 = np.concatenate(
        [(-6 * t + 6 * t**2) / h, 1 - 4 * t + 3 * t**2, (6 * t - 6 * t**2) / h, -2 * t + 3 * t**2],
        axis=-1,
    )
    d2 = np.concatenate(
        [(-6 + 12 * t) / h**2, (-4 + 6 * t) / h, (6 - 12 * t) / h**2, (-2 + 6 * t) / h], axis=-1
    )
    return n, d1, d2


@dataclass(frozen=True, eq=False)
class Deflection:
    """Clamped cubic Hermite profile on ``[-L, L]``."""

    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        values = np.array(self.values, dtype=float)
        slopes = np.array(self.slopes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or values.shape != nodes.shape or slopes.shape != nodes.shape:
            raise ValueError("nodes, values and slopes must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if values[0] != 0 or values[-1] != 0 or slopes[0] != 0 or slopes[-1] != 0:
            raise NotClamped("value and slope must vanish at x = +-L")
        for arr in (nodes, values, slopes):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def zeros(cls, nodes) -> "Deflection":
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, np.zeros_like(nodes), np.zeros_like(nodes))

    @classmethod
    def from_function(cls, nodes, f, df) -> "Deflection":
        """Hermite interpolant of ``f``; end values are forced to exact zeros."""
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(f(nodes), dtype=float).copy()
        slopes = np.asarray(df(nodes), dtype=float).copy()
        for arr in (values, slopes):
            if abs(arr[0]) > 1e-12 or abs(arr[-1]) > 1e-12:
                raise NotClamped("function does not satisfy the clamped conditions")
            arr[0] = arr[-1] = 0.0
        return cls(nodes, values, slopes)

    @classmethod
    def from_free_dofs(cls, nodes, dofs) -> "Deflection":
        """Inverse of :attr:`free_dofs`: interior (value, slope) pairs."""
        nodes = np.asarray(nodes, dtype=float)
        full = np.zeros(2 * nodes.size)
        full[2:-2] = dofs
        return cls(nodes, full[0::2], full[1::2])

    @property
    def free_dofs(self) -> np.ndarray:
        return np.column_stack([self.values, self.slopes]).ravel()[2:-2].copy()

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    def element_dofs(self) -> np.ndarray:
        """(n_elements, 4) local coefficient table."""
        v, s = self.values, self.slopes
        return np.column_stack([v[:-1], s[:-1], v[1:], s[1:]])

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.nodes[-1]))
        if np.any(x < self.nodes[0] - tol) or np.any(x > self.nodes[-1] + tol):
            raise OutOfDomain("evaluation point outside [-L, L]")
        e = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.n_elements - 1)
        h = self.nodes[e + 1] - self.nodes[e]
        return e, (x - self.nodes[e]) / h

    def evaluate(self, x):
        """Value, first and second derivative at ``x`` (vectorised)."""
        e, t = self.locate(x)
        h = self.nodes[e + 1] - self.nodes[e]
        n, d1, d2 = hermite_basis(t, h)
        c = self.element_dofs()[e]
        return (n * c).sum(-1), (d1 * c).sum(-1), (d2 * c).sum(-1)

    def __call__(self, x):
        return self.evaluate(x)[0]

    def __add__(self, other: "Deflection") -> "Deflection":
        _check_same_grid(self, other)
        return Deflection(self.nodes, self.values + other.values, self.slopes + other.slopes)

    def __sub__(self, other: "Deflection") -> "Deflection":
        _check_same_grid(self, other)
        return Deflection(self.nodes, self.values - other.values, self.slopes - other.slopes)

    def __mul__(self, k: float) -> "Deflection":
        return Deflection(self.nodes, k * self.values, k * self.slopes)

    __rmul__ = __mul__

    def min_value(self, samples_per_element: int = 10) -> float:
        xs = dense_grid(self.nodes, samples_per_element)
        return float(np.min(self(xs)))

    def max_abs(self, samples_per_element: int = 10) -> float:
        xs = dense_grid(self.nodes, samples_per_element)
        return float(np.max(np.abs(self(xs))))

    def to_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "values": self.values.tolist(), "slopes": self.slopes.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Deflection":
        return cls(d["nodes"], d["values"], d["slopes"])


def _check_same_grid(u: Deflection, v: Deflection):
    if u.nodes.shape != v.nodes.shape or np.any(u.nodes != v.nodes):
        raise ValueError("deflections live on different grids")


def dense_grid(nodes: np.ndarray, per_element: int) -> np.ndarray:
    t = np.arange(per_element) / per_element
    h = np.diff(nodes)
    inner = (nodes[:-1, None] + h[:, None] * t[None, :]).ravel()
    return np.append(inner, nodes[-1])


def build_deflection_from_samples(samples: Sequence[tuple], config: DeviceConfig) -> Deflection:
    """Build a deflection from ``(x, value, slope)`` triples covering ``[-L, L]``."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("samples must be a sequence of (x, value, slope) triples")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    x = arr[:, 0]
    if not (np.isclose(x[0], -config.L, rtol=0, atol=1e-12) and np.isclose(x[-1], config.L, rtol=0, atol=1e-12)):
        raise OutOfDomain("samples must cover [-L, L] with endpoints included")
    x[0], x[-1] = -config.L, config.L
    u = Deflection(x, arr[:, 1], arr[:, 2])
    if np.any(u.values < -config.H):
        raise BelowObstacle(f"nodal value below the obstacle -H = {-config.H}")
    return u


def eval_deflection(u: Deflection, x: float) -> tuple[float, float, float]:
    v, d1, d2 = u.evaluate(np.asarray(x, dtype=float))
    return float(v), float(d1), float(d2)


def sobolev_norms(u: Deflection, quadrature_order: int = 4) -> tuple[float, float, float]:
    """Squared L2 norms of u, u' and u'' by element-wise Gauss quadrature."""
    t, w = gauss_legendre(quadrature_order)
    h = np.diff(u.nodes)
    n, d1, d2 = hermite_basis(t[None, :], h[:, None])
    c = u.element_dofs()[:, None, :]
    wq = w[None, :] * h[:, None]
    out = []
    for basis in (n, d1, d2):
        vals = (basis * c).sum(-1)
        out.append(float(np.sum(wq * vals**2)))
    return out[0], out[1], out[2]


def h2_norm(u: Deflection, quadrature_order: int = 4) -> float:
    """Full H^2 norm (all three seminorms)."""
    return float(np.sqrt(sum(sobolev_norms(u, quadrature_order))))


def coincidence_set(u: Deflection, H: float, tol: float, samples_per_element: int = 10) -> list[tuple[float, float]]:
    """Maximal sampled intervals on which ``u + H <= tol``."""
    xs = dense_grid(u.nodes, samples_per_element)
    hit = u(xs) + H <= tol
    intervals = []
    i = 0
    while i < xs.size:
        if hit[i]:
            j = i
            while j + 1 < xs.size and hit[j + 1]:
                j += 1
            intervals.append((float(xs[i]), float(xs[j])))
            i = j + 1
        else:
            i += 1
    return intervals


def hermite_matrices(nodes: np.ndarray, quadrature_order: int = 4):
    """Global Gram matrices (mass, slope, curvature) on all Hermite dofs.

    Dof ordering is ``[v0, s0, v1, s1, ...]``.
    """
    nodes = np.asarray(nodes, dtype=float)
    t, w = gauss_legendre(max(quadrature_order, 4))
    h = np.diff(nodes)
    n, d1, d2 = hermite_basis(t[None, :], h[:, None])
    wq = (w[None, :] * h[:, None])[..., None, None]
    ndof = 2 * nodes.size
    mats = []
    for b in (n, d1, d2):
        local = np.sum(wq * b[..., :, None] * b[..., None, :], axis=1)
        glob = np.zeros((ndof, ndof))
        for e in range(h.size):
            idx = slice(2 * e, 2 * e + 4)
            glob[idx, idx] += local[e]
        mats.append(glob)
    return mats[0], mats[1], mats[2]


@dataclass(frozen=True, eq=False)
class RegionMesh:
    """Tensor grid ``x_i`` by reference ``eta_j`` with ``z = bottom + eta * thickness(x)``."""

    x: np.ndarray
    eta: np.ndarray
    bottom: float
    thickness: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.size, self.eta.size

    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.repeat(self.x[:, None], self.eta.size, axis=1)
        Z = self.bottom + self.eta[None, :] * self.thickness[:, None]
        return X, Z


@dataclass(frozen=True, eq=False)
class MeshPair:
    """Composite mesh: mapped free region plus (optionally) the layer."""

    deflection: Deflection
    free_mesh: RegionMesh
    layer_mesh: Optional[RegionMesh]
    delta: Optional[float]
    H: float
    interface_nodes: np.ndarray = field(repr=False)

    @property
    def x(self) -> np.ndarray:
        return self.free_mesh.x


def _check_gap(u: Deflection, config: DeviceConfig):
    gap_min = u.min_value() + config.H
    if gap_min < config.eps_gap * config.H:
        raise TouchdownGeometry(
            f"minimum gap {gap_min:.3e} below eps_gap*H = {config.eps_gap * config.H:.3e}"
        )


def build_meshes(u: Deflection, delta: Optional[float], config: DeviceConfig) -> MeshPair:
    """Composite mesh for the deflection ``u``; ``delta=None`` omits the layer."""
    _check_gap(u, config)
    x = config.beam_nodes()
    gap = u(x) + config.H
    free = RegionMesh(x, np.linspace(0.0, 1.0, config.nz_free + 1), -config.H, gap)
    layer = None
    if delta is not None:
        if not 0.0 < delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {delta}")
        layer = RegionMesh(
            x, np.linspace(0.0, 1.0, config.nz_layer + 1), -config.H - delta, np.full(x.size, float(delta))
        )
    return MeshPair(u, free, layer, None if delta is None else float(delta), config.H, x)
