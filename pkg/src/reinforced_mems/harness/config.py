"""Strict JSON run configuration.

A configuration is one JSON object with optional sections; every key is
checked against the schema below and unknown keys raise ``ConfigError``.

.. code-block:: json

    {
      "device": {"L": 1.0, "H": 1.0, "beta": 1.0, "tau": 0.1, "a": 1.0,
                 "delta_list": [0.2, 0.1, 0.05], "eps_gap": 1e-3,
                 "nx": 48, "nz_free": 16, "nz_layer": 16, "quadrature_order": 4},
      "V": 3.0,
      "family": "default",
      "sigma": {"kind": "constant", "value": 2.0},
      "w_range": [-0.5, 1.0],
      "optimizer": {"max_iters": 400, "grad_tol": null, "step0": 0.01,
                    "backtrack_factor": 0.5, "armijo_c": 1e-4,
                    "obstacle_mode": "nodal-projection", "seed": 0,
                    "gradient": "fd", "multistart": 0},
      "comparison_grid": {"nx": 96, "nz": 48},
      "audit": {"samples": 50, "seed": 0},
      "record_wall_time": false
    }

``w_range`` is given in absolute units; when omitted it defaults to
``[-H/2, H]``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from ..boundary_data import (
    BoundaryData,
    PermittivityProfile,
    certify_growth_constants,
    default_grounded_family,
    series_capacitor_family,
)
from ..exceptions import ConfigError
from ..geometry import DeviceConfig
from ..optimizer import MinimizeOptions

__all__ = ["RunConfig", "load_config", "parse_config"]

_DEVICE_KEYS = {f for f in DeviceConfig.__dataclass_fields__}
_OPT_KEYS = {f for f in MinimizeOptions.__dataclass_fields__} - {"max_backtracks"} | {"multistart"}
_SIGMA_KEYS = {"constant": {"kind", "value"}, "affine": {"kind", "c0", "cx", "cz"}}
_TOP_KEYS = {"device", "V", "family", "sigma", "w_range", "optimizer", "comparison_grid", "audit", "record_wall_time"}
_FAMILIES = {"default": default_grounded_family, "series_capacitor": series_capacitor_family}


def _check_keys(section: str, given: dict, allowed: set):
    if not isinstance(given, dict):
        raise ConfigError(f"section {section!r} must be a JSON object")
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")


def _number(section, key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class RunConfig:
    device: DeviceConfig
    V: float
    family: str
    sigma_spec: dict
    w_range: tuple
    optimizer: MinimizeOptions
    multistart: int
    comparison_grid: tuple
    audit_samples: int
    audit_seed: int
    record_wall_time: bool
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def sigma(self) -> PermittivityProfile:
        d = self.device
        spec = self.sigma_spec
        if spec["kind"] == "constant":
            return PermittivityProfile.constant(spec["value"], d.L, d.H)
        return PermittivityProfile.affine(spec["c0"], spec["cx"], spec["cz"], d.L, d.H)

    def boundary_data(self, sigma: Optional[PermittivityProfile] = None) -> BoundaryData:
        """Family instance with growth constants certified on ``w_range``."""
        sigma = self.sigma() if sigma is None else sigma
        bd = _FAMILIES[self.family](self.V, sigma, self.device.H)
        m, K = certify_growth_constants(bd, sigma, self.w_range)
        return bd.with_constants(m, K, self.w_range)

    def resolved(self) -> dict:
        """Fully resolved configuration (defaults filled in), JSON-serialisable."""
        dev = asdict(self.device)
        dev["delta_list"] = list(dev["delta_list"])
        opt = asdict(self.optimizer)
        opt.pop("max_backtracks")
        opt["multistart"] = self.multistart
        return {
            "device": dev,
            "V": self.V,
            "family": self.family,
            "sigma": dict(self.sigma_spec),
            "w_range": list(self.w_range),
            "optimizer": opt,
            "comparison_grid": {"nx": self.comparison_grid[0], "nz": self.comparison_grid[1]},
            "audit": {"samples": self.audit_samples, "seed": self.audit_seed},
            "record_wall_time": self.record_wall_time,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_config(data: Any) -> RunConfig:
    _check_keys("<root>", data, _TOP_KEYS)

    dev_in = dict(data.get("device", {}))
    _check_keys("device", dev_in, _DEVICE_KEYS)
    dev = {}
    for k, v in dev_in.items():
        if k == "delta_list":
            if not isinstance(v, list) or not v:
                raise ConfigError("device.delta_list must be a non-empty list")
            dev[k] = tuple(_number("device", k, d) for d in v)
        else:
            dev[k] = _number("device", k, v, integer=k in ("nx", "nz_free", "nz_layer", "quadrature_order"))
    device = DeviceConfig(**dev)

    V = _number("<root>", "V", data.get("V", 3.0))
    family = data.get("family", "default")
    if family not in _FAMILIES:
        raise ConfigError(f"family must be one of {sorted(_FAMILIES)}, got {family!r}")

    sig = data.get("sigma", {"kind": "constant", "value": 2.0})
    if not isinstance(sig, dict) or sig.get("kind") not in _SIGMA_KEYS:
        raise ConfigError("sigma.kind must be 'constant' or 'affine'")
    _check_keys("sigma", sig, _SIGMA_KEYS[sig["kind"]])
    sigma_spec = {"kind": sig["kind"]}
    for k in sorted(_SIGMA_KEYS[sig["kind"]] - {"kind"}):
        if k not in sig:
            raise ConfigError(f"sigma.{k} is required for kind {sig['kind']!r}")
        sigma_spec[k] = _number("sigma", k, sig[k])

    wr = data.get("w_range", [-0.5 * device.H, device.H])
    if not isinstance(wr, list) or len(wr) != 2:
        raise ConfigError("w_range must be a two-element list")
    w_range = (_number("w_range", "0", wr[0]), _number("w_range", "1", wr[1]))
    if not (-device.H < w_range[0] <= w_range[1]):
        raise ConfigError(f"w_range must satisfy -H < w_min <= w_max, got {list(w_range)}")

    opt_in = dict(data.get("optimizer", {}))
    _check_keys("optimizer", opt_in, _OPT_KEYS)
    multistart = _number("optimizer", "multistart", opt_in.pop("multistart", 0), integer=True)
    if multistart < 0:
        raise ConfigError("optimizer.multistart must be nonnegative")
    opt_kw = {}
    for k, v in opt_in.items():
        if k in ("obstacle_mode", "gradient"):
            if not isinstance(v, str):
                raise ConfigError(f"optimizer.{k} must be a string")
            opt_kw[k] = v
        elif k == "grad_tol" and v is None:
            opt_kw[k] = None
        else:
            opt_kw[k] = _number("optimizer", k, v, integer=k in ("max_iters", "seed"))
    optimizer = MinimizeOptions(**opt_kw)

    cg = data.get("comparison_grid", {})
    _check_keys("comparison_grid", cg, {"nx", "nz"})
    grid = (_number("comparison_grid", "nx", cg.get("nx", 96), True), _number("comparison_grid", "nz", cg.get("nz", 48), True))
    if min(grid) < 2:
        raise ConfigError("comparison_grid sizes must be at least 2")

    au = data.get("audit", {})
    _check_keys("audit", au, {"samples", "seed"})
    samples = _number("audit", "samples", au.get("samples", 50), True)
    seed = _number("audit", "seed", au.get("seed", 0), True)
    if samples < 0:
        raise ConfigError("audit.samples must be nonnegative")

    rwt = data.get("record_wall_time", False)
    if not isinstance(rwt, bool):
        raise ConfigError("record_wall_time must be a boolean")

    return RunConfig(
        device, V, family, sigma_spec, w_range, optimizer, multistart, grid, samples, seed, rwt, raw=dict(data)
    )


def load_config(path_or_data: Union[str, Path, dict, RunConfig]) -> RunConfig:
    """Load and validate a configuration from a path, a dict, or pass a RunConfig through."""
    if isinstance(path_or_data, RunConfig):
        return path_or_data
    if not isinstance(path_or_data, (str, Path)):
        return parse_config(path_or_data)
    p = Path(path_or_data)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    return parse_config(data)
