"""Estimator-style front end: ``fit`` computes the equilibrium deflection, ``predict`` evaluates it.

There are no training data; ``fit`` ignores ``X``/``y`` and minimises the
total energy for the configured device.  ``predict(X)`` returns ``u(x)`` at
the positions in ``X`` (one column).

>>> est = DeflectionEstimator(V=2.0, nx=16).fit()
>>> est.predict([[0.0]]).shape
(1,)
"""
from __future__ import annotations

from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .boundary_data import PermittivityProfile, certify_growth_constants, default_grounded_family
from .geometry import DeviceConfig
from .mechanics import parse_model
from .optimizer import MinimizeOptions, minimize_total

__all__ = ["DeflectionEstimator"]


class DeflectionEstimator(RegressorMixin, BaseEstimator):
    """Equilibrium deflection of the device for one model.

    Parameters mirror the device configuration; ``model`` is ``"reduced"`` or
    a layer thickness (``0.1`` or ``"delta:0.1"``).  The default boundary-data
    family with constant permittivity ``sigma`` is used.
    """

    def __init__(
        self,
        model: Union[str, float] = "reduced",
        V: float = 3.0,
        sigma: float = 2.0,
        L: float = 1.0,
        H: float = 1.0,
        beta: float = 1.0,
        tau: float = 0.1,
        a: float = 1.0,
        nx: int = 32,
        nz_free: int = 16,
        nz_layer: int = 16,
        eps_gap: float = 1e-3,
        max_iters: int = 400,
        grad_tol: Optional[float] = None,
        seed: int = 0,
    ):
        self.model = model
        self.V = V
        self.sigma = sigma
        self.L = L
        self.H = H
        self.beta = beta
        self.tau = tau
        self.a = a
        self.nx = nx
        self.nz_free = nz_free
        self.nz_layer = nz_layer
        self.eps_gap = eps_gap
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.seed = seed

    def _device(self) -> DeviceConfig:
        return DeviceConfig(
            L=self.L, H=self.H, beta=self.beta, tau=self.tau, a=self.a, eps_gap=self.eps_gap,
            nx=self.nx, nz_free=self.nz_free, nz_layer=self.nz_layer,
        )

    def fit(self, X=None, y=None):
        device = self._device()
        delta = parse_model(self.model)
        sigma = PermittivityProfile.constant(self.sigma, self.L, self.H)
        bd = default_grounded_family(self.V, sigma, self.H)
        w_range = (-0.5 * self.H, self.H)
        bd = bd.with_constants(*certify_growth_constants(bd, sigma, w_range), w_range)
        opts = MinimizeOptions(max_iters=self.max_iters, grad_tol=self.grad_tol, seed=self.seed)
        res = minimize_total(delta, device, bd, sigma, None, opts)
        self.deflection_ = res.u_star
        self.energy_ = res.energy
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.touched_ = res.touched
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "deflection_")
        X = check_array(X, ensure_2d=False, dtype=float)
        x = X.reshape(-1) if X.ndim == 1 else X[:, 0]
        return self.deflection_(x)
