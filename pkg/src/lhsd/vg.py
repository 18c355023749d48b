"""Variance-gamma basket dynamics driven by copula-coupled gamma increments.

Each asset's log-return process is a variance-gamma (VG) process written as
the difference ``G+ - G-`` of two independent gamma processes. Within a
monitoring step the ``d`` upward increments share the copula ``C+`` and the
``d`` downward increments share ``C-``; different steps and the two signs
are independent.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .copula import CopulaModel
from .core import EtaPolicy, lhsd_transform, rank_statistics
from .gamma_inv import gamma_ppf, stratum_quantiles

__all__ = [
    "Method",
    "DriftConvention",
    "ModelError",
    "derive_gamma_params",
    "martingale_drift",
    "VgAsset",
    "BasketModel",
    "simulate_uniforms",
    "increments_from_uniforms",
    "simulate_increments",
    "asset_paths",
]


class ModelError(ValueError):
    """Raised for VG parameters that do not define a valid model."""


class Method(str, enum.Enum):
    MC = "mc"
    LHSD = "lhsd"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown method {value!r}; expected 'mc' or 'lhsd'") from None


class DriftConvention(str, enum.Enum):
    """Deterministic drift in the exponent of the asset price.

    ``risk_neutral`` uses ``(r + w) t`` so that discounted prices are
    martingales; ``literal`` uses ``(w - r) t``.
    """

    RISK_NEUTRAL = "risk_neutral"
    LITERAL = "literal"

    @classmethod
    def parse(cls, value) -> "DriftConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown drift convention {value!r}; expected 'risk_neutral' or 'literal'") from None


def derive_gamma_params(theta: float, sigma: float, c: float) -> tuple[float, float, float, float]:
    """Drift and variance rates of the up and down gamma processes.

    Returns ``(mu_plus, nu_plus, mu_minus, nu_minus)`` with
    ``mu_pm = (sqrt(theta^2 + 2 sigma^2 / c) +- theta) / 2`` and
    ``nu_pm = mu_pm^2 c``.
    """
    if not sigma > 0:
        raise ModelError(f"sigma must be positive, got {sigma}")
    if not c > 0:
        raise ModelError(f"gamma volatility c must be positive, got {c}")
    root = math.sqrt(theta * theta + 2.0 * sigma * sigma / c)
    mu_plus = 0.5 * (root + theta)
    mu_minus = 0.5 * (root - theta)
    return mu_plus, mu_plus * mu_plus * c, mu_minus, mu_minus * mu_minus * c


def martingale_drift(theta: float, sigma: float, c: float) -> float:
    """``w = log(1 - theta c - sigma^2 c / 2) / c``, so that ``E exp(X_t + w t) = 1``."""
    if not c > 0:
        raise ModelError(f"gamma volatility c must be positive, got {c}")
    arg = 1.0 - theta * c - 0.5 * sigma * sigma * c
    if not arg > 0:
        raise ModelError(f"1 - theta*c - sigma^2*c/2 = {arg:.6g} <= 0; exponential moment does not exist")
    return math.log(arg) / c


@dataclass(frozen=True)
class VgAsset:
    """One asset: VG parameters ``(theta, sigma, c)`` and spot ``s0``."""

    theta: float
    sigma: float
    c: float
    s0: float = 100.0

    def __post_init__(self):
        if not self.s0 > 0:
            raise ModelError(f"initial price s0 must be positive, got {self.s0}")
        mp, nup, mm, num = derive_gamma_params(self.theta, self.sigma, self.c)
        w = martingale_drift(self.theta, self.sigma, self.c)
        for name, val in (("mu_plus", mp), ("nu_plus", nup), ("mu_minus", mm), ("nu_minus", num), ("w", w)):
            object.__setattr__(self, name, val)

    def gamma_shape_scale(self, dt: float, sign: str) -> tuple[float, float]:
        """Per-step gamma law of the ``"plus"`` or ``"minus"`` increment over ``dt``."""
        mu, nu = (self.mu_plus, self.nu_plus) if sign == "plus" else (self.mu_minus, self.nu_minus)
        return mu * mu / nu * dt, nu / mu


@dataclass(frozen=True)
class BasketModel:
    """``d`` VG assets, the two increment copulas and the monitoring dates.

    ``monitoring`` holds ``t_1 < ... < t_m``; ``t_0 = 0`` is implicit.
    """

    assets: tuple
    copula_plus: CopulaModel
    copula_minus: CopulaModel
    monitoring: tuple

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "monitoring", tuple(float(t) for t in self.monitoring))
        d = len(self.assets)
        if d < 1:
            raise ModelError("basket needs at least one asset")
        for name in ("copula_plus", "copula_minus"):
            if getattr(self, name).dim != d:
                raise ModelError(f"{name} has dim {getattr(self, name).dim}, basket has {d} assets")
        times = np.array((0.0,) + self.monitoring)
        if len(times) < 2 or np.any(np.diff(times) <= 0):
            raise ModelError("monitoring dates must be positive and strictly increasing")

    @property
    def dim(self) -> int:
        return len(self.assets)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(np.array((0.0,) + self.monitoring))

    @classmethod
    def identical(cls, asset: VgAsset, d: int, copula_plus, copula_minus, maturity: float, m: int):
        """``d`` copies of ``asset`` monitored at ``m`` equally spaced dates up to ``maturity``."""
        times = tuple(maturity * (k + 1) / m for k in range(m))
        return cls((asset,) * d, copula_plus, copula_minus, times)


def simulate_uniforms(basket: BasketModel, n: int, method, rng: np.random.Generator, eta_policy=EtaPolicy.HALF):
    """Copula-distributed uniforms of shape ``(n, m, 2, d)``; axis 2 is (plus, minus).

    For ``method="lhsd"`` the ``2 m d`` columns are LHSD-transformed across
    the ``n`` paths.
    """
    method = Method.parse(method)
    m, d = len(basket.monitoring), basket.dim
    u = np.empty((n, m, 2, d))
    for k in range(m):
        u[:, k, 0, :] = basket.copula_plus.sample(n, rng)
        u[:, k, 1, :] = basket.copula_minus.sample(n, rng)
    if method is Method.LHSD:
        u = lhsd_transform(u.reshape(n, -1), eta_policy, rng).reshape(n, m, 2, d)
    return u


def increments_from_uniforms(basket: BasketModel, u: np.ndarray) -> np.ndarray:
    """Invert per-asset gamma CDFs; returns ``(n, m, d, 2)`` increments (plus, minus)."""
    n, m, _, d = u.shape
    out = np.empty((n, m, d, 2))
    steps = basket.steps
    for k in range(m):
        for s, sign in enumerate(("plus", "minus")):
            for j, asset in enumerate(basket.assets):
                shape, scale = asset.gamma_shape_scale(steps[k], sign)
                out[:, k, j, s] = gamma_ppf(u[:, k, s, j], shape, scale)
    return out


def _centred_lhsd_increments(basket: BasketModel, raw: np.ndarray) -> np.ndarray:
    # Centred LHSD points are (rank - 1/2)/n, so each column is a permutation of
    # one fixed table of gamma quantiles.
    n, m, _, d = raw.shape
    ranks = rank_statistics(raw.reshape(n, -1), axis=0).reshape(raw.shape) - 1
    out = np.empty((n, m, d, 2))
    steps = basket.steps
    for k in range(m):
        for s, sign in enumerate(("plus", "minus")):
            for j, asset in enumerate(basket.assets):
                table = stratum_quantiles(n, *asset.gamma_shape_scale(steps[k], sign))
                out[:, k, j, s] = table[ranks[:, k, s, j]]
    return out


def simulate_increments(
    basket: BasketModel, n: int, method, rng: np.random.Generator, eta_policy=EtaPolicy.HALF
) -> np.ndarray:
    """Gamma increments ``(n, m, d, 2)``: ``[..., 0]`` upward, ``[..., 1]`` downward.

    Increment ``k`` of the upward process of asset ``j`` is gamma with shape
    ``mu_+^2 / nu_+ * dt_k`` and scale ``nu_+ / mu_+`` (mean ``mu_+ dt_k``,
    variance ``nu_+ dt_k``); likewise for the downward process.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    method = Method.parse(method)
    if method is Method.LHSD and EtaPolicy.parse(eta_policy) is EtaPolicy.HALF:
        return _centred_lhsd_increments(basket, simulate_uniforms(basket, n, Method.MC, rng))
    return increments_from_uniforms(basket, simulate_uniforms(basket, n, method, rng, eta_policy))


def asset_paths(
    basket: BasketModel, increments: np.ndarray, rate: float, drift_convention=DriftConvention.RISK_NEUTRAL
) -> np.ndarray:
    """Asset prices ``(n, m, d)`` at the monitoring dates.

    ``S_t = S_0 exp(b t + X_t)`` with ``X`` the cumulated ``plus - minus``
    increments and ``b = r + w`` (risk neutral) or ``w - r`` (literal).
    """
    conv = DriftConvention.parse(drift_convention)
    times = np.asarray(basket.monitoring)
    s0 = np.array([a.s0 for a in basket.assets])
    w = np.array([a.w for a in basket.assets])
    drift = w + rate if conv is DriftConvention.RISK_NEUTRAL else w - rate
    x = np.cumsum(increments[..., 0] - increments[..., 1], axis=1)
    return s0 * np.exp(drift * times[:, None] + x)
