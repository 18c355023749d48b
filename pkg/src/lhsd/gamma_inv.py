"""Inverse of the gamma distribution function.

The quantile is found by a safeguarded Halley iteration on the regularised
lower incomplete gamma function ``P(a, x)`` (``scipy.special.gammainc``),
bracketed so that every step stays inside the current enclosing interval.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special

from .errors import NumericalGuardError

REL_TOL = 1e-10
MAX_ITER = 100
_TINY = np.finfo(float).tiny


def _initial_guess(p: np.ndarray, a: float) -> np.ndarray:
    # Starting values after the usual Numerical Recipes choice, replaced by the
    # lower-tail power law P(a, x) ~ x^a / Gamma(a + 1) where that is small.
    log_tail = (np.log(p) + special.gammaln(a + 1.0)) / a
    tail = np.exp(log_tail)
    use_tail = tail < 0.1 * (a + 1.0)
    return np.where(use_tail, tail, _central_guess(p, a))


def _central_guess(p: np.ndarray, a: float) -> np.ndarray:
    if a > 1.0:
        pp = np.where(p < 0.5, p, 1.0 - p)
        t = np.sqrt(-2.0 * np.log(pp))
        x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        x = np.where(p < 0.5, -x, x)
        return np.maximum(1e-3, a * (1.0 - 1.0 / (9.0 * a) - x / (3.0 * np.sqrt(a))) ** 3)
    t = 1.0 - a * (0.253 + a * 0.12)
    with np.errstate(divide="ignore"):
        small = (p / t) ** (1.0 / a)
        large = 1.0 - np.log1p(-(p - t) / (1.0 - t))
    return np.where(p < t, small, large)


def gamma_ppf(p, shape: float, scale: float = 1.0) -> np.ndarray:
    """Quantile function of the gamma distribution.

    Parameters
    ----------
    p : array_like
        Probabilities in ``[0, 1]``. ``0`` maps to ``0`` and ``1`` to ``inf``.
    shape, scale : float
        Positive shape ``a`` and scale ``b``; the mean is ``a * b``.

    Raises
    ------
    ValueError
        For probabilities outside ``[0, 1]`` (or NaN) and nonpositive
        parameters.
    """
    a = float(shape)
    if not a > 0 or not scale > 0:
        raise ValueError(f"gamma shape and scale must be positive, got {shape}, {scale}")
    p = np.asarray(p, dtype=float)
    if np.any(~((p >= 0.0) & (p <= 1.0))):
        raise ValueError("gamma inversion needs probabilities in [0, 1]")

    out = np.empty(p.shape)
    out[p == 0.0] = 0.0
    out[p == 1.0] = np.inf
    live = (p > 0.0) & (p < 1.0)
    pl = p[live]
    if pl.size == 0:
        return out * scale

    upper = pl > 0.5
    q_target = np.where(upper, 1.0 - pl, pl)
    lg = special.gammaln(a)
    x = _initial_guess(pl, a)
    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    todo = np.ones(x.shape, dtype=bool)

    for _ in range(MAX_ITER):
        idx = np.flatnonzero(todo)
        if idx.size == 0:
            break
        xi = x[idx]
        up = upper[idx]
        # residual of P(a, x) - p, computed from the complement in the upper tail
        err = np.where(up, q_target[idx] - special.gammaincc(a, xi), special.gammainc(a, xi) - q_target[idx])
        lo[idx] = np.where(err < 0, xi, lo[idx])
        hi[idx] = np.where(err > 0, xi, hi[idx])
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            dens = np.exp((a - 1.0) * np.log(xi) - xi - lg)
            u = err / dens
            step = u / (1.0 - 0.5 * np.minimum(1.0, u * ((a - 1.0) / xi - 1.0)))
        new = xi - step
        # subnormal quantiles cannot carry REL_TOL digits; accept them as found
        done = (np.abs(step) <= REL_TOL * np.abs(xi)) | (err == 0.0) | (xi < _TINY)
        done |= np.isfinite(hi[idx]) & (hi[idx] - lo[idx] <= REL_TOL * hi[idx])
        bad = ~done & (~np.isfinite(new) | (new <= lo[idx]) | (new >= hi[idx]))
        mid = np.where(np.isfinite(hi[idx]), 0.5 * (lo[idx] + hi[idx]), 2.0 * xi + 1.0)
        new = np.where(bad, mid, np.where(done & ~np.isfinite(new), xi, new))
        x[idx] = new
        todo[idx[done]] = False
    if np.any(todo):
        raise NumericalGuardError("gamma inversion did not converge")
    out[live] = x
    return out * scale


@lru_cache(maxsize=256)
def _stratum_centres(n: int, shape: float, scale: float) -> np.ndarray:
    table = gamma_ppf((np.arange(n) + 0.5) / n, shape, scale)
    table.flags.writeable = False
    return table


def stratum_quantiles(n: int, shape: float, scale: float) -> np.ndarray:
    """Gamma quantiles at the ``n`` stratum centres ``(k - 1/2) / n``, cached.

    With centred LHSD points every column uses the same ``n`` levels, so the
    table is computed once per ``(n, shape, scale)``. The returned array is
    read-only and shared between callers.
    """
    return _stratum_centres(int(n), float(shape), float(scale))
