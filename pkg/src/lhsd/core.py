"""Latin hypercube sampling with dependence (LHSD) and its baselines.

A raw sample is an ``(n, d)`` array whose rows are i.i.d. draws from some
copula. LHSD replaces every entry by the centre (or a random point) of the
stratum given by its rank within its column, which stratifies each marginal
while keeping the rank dependence between columns.
"""
from __future__ import annotations

import enum

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

__all__ = [
    "EtaPolicy",
    "rank_statistics",
    "lhsd_transform",
    "lhsd_estimate",
    "mc_estimate",
    "lhs_transform",
    "empirical_copulas",
    "LHSDTransformer",
    "LHSTransformer",
]


class EtaPolicy(str, enum.Enum):
    """Position of a transformed point inside its stratum."""

    HALF = "half"
    IID_UNIFORM = "iid_uniform"

    @classmethod
    def parse(cls, value) -> "EtaPolicy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"0.5": "half", "1/2": "half", "iiduniform": "iid_uniform", "uniform": "iid_uniform"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown eta policy {value!r}; expected 'half' or 'iid_uniform'") from None


def _as_raw(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.ndim != 2 or raw.shape[0] < 1:
        raise ValueError(f"raw sample must be a non-empty (n, d) array, got shape {raw.shape}")
    return raw


def rank_statistics(x, axis: int = 0) -> np.ndarray:
    """Rank of every entry within its column: ``r_i = #{k : x_k <= x_i}``.

    Ties share the highest rank of their group, as the counting definition
    implies. For distinct values the result is a permutation of ``1..n``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise ValueError("rank_statistics needs at least one dimension")
    x = np.moveaxis(x, axis, 0)
    s = np.sort(x, axis=0)
    if x.ndim == 1:
        r = np.searchsorted(s, x, side="right")
    else:
        flat_x = x.reshape(x.shape[0], -1)
        flat_s = s.reshape(s.shape[0], -1)
        r = np.empty(flat_x.shape, dtype=np.int64)
        for col in range(flat_x.shape[1]):
            r[:, col] = np.searchsorted(flat_s[:, col], flat_x[:, col], side="right")
        r = r.reshape(x.shape)
    return np.moveaxis(r.astype(np.int64), 0, axis)


def lhsd_transform(raw, eta_policy=EtaPolicy.HALF, rng: np.random.Generator | None = None) -> np.ndarray:
    """Map a raw dependent sample to its LHSD points ``(r - 1 + eta) / n``.

    Parameters
    ----------
    raw : array_like, shape (n, d)
        I.i.d. rows from the copula of interest.
    eta_policy : EtaPolicy or str
        ``"half"`` places each point at its stratum centre; ``"iid_uniform"``
        draws the in-stratum offset uniformly (requires ``rng``).
    rng : numpy.random.Generator, optional
        Only used by the ``iid_uniform`` policy.

    Returns
    -------
    ndarray, shape (n, d)
    """
    raw = _as_raw(raw)
    policy = EtaPolicy.parse(eta_policy)
    n = raw.shape[0]
    ranks = rank_statistics(raw, axis=0)
    if policy is EtaPolicy.HALF:
        eta = 0.5
    else:
        if rng is None:
            raise ValueError("eta_policy='iid_uniform' needs a random generator")
        eta = rng.random(raw.shape)
    return (ranks - 1 + eta) / n


def _evaluate(f, points: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(points), dtype=float)
    if vals.shape != (points.shape[0],):
        raise ValueError(f"integrand must return one value per row, got shape {vals.shape}")
    return vals


def lhsd_estimate(raw, f, eta_policy=EtaPolicy.HALF, rng: np.random.Generator | None = None) -> float:
    """Mean of ``f`` over the LHSD points built from ``raw``.

    ``f`` is called once with the whole ``(n, d)`` array and must return
    ``n`` values.
    """
    return float(np.mean(_evaluate(f, lhsd_transform(raw, eta_policy, rng))))


def mc_estimate(raw, f) -> float:
    """Plain Monte Carlo mean of ``f`` over the raw sample."""
    return float(np.mean(_evaluate(f, _as_raw(raw))))


def lhs_transform(raw, rng: np.random.Generator) -> np.ndarray:
    """Classical Latin hypercube sample ``(pi_j - 1 + U) / n``.

    Every column gets its own uniform random permutation, so any dependence
    between the columns of ``raw`` is discarded.
    """
    raw = _as_raw(raw)
    n, d = raw.shape
    perms = np.stack([rng.permutation(n) for _ in range(d)], axis=1)
    return (perms + raw) / n


def empirical_copulas(raw, u) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the two empirical copulas of ``raw`` at ``u``.

    Returns ``(c_n, c_tilde_n)``: ``c_n`` counts rows whose marginal
    empirical CDF values are all ``<= u``; ``c_tilde_n`` counts rows lying
    below the generalised empirical quantiles ``F_n^-(u)``. Both are exactly
    equal on the grid ``{i/n}^d`` and differ by at most ``d/n`` elsewhere.
    ``u`` may carry leading batch axes.
    """
    raw = _as_raw(raw)
    n, d = raw.shape
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != d:
        raise ValueError(f"evaluation points need trailing dimension {d}, got {u.shape}")
    batch_shape = u.shape[:-1]
    u = u.reshape(-1, d)

    srt = np.sort(raw, axis=0)
    levels = np.arange(1, n + 1) / n
    # F_n(U_i^j) for every sample entry
    ecdf_at_sample = np.stack(
        [np.searchsorted(srt[:, j], raw[:, j], side="right") / n for j in range(d)], axis=1
    )
    # F_n^-(u) = inf{x : F_n(x) >= u}; -inf for u <= 0, +inf past the last level
    quant = np.empty_like(u)
    for j in range(d):
        k = np.searchsorted(levels, u[:, j], side="left")
        q = np.where(k < n, srt[np.minimum(k, n - 1), j], np.inf)
        quant[:, j] = np.where(u[:, j] <= 0.0, -np.inf, q)

    c_n = np.empty(len(u))
    c_tilde = np.empty(len(u))
    chunk = max(1, 2_000_000 // max(n * d, 1))
    for start in range(0, len(u), chunk):
        sl = slice(start, start + chunk)
        c_n[sl] = np.mean(np.all(ecdf_at_sample[None, :, :] <= u[sl, None, :], axis=2), axis=1)
        c_tilde[sl] = np.mean(np.all(raw[None, :, :] <= quant[sl, None, :], axis=2), axis=1)
    return c_n.reshape(batch_shape), c_tilde.reshape(batch_shape)


class LHSDTransformer(TransformerMixin, BaseEstimator):
    """scikit-learn transformer turning a dependent sample into LHSD points.

    The transform is sample-relative: ``transform(X)`` ranks the rows of
    ``X`` among themselves, so it needs the whole sample at once. ``fit``
    only records the input width.

    Parameters
    ----------
    eta_policy : {"half", "iid_uniform"}, default="half"
    random_state : int, numpy.random.Generator or None
        Seed for the ``iid_uniform`` offsets.
    """

    def __init__(self, eta_policy="half", random_state=None):
        self.eta_policy = eta_policy
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        EtaPolicy.parse(self.eta_policy)
        self.n_features_in_ = X.shape[1]
        self._rng = np.random.default_rng(self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return lhsd_transform(X, self.eta_policy, self._rng)


class LHSTransformer(TransformerMixin, BaseEstimator):
    """scikit-learn transformer for classical (independent) Latin hypercube sampling."""

    def __init__(self, random_state=None):
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        self._rng = np.random.default_rng(self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return lhs_transform(X, self._rng)
