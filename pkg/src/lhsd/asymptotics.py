"""Limit variances of the MC and LHSD estimators by tensor quadrature.

The LHSD limit variance is the double integral of the covariance of the
limiting Gaussian field ``G_C`` against the signed measure ``df_hat``, where
``f_hat`` equals ``f`` on ``[0, 1)^d`` and vanishes as soon as a coordinate
is 1. For a smooth ``f`` that measure has a density on the open cube plus
densities on the upper faces ``{u_S = 1}``:

    d f_hat = sum_S (-1)^|S| (d_{T} f)(u_S = 1) du_T,     T = complement of S,

``d_T`` being the mixed partial in the free coordinates. :class:`IntegrandBV`
carries ``f`` and those partials.

All integrals use the composite midpoint rule at resolutions ``g`` and
``2g`` with one Richardson step; when the two resolutions disagree by more
than ``tol`` a :class:`QuadratureError` is raised.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .copula import CopulaModel
from .errors import NumericalGuardError

__all__ = [
    "QuadratureError",
    "IntegrandBV",
    "TEST_INTEGRANDS",
    "integrand_by_name",
    "brownian_sheet_cov",
    "gc_cov",
    "expectation",
    "sigma2_mc",
    "sigma2_lhsd",
    "variance_gap",
    "sheet_moment",
    "limit_variances",
]

DEFAULT_BUDGET = 40_000_000
DEFAULT_TOL = 1e-3
_CHUNK = 1_000_000


class QuadratureError(NumericalGuardError):
    """Successive quadrature refinements disagree, or the grid is too costly."""


@dataclass(frozen=True)
class IntegrandBV:
    """A smooth integrand on ``[0, 1]^d`` with its mixed partial derivatives.

    Parameters
    ----------
    dim : int
    f : callable
        Maps an ``(N, d)`` array to ``N`` values.
    partials : mapping
        ``frozenset(T) -> callable`` giving the mixed partial over the
        zero-based coordinates ``T`` (vectorised like ``f``). Missing subsets
        are treated as identically zero; the empty set is ``f`` itself.
    """

    dim: int
    f: Callable
    partials: Mapping = field(default_factory=dict)
    name: str = ""

    def partial(self, free) -> Callable | None:
        free = frozenset(free)
        if not free:
            return self.f
        return self.partials.get(free)

    def faces(self):
        """``(fixed, free, density)`` triples describing ``df_hat``.

        ``fixed`` coordinates are set to 1; ``density`` is evaluated on full
        ``(N, d)`` points and already carries the ``(-1)^|fixed|`` sign.
        """
        out = []
        d = self.dim
        for k in range(d + 1):
            for free in itertools.combinations(range(d), k):
                fixed = tuple(i for i in range(d) if i not in free)
                g = self.partial(free)
                if g is None:
                    continue
                sign = -1.0 if len(fixed) % 2 else 1.0
                out.append((fixed, free, (lambda pts, g=g, sign=sign: sign * np.asarray(g(pts), dtype=float))))
        return out


def _neg_product(d: int) -> IntegrandBV:
    # f = -prod(1 - u_i); d_T f = -(-1)^|T| prod_{i not in T} (1 - u_i)
    def make(free):
        rest = [i for i in range(d) if i not in free]
        sign = -((-1.0) ** len(free))
        return lambda u: sign * np.prod(1.0 - u[:, rest], axis=1)

    parts = {frozenset(T): make(T) for k in range(1, d + 1) for T in itertools.combinations(range(d), k)}
    return IntegrandBV(d, make(()), parts, "neg_product")


def _product(d: int) -> IntegrandBV:
    def make(free):
        rest = [i for i in range(d) if i not in free]
        return lambda u: np.prod(u[:, rest], axis=1)

    parts = {frozenset(T): make(T) for k in range(1, d + 1) for T in itertools.combinations(range(d), k)}
    return IntegrandBV(d, make(()), parts, "product")


def _additive(d: int) -> IntegrandBV:
    parts = {frozenset([i]): (lambda u: np.ones(len(u))) for i in range(d)}
    return IntegrandBV(d, lambda u: np.sum(u, axis=1), parts, "additive")


#: Smooth, bounded-variation test integrands keyed by id.
TEST_INTEGRANDS = {
    "neg_product": _neg_product,  # -prod(1 - u_i): non-decreasing, max 0
    "product": _product,  # prod(u_i)
    "additive": _additive,  # sum(u_i): LHSD removes all variance
}


def integrand_by_name(name: str, dim: int) -> IntegrandBV:
    try:
        return TEST_INTEGRANDS[name](int(dim))
    except KeyError:
        raise ValueError(f"unknown test integrand {name!r}; known: {', '.join(TEST_INTEGRANDS)}") from None


# ----------------------------------------------------------------------
# covariance kernels


def brownian_sheet_cov(model: CopulaModel, u, v):
    """Covariance of the pinned C-Brownian sheet, ``C(u ^ v) - C(u) C(v)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return model.cdf(np.minimum(u, v)) - model.cdf(u) * model.cdf(v)


def _replace(u, j, col):
    out = np.array(u, dtype=float, copy=True)
    out[..., j] = col
    return out


def _bilinear_terms(model: CopulaModel, u, v, cu=None, cv=None, du=None, dv=None):
    # Pieces of E[G(u) G(v)] beyond the sheet covariance: the single-sum
    # cross terms (u side and v side) and the double-sum marginal term.
    d = model.dim
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    cu = model.cdf(u) if cu is None else cu
    cv = model.cdf(v) if cv is None else cv
    du = [model.partial_derivative(u, j) for j in range(d)] if du is None else du
    dv = [model.partial_derivative(v, j) for j in range(d)] if dv is None else dv
    cross_u = 0.0  # sum_j dC_j(v) E[B(u) B(e_j(v_j))]
    cross_v = 0.0  # sum_j dC_j(u) E[B(v) B(e_j(u_j))]
    double = 0.0
    for j in range(d):
        cross_u = cross_u + dv[j] * (model.cdf(_replace(u, j, np.minimum(u[..., j], v[..., j]))) - cu * v[..., j])
        cross_v = cross_v + du[j] * (model.cdf(_replace(v, j, np.minimum(u[..., j], v[..., j]))) - cv * u[..., j])
    for i in range(d):
        for j in range(d):
            margin = model.bivariate_margin(i, j, u[..., i], v[..., j])
            double = double + du[i] * dv[j] * (margin - u[..., i] * v[..., j])
    return cross_u, cross_v, double


def gc_cov(model: CopulaModel, u, v):
    """Covariance ``E[G_C(u) G_C(v)]`` of the limiting empirical-copula field.

    ``G_C(u) = B_C(u) - sum_j dC/du_j(u) B_C(1, .., u_j, .., 1)``; every
    cross moment is expressed through ``C``, its partials and its bivariate
    margins.
    """
    cross_u, cross_v, double = _bilinear_terms(model, u, v)
    return brownian_sheet_cov(model, u, v) - cross_u - cross_v + double


def _gap_kernel(model: CopulaModel, u, v, **pre):
    # Correction terms of sigma2_lhsd - sigma2_mc, written in the asymmetric
    # form 2 * sum_j dC_j(u) (C(v) u_j - C(v with v_j ^ u_j)) + double sum.
    d = model.dim
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    cv = pre.get("cv")
    cv = model.cdf(v) if cv is None else cv
    du = pre.get("du") or [model.partial_derivative(u, j) for j in range(d)]
    dv = pre.get("dv") or [model.partial_derivative(v, j) for j in range(d)]
    single = 0.0
    for j in range(d):
        single = single + du[j] * (cv * u[..., j] - model.cdf(_replace(v, j, np.minimum(v[..., j], u[..., j]))))
    double = 0.0
    for i in range(d):
        for j in range(d):
            margin = model.bivariate_margin(i, j, u[..., i], v[..., j])
            double = double + dv[j] * du[i] * (margin - u[..., i] * v[..., j])
    return 2.0 * single + double


# ----------------------------------------------------------------------
# quadrature


def _midpoints(g: int, k: int) -> np.ndarray:
    axis = (np.arange(g) + 0.5) / g
    if k == 0:
        return np.zeros((1, 0))
    return np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)


def _face_nodes(d: int, fixed, free, g: int):
    local = _midpoints(g, len(free))
    pts = np.ones((len(local), d))
    pts[:, list(free)] = local
    return pts, g ** (-len(free))


def _richardson(fn, g: int, tol: float):
    coarse = fn(g)
    fine = fn(2 * g)
    err = abs(fine - coarse)
    if err > tol:
        raise QuadratureError(f"midpoint rule at g={g} and g={2 * g} differ by {err:.3g} > {tol:g}")
    return (4.0 * fine - coarse) / 3.0


def _check_budget(points: int, budget: int):
    if points > budget:
        raise QuadratureError(f"quadrature needs {points} evaluations, budget is {budget}")


def expectation(model: CopulaModel, f, resolution: int = 64, *, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET):
    """``E f(U)`` for ``U ~ C`` by tensor midpoint quadrature against the density."""
    d = model.dim
    _check_budget((2 * resolution) ** d, budget)

    def at(g):
        pts = _midpoints(g, d)
        w = model.density(pts) * g ** (-d)
        return float(np.sum(np.asarray(f(pts), dtype=float) * w))

    return _richardson(at, resolution, tol)


def sigma2_mc(model: CopulaModel, f, resolution: int = 64, *, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET):
    """Variance of ``f(U)`` for ``U ~ C``: ``int f^2 dC - (int f dC)^2``."""
    if isinstance(f, IntegrandBV):
        f = f.f
    d = model.dim
    _check_budget((2 * resolution) ** d, budget)

    def at(g):
        pts = _midpoints(g, d)
        w = model.density(pts) * g ** (-d)
        vals = np.asarray(f(pts), dtype=float)
        mean = np.sum(vals * w)
        return float(np.sum(vals * vals * w) - mean * mean)

    return _richardson(at, resolution, tol)


def _double_integral(model: CopulaModel, integrand: IntegrandBV, kernel, resolution: int, tol: float, budget: int):
    if integrand.dim != model.dim:
        raise ValueError(f"integrand has dim {integrand.dim}, copula has dim {model.dim}")
    d = model.dim
    faces = integrand.faces()
    cost = sum((2 * resolution) ** (len(a[1]) + len(b[1])) for a in faces for b in faces)
    _check_budget(cost, budget)

    def at(g):
        nodes = []
        for fixed, free, dens in faces:
            pts, h = _face_nodes(d, fixed, free, g)
            w = dens(pts) * h
            keep = w != 0.0
            if np.any(keep):
                pts = pts[keep]
                nodes.append(
                    (
                        pts,
                        w[keep],
                        model.cdf(pts),
                        [model.partial_derivative(pts, j) for j in range(d)],
                    )
                )
        total = 0.0
        for pu, wu, cu, du in nodes:
            for pv, wv, cv, dv in nodes:
                rows = max(1, _CHUNK // max(len(pv), 1))
                for s in range(0, len(pu), rows):
                    sl = slice(s, s + rows)
                    k = kernel(
                        pu[sl, None, :],
                        pv[None, :, :],
                        cu=cu[sl, None],
                        cv=cv[None, :],
                        du=[x[sl, None] for x in du],
                        dv=[x[None, :] for x in dv],
                    )
                    total += float(wu[sl] @ k @ wv)
        return total

    return _richardson(at, resolution, tol)


def _gc_kernel(model):
    def kernel(u, v, cu, cv, du, dv):
        sheet = model.cdf(np.minimum(u, v)) - cu * cv
        cross_u, cross_v, double = _bilinear_terms(model, u, v, cu, cv, du, dv)
        return sheet - cross_u - cross_v + double

    return kernel


def sigma2_lhsd(
    model: CopulaModel,
    integrand: IntegrandBV,
    resolution: int = 32,
    *,
    tol: float = DEFAULT_TOL,
    budget: int = DEFAULT_BUDGET,
):
    """Asymptotic variance of the LHSD estimator, ``int int E[G_C(u) G_C(v)] df_hat df_hat``.

    The integral is ``2d``-dimensional; ``budget`` bounds the number of
    kernel evaluations, which in practice limits this to ``d <= 2``.
    """
    return _double_integral(model, integrand, _gc_kernel(model), resolution, tol, budget)


def variance_gap(
    model: CopulaModel,
    integrand: IntegrandBV,
    resolution: int = 32,
    *,
    tol: float = DEFAULT_TOL,
    budget: int = DEFAULT_BUDGET,
):
    """``sigma2_lhsd - sigma2_mc`` evaluated directly from the correction terms.

    Nonpositive whenever the copula satisfies both variance-reduction
    conditions and ``f`` is non-decreasing in each argument with ``max f <= 0``.
    """

    def kernel(u, v, cu, cv, du, dv):
        return _gap_kernel(model, u, v, cv=cv, du=du, dv=dv)

    return _double_integral(model, integrand, kernel, resolution, tol, budget)


def sheet_moment(model: CopulaModel, integrand: IntegrandBV, resolution: int = 32, **kw):
    """``int int (C(u ^ v) - C(u) C(v)) df_hat df_hat``; equals ``sigma2_mc`` after integration by parts."""

    def kernel(u, v, cu, cv, du, dv):
        return model.cdf(np.minimum(u, v)) - cu * cv

    return _double_integral(
        model, integrand, kernel, resolution, kw.get("tol", DEFAULT_TOL), kw.get("budget", DEFAULT_BUDGET)
    )


def limit_variances(model: CopulaModel, integrand: IntegrandBV, resolution: int = 32, mc_resolution: int = 64):
    """``(sigma2_mc, sigma2_lhsd, variance_gap)`` for one copula and integrand."""
    s_mc = sigma2_mc(model, integrand.f, mc_resolution)
    s_lh = sigma2_lhsd(model, integrand, resolution)
    gap = variance_gap(model, integrand, resolution)
    return s_mc, s_lh, gap

