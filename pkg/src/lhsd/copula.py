"""Parametric copula families used for dependent uniform inputs.

Three families are provided, all exchangeable and defined for any dimension
``d``:

* independence, ``C(u) = prod(u)``
* the one-parameter multivariate Farlie-Gumbel-Morgenstern (FGM) extension,
  ``C(u) = prod(u) * (1 + alpha * prod(1 - u))``
* the multivariate Ali-Mikhail-Haq (AMH) form,
  ``C(u) = prod(u) / (1 - alpha * prod(1 - u))``

Besides evaluation, each model exposes its first partial derivatives and its
density in closed form, an exact rejection sampler, and a grid check of the
two sufficient conditions under which Latin hypercube sampling with
dependence does not increase the asymptotic variance.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import NumericalGuardError

__all__ = [
    "Family",
    "CopulaModel",
    "ConditionReport",
    "check_conditions",
]

#: Evaluations allowed by :func:`check_conditions` before it refuses to run.
DEFAULT_CHECK_BUDGET = 5_000_000

_DENSITY_GRID_BUDGET = 200_000
_ENVELOPE_SAFETY = 1.5


class Family(str, enum.Enum):
    INDEPENDENCE = "independence"
    FGM = "fgm"
    AMH = "amh"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown copula family {value!r}; expected one of {names}") from None


def _eulerian(j: int) -> np.ndarray:
    # Coefficients (ascending powers) of A_j with sum_{k>=1} k^j z^(k-1) = A_j(z) / (1-z)^(j+1).
    if j == 0:
        return np.array([1.0])
    return np.array(
        [sum((-1) ** i * comb(j + 1, i) * (m + 1 - i) ** j for i in range(m + 1)) for m in range(j)],
        dtype=float,
    )


def _elementary_symmetric(x: np.ndarray) -> list[np.ndarray]:
    d = x.shape[-1]
    e = [np.ones(x.shape[:-1])] + [np.zeros(x.shape[:-1]) for _ in range(d)]
    for i in range(d):
        for s in range(i + 1, 0, -1):
            e[s] = e[s] + e[s - 1] * x[..., i]
    return e


@dataclass(frozen=True)
class CopulaModel:
    """A d-dimensional copula from one of the supported families.

    Parameters
    ----------
    family : Family or str
        ``"independence"``, ``"fgm"`` or ``"amh"``.
    alpha : float
        Dependence parameter in ``[-1, 1]``; ignored for independence.
    dim : int
        Dimension ``d``. FGM and AMH need ``d >= 2`` (for ``d = 1`` their
        formulas do not have a uniform marginal).

    All evaluation methods take points with a trailing axis of length ``dim``
    and broadcast over leading axes. Instances are immutable.
    """

    family: Family
    alpha: float = 0.0
    dim: int = 2
    _envelope: float = field(init=False, repr=False, compare=False, default=1.0)

    def __post_init__(self):
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        alpha = float(self.alpha)
        if family is Family.INDEPENDENCE:
            alpha = 0.0
        else:
            if not -1.0 <= alpha <= 1.0:
                raise ValueError(f"alpha must lie in [-1, 1] for {family.value}, got {alpha}")
            if self.dim < 2:
                raise ValueError(f"{family.value} copula needs dim >= 2")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "_envelope", self._density_envelope())

    # ------------------------------------------------------------------
    # evaluation

    def _points(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 0 or u.shape[-1] != self.dim:
            raise ValueError(f"expected points with trailing dimension {self.dim}, got shape {u.shape}")
        return u

    def cdf(self, u):
        """Copula distribution function ``C(u)``."""
        u = self._points(u)
        p = np.prod(u, axis=-1)
        if self.family is Family.INDEPENDENCE or self.alpha == 0.0:
            return p
        q = np.prod(1.0 - u, axis=-1)
        if self.family is Family.FGM:
            return p * (1.0 + self.alpha * q)
        return p / (1.0 - self.alpha * q)

    def partial_derivative(self, u, j: int):
        """Analytic partial derivative ``dC/du_j`` (``j`` is zero-based)."""
        u = self._points(u)
        if not 0 <= j < self.dim:
            raise IndexError(f"dimension index {j} out of range for dim={self.dim}")
        others = np.delete(u, j, axis=-1)
        p_minus = np.prod(others, axis=-1)
        if self.family is Family.INDEPENDENCE or self.alpha == 0.0:
            return p_minus
        a = self.alpha
        p = p_minus * u[..., j]
        q_minus = np.prod(1.0 - others, axis=-1)
        q = q_minus * (1.0 - u[..., j])
        if self.family is Family.FGM:
            return p_minus * (1.0 + a * q) - a * p * q_minus
        denom = 1.0 - a * q
        return p_minus / denom - a * p * q_minus / denom**2

    def density(self, u):
        """Mixed partial derivative ``d^d C / du_1 ... du_d``."""
        u = self._points(u)
        if self.family is Family.INDEPENDENCE or self.alpha == 0.0:
            return np.ones(u.shape[:-1])
        a = self.alpha
        if self.family is Family.FGM:
            return 1.0 + a * np.prod(1.0 - 2.0 * u, axis=-1)
        return self._amh_density(u)

    def _amh_density(self, u: np.ndarray):
        # Expanding 1/(1 - a*Q) as a geometric series and differentiating term
        # by term gives sum_k a^k Q^(k-1) prod_i((k+1) x_i - k), x = 1 - u.
        # The k-sums are closed-form through Eulerian polynomials.
        d = self.dim
        a = self.alpha
        x = 1.0 - u
        z = a * np.prod(x, axis=-1)
        e = _elementary_symmetric(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            series = [
                np.polynomial.polynomial.polyval(z, _eulerian(j)) / (1.0 - z) ** (j + 1)
                for j in range(d + 1)
            ]
            total = np.zeros_like(z)
            for s in range(d + 1):
                inner = sum(comb(s, t) * series[t + d - s] for t in range(s + 1))
                total = total + (-1) ** (d - s) * e[s] * inner
        return 1.0 + a * total

    def bivariate_margin(self, i: int, j: int, a, b):
        """``C_{i,j}(a, b)``: ``C`` with ``a`` in slot ``i``, ``b`` in slot ``j``, ones elsewhere.

        For ``i == j`` this is ``min(a, b)``.
        """
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        if i == j:
            return np.minimum(a, b)
        pt = np.ones(a.shape + (self.dim,))
        pt[..., i] = a
        pt[..., j] = b
        return self.cdf(pt)

    # ------------------------------------------------------------------
    # sampling

    def _density_envelope(self) -> float:
        if self.family is Family.INDEPENDENCE or self.alpha == 0.0:
            return 1.0
        if self.family is Family.FGM:
            return 1.0 + abs(self.alpha)
        if self.alpha >= 1.0:
            # density is unbounded at the origin; no uniform envelope exists
            return np.inf
        per_dim = max(2, int(_DENSITY_GRID_BUDGET ** (1.0 / self.dim)))
        grid = np.linspace(0.0, 1.0, per_dim)
        if per_dim ** self.dim <= _DENSITY_GRID_BUDGET:
            pts = np.stack(np.meshgrid(*([grid] * self.dim), indexing="ij"), axis=-1).reshape(-1, self.dim)
        else:
            pts = np.stack([np.zeros(self.dim), np.ones(self.dim)])
        diag = np.repeat(grid[:, None], self.dim, axis=1)
        pts = np.vstack([pts, diag])
        vals = self.density(pts)
        if np.min(vals) < -1e-9:
            raise ValueError(
                f"AMH form with alpha={self.alpha}, dim={self.dim} has negative density "
                f"({np.min(vals):.3g}); not a valid copula"
            )
        return float(np.max(vals)) * _ENVELOPE_SAFETY

    @property
    def can_sample(self) -> bool:
        """False when the density has no finite bound (AMH with ``alpha = 1``)."""
        return bool(np.isfinite(self._envelope))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` i.i.d. points from the copula.

        Uses rejection from the uniform distribution on the unit cube with a
        constant envelope on the density.
        """
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        if self._envelope == 1.0:
            return rng.random((n, self.dim))
        if not np.isfinite(self._envelope):
            raise ValueError(f"no bounded rejection envelope for {self.family.value} with alpha={self.alpha}")
        accept_rate = 1.0 / self._envelope
        out = []
        have = 0
        while have < n:
            batch = int((n - have) / accept_rate * 1.1) + 16
            cand = rng.random((batch, self.dim))
            dens = self.density(cand)
            if np.any(dens > self._envelope):
                raise NumericalGuardError("copula density exceeded the rejection envelope")
            keep = cand[rng.random(batch) * self._envelope <= dens]
            out.append(keep)
            have += len(keep)
        return np.concatenate(out)[:n]


@dataclass
class ConditionReport:
    """Outcome of a grid check of the variance-reduction conditions.

    ``worst_violation`` is the most negative slack among violating points and
    is ``0.0`` when neither condition is violated; ``witness`` then describes
    the point of smallest slack instead of a violation. ``witnesses`` maps
    each condition number to the grid point of its own smallest slack.
    """

    condition13_holds: bool
    condition14_holds: bool
    grid_resolution: int
    worst_violation: float
    witness: dict | None
    min_slack13: float = float("nan")
    min_slack14: float = float("nan")
    witnesses: dict = field(default_factory=dict)

    def violation_witness(self, condition: int) -> dict | None:
        """Point of smallest slack for ``condition`` if it is violated, else ``None``."""
        holds = {13: self.condition13_holds, 14: self.condition14_holds}[condition]
        return None if holds else self.witnesses.get(condition)

    @property
    def holds(self) -> bool:
        return self.condition13_holds and self.condition14_holds

    def render(self) -> str:
        lines = [
            f"grid_resolution: {self.grid_resolution}",
            f"condition13_holds: {str(self.condition13_holds).lower()}",
            f"condition14_holds: {str(self.condition14_holds).lower()}",
            f"min_slack13: {self.min_slack13:.6g}",
            f"min_slack14: {self.min_slack14:.6g}",
            f"worst_violation: {self.worst_violation:.6g}",
        ]
        if self.witness is not None:
            lines.append(f"witness: {_format_witness(self.witness)}")
        for cond in (13, 14):
            w = self.violation_witness(cond)
            if w is not None:
                lines.append(f"violation{cond}: {_format_witness(w)}")
        return "\n".join(lines)


def _format_witness(w: dict) -> str:
    return ", ".join(
        f"{k}={tuple(round(float(t), 6) for t in v) if isinstance(v, tuple) else v}" for k, v in w.items()
    )


def _interior_grid(g: int, d: int) -> np.ndarray:
    axis = np.arange(1, g + 1) / (g + 1)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)


def check_conditions(
    model: CopulaModel, grid_resolution: int, *, budget: int = DEFAULT_CHECK_BUDGET, tol: float = 1e-10
) -> ConditionReport:
    """Check both sufficient variance-reduction conditions on a finite grid.

    Condition 13 is ``C(u) / u_j >= dC/du_j(u)`` for every ``j``; condition 14
    is ``sum_{i != j} C_{i,j}(u_j, w_i) / w_i <= (d - 2) u_j + C(w with w_j
    replaced by min(w_j, u_j)) / C(w)`` for every ``j``. Both are evaluated
    on the interior points ``{1/(g+1), ..., g/(g+1)}`` in each coordinate;
    boundary points are excluded because both sides divide by coordinates.

    A slack below ``-tol`` counts as a violation.
    """
    g = int(grid_resolution)
    if g < 2:
        raise ValueError("grid_resolution must be >= 2")
    d = model.dim
    cost = d * g ** (d + 1)
    if cost > budget:
        raise NumericalGuardError(f"grid {g}^{d + 1} x {d} = {cost} evaluations exceeds budget {budget}")

    pts = _interior_grid(g, d)
    axis = np.arange(1, g + 1) / (g + 1)
    c_pts = model.cdf(pts)

    min13, arg13 = np.inf, None
    for j in range(d):
        slack = c_pts / pts[:, j] - model.partial_derivative(pts, j)
        k = int(np.argmin(slack))
        if slack[k] < min13:
            min13, arg13 = float(slack[k]), {"condition": 13, "j": j + 1, "u": tuple(pts[k])}

    min14, arg14 = np.inf, None
    for j in range(d):
        for uj in axis:
            lhs = np.zeros(len(pts))
            for i in range(d):
                if i != j:
                    lhs += model.bivariate_margin(i, j, pts[:, i], uj) / pts[:, i]
            clipped = pts.copy()
            clipped[:, j] = np.minimum(clipped[:, j], uj)
            rhs = (d - 2) * uj + model.cdf(clipped) / c_pts
            slack = rhs - lhs
            k = int(np.argmin(slack))
            if slack[k] < min14:
                min14 = float(slack[k])
                arg14 = {"condition": 14, "j": j + 1, "u_j": float(uj), "u_bar": tuple(pts[k])}

    holds13 = min13 >= -tol
    holds14 = min14 >= -tol
    violations = [(s, w) for s, w, ok in ((min13, arg13, holds13), (min14, arg14, holds14)) if not ok]
    if violations:
        worst, witness = min(violations, key=lambda t: t[0])
    else:
        worst = 0.0
        witness = arg13 if min13 <= min14 else arg14
    return ConditionReport(
        condition13_holds=holds13,
        condition14_holds=holds14,
        grid_resolution=g,
        worst_violation=float(worst),
        witness=witness,
        min_slack13=min13,
        min_slack14=min14,
        witnesses={13: arg13, 14: arg14},
    )
