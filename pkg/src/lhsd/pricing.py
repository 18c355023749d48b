"""Asian and discrete lookback basket calls priced by MC and LHSD.

The replication harness runs ``m_reps`` independent estimators per method,
each on its own child random stream, and summarises them the way the
comparison tables do: mean price, standard deviation over replications, and
the MC/LHSD standard deviation and variance ratios.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import EtaPolicy
from .replication import replicate
from .vg import BasketModel, DriftConvention, Method, asset_paths, simulate_increments

__all__ = [
    "OptionKind",
    "OptionSpec",
    "EstimatorReport",
    "ExperimentResult",
    "payoff",
    "price_option",
    "run_experiment",
    "run_sweep",
    "CSV_COLUMNS",
    "write_csv",
]

CSV_COLUMNS = ("alpha", "K", "price_lhsd", "price_mc", "std_lhsd", "std_mc", "std_ratio", "var_ratio")

# child streams are keyed by method so that adding a method never shifts another's draws
_METHOD_KEY = {Method.MC: 0, Method.LHSD: 1}


class OptionKind(str, enum.Enum):
    ASIAN = "asian"
    LOOKBACK = "lookback"

    @classmethod
    def parse(cls, value) -> "OptionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"asianbasketcall": "asian", "abc": "asian", "lookbackbasketcall": "lookback", "dlc": "lookback"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown option kind {value!r}; expected 'asian' or 'lookback'") from None


@dataclass(frozen=True)
class OptionSpec:
    kind: OptionKind
    strike: float
    rate: float
    maturity: float

    def __post_init__(self):
        object.__setattr__(self, "kind", OptionKind.parse(self.kind))
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")


def _basket_average(prices: np.ndarray) -> np.ndarray:
    return prices.mean(axis=-1)


def _underlying(kind: OptionKind, prices: np.ndarray) -> np.ndarray:
    avg = _basket_average(prices)
    return avg.mean(axis=-1) if kind is OptionKind.ASIAN else avg.max(axis=-1)


def payoff(spec: OptionSpec, path_prices) -> np.ndarray | float:
    """Undiscounted payoff for prices of shape ``(..., m, d)``.

    Asian: ``(mean over dates of the basket average - K)^+``.
    Lookback: ``(max over dates of the basket average - K)^+``.
    """
    prices = np.asarray(path_prices, dtype=float)
    if prices.ndim < 2:
        raise ValueError("path prices need shape (..., m, d)")
    out = np.maximum(_underlying(spec.kind, prices) - spec.strike, 0.0)
    return float(out) if out.ndim == 0 else out


def _simulate_prices(basket, rate, n, method, rng, eta_policy, drift_convention):
    inc = simulate_increments(basket, n, method, rng, eta_policy)
    return asset_paths(basket, inc, rate, drift_convention)


def price_option(
    basket: BasketModel,
    spec: OptionSpec,
    method,
    n: int,
    rng: np.random.Generator,
    *,
    eta_policy=EtaPolicy.HALF,
    drift_convention=DriftConvention.RISK_NEUTRAL,
) -> float:
    """One estimator: ``exp(-r T)`` times the mean payoff over ``n`` paths."""
    prices = _simulate_prices(basket, spec.rate, n, method, rng, eta_policy, drift_convention)
    return math.exp(-spec.rate * spec.maturity) * float(np.mean(payoff(spec, prices)))


@dataclass
class EstimatorReport:
    method: Method
    price_mean: float
    price_std: float
    n: int
    m_reps: int
    estimates: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_estimates(cls, method, estimates, n) -> "EstimatorReport":
        est = np.asarray(estimates, dtype=float)
        std = float(np.std(est, ddof=1)) if len(est) > 1 else 0.0
        return cls(Method.parse(method), float(np.mean(est)), std, int(n), len(est), est)

    @property
    def standard_error(self) -> float:
        return self.price_std / math.sqrt(self.m_reps)


@dataclass
class ExperimentResult:
    spec: OptionSpec
    reports: dict

    @property
    def std_ratio(self) -> float:
        """MC standard deviation over LHSD standard deviation."""
        mc, lh = self.reports[Method.MC].price_std, self.reports[Method.LHSD].price_std
        return mc / lh if lh > 0 else math.inf

    @property
    def var_ratio(self) -> float:
        return self.std_ratio**2

    def row(self, alpha: float) -> dict:
        mc, lh = self.reports[Method.MC], self.reports[Method.LHSD]
        return {
            "alpha": alpha,
            "K": self.spec.strike,
            "price_lhsd": lh.price_mean,
            "price_mc": mc.price_mean,
            "std_lhsd": lh.price_std,
            "std_mc": mc.price_std,
            "std_ratio": self.std_ratio,
            "var_ratio": self.var_ratio,
        }


def run_sweep(
    basket: BasketModel,
    specs: Sequence[OptionSpec],
    n: int,
    m_reps: int,
    *,
    methods: Iterable = (Method.MC, Method.LHSD),
    master_seed: int = 0,
    eta_policy=EtaPolicy.HALF,
    drift_convention=DriftConvention.RISK_NEUTRAL,
    threads: int = 1,
) -> list[ExperimentResult]:
    """Price several options on shared paths.

    Every replication simulates one set of paths and evaluates all ``specs``
    on it, so the result for each spec is identical to a separate
    :func:`run_experiment` call with the same seed. All specs must share the
    rate and maturity.
    """
    specs = list(specs)
    if n < 1 or m_reps < 1:
        raise ValueError("n and m_reps must be >= 1")
    if not specs:
        return []
    rates = {(s.rate, s.maturity) for s in specs}
    if len(rates) != 1:
        raise ValueError("all specs in a sweep need the same rate and maturity")
    rate, maturity = rates.pop()
    discount = math.exp(-rate * maturity)

    def one(method):
        def run(rng):
            prices = _simulate_prices(basket, rate, n, method, rng, eta_policy, drift_convention)
            under = {kind: _underlying(kind, prices) for kind in {s.kind for s in specs}}
            return [discount * float(np.mean(np.maximum(under[s.kind] - s.strike, 0.0))) for s in specs]

        return run

    per_method = {}
    for method in (Method.parse(x) for x in methods):
        per_method[method] = np.array(
            replicate(one(method), m_reps, master_seed, key=(_METHOD_KEY[method],), threads=threads)
        )
    return [
        ExperimentResult(
            spec, {meth: EstimatorReport.from_estimates(meth, est[:, i], n) for meth, est in per_method.items()}
        )
        for i, spec in enumerate(specs)
    ]


def run_experiment(
    basket: BasketModel,
    spec: OptionSpec,
    n: int,
    m_reps: int,
    *,
    methods: Iterable = (Method.MC, Method.LHSD),
    master_seed: int = 0,
    eta_policy=EtaPolicy.HALF,
    drift_convention=DriftConvention.RISK_NEUTRAL,
    threads: int = 1,
) -> ExperimentResult:
    """``m_reps`` independent estimators per method for a single option."""
    return run_sweep(
        basket,
        [spec],
        n,
        m_reps,
        methods=methods,
        master_seed=master_seed,
        eta_policy=eta_policy,
        drift_convention=drift_convention,
        threads=threads,
    )[0]


def write_csv(rows: Iterable[dict], header_lines: Iterable[str] = ()) -> str:
    """CSV text with ``#``-prefixed metadata lines followed by the table."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()

