"""Acceptance criteria, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line (collected again in the
terminal summary) and then asserts. Criteria 1-3 share one reproduction run
of the bundled table configs at full size: d = 10 assets, n = 8000 paths,
m = 100 replications, with the master seed stored in the config.
"""
import math
import time

import numpy as np
import pytest
from conftest import record_criterion
from scipy import stats

from lhsd.asymptotics import integrand_by_name, sigma2_lhsd, sigma2_mc, variance_gap
from lhsd.config import load_config
from lhsd.copula import CopulaModel, check_conditions
from lhsd.core import empirical_copulas, lhsd_estimate, lhsd_transform, rank_statistics
from lhsd.pricing import OptionSpec, run_sweep
from lhsd.replication import child_rng
from lhsd.vg import BasketModel, Method, VgAsset, asset_paths, simulate_increments

# published rows: K -> (price LHSD, price MC, std LHSD, std MC, std ratio)
ASIAN = {
    80: (22.0542, 22.0448, 0.00071, 0.00748, 10.419),
    90: (12.5511, 12.5419, 0.00080, 0.00748, 9.270),
    100: (3.79294, 3.78732, 0.00241, 0.00621, 2.577),
    110: (0.17227, 0.17210, 0.00119, 0.00140, 1.174),
    120: (0.00024, 0.00024, 0.000040, 0.000041, 1.009),
}
LOOKBACK = {
    80: (25.662, 25.658, 0.00294, 0.00839, 2.850),
    90: (16.151, 16.147, 0.00294, 0.00839, 2.850),
    100: (6.893, 6.890, 0.00322, 0.00760, 2.356),
    110: (1.192, 1.192, 0.00305, 0.00406, 1.332),
    120: (0.060, 0.060, 0.00086, 0.00089, 1.029),
}
PUBLISHED_REPS = 100
# relative slack when comparing ratios that are equal up to round-off
RATIO_TIE = 1e-9


@pytest.fixture(scope="session")
def reproduction():
    asian_cfg = load_config("table2_asian")
    lookback_cfg = load_config("table3_lookback")
    assert asian_cfg.basket() == lookback_cfg.basket()
    assert asian_cfg.master_seed == lookback_cfg.master_seed
    specs = asian_cfg.option_specs() + lookback_cfg.option_specs()
    started = time.perf_counter()
    results = run_sweep(
        asian_cfg.basket(),
        specs,
        asian_cfg.n,
        asian_cfg.m_reps,
        master_seed=asian_cfg.master_seed,
        eta_policy=asian_cfg.eta_policy,
        drift_convention=asian_cfg.drift_convention,
    )
    print(f"reproduction run: {time.perf_counter() - started:.0f}s")
    k = len(asian_cfg.strikes)
    return {"asian": results[:k], "lookback": results[k:], "m_reps": asian_cfg.m_reps}


def _table_lines(results, table):
    lines = []
    for res in results:
        lh, mc = res.reports[Method.LHSD], res.reports[Method.MC]
        ref = table[int(res.spec.strike)]
        lines.append(
            f"K={res.spec.strike:g} lhsd {lh.price_mean:.5f} ({ref[0]}) mc {mc.price_mean:.5f} ({ref[1]}) "
            f"std {lh.price_std:.5f}/{mc.price_std:.5f} ({ref[2]}/{ref[3]}) ratio {res.std_ratio:.3f} ({ref[4]})"
        )
    return lines


def _price_checks(results, table, m_reps):
    failures = []
    for res in results:
        ref = table[int(res.spec.strike)]
        for method, price_ref, std_ref in ((Method.LHSD, ref[0], ref[2]), (Method.MC, ref[1], ref[3])):
            rep = res.reports[method]
            se = math.sqrt(rep.price_std**2 / m_reps + std_ref**2 / PUBLISHED_REPS)
            dev = abs(rep.price_mean - price_ref)
            if dev > 3 * se:
                failures.append(f"K={res.spec.strike:g} {method.value} off by {dev:.5f} > 3SE={3 * se:.5f}")
    return failures


@pytest.mark.slow
def test_criterion_1_asian_table(reproduction):
    results = reproduction["asian"]
    print("\n".join(_table_lines(results, ASIAN)))
    failures = _price_checks(results, ASIAN, reproduction["m_reps"])
    record_criterion(1, "Asian table prices within 3 combined SE", not failures, "; ".join(failures))
    assert not failures


@pytest.mark.slow
def test_criterion_2_lookback_table(reproduction):
    results = reproduction["lookback"]
    print("\n".join(_table_lines(results, LOOKBACK)))
    failures = _price_checks(results, LOOKBACK, reproduction["m_reps"])
    ratio = results[0].std_ratio
    if not abs(ratio / LOOKBACK[80][4] - 1) <= 0.30:
        failures.append(f"K=80 std ratio {ratio:.3f} outside 2.850 +- 30%")
    record_criterion(
        2, "lookback table prices within 3 combined SE, K=80 ratio near 2.850", not failures,
        "; ".join(failures) or f"K=80 ratio {ratio:.3f}",
    )  # fmt: skip
    assert not failures


@pytest.mark.slow
def test_criterion_3_qualitative_claims(reproduction):
    failures = []
    for kind in ("asian", "lookback"):
        results = reproduction[kind]
        for res in results:
            lh, mc = res.reports[Method.LHSD].price_std, res.reports[Method.MC].price_std
            if not lh <= mc:
                failures.append(f"{kind} K={res.spec.strike:g}: LHSD std {lh:.3g} > MC std {mc:.3g}")
        ratios = [r.std_ratio for r in results]
        for res, a, b in zip(results[1:], ratios, ratios[1:]):
            if b > a * (1 + RATIO_TIE):
                failures.append(f"{kind} ratio rises to {b:.3f} at K={res.spec.strike:g} (from {a:.3f})")
        print(f"{kind} std ratios: " + ", ".join(f"{r:.3f}" for r in ratios))
    record_criterion(3, "LHSD std <= MC std and std ratio non-increasing in K", not failures, "; ".join(failures))
    assert not failures


def test_criterion_4_independence_witness():
    model = CopulaModel("independence", dim=2)
    integrand = integrand_by_name("neg_product", 2)
    s_mc = sigma2_mc(model, integrand)
    s_lh = sigma2_lhsd(model, integrand)
    gap = variance_gap(model, integrand)
    ok = gap <= 0 and abs(s_lh - s_mc - gap) < 1e-4 and abs(s_mc - 7 / 144) < 1e-6
    record_criterion(
        4, "variance gap <= 0, dual quadrature agreement, sigma2_mc = 7/144", ok,
        f"sigma2_mc {s_mc:.8f}, sigma2_lhsd {s_lh:.8f}, gap {gap:.8f}, mismatch {s_lh - s_mc - gap:.2e}",
    )  # fmt: skip
    assert ok


def test_criterion_5_clt():
    model = CopulaModel("fgm", 0.5, 2)
    integrand = integrand_by_name("neg_product", 2)
    n, m = 512, 500
    est = np.array([lhsd_estimate(model.sample(n, child_rng(2024, i)), integrand.f) for i in range(m)])
    z = (est - est.mean()) / est.std(ddof=1)
    (_, _), (_, _, r) = stats.probplot(z, dist="norm")
    s_lh = sigma2_lhsd(model, integrand)
    rel = n * est.var(ddof=1) / s_lh - 1
    ok = r >= 0.99 and abs(rel) <= 0.15
    record_criterion(5, "LHSD CLT: QQ correlation >= 0.99, n Var within 15%", ok, f"r={r:.4f}, n Var off by {rel:+.1%}")
    assert ok


def test_criterion_6_empirical_copula_bound():
    worst = []
    ok = True
    for d, n in ((2, 10), (2, 100), (3, 50)):
        probe = np.stack(np.meshgrid(*([np.linspace(0, 1, 50)] * d), indexing="ij"), axis=-1).reshape(-1, d)
        gap = 0
        for s in range(20):
            raw = child_rng(66, d, n, s).random((n, d))
            c, ct = empirical_copulas(raw, probe)
            gap = max(gap, int(np.max(np.rint(n * np.abs(c - ct)))))
        ok &= gap <= d
        worst.append(f"(d={d},n={n}) max {gap}/{n}")
    record_criterion(6, "sup |C_tilde_n - C_n| <= d/n", ok, ", ".join(worst))
    assert ok


def test_criterion_7_condition_certification():
    cases = [("fgm", a, True) for a in (0.0, 0.25, 0.5, 1.0)] + [("amh", a, True) for a in (0.0, 0.5, 1.0)]
    failures = []
    for fam, alpha, expected in cases:
        if check_conditions(CopulaModel(fam, alpha, 3), 9).holds != expected:
            failures.append(f"{fam} {alpha}")
    neg = check_conditions(CopulaModel("fgm", -0.5, 3), 9)
    w13 = neg.violation_witness(13)
    if w13 is None or w13["condition"] != 13 or neg.min_slack13 >= 0:
        failures.append("fgm -0.5 has no condition-13 witness")
    record_criterion(7, "condition certification at d=3, g=9", not failures, "; ".join(failures) or f"fgm -0.5 condition-13 witness {w13}")
    assert not failures


def test_criterion_8_sampler_oracles():
    asset = VgAsset(-0.2859, 0.1927, 0.2505)
    cop = CopulaModel("fgm", 0.5, 2)
    r, t = 0.05, 1.0
    notes, ok = [], True
    # increment moments over one quarter
    b = BasketModel.identical(asset, 2, cop, cop, 0.5, 2)
    inc = simulate_increments(b, 100_000, "mc", child_rng(88, 0))
    for s, (mu, nu) in enumerate(((asset.mu_plus, asset.nu_plus), (asset.mu_minus, asset.nu_minus))):
        col = inc[:, 0, 0, s]
        z = (col.mean() - mu * 0.25) / (col.std(ddof=1) / math.sqrt(len(col)))
        var_rel = col.var(ddof=1) / (nu * 0.25) - 1
        ok &= abs(z) < 3 and abs(var_rel) < 0.10
        notes.append(f"{'+-'[s]} mean z={z:+.2f} var {var_rel:+.1%}")
    # martingale check at 10^6 paths
    b = BasketModel.identical(asset, 2, cop, cop, t, 1)
    vals = []
    for chunk in range(10):
        s_t = asset_paths(b, simulate_increments(b, 100_000, "mc", child_rng(88, 1, chunk)), r, "risk_neutral")
        vals.append(math.exp(-r * t) * s_t[:, -1, :].mean(axis=1) / 100.0)
    vals = np.concatenate(vals)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    z = (vals.mean() - 1.0) / se
    ok &= abs(z) < 3
    notes.append(f"martingale mean {vals.mean():.5f} (z={z:+.2f})")
    record_criterion(8, "gamma increment moments and discounted martingale", bool(ok), ", ".join(notes))
    assert ok


def test_criterion_9_property_suite():
    rng = np.random.default_rng(99)
    failures = []
    # stratification and rank invariance
    for n, d in ((1, 3), (7, 2), (250, 4)):
        raw = rng.random((n, d))
        v = lhsd_transform(raw)
        if not all(sorted(np.floor(n * v[:, j]).astype(int)) == list(range(n)) for j in range(d)):
            failures.append(f"stratification n={n}")
        if not np.array_equal(v, (2 * rank_statistics(raw) - 1) / (2 * n)):
            failures.append(f"midpoints n={n}")
        mapped = np.column_stack([np.exp(raw[:, 0])] + [raw[:, j] ** 3 for j in range(1, d)])
        if not np.array_equal(v, lhsd_transform(mapped)):
            failures.append(f"rank invariance n={n}")
    # copula invariants
    t = np.linspace(0, 1, 101)
    for fam, alpha in (("independence", 0.0), ("fgm", -1.0), ("fgm", 0.5), ("fgm", 1.0), ("amh", -1.0), ("amh", 0.5), ("amh", 1.0)):
        for d in (2, 3, 4):
            m = CopulaModel(fam, alpha, d)
            for j in range(d):
                pts = np.ones((101, d))
                pts[:, j] = t
                if np.max(np.abs(m.cdf(pts) - t)) >= 1e-12:
                    failures.append(f"marginal {fam} {alpha} d={d}")
            axis = np.clip(np.arange(9) / 8 + rng.uniform(0, 1 / 9), 0, 1)
            grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
            c = m.cdf(grid)
            if np.any(c < np.maximum(0, grid.sum(1) - d + 1) - 1e-14) or np.any(c > grid.min(1) + 1e-14):
                failures.append(f"Frechet {fam} {alpha} d={d}")
            zeroed = grid.copy()
            zeroed[:, -1] = 0
            if np.any(m.cdf(zeroed) != 0):
                failures.append(f"grounded {fam} {alpha} d={d}")
            u = 0.01 + 0.98 * rng.random((1000, d))
            for j in range(d):
                up, dn = u.copy(), u.copy()
                up[:, j] += 1e-6
                dn[:, j] -= 1e-6
                fd = (m.cdf(up) - m.cdf(dn)) / 2e-6
                if np.max(np.abs(m.partial_derivative(u, j) - fd)) >= 1e-6:
                    failures.append(f"partial {fam} {alpha} d={d} j={j}")
    record_criterion(9, "property suite (stratification, ranks, copula invariants, partials)", not failures, "; ".join(failures[:5]))
    assert not failures
