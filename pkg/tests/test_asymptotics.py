import itertools

import numpy as np
import pytest

from lhsd.asymptotics import (
    IntegrandBV,
    QuadratureError,
    brownian_sheet_cov,
    expectation,
    gc_cov,
    integrand_by_name,
    limit_variances,
    sheet_moment,
    sigma2_lhsd,
    sigma2_mc,
    variance_gap,
)
from lhsd.copula import CopulaModel
from lhsd.core import lhsd_estimate, mc_estimate
from lhsd.replication import child_rng

IND2 = CopulaModel("independence", dim=2)
FGM2 = CopulaModel("fgm", 0.5, 2)
NEG = integrand_by_name("neg_product", 2)

MODELS = [IND2, FGM2, CopulaModel("amh", 0.7, 2), CopulaModel("fgm", -0.6, 3), CopulaModel("amh", 0.4, 3)]


@pytest.fixture(scope="module")
def fgm_variances():
    return limit_variances(FGM2, NEG)


# ---------------------------------------------------------------------------
# covariance kernels


def test_sheet_cov_examples():
    assert brownian_sheet_cov(FGM2, [1.0, 1.0], [1.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
    assert brownian_sheet_cov(FGM2, [0.0, 0.4], [0.7, 0.2]) == 0.0
    assert brownian_sheet_cov(IND2, [0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.1875)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: f"{m.family.value}{m.alpha}d{m.dim}")
def test_gc_cov_symmetric_and_nonnegative(model):
    rng = np.random.default_rng(1)
    u = rng.random((1000, model.dim))
    v = rng.random((1000, model.dim))
    np.testing.assert_allclose(gc_cov(model, u, v), gc_cov(model, v, u), atol=1e-15)
    assert np.all(gc_cov(model, u, u) >= -1e-12)


def test_gc_cov_vanishes_in_one_dimension():
    m = CopulaModel("independence", dim=1)
    rng = np.random.default_rng(2)
    assert np.max(np.abs(gc_cov(m, rng.random((500, 1)), rng.random((500, 1))))) < 1e-12


def test_gc_cov_grounded():
    u = np.array([[0.0, 0.3], [0.6, 0.0]])
    v = np.array([[0.4, 0.9], [0.2, 0.5]])
    np.testing.assert_allclose(gc_cov(FGM2, u, v), 0.0, atol=1e-15)


def _pinned_sheet_oracle(model, points, n_paths, rng):
    """Simulate B_C at ``points`` as the Gaussian limit of multinomial cell counts.

    The cube is split at every coordinate of ``points``, so each requested
    value of the sheet is an exact sum of cells.
    """
    d = model.dim
    cuts = [np.unique(np.concatenate([[0.0, 1.0], points[:, j]])) for j in range(d)]
    shape = tuple(len(c) - 1 for c in cuts)
    probs = np.zeros(shape)
    for cell in itertools.product(*[range(s) for s in shape]):
        total = 0.0
        for corner in itertools.product((0, 1), repeat=d):
            pt = [cuts[j][cell[j] + corner[j]] for j in range(d)]
            total += (-1) ** (d - sum(corner)) * model.cdf(np.array(pt))
        probs[cell] = total
    p = probs.ravel()
    w = rng.standard_normal((n_paths, len(p))) * np.sqrt(p)
    w -= np.outer(w.sum(axis=1), p)
    values = []
    for pt in points:
        mask = np.ones(shape, dtype=bool)
        for j in range(d):
            upper = cuts[j][1:]
            sel = upper <= pt[j] + 1e-15
            mask &= sel.reshape([-1 if k == j else 1 for k in range(d)])
        values.append(w @ mask.ravel().astype(float))
    return values


def _field_products(model, u, v, n_paths, seed):
    d = model.dim
    pts = [u, v]
    for base in (u, v):
        for j in range(d):
            e = np.ones(d)
            e[j] = base[j]
            pts.append(e)
    vals = _pinned_sheet_oracle(model, np.array(pts), n_paths, np.random.default_rng(seed))
    g_u = vals[0] - sum(model.partial_derivative(u, j) * vals[2 + j] for j in range(d))
    g_v = vals[1] - sum(model.partial_derivative(v, j) * vals[2 + d + j] for j in range(d))
    return g_u * g_v


@pytest.mark.parametrize(
    "model,u,v",
    [
        (IND2, [0.5, 0.5], [0.5, 0.5]),
        (FGM2, [0.3, 0.8], [0.6, 0.4]),
        (CopulaModel("amh", 0.6, 3), [0.2, 0.7, 0.5], [0.9, 0.3, 0.6]),
    ],
)
def test_gc_cov_matches_simulated_field(model, u, v):
    u, v = np.array(u), np.array(v)
    prod = _field_products(model, u, v, 1_000_000, 3)
    se = prod.std(ddof=1) / np.sqrt(len(prod))
    assert abs(prod.mean() - gc_cov(model, u, v)) < 3 * se


# ---------------------------------------------------------------------------
# integrands


@pytest.mark.parametrize("name", ["neg_product", "product", "additive"])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_face_measure_reproduces_f_hat(name, d):
    # mass of df_hat on the closed box [u, 1]^d equals (-1)^d f(u)
    integ = integrand_by_name(name, d)
    u = np.linspace(0.2, 0.6, d)
    g = 40
    total = 0.0
    for fixed, free, dens in integ.faces():
        if free:
            axes = [u[j] + (1 - u[j]) * (np.arange(g) + 0.5) / g for j in free]
            local = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free))
            vol = np.prod([1 - u[j] for j in free]) / g ** len(free)
        else:
            local, vol = np.zeros((1, 0)), 1.0
        pts = np.ones((len(local), d))
        pts[:, list(free)] = local
        total += np.sum(dens(pts)) * vol
    assert total == pytest.approx((-1) ** d * float(integ.f(u[None])[0]), abs=1e-3)


def test_unknown_integrand():
    with pytest.raises(ValueError):
        integrand_by_name("sine", 2)


# ---------------------------------------------------------------------------
# limit variances


def test_sigma2_mc_examples():
    m1 = CopulaModel("independence", dim=1)
    assert sigma2_mc(m1, lambda u: u[:, 0]) == pytest.approx(1 / 12, abs=1e-6)
    assert sigma2_mc(IND2, NEG) == pytest.approx(7 / 144, abs=1e-6)
    assert sigma2_mc(FGM2, lambda u: np.full(len(u), 3.0)) == pytest.approx(0.0, abs=1e-12)


def test_expectation_fgm():
    assert expectation(FGM2, lambda u: u[:, 0] * u[:, 1]) == pytest.approx(0.25 + 0.5 / 36, abs=1e-7)


def test_sigma2_lhsd_one_dimension_is_zero():
    m1 = CopulaModel("independence", dim=1)
    for name in ("neg_product", "product", "additive"):
        assert sigma2_lhsd(m1, integrand_by_name(name, 1)) == pytest.approx(0.0, abs=1e-14)


def test_independence_witness():
    s_mc = sigma2_mc(IND2, NEG)
    s_lh = sigma2_lhsd(IND2, NEG)
    gap = variance_gap(IND2, NEG)
    # LHSD keeps only the interaction term: Var((U - 1/2)(V - 1/2)) = 1/144
    assert s_lh == pytest.approx(1 / 144, abs=1e-5)
    assert s_lh <= s_mc
    assert gap <= 0
    assert abs(s_lh - s_mc - gap) < 1e-4


def test_additive_integrand_has_no_lhsd_variance():
    add = integrand_by_name("additive", 2)
    assert sigma2_lhsd(FGM2, add) == pytest.approx(0.0, abs=1e-10)


def test_zero_measure_gives_zero_gap():
    zero = IntegrandBV(2, lambda u: np.zeros(len(u)), {}, "zero")
    assert variance_gap(FGM2, zero) == 0.0
    assert sigma2_lhsd(FGM2, zero) == 0.0


def test_sheet_moment_is_mc_variance():
    assert sheet_moment(FGM2, NEG) == pytest.approx(sigma2_mc(FGM2, NEG), abs=1e-5)


def test_fgm_gap_consistency(fgm_variances):
    s_mc, s_lh, gap = fgm_variances
    assert gap <= 0
    assert abs(s_lh - s_mc - gap) < 1e-4


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        sigma2_lhsd(CopulaModel("fgm", 0.5, 3), NEG)


def test_quadrature_guards():
    with pytest.raises(QuadratureError):
        sigma2_lhsd(FGM2, NEG, resolution=64, budget=1000)
    # a sharp ridge on a node of the g=8 grid but between nodes of the g=4 grid
    ridge = lambda u: np.exp(-(((u[:, 0] - 1 / 16) / 0.002) ** 2)) * 50  # noqa: E731
    with pytest.raises(QuadratureError):
        sigma2_mc(FGM2, ridge, resolution=4)


# ---------------------------------------------------------------------------
# link to the sampler


def test_replication_variance_matches_limits(fgm_variances):
    s_mc, s_lh, _ = fgm_variances
    n, m = 512, 2000
    f = NEG.f
    lh, mc = np.empty(m), np.empty(m)
    for i in range(m):
        raw = FGM2.sample(n, child_rng(31, i))
        lh[i] = lhsd_estimate(raw, f)
        mc[i] = mc_estimate(raw, f)
    assert abs(n * lh.var(ddof=1) / s_lh - 1) < 0.15
    assert abs(n * mc.var(ddof=1) / s_mc - 1) < 0.10
