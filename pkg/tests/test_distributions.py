# tests/test_distributions.py

import numpy as np
import pytest
from scipy import stats

from src.distributions import (
    BCCG,
    Gamma,
    LogNormal,
    LogT,
    Normal,
    apply_link,
    density_mass,
    get_family,
    invert_link,
    ks_statistic,
    log_density,
    quantile_residuals,
    worm_pairs,
)
from src.errors import DomainError, SupportViolation


def bccg(mu, sigma, nu):
    return {"mu": mu, "sigma": sigma, "nu": nu}


def test_bccg_log_density_at_the_median():
    value = log_density(BCCG(), 1.0, bccg(1.0, 1.0, 0.5))
    assert value == pytest.approx(-0.918939, abs=1e-6)


def test_bccg_with_zero_shape_is_lognormal():
    value = log_density(BCCG(), 2.0, bccg(1.0, 0.5, 0.0))
    expected = stats.lognorm.logpdf(2.0, s=0.5, scale=1.0)
    assert value == pytest.approx(expected, abs=1e-12)


def test_bccg_log_density_matches_direct_formula():
    y, mu, sigma, nu = 1.5, 1.0, 0.3, -0.4
    z = ((y / mu) ** nu - 1.0) / (nu * sigma)
    expected = (
        -0.5 * np.log(2 * np.pi) - np.log(sigma) + (nu - 1) * np.log(y) - nu * np.log(mu) - 0.5 * z**2
    )
    assert log_density(BCCG(), y, bccg(mu, sigma, nu)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("y", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("sigma", [0.05, 0.3, 1.0])
def test_bccg_is_continuous_in_shape_at_zero(y, sigma):
    near = log_density(BCCG(), y, bccg(1.2, sigma, 1e-8))
    at = log_density(BCCG(), y, bccg(1.2, sigma, 0.0))
    assert abs(near - at) < 1e-6


def test_support_violation_for_non_positive_observation():
    with pytest.raises(SupportViolation):
        log_density(BCCG(), -1.0, bccg(1.0, 0.1, 0.0))
    with pytest.raises(SupportViolation):
        log_density(Gamma(), 0.0, {"mu": 1.0, "sigma": 0.5})


def test_non_positive_scale_is_a_domain_error():
    with pytest.raises(DomainError):
        log_density(Normal(), 0.0, {"mu": 0.0, "sigma": 0.0})


def test_normal_log_density_matches_scipy():
    y = np.array([-1.0, 0.0, 2.5])
    values = log_density(Normal(), y, {"mu": 0.5, "sigma": 2.0})
    np.testing.assert_allclose(values, stats.norm.logpdf(y, loc=0.5, scale=2.0), rtol=1e-12)


def test_links():
    family = BCCG()
    assert apply_link(family, "mu", 0.0) == pytest.approx(1.0)
    assert apply_link(family, "nu", 3.7) == pytest.approx(3.7)
    assert apply_link(family, "mu", invert_link(family, "mu", 500.0)) == pytest.approx(500.0, rel=1e-12)


def test_log_link_rejects_non_positive_theta():
    with pytest.raises(DomainError):
        invert_link(BCCG(), "mu", 0.0)


def test_get_family_with_link_override():
    family = get_family("Normal", {"sigma": "identity"})
    assert family.links["sigma"].name == "identity"
    with pytest.raises(DomainError):
        get_family("Weibull")


def test_quantile_residuals_are_zero_at_the_mean():
    y = np.array([1.0, 2.0, 3.0])
    residuals = quantile_residuals(Normal(), y, {"mu": y, "sigma": np.ones(3)}, rng_seed=0)
    np.testing.assert_allclose(residuals, 0.0, atol=1e-12)


def test_quantile_residuals_skip_missing_values():
    y = np.arange(1.0, 11.0)
    y[[3, 7]] = np.nan
    residuals = quantile_residuals(Normal(), y, {"mu": np.full(10, 5.0), "sigma": np.ones(10)}, rng_seed=0)
    assert len(residuals) == 8


@pytest.mark.parametrize(
    "family,params",
    [
        (Normal(), {"mu": 3.0, "sigma": 2.0}),
        (LogNormal(), {"mu": 10.0, "sigma": 0.3}),
        (Gamma(), {"mu": 5.0, "sigma": 0.4}),
        (BCCG(), bccg(500.0, 0.1, -0.3)),
        (BCCG(), bccg(500.0, 0.8, 1.5)),
        (LogT(), {"mu": 2.0, "sigma": 0.2, "tau": 5.0}),
    ],
)
def test_residuals_of_own_samples_are_standard_normal(family, params):
    rng = np.random.default_rng(42)
    y = family.sample(params, rng, size=5000)
    n = len(y)
    full = {role: np.full(n, value) for role, value in params.items()}
    residuals = quantile_residuals(family, y, full)
    assert stats.kstest(residuals, "norm").pvalue > 0.01


def test_bccg_density_mass_matches_closed_form():
    params = bccg(1.0, 0.8, 1.5)
    expected = stats.norm.cdf(1.0 / (0.8 * 1.5))
    assert density_mass(BCCG(), params) == pytest.approx(expected, abs=1e-6)
    assert BCCG().total_mass(params) == pytest.approx(expected)


def test_normal_density_integrates_to_one():
    assert density_mass(Normal(), {"mu": 2.0, "sigma": 3.0}) == pytest.approx(1.0, abs=1e-7)


def test_bccg_zero_shape_samples_are_lognormal():
    rng = np.random.default_rng(3)
    y = BCCG().sample(bccg(1.0, 0.5, 0.0), rng, size=5000)
    assert stats.kstest(y, stats.lognorm(s=0.5, scale=1.0).cdf).pvalue > 0.01


def test_worm_pairs_and_ks_statistic():
    residuals = np.random.default_rng(0).standard_normal(2000)
    theoretical, deviation = worm_pairs(residuals)
    assert np.all(np.diff(theoretical) > 0)
    assert np.max(np.abs(deviation)) < 0.3
    assert ks_statistic(residuals) < 0.05
    assert np.isnan(ks_statistic(np.array([])))


@pytest.mark.parametrize(
    "family,params,role",
    [
        (Normal(), {"mu": 1.0, "sigma": 2.0}, "sigma"),
        (BCCG(), bccg(5.0, 0.2, -0.3), "mu"),
        (BCCG(), bccg(5.0, 0.2, -0.3), "sigma"),
        (LogT(), {"mu": 2.0, "sigma": 0.3, "tau": 4.0}, "mu"),
    ],
)
def test_score_has_zero_expectation(family, params, role):
    rng = np.random.default_rng(11)
    y = family.sample(params, rng, size=200000)
    full = {r: np.full(len(y), v) for r, v in params.items()}
    score = family.score(role, y, full)
    assert abs(np.mean(score)) < 5 * np.std(score) / np.sqrt(len(y))


@pytest.mark.parametrize(
    "family,params",
    [
        (Normal(), {"mu": 5.0, "sigma": 2.0}),
        (LogNormal(), {"mu": 50.0, "sigma": 0.2}),
        (Gamma(), {"mu": 20.0, "sigma": 0.3}),
        (BCCG(), bccg(500.0, 0.1, -0.3)),
        (BCCG(), bccg(5.0, 0.4, 0.8)),
        (LogT(), {"mu": 200.0, "sigma": 0.2, "tau": 5.0}),
    ],
)
def test_closed_form_scores_match_central_differences(family, params):
    y = family.sample(params, np.random.default_rng(12), size=50)
    full = {r: np.full(len(y), float(v)) for r, v in params.items()}
    for role in family.roles:
        h = 1e-6 * max(1.0, abs(float(params[role])))
        up = {**full, role: full[role] + h}
        down = {**full, role: full[role] - h}
        numeric = (family.logpdf(y, up) - family.logpdf(y, down)) / (2.0 * h)
        np.testing.assert_allclose(family.score(role, y, full), numeric, rtol=1e-4, atol=1e-6, err_msg=role)


def test_randomized_residuals_of_rounded_data_are_standard_normal():
    params = {"mu": 20.0, "sigma": 0.3}
    y = np.round(Gamma().sample(params, np.random.default_rng(13), size=5000))
    full = {role: np.full(len(y), value) for role, value in params.items()}
    residuals = quantile_residuals(Gamma(), y, full, rng_seed=1, resolution=1.0)
    assert stats.kstest(residuals, "norm").pvalue > 0.01
    np.testing.assert_array_equal(residuals, quantile_residuals(Gamma(), y, full, rng_seed=1, resolution=1.0))
    assert not np.array_equal(residuals, quantile_residuals(Gamma(), y, full, rng_seed=2, resolution=1.0))


def test_randomized_residuals_stay_inside_the_recorded_interval():
    y = np.array([0.4, 1.0, 2.0, 3.0])
    params = {"mu": np.full(4, 2.0), "sigma": np.full(4, 0.5)}
    residuals = quantile_residuals(Gamma(), y, params, rng_seed=0, resolution=1.0)
    lower = stats.norm.ppf(Gamma().cdf(np.array([1e-300, 0.5, 1.5, 2.5]), params))
    upper = stats.norm.ppf(Gamma().cdf(y + 0.5, params))
    assert np.all(residuals >= lower - 1e-12)
    assert np.all(residuals <= upper + 1e-12)
    with pytest.raises(DomainError):
        quantile_residuals(Gamma(), y, params, resolution=0.0)
