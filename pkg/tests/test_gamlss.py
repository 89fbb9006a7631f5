# tests/test_gamlss.py

import numpy as np
import pytest
from scipy import optimize, stats

from src.basis import hourly_regressors
from src.distributions import BCCG
from src.errors import DomainError, EmptyEventTerm, InsufficientData, SupportViolation
from src.gamlss import (
    FitConfig,
    FittedModel,
    ModelFamilySpec,
    edf,
    fit,
    information_criterion,
    load_family_specs,
    penalized_nll,
    select_lambdas,
)

TIGHT = FitConfig(rel_tol=1e-11, max_outer_iters=500)


def spec(distribution, mu, **roles):
    return ModelFamilySpec(name="test", distribution=distribution, terms={"mu": mu, **roles})


INTERCEPT = {"kind": "intercept"}


def test_information_criteria():
    assert information_criterion(-100.0, 5.0, 1000, "aic") == pytest.approx(210.0)
    assert information_criterion(-100.0, 5.0, 1000, "bic") == pytest.approx(234.539, abs=1e-3)
    assert information_criterion(-100.0, 0.0, 1000, "bic") == 200.0
    with pytest.raises(ValueError):
        information_criterion(-100.0, 5.0, 1000, "dic")


def test_normal_intercepts_reach_the_closed_form_maximum():
    rng = np.random.default_rng(1)
    y = rng.normal(5.0, 2.0, 1000)
    model = fit(y, hourly_regressors(1000), spec("Normal", [INTERCEPT]), TIGHT)

    mean, sd = y.mean(), y.std()
    assert model.fitted["mu"][0] == pytest.approx(5.0, abs=0.2)
    assert model.fitted["sigma"][0] == pytest.approx(2.0, abs=0.15)
    assert model.loglik == pytest.approx(stats.norm.logpdf(y, mean, sd).sum(), abs=1e-6)
    assert model.converged
    assert edf(model) == pytest.approx(2.0, abs=1e-10)
    assert penalized_nll(model) == pytest.approx(-2.0 * model.loglik + 4.0)


def test_bccg_intercepts_match_a_direct_maximizer():
    rng = np.random.default_rng(2)
    y = BCCG().sample({"mu": 500.0, "sigma": 0.1, "nu": -0.3}, rng, size=1000)
    model = fit(y, hourly_regressors(1000), spec("BCCG", [INTERCEPT]), TIGHT)

    def negative_loglik(theta):
        params = {"mu": np.exp(theta[0]), "sigma": np.exp(theta[1]), "nu": theta[2]}
        return -float(np.sum(BCCG().logpdf(y, params)))

    best = optimize.minimize(
        negative_loglik,
        x0=[np.log(500.0), np.log(0.1), -0.3],
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 20000},
    )
    assert model.loglik >= -best.fun - 1e-3
    assert model.fitted["mu"][0] == pytest.approx(np.exp(best.x[0]), rel=2e-3)
    assert model.fitted["sigma"][0] == pytest.approx(np.exp(best.x[1]), rel=2e-2)
    assert model.fitted["nu"][0] == pytest.approx(best.x[2], abs=0.1)


def loglik_gradient(model, y):
    """Central differences of the log-likelihood in every intercept of an intercept-only fit."""
    family = model.spec.family()
    eta = {role: float(family.links[role].link(values[0])) for role, values in model.fitted.items()}
    gradient = {}
    for role, value in eta.items():
        h = 1e-5 * max(1.0, abs(value))

        def at(shift):
            params = {
                r: np.full(len(y), family.links[r].inverse(e + (shift if r == role else 0.0)))
                for r, e in eta.items()
            }
            return float(np.sum(family.logpdf(y, params)))

        gradient[role] = (at(h) - at(-h)) / (2.0 * h)
    return gradient


@pytest.mark.parametrize(
    "distribution,truth,to_params,x0",
    [
        (
            "Gamma",
            {"mu": 20.0, "sigma": 0.3},
            lambda th: {"mu": np.exp(th[0]), "sigma": np.exp(th[1])},
            [np.log(20.0), np.log(0.3)],
        ),
        (
            "LogT",
            {"mu": 200.0, "sigma": 0.2, "tau": 5.0},
            lambda th: {"mu": np.exp(th[0]), "sigma": np.exp(th[1]), "tau": np.exp(th[2])},
            [np.log(200.0), np.log(0.2), np.log(5.0)],
        ),
    ],
)
def test_intercepts_match_a_direct_maximizer(distribution, truth, to_params, x0):
    family = spec(distribution, [INTERCEPT]).family()
    y = family.sample(truth, np.random.default_rng(15), size=1000)
    model = fit(y, hourly_regressors(1000), spec(distribution, [INTERCEPT]), TIGHT)

    best = optimize.minimize(
        lambda th: -float(np.sum(family.logpdf(y, to_params(th)))),
        x0=x0,
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 20000},
    )
    assert model.loglik >= -best.fun - 1e-3
    for role, value in to_params(best.x).items():
        assert model.fitted[role][0] == pytest.approx(value, rel=1e-2)


@pytest.mark.parametrize(
    "distribution,truth",
    [
        ("Normal", {"mu": 5.0, "sigma": 2.0}),
        ("LogNormal", {"mu": 50.0, "sigma": 0.2}),
        ("Gamma", {"mu": 20.0, "sigma": 0.3}),
        ("LogT", {"mu": 200.0, "sigma": 0.2, "tau": 5.0}),
    ],
)
def test_gradient_vanishes_at_the_fitted_intercepts(distribution, truth):
    family = spec(distribution, [INTERCEPT]).family()
    y = family.sample(truth, np.random.default_rng(16), size=1000)
    model = fit(y, hourly_regressors(1000), spec(distribution, [INTERCEPT]), TIGHT)
    for role, value in loglik_gradient(model, y).items():
        assert abs(value) < 1e-3, role


@pytest.mark.parametrize("seed", range(4))
def test_smoothing_selection_keeps_the_trace_monotone(seed):
    rng = np.random.default_rng(seed)
    n = 504
    t = np.arange(n)
    y = 500.0 * np.exp(0.3 * np.sin(2 * np.pi * t / 300.0) + rng.normal(0.0, 0.05, n))
    y[200] *= 4.0
    (generic,) = load_family_specs(["generic-pspline"])
    model = fit(y, hourly_regressors(n), generic)
    assert len(model.trace) >= 1
    assert np.min(np.diff(model.trace), initial=0.0) >= -1e-8


def test_smoothing_parameters_stay_fixed_once_selected():
    rng = np.random.default_rng(17)
    n = 300
    y = rng.normal(10.0 + np.sin(np.arange(n) / 30.0), 0.5)
    one_cycle = FitConfig(gcv_cycles=1)
    model = fit(y, hourly_regressors(n), spec("Normal", GCV_TREND), one_cycle)
    assert model.lambdas["mu"][1] in one_cycle.lambda_grid
    assert np.all(np.diff(model.trace) >= -1e-8)


def test_penalized_objective_never_decreases_with_fixed_smoothing():
    rng = np.random.default_rng(3)
    n = 24 * 14
    X = hourly_regressors(n)
    mu = 500.0 * np.exp(0.2 * np.sin(2 * np.pi * X.hour_of_day / 24))
    y = BCCG().sample({"mu": mu, "sigma": np.full(n, 0.1), "nu": np.full(n, -0.2)}, rng)
    fixed = spec(
        "BCCG",
        [INTERCEPT, {"kind": "cyclic_cubic", "input": "hour", "lam": 10.0}],
        sigma=[INTERCEPT, {"kind": "pspline_linear", "num_knots": 8, "lam": 5.0}],
    )
    model = fit(y, X, fixed)
    assert np.all(np.diff(model.trace) >= -1e-6)
    assert np.corrcoef(np.log(model.fitted["mu"]), np.log(mu))[0, 1] > 0.95


def test_huge_smoothing_flattens_a_first_order_trend():
    rng = np.random.default_rng(4)
    n = 400
    y = rng.normal(10.0 + np.sin(np.arange(n) / 40.0), 1.0)
    stiff = spec(
        "Normal",
        [INTERCEPT, {"kind": "pspline_linear", "num_knots": 15, "penalty_order": 1, "lam": 1e8}],
    )
    model = fit(y, hourly_regressors(n), stiff)
    trend = model.coefficients["mu"][1]
    assert np.ptp(trend) < 1e-4
    assert model.term_edf["mu"][1] < 0.01


def test_edf_of_intercept_and_unpenalized_spline():
    rng = np.random.default_rng(5)
    n = 300
    y = rng.normal(np.cos(np.arange(n) / 30.0), 0.5)
    free = spec("Normal", [{"kind": "pspline_linear", "num_knots": 10, "lam": 0.0}])
    model = fit(y, hourly_regressors(n), free)
    assert model.term_edf["mu"][0] == pytest.approx(10.0, abs=1e-8)
    assert model.term_edf["sigma"][0] == pytest.approx(1.0, abs=1e-10)


def test_uncentered_stiff_spline_keeps_its_null_space():
    rng = np.random.default_rng(6)
    n = 300
    y = rng.normal(3.0, 0.5, n)
    stiff = spec("Normal", [{"kind": "pspline_linear", "num_knots": 10, "penalty_order": 1, "lam": 1e8}])
    model = fit(y, hourly_regressors(n), stiff)
    assert model.term_edf["mu"][0] == pytest.approx(1.0, abs=1e-3)


GCV_TREND = [INTERCEPT, {"kind": "pspline_cubic", "num_knots": 20, "lam": "gcv"}]


def test_single_value_grid_is_returned_unchanged():
    y = np.random.default_rng(7).normal(0.0, 1.0, 200)
    lambdas = select_lambdas(y, hourly_regressors(200), spec("Normal", GCV_TREND), FitConfig(lambda_grid=[3.0]))
    assert lambdas["mu"] == [None, 3.0]


def test_white_noise_selects_heavy_smoothing():
    heavy = 0
    for seed in range(10):
        y = np.random.default_rng(100 + seed).normal(0.0, 1.0, 500)
        lambdas = select_lambdas(y, hourly_regressors(500), spec("Normal", GCV_TREND))
        heavy += lambdas["mu"][1] >= 1e2
    assert heavy >= 7


def test_gcv_uses_the_deviance_on_any_scale():
    # log densities are positive here, the raw global deviance is negative
    rng = np.random.default_rng(18)
    n = 500
    truth = 0.01 * np.sin(2 * np.pi * np.arange(n) / 250.0)
    y = 1.0 + truth + rng.normal(0.0, 0.0005, n)
    model = fit(y, hourly_regressors(n), spec("Normal", GCV_TREND))
    assert model.loglik > 0
    assert model.lambdas["mu"][1] < max(FitConfig().lambda_grid)
    assert np.corrcoef(model.fitted["mu"], 1.0 + truth)[0, 1] > 0.99


def test_strong_signal_selects_light_smoothing():
    rng = np.random.default_rng(9)
    n = 500
    truth = 10.0 * np.sin(2 * np.pi * np.arange(n) / 250.0)
    y = truth + rng.normal(0.0, 0.35, n)
    model = fit(y, hourly_regressors(n), spec("Normal", GCV_TREND))
    assert model.lambdas["mu"][1] < max(FitConfig().lambda_grid)
    assert np.corrcoef(model.fitted["mu"], truth)[0, 1] > 0.99


def test_missing_values_are_skipped_but_predicted():
    rng = np.random.default_rng(10)
    y = rng.normal(5.0, 1.0, 200)
    y[[3, 50, 120]] = np.nan
    model = fit(y, hourly_regressors(200), spec("Normal", [INTERCEPT]))
    assert model.n_obs == 197
    assert len(model.fitted["mu"]) == 200
    assert np.all(np.isfinite(model.fitted["mu"]))


def test_ar_order_is_selected_on_autocorrelated_data():
    rng = np.random.default_rng(11)
    n = 400
    noise = np.zeros(n)
    for t in range(1, n):
        noise[t] = 0.8 * noise[t - 1] + rng.normal(0.0, 10.0)
    y = 500.0 + noise
    (ar,) = load_family_specs(["ar"])
    model = fit(y, hourly_regressors(n), ar)
    assert model.ar_order >= 1
    assert model.coefficients["mu"][1][0] > 0.5


def test_event_family_without_events_is_not_applicable():
    y = np.random.default_rng(12).normal(100.0, 1.0, 200)
    pulse = spec("Normal", [INTERCEPT, {"kind": "pulse"}])
    with pytest.raises(EmptyEventTerm):
        fit(y, hourly_regressors(200), pulse, events=((), ()))


def test_detected_pulse_is_absorbed_by_its_term():
    y = np.random.default_rng(13).normal(100.0, 1.0, 200)
    y[120] = 160.0
    pulse = spec("Normal", [INTERCEPT, {"kind": "pulse"}])
    model = fit(y, hourly_regressors(200), pulse)
    assert model.events[0] == (120,)
    assert model.coefficients["mu"][1][0] == pytest.approx(60.0, abs=5.0)


def test_fit_input_errors():
    X = hourly_regressors(100)
    with pytest.raises(SupportViolation):
        fit(-np.ones(100), X, spec("BCCG", [INTERCEPT]))
    with pytest.raises(InsufficientData):
        fit(np.ones(20), hourly_regressors(20), spec("BCCG", [INTERCEPT]))
    with pytest.raises(InsufficientData):
        fit(np.ones(50), X, spec("BCCG", [INTERCEPT]))


def test_family_spec_fills_missing_roles_with_intercepts():
    filled = spec("LogT", [INTERCEPT])
    assert set(filled.terms) == {"mu", "sigma", "tau"}
    assert filled.has_intercept("tau")
    with pytest.raises(ValueError):
        spec("Normal", [INTERCEPT], nu=[INTERCEPT])
    with pytest.raises(ValueError):
        ModelFamilySpec(name="empty", distribution="Normal", terms={"mu": []})


def test_presets_resolve():
    specs = load_family_specs()
    assert len(specs) == 15
    assert {s.name for s in specs} >= {"constant-bccg", "seasonal-bccg", "ar"}
    with pytest.raises(ValueError):
        load_family_specs(["no-such-family"])


def test_fitted_model_record_round_trip():
    y = np.random.default_rng(14).normal(5.0, 1.0, 120)
    model = fit(y, hourly_regressors(120), spec("Normal", [INTERCEPT]), series_id="s1")
    record = model.to_record()
    restored = FittedModel.from_record(record)
    assert restored.to_record() == record
    assert restored.key == ("s1", "test")
    with pytest.raises(DomainError):
        restored.fitted_parameters()


def test_fitted_values_survive_the_record_when_kept():
    y = np.random.default_rng(19).normal(5.0, 1.0, 120)
    model = fit(y, hourly_regressors(120), spec("Normal", [INTERCEPT]), series_id="s1")
    restored = FittedModel.from_record(model.to_record(include_fitted=True))
    for role, values in model.fitted_parameters().items():
        np.testing.assert_array_equal(restored.fitted_parameters()[role], values)
    assert "fitted" not in model.to_record()


TRENDS = [
    None,
    {"kind": "pspline_cubic", "num_knots": 8, "lam": "gcv"},
    {"kind": "pspline_linear", "num_knots": 10},
    {"kind": "pspline_linear", "num_knots": 10, "lam": 3.0},
]
SEASONS = [
    None,
    {"kind": "cyclic_cubic", "input": "hour", "lam": "gcv"},
    {"kind": "cyclic_cubic", "input": "hour", "lam": 10.0},
    {"kind": "fourier", "input": "time", "period": 24.0, "num_harmonics": 2},
]


@pytest.mark.slow
def test_random_specs_ascend_monotonically():
    rng = np.random.default_rng(2024)
    n = 168
    X = hourly_regressors(n)
    t = np.arange(n)
    for case in range(100):
        distribution = str(rng.choice(["Normal", "LogNormal", "Gamma", "BCCG", "LogT"]))
        trend = TRENDS[rng.integers(len(TRENDS))]
        season = SEASONS[rng.integers(len(SEASONS))]
        mu = [INTERCEPT] + [term for term in (trend, season) if term is not None]
        sigma = [INTERCEPT]
        if rng.random() < 0.3:
            sigma.append({"kind": "pspline_linear", "num_knots": 6, "lam": "gcv"})
        level = 100.0 * np.exp(
            rng.uniform(0.0, 0.3) * np.sin(2 * np.pi * t / 24.0) + rng.uniform(-0.3, 0.3) * t / n
        )
        y = level * np.exp(rng.normal(0.0, rng.uniform(0.02, 0.2), n))
        model = fit(y, X, spec(distribution, mu, sigma=sigma))
        assert np.min(np.diff(model.trace), initial=0.0) >= -1e-8, (case, distribution, mu, sigma)
