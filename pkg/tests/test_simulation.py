# tests/test_simulation.py

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from src.errors import DomainError
from src.simulation import (
    ANOMALY,
    NORMAL,
    PathComponents,
    SimConfig,
    build_experiment,
    compose_path,
    gen_ar,
    gen_double_seasonal,
    gen_linear_step,
    gen_local_level,
    gen_random_pulse,
    gen_random_walk_drift,
    gen_temporary_shift,
)
from src.simulation.priors import sample_ar_order, sample_cv, sample_initial_level, sample_step

SMALL = SimConfig(n_series=40, n_hours=168)


def test_local_level_without_innovations_is_constant():
    np.testing.assert_array_equal(gen_local_level(100, 500.0, 0.0, 3.0, seed=1), 500.0)
    np.testing.assert_array_equal(gen_local_level(100, 500.0, 0.1, 0.0, seed=1), 500.0)
    with pytest.raises(DomainError):
        gen_local_level(100, 500.0, 0.1, -1.0)


def test_double_seasonal_without_updates_repeats_weekly():
    path = gen_double_seasonal(24 * 21, 500.0, 0.0, 0.0, sigma=5.0, seed=2)
    np.testing.assert_allclose(path[168:336], path[:168])
    np.testing.assert_allclose(path[336:], path[:168])
    with pytest.raises(DomainError):
        gen_double_seasonal(24, 500.0, 0.01, 0.01)


def test_pulse_rates_at_the_bounds():
    np.testing.assert_array_equal(gen_random_pulse(200, 0.0, 500.0, 4.0, seed=3), 0.0)
    np.testing.assert_allclose(gen_random_pulse(10, 1.0, np.arange(10.0), 2.0, seed=3), 2.0 * np.arange(10.0))
    with pytest.raises(DomainError):
        gen_random_pulse(10, 1.5, 500.0, 4.0)


def test_ar_without_noise_stays_at_zero():
    np.testing.assert_array_equal(gen_ar(50, [0.2, 0.1], 0.0, seed=4), 0.0)
    assert len(gen_ar(50, [], 1.0, seed=4)) == 50


def test_ar_lag_one_autocorrelation():
    path = gen_ar(20000, [0.6], 1.0, seed=5)
    assert np.corrcoef(path[1:], path[:-1])[0, 1] == pytest.approx(0.6, abs=0.03)


def test_random_walk_drift():
    np.testing.assert_allclose(gen_random_walk_drift(5, 10.0, 2.0, 0.0), [12.0, 14.0, 16.0, 18.0, 20.0])
    ends = [gen_random_walk_drift(100, 0.0, 0.5, 1.0, seed=s)[-1] for s in range(400)]
    assert np.mean(ends) == pytest.approx(50.0, abs=3 * 10.0 / np.sqrt(400))


def test_linear_step():
    path = gen_linear_step(504, [100], [200.0])
    np.testing.assert_array_equal(path[:100], 0.0)
    np.testing.assert_array_equal(path[100:], 200.0)
    with pytest.raises(DomainError):
        gen_linear_step(504, [200, 100], [1.0, 2.0])
    with pytest.raises(DomainError):
        gen_linear_step(504, [100], [1.0, 2.0])


def test_temporary_shift_returns_to_base_before_the_final_shift():
    path = gen_temporary_shift(300, 100.0, [50, 120, 200], [2.0, 1.0, 0.7])
    assert path[10] == 100.0
    assert path[60] == pytest.approx(200.0)
    assert path[150] == pytest.approx(100.0)
    assert path[250] == pytest.approx(70.0)


def test_composed_bccg_path_is_positive_and_deterministic():
    components = PathComponents(np.full(504, 500.0), None, 0.1, -0.3)
    first = compose_path(components, seed=6, series_id="a")
    second = compose_path(components, seed=6, series_id="a")
    assert np.all(first.values > 0)
    np.testing.assert_array_equal(first.values, second.values)


def test_zero_shape_path_is_lognormal():
    sample = compose_path(PathComponents(np.full(5000, 1.0), None, 0.5, 0.0), seed=7)
    assert stats.kstest(sample.values, stats.lognorm(s=0.5, scale=1.0).cdf).pvalue > 0.01


def test_non_positive_location_is_rejected():
    with pytest.raises(DomainError):
        compose_path(PathComponents(np.array([1.0, -1.0]), None, 0.1, 0.0), seed=0)


def test_priors_stay_in_their_ranges():
    cfg = SimConfig()
    rng = np.random.default_rng(8)
    cvs = [sample_cv(rng, cfg) for _ in range(500)]
    spread = cfg.cv_truncation_sd * cfg.cv_log_scale
    assert min(cvs) >= np.exp(cfg.cv_log_location - spread)
    assert max(cvs) <= np.exp(cfg.cv_log_location + spread)
    levels = [sample_initial_level(rng, cfg) for _ in range(500)]
    assert cfg.level_range[0] <= min(levels) and max(levels) <= cfg.level_range[1]
    orders = [sample_ar_order(rng, cfg) for _ in range(2000)]
    assert min(orders) == 0
    assert np.mean(np.array(orders) == 0) == pytest.approx(cfg.ar_zero_probability, abs=0.04)


def test_forced_steps():
    rng = np.random.default_rng(9)
    cfg = SimConfig()
    taus, ratios = sample_step(rng, cfg, force=True, upward=True)
    assert cfg.step_tau[0] <= taus[0] <= cfg.step_tau[1]
    assert cfg.step_ratio_up[0] <= ratios[0] <= cfg.step_ratio_up[1]


def test_sim_config_needs_whole_days():
    with pytest.raises(ValidationError):
        SimConfig(n_hours=50)


def test_e1_has_two_hundred_seasonal_series():
    dataset = build_experiment("E1", seed=1)
    assert len(dataset.series) == 200
    assert len(dataset.anomalies) == 10
    subspaces = {
        meta["subspace"]
        for sid, meta in dataset.metadata.items()
        if sid != "_experiment" and dataset.labels[sid] == NORMAL
    }
    assert subspaces == {"seasonal-low", "seasonal-mid"}
    for sid, meta in dataset.metadata.items():
        if sid != "_experiment" and meta.get("setting") == "low":
            assert 0.05 <= meta["scale"] <= 0.1


def test_e3_adds_ten_changepoint_anomalies():
    dataset = build_experiment("E3", seed=2, cfg=SimConfig(n_series=60))
    assert len(dataset.anomalies) == 20
    locations = [dataset.metadata[sid]["location"] for sid in dataset.anomalies]
    assert locations.count("temporary_shift") == 10


def test_anomaly_count_and_labels():
    dataset = build_experiment("E1", seed=3, n_anomalies=1, cfg=SMALL)
    assert len(dataset.anomalies) == 1
    assert set(dataset.labels.values()) == {NORMAL, ANOMALY}
    with pytest.raises(DomainError):
        build_experiment("E1", n_anomalies=3, cfg=SMALL)
    with pytest.raises(DomainError):
        build_experiment("E9", cfg=SMALL)


def test_every_anomaly_has_an_out_of_prior_ingredient():
    dataset = build_experiment("E1", seed=4, cfg=SMALL)
    for sid in dataset.anomalies:
        assert dataset.metadata[sid]["ingredients"][0] in {"random_walk", "downward_shift"}


def test_same_seed_gives_identical_frames():
    first = build_experiment("E2", seed=5, cfg=SimConfig(n_series=80, n_hours=168))
    second = build_experiment("E2", seed=5, cfg=SimConfig(n_series=80, n_hours=168))
    assert first.data_frame().equals(second.data_frame())
    assert first.labels_frame().equals(second.labels_frame())
    assert len(first.metadata["_experiment"]["subspaces"]) == 6


def test_too_few_series_for_the_subspaces():
    with pytest.raises(DomainError):
        build_experiment("E2", cfg=SimConfig(n_series=40, n_hours=168))


def test_wrong_family_experiment_uses_random_walks():
    dataset = build_experiment("E6", seed=6, cfg=SMALL)
    assert dataset.families == ["rw-normal", "rw-t"]
    assert dataset.metadata["_experiment"]["families"] == ["rw-normal", "rw-t"]


def test_data_frame_is_long_format():
    dataset = build_experiment("E4", seed=7, n_anomalies=5, cfg=SMALL)
    frame = dataset.data_frame()
    assert list(frame.columns) == ["series_id", "timestamp", "value"]
    assert len(frame) == 40 * 168
    assert frame["timestamp"].iloc[0] == "2024-01-01T00:00:00"
