# tests/test_model_space.py

import numpy as np
import pytest

from src.distributions import LogNormal, Normal
from src.errors import DegenerateSpace, DomainError, UnknownSeries
from src.gamlss import FittedModel, ModelFamilySpec
from src.model_space import (
    ScoreRecord,
    akaike_weights,
    bin_coefficients,
    classify_and_rank,
    construct_model_space,
    delta,
    feedback_update,
    kl_divergence_oracle,
    load_model_space,
    mean_kl_divergence,
    precision_control,
    read_context,
    save_model_space,
    score_all,
    score_series,
    series_score,
)


def make_model(series_id, family, nll, coef=0.0, criterion="aic"):
    spec = ModelFamilySpec(name=family, distribution="Normal", terms={"mu": [{"kind": "intercept"}]})
    return FittedModel(
        series_id=series_id,
        spec=spec,
        coefficients={"mu": [np.array([coef])], "sigma": [np.array([0.0])]},
        lambdas={"mu": [None], "sigma": [None]},
        term_edf={"mu": [1.0], "sigma": [1.0]},
        edf=2.0,
        loglik=-(nll - 4.0) / 2.0,
        penalized_nll=nll,
        criterion=criterion,
        converged=True,
        n_obs=100,
    )


@pytest.fixture
def fits():
    """Twenty series best described by 'common', one only by 'unique'."""
    fitted = {}
    for i in range(20):
        sid = f"s{i:02d}"
        fitted[sid] = [make_model(sid, "common", 100.0 + 0.1 * i, coef=i), make_model(sid, "unique", 130.0)]
    fitted["odd"] = [make_model("odd", "common", 150.0), make_model("odd", "unique", 100.0)]
    return fitted


def test_delta():
    assert list(delta([make_model("a", "f", 42.0)])) == [0.0]
    models = [make_model("a", f, v) for f, v in [("f", 100.0), ("g", 102.0), ("h", 110.0)]]
    np.testing.assert_allclose(delta(models), [0.0, 2.0, 10.0])


def test_delta_rejects_mixed_criteria_and_empty_input():
    with pytest.raises(DomainError):
        delta([make_model("a", "f", 1.0), make_model("a", "g", 2.0, criterion="bic")])
    with pytest.raises(DomainError):
        delta([])


def test_akaike_weights():
    np.testing.assert_allclose(akaike_weights([0.0]), [1.0])
    np.testing.assert_allclose(akaike_weights([0.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(akaike_weights([0.0, 2.0, 10.0]), [0.72747, 0.26762, 0.00490], atol=5e-6)


def test_weights_survive_huge_deltas():
    weights = akaike_weights([0.0, 5000.0])
    assert weights.sum() == pytest.approx(1.0)
    assert weights[0] == 1.0


def test_weights_are_translation_invariant():
    nlls = np.array([310.0, 305.5, 320.0])
    shifted = [make_model("a", str(i), v + 1234.5) for i, v in enumerate(nlls)]
    plain = [make_model("a", str(i), v) for i, v in enumerate(nlls)]
    np.testing.assert_allclose(akaike_weights(delta(shifted)), akaike_weights(delta(plain)), rtol=1e-12)


def test_weight_properties_on_random_criteria():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        k = int(rng.integers(1, 16))
        span = 10.0 ** rng.uniform(-3.0, 4.0)
        criteria = rng.uniform(0.0, span, k) + rng.uniform(-1e4, 1e4)
        weights = akaike_weights(criteria - criteria.min())
        assert abs(weights.sum() - 1.0) <= 1e-12
        assert weights[np.argmin(criteria)] == weights.max()
        shifted = criteria + rng.uniform(-1e3, 1e3)
        np.testing.assert_allclose(akaike_weights(shifted - shifted.min()), weights, rtol=1e-9, atol=1e-15)


def test_series_score():
    assert series_score([0.6, 0.4], [True, True]) == (1.0, 0.0)
    assert series_score([0.6, 0.4], [False, False]) == (0.0, 1.0)
    pi, alt = series_score([0.7, 0.2, 0.1], [True, True, False])
    assert pi == pytest.approx(0.9)
    assert alt == pytest.approx(0.1)
    with pytest.raises(DomainError):
        series_score([1.0], [True, False])


def test_rare_family_is_excluded_and_its_series_is_anomalous(fits):
    space = construct_model_space(fits, alpha=0.05, n_min=5)
    assert space.null_families == frozenset({"common"})
    assert "odd" in space.anomalous_series
    assert space.anomalous_series == frozenset({"odd"})
    assert ("odd", "unique") in space.alt_models
    assert space.score("odd").score < 1e-10


def test_single_family_collection_has_no_alternatives():
    fitted = [make_model(f"s{i}", "only", 100.0) for i in range(10)]
    space = construct_model_space(fitted, alpha=0.05, n_min=5)
    assert space.anomalous_series == frozenset()
    assert space.alt_models == frozenset()
    assert all(r.score == 1.0 for r in score_all(space))


def test_disabled_filters_keep_every_model(fits):
    space = construct_model_space(fits, alpha=1e-12, n_min=1)
    assert space.null_models == frozenset(space.models)
    assert space.anomalous_series == frozenset()


def test_unsupported_space_is_degenerate(fits):
    with pytest.raises(DegenerateSpace):
        construct_model_space(fits, alpha=0.05, n_min=50)


def test_construction_validates_thresholds(fits):
    with pytest.raises(DomainError):
        construct_model_space(fits, alpha=1.5)
    with pytest.raises(DomainError):
        construct_model_space(fits, n_min=0)


def test_default_n_min_scales_with_the_collection(fits):
    assert construct_model_space(fits).n_min == 5


def test_unknown_series(fits):
    space = construct_model_space(fits, alpha=0.05, n_min=5)
    with pytest.raises(UnknownSeries):
        space.score("missing")


def test_score_records_are_normalized(fits):
    for record in score_all(construct_model_space(fits, alpha=0.05, n_min=5)):
        assert sum(record.weights) == pytest.approx(1.0, abs=1e-10)
        assert min(record.deltas) == 0.0
        assert record.score + record.alt_score == pytest.approx(1.0)


def test_score_record_checks_its_weights():
    with pytest.raises(DomainError):
        ScoreRecord("a", ("f",), (0.0,), (0.5,), 0.5, 0.5)


def test_new_series_is_scored_against_the_null_families(fits):
    space = construct_model_space(fits, alpha=0.05, n_min=5)
    record = score_series([make_model("new", "common", 200.0), make_model("new", "unique", 180.0)], space)
    assert record.series_id == "new"
    assert record.score == pytest.approx(np.exp(-10.0) / (1.0 + np.exp(-10.0)))
    with pytest.raises(DomainError):
        score_series([], space)


def record(series_id, score):
    return ScoreRecord(series_id, ("f",), (0.0,), (1.0,), score, 1.0 - score)


def test_classify_and_rank():
    ranked = classify_and_rank([record("a", 0.9), record("b", 0.001), record("c", 0.5)], alpha=0.05)
    assert [(r.series_id, r.rank) for r in ranked] == [("b", 1), ("c", 2), ("a", 3)]
    assert [r.series_id for r in ranked if r.is_anomalous] == ["b"]
    top = classify_and_rank([record("a", 0.9), record("b", 0.001), record("c", 0.5)], top_k=1)
    assert [r.series_id for r in top] == ["b"]


def test_ties_rank_by_series_id():
    ranked = classify_and_rank([record("c", 1.0), record("a", 1.0), record("b", 1.0)])
    assert [r.series_id for r in ranked] == ["a", "b", "c"]
    assert not any(r.is_anomalous for r in ranked)


def test_precision_control():
    assert precision_control([record("a", 0.1), record("b", 0.7)], rho=0.5) == {"a"}
    assert precision_control([record("a", 0.0), record("b", 1e-6)], rho=1.0 - 1e-9) == {"a"}
    with pytest.raises(DomainError):
        precision_control([], rho=1.0)


def test_false_positive_feedback_moves_the_series_to_the_null_space(fits):
    space = construct_model_space(fits, alpha=0.05, n_min=5)
    before = space.score("odd").score
    updated = feedback_update(space, "odd", "FP")
    assert "odd" not in updated.anomalous_series
    assert "unique" in updated.whitelisted_families
    assert ("odd", "unique") in updated.null_models
    assert updated.score("odd").score >= before


def test_false_negative_feedback_is_idempotent(fits):
    space = construct_model_space(fits, alpha=0.05, n_min=5)
    once = feedback_update(space, "s03", "FN")
    twice = feedback_update(once, "s03", "FN")
    assert "s03" in once.anomalous_series
    assert once.null_models == twice.null_models
    assert once.anomalous_series == twice.anomalous_series
    assert once.null_families == twice.null_families


def test_feedback_rejects_unknown_labels(fits):
    space = construct_model_space(fits, alpha=0.05, n_min=5)
    with pytest.raises(DomainError):
        feedback_update(space, "odd", "TP")
    with pytest.raises(UnknownSeries):
        feedback_update(space, "nobody", "FP")


def test_binning_counts():
    models = [make_model(f"s{i}", "f", 1.0, coef=c) for i, c in enumerate([0.0, 0.5, 1.0])]
    summary = bin_coefficients(models, bin_count=2, padding=0.0, value_range=(0.0, 1.0))
    np.testing.assert_array_equal(summary.counts["mu:0:0"], [2, 1])


def test_binning_a_single_model_uses_one_bin():
    summary = bin_coefficients([make_model("s", "f", 1.0, coef=3.0)])
    for counts in summary.counts.values():
        assert counts.sum() == 1
        assert np.count_nonzero(counts) == 1


def test_identical_models_share_bins():
    models = [make_model(f"s{i}", "f", 1.0, coef=2.0) for i in range(2)]
    summary = bin_coefficients(models)
    assert max(summary.counts["mu:0:0"]) == 2
    frame = summary.to_frame()
    assert set(frame.columns) == {"family_id", "coefficient", "bin", "lower", "upper", "count"}


def test_binning_needs_one_family():
    with pytest.raises(DomainError):
        bin_coefficients([make_model("a", "f", 1.0), make_model("b", "g", 1.0)])


def test_kl_oracle_against_closed_forms():
    p = (Normal(), {"mu": 0.0, "sigma": 1.0})
    estimate, se = kl_divergence_oracle(p, p)
    assert abs(estimate) <= 1e-12
    estimate, se = kl_divergence_oracle(p, (Normal(), {"mu": 1.0, "sigma": 1.0}), seed=1)
    assert abs(estimate - 0.5) <= 3 * se
    estimate, se = kl_divergence_oracle(p, (Normal(), {"mu": 0.0, "sigma": 2.0}), seed=2)
    assert abs(estimate - (np.log(2.0) + 1.0 / 8.0 - 0.5)) <= 3 * se


def test_kl_oracle_support_mismatch_and_draw_count():
    p = (Normal(), {"mu": 0.0, "sigma": 1.0})
    estimate, _ = kl_divergence_oracle(p, (LogNormal(), {"mu": 1.0, "sigma": 1.0}))
    assert estimate == float("inf")
    with pytest.raises(DomainError):
        kl_divergence_oracle(p, p, n_mc=100)


def test_mean_kl_divergence():
    p = (Normal(), {"mu": 0.0, "sigma": 1.0})
    q = (Normal(), {"mu": 1.0, "sigma": 1.0})
    assert mean_kl_divergence([(p, q), (p, p)]) == pytest.approx(0.25, abs=0.02)


def test_larger_divergence_from_the_null_gives_larger_delta():
    rng = np.random.default_rng(0)
    deltas = []
    for shift in (0.2, 1.0):
        y = rng.normal(shift, 1.0, 500)
        null = Normal().logpdf(y, {"mu": 0.0, "sigma": 1.0}).sum()
        alternative = Normal().logpdf(y, {"mu": y.mean(), "sigma": 1.0}).sum()
        models = [make_model("y", "null", -2 * null), make_model("y", "alt", -2 * alternative + 2.0)]
        deltas.append(delta(models)[0])
    assert deltas[1] > deltas[0]


def test_space_persists_with_feedback_and_context(fits, tmp_path):
    space = feedback_update(construct_model_space(fits, alpha=0.05, n_min=5), "s07", "FN")
    binned = [bin_coefficients([m for m in space.models.values() if m.family_id == "common"])]
    save_model_space(space, tmp_path, binned, context={"target_mean": 500.0})

    restored = load_model_space(tmp_path)
    assert restored.null_families == space.null_families
    assert restored.anomalous_series == space.anomalous_series
    assert restored.forced_alt == space.forced_alt
    assert read_context(tmp_path) == {"target_mean": 500.0}
    assert (tmp_path / "bins" / "common.csv").read_text().startswith("# schema_version: 1")
