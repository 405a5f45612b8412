import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsinterp.errors import (
    DegenerateReference,
    InsufficientSamples,
    NoPositiveRelevance,
    NoValidPairs,
)
from tsinterp.evaluation import (
    DEFAULT_QUANTILES,
    EvaluationConfig,
    SampleCurve,
    auc_se,
    evaluate_method,
    evaluate_sample,
    hmi,
    information_ratio,
    occlude,
    positive_set,
    random_mask,
    s_e,
    tic,
)

relevance_maps = st.integers(0, 2**31 - 1).map(
    lambda seed: np.random.default_rng(seed).normal(0, 1, size=(3, 20)))


def test_default_quantiles():
    assert DEFAULT_QUANTILES == (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95)


# --- positive set / TIC ---

@given(relevance_maps)
@settings(max_examples=30, deadline=None)
def test_masks_are_nested(rel):
    prev = None
    for q in DEFAULT_QUANTILES:
        mask = positive_set(rel, q)
        if prev is not None:
            assert np.all(prev | ~mask)  # mask ⊆ prev
        prev = mask


@given(relevance_maps)
@settings(max_examples=30, deadline=None)
def test_tic_monotone_and_bounded(rel):
    values = [tic(rel, q) for q in DEFAULT_QUANTILES]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_positive_set_ignores_negative():
    rel = np.array([[-5.0, -1.0, 2.0, 1.0]])
    mask = positive_set(rel, 0.5)
    assert not mask[0, 0] and not mask[0, 1]
    assert mask[0, 2]


def test_positive_set_empty_when_all_nonpositive():
    assert not positive_set(np.full((2, 3), -1.0), 0.5).any()


def test_tic_all_positive_low_quantile_near_one():
    rel = np.abs(np.random.default_rng(0).normal(size=(3, 50))) + 0.1
    assert tic(rel, 0.05) > 0.9


def test_positive_set_rejects_bad_quantile():
    with pytest.raises(ValueError):
        positive_set(np.ones((2, 2)), 0.0)


# --- occlusion ---

@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_permute_preserves_multiset(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 25))
    mask = rng.random((3, 25)) < 0.4
    out = occlude(x, mask, "permute", rng)
    assert np.array_equal(np.sort(out[mask]), np.sort(x[mask]))
    assert np.array_equal(out[~mask], x[~mask])


def test_normal_occlusion_touches_only_mask(rng):
    x = rng.normal(size=(3, 25))
    mask = np.zeros_like(x, dtype=bool)
    mask[1, 5:10] = True
    out = occlude(x, mask, "normal", np.random.default_rng(0))
    assert np.array_equal(out[~mask], x[~mask])
    assert not np.allclose(out[mask], x[mask])


def test_empty_mask_is_identity(rng):
    x = rng.normal(size=(3, 10))
    out = occlude(x, np.zeros_like(x, dtype=bool), "normal", np.random.default_rng(0))
    assert np.array_equal(out, x)


def test_random_mask_cardinality(rng):
    mask = random_mask((3, 250), 17, rng)
    assert mask.shape == (3, 250)
    assert mask.sum() == 17


# --- normalized score drop ---

def test_s_e_boundary_cases():
    # occluded score equal to the expectancy -> full drop of 1
    assert s_e(2.0, 1.0, 1.0) == 1.0
    # occlusion changes nothing -> 0
    assert s_e(2.0, 2.0, 1.0) == 0.0
    # occlusion increases the score -> negative
    assert s_e(2.0, 3.0, 1.0) == -1.0
    # halfway to the expectancy -> 0.5
    assert s_e(3.0, 2.0, 1.0) == 0.5


def test_s_e_degenerate_reference():
    with pytest.raises(DegenerateReference):
        s_e(1.0, 0.5, 1.0)


# --- HMI ---

def test_hmi_perfect_match():
    weights = np.zeros((3, 10))
    weights[:, :4] = 1
    rel = weights.astype(float)
    assert abs(hmi(rel, weights) - 1.0) < 1e-9


def test_hmi_disjoint_support():
    weights = np.zeros((3, 10))
    weights[:, :4] = 1
    rel = np.zeros((3, 10))
    rel[:, 5:9] = 1.0
    assert hmi(rel, weights) == 0.0


def test_hmi_count_penalty():
    # relevance on twice as many points as flagged: raw=0.5 (half the mass on
    # flagged points), gamma = |4-2|/4 = 0.5 -> hmi = 0.25
    weights = np.zeros((1, 8))
    weights[0, :2] = 1
    rel = np.zeros((1, 8))
    rel[0, :4] = 1.0
    assert abs(hmi(rel, weights) - 0.25) < 1e-6


def test_hmi_bounds_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rel = rng.normal(size=(3, 30))
        weights = (rng.random((3, 30)) < 0.5).astype(np.uint8)
        if (rel > 0).any():
            assert 0.0 <= hmi(rel, weights) <= 1.0


def test_hmi_requires_positive_relevance():
    with pytest.raises(NoPositiveRelevance):
        hmi(np.full((2, 3), -1.0), np.ones((2, 3)))


# --- AUC ---

def test_auc_closed_form_single_point():
    # curve (0,0) -> (0.5, 1) -> (1, 1): area = 0.25 + 0.5
    assert abs(auc_se(np.array([0.5]), np.array([1.0])) - 0.75) < 1e-12


def test_auc_closed_form_linear_curve():
    # drop equal to n_r extended to (1, drop at largest mask)
    n_r = np.array([0.25, 0.5, 0.75])
    assert abs(auc_se(n_r, n_r.copy()) - (0.75**2 / 2 + 0.75 * 0.25)) < 1e-12


def test_auc_handles_unsorted_input():
    a = auc_se(np.array([0.75, 0.25, 0.5]), np.array([0.3, 0.1, 0.2]))
    b = auc_se(np.array([0.25, 0.5, 0.75]), np.array([0.1, 0.2, 0.3]))
    assert a == b


# --- IR ---

def make_curve(tics, drops):
    n = len(tics)
    return SampleCurve(
        quantiles=np.linspace(0.05, 0.95, n), n_removed=np.arange(n),
        n_r=np.linspace(0, 1, n), tic=np.asarray(tics, float),
        s_e=np.asarray(drops, float), occluded_logits=np.zeros((n, 2)),
        s_orig=1.0, expectancy=0.0)


def test_information_ratio_unit_slope():
    curve = make_curve([0.2, 0.4, 0.6, 0.8], [0.2, 0.4, 0.6, 0.8])
    assert abs(information_ratio([curve]) - 1.0) < 1e-12


def test_information_ratio_skips_flat_tic():
    curve = make_curve([0.5, 0.5, 0.9], [0.1, 0.7, 0.9])
    # only the (0.5 -> 0.9) pair counts: slope (0.9-0.7)/0.4
    assert abs(information_ratio([curve]) - 0.5) < 1e-12


def test_information_ratio_no_valid_pairs():
    with pytest.raises(NoValidPairs):
        information_ratio([make_curve([0.5, 0.5], [0.1, 0.2])])


# --- per-sample and per-method evaluation ---

@pytest.fixture
def eval_setup(mlp_scorer, rng):
    x = rng.normal(size=(12, 2, 5))
    labels = np.argmax(mlp_scorer.score_batch(x), axis=1)  # all "correct"
    rel = np.abs(rng.normal(size=(12, 2, 5))) + 0.01
    exp = mlp_scorer.score_batch(x).mean(axis=0) - 1.0  # keep references non-degenerate
    return x, labels, rel, exp


def test_evaluate_sample_ascending_output(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    cfg = EvaluationConfig(occlusion="permute")
    curve = evaluate_sample(mlp_scorer, x[0], int(labels[0]), rel[0], cfg,
                            float(exp[labels[0]]), np.random.default_rng(0))
    assert np.all(np.diff(curve.quantiles) > 0)
    assert np.all(np.diff(curve.n_removed) <= 0)  # larger q -> smaller mask
    assert curve.n_r[0] == curve.n_removed[0] / x[0].size
    assert curve.occluded_logits.shape == (len(cfg.quantiles), mlp_scorer.n_classes)
    assert np.all(np.diff(curve.tic) <= 1e-12)


def test_evaluate_sample_deterministic(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    cfg = EvaluationConfig()
    a = evaluate_sample(mlp_scorer, x[0], int(labels[0]), rel[0], cfg,
                        float(exp[labels[0]]), np.random.default_rng(7))
    b = evaluate_sample(mlp_scorer, x[0], int(labels[0]), rel[0], cfg,
                        float(exp[labels[0]]), np.random.default_rng(7))
    assert np.array_equal(a.s_e, b.s_e)


def test_evaluate_method_report(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    report = evaluate_method(mlp_scorer, x, labels, rel, EvaluationConfig(seed=3), exp,
                             method_name="random")
    assert report.n_evaluated + report.n_skipped == len(x)
    assert report.n_evaluated >= 1
    assert len(report.mean_s_e) == len(DEFAULT_QUANTILES)
    assert np.isfinite(report.auc_s_e)
    d = report.to_dict()
    assert d["method"] == "random" and len(d["accuracy"]) == len(DEFAULT_QUANTILES)


def test_evaluate_method_audits_misclassified(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    wrong = labels.copy()
    wrong[0] = (wrong[0] + 1) % mlp_scorer.n_classes
    report = evaluate_method(mlp_scorer, x, wrong, rel, EvaluationConfig(), exp)
    reasons = {a["reason"] for a in report.audit}
    assert "misclassified" in reasons


def test_evaluate_method_audits_no_positive(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    rel = rel.copy()
    rel[1] = -1.0
    report = evaluate_method(mlp_scorer, x, labels, rel, EvaluationConfig(), exp)
    assert {"sample": 1, "reason": "no positive relevance"} in report.audit


def test_evaluate_method_insufficient_samples(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    with pytest.raises(InsufficientSamples):
        evaluate_method(mlp_scorer, x, labels, -np.abs(rel), EvaluationConfig(), exp)


def test_evaluate_method_flagged_below_min(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    cfg = EvaluationConfig(min_samples=500)
    report = evaluate_method(mlp_scorer, x, labels, rel, cfg, exp)
    assert report.flagged


def test_evaluate_method_hmi_present_only_with_weights(mlp_scorer, eval_setup):
    x, labels, rel, exp = eval_setup
    weights = np.ones_like(rel, dtype=np.uint8)
    with_w = evaluate_method(mlp_scorer, x, labels, rel, EvaluationConfig(), exp,
                             expert_weights=weights)
    without = evaluate_method(mlp_scorer, x, labels, rel, EvaluationConfig(), exp)
    assert with_w.hmi_mean is not None
    assert without.hmi_mean is None


def test_config_validation():
    for bad in (EvaluationConfig(quantiles=(0.5, 0.4)),
                EvaluationConfig(quantiles=(0.0, 0.5)),
                EvaluationConfig(occlusion="blur"),
                EvaluationConfig(target_policy="argmax")):
        with pytest.raises(ValueError):
            bad.validate()
