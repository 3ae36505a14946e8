"""
Unit tests for the predictive module.
"""
import logging

import numpy as np
import pytest

from bdl_utils.autodiff.tensor import ShapeError
from bdl_utils.inference import predictive
from bdl_utils.inference.predictive import (
    credible_interval, predict_samples, predictive_mean, predictive_variance, summarize
)
from bdl_utils.inference.variational import VariationalState, inverse_softplus
from bdl_utils.model.network import NetworkSpec, forward, init_params


def _linear_state(mu, sigma, tau_eps=4.0):
    mu = np.asarray(mu, dtype=float)
    return VariationalState(mu, inverse_softplus(np.asarray(sigma, dtype=float)), tau_eps)


def test_predict_samples_shapes():
    spec = NetworkSpec.build([2, 4, 3], 'tanh', 'softmax')
    rng = np.random.default_rng(0)
    vs = VariationalState.initialize(spec, rng, 1.0)
    samples = predict_samples(spec, vs, rng.normal(size=(5, 2)), k=7, rng=rng, task='classification')
    assert samples.shape == (7, 5, 3)
    np.testing.assert_allclose(samples.sum(axis=-1), 1.0, atol=1e-12)


def test_predict_samples_applies_softmax_for_classification():
    spec = NetworkSpec([2, 2], ('identity',))
    vs = VariationalState.point_mass(np.zeros(6))
    samples = predict_samples(spec, vs, np.ones((3, 2)), k=2, rng=np.random.default_rng(1), task='classification')
    np.testing.assert_array_equal(samples, np.full((2, 3, 2), 0.5))


def test_point_mass_draws_are_identical():
    spec = NetworkSpec.build([1, 5, 1])
    rng = np.random.default_rng(2)
    params = init_params(spec, rng)
    x = np.linspace(-2.0, 2.0, 6).reshape(-1, 1)
    samples = predict_samples(spec, VariationalState.point_mass(params, 2.0), x, k=4, rng=rng)
    for draw in samples:
        np.testing.assert_array_equal(draw, forward(spec, params, x).numpy())
    np.testing.assert_array_equal(predictive_variance(samples, 2.0, full=False), np.full((6, 1), 0.5))


def test_predict_samples_errors():
    spec = NetworkSpec.build([2, 3, 1])
    vs = VariationalState.initialize(spec, np.random.default_rng(3))
    with pytest.raises(ValueError, match='At least one'):
        predict_samples(spec, vs, np.zeros((1, 2)), k=0, rng=np.random.default_rng(0))
    with pytest.raises(ValueError, match='random generator'):
        predict_samples(spec, vs, np.zeros((1, 2)), k=3)
    with pytest.raises(ShapeError):
        predict_samples(spec, vs, np.zeros((1, 3)), k=3, rng=np.random.default_rng(0))


def test_predictive_moments_of_linear_model():
    # y = b + w x with independent Gaussian b and w.
    spec = NetworkSpec([1, 1], ('identity',))
    vs = _linear_state([0.5, -1.0], [0.3, 0.2], tau_eps=4.0)
    x = np.array([[0.0], [1.0], [-2.0]])
    samples = predict_samples(spec, vs, x, k=20000, rng=np.random.default_rng(4))
    np.testing.assert_allclose(predictive_mean(samples)[:, 0], 0.5 - x[:, 0], atol=0.02)
    expected = 0.3 ** 2 + 0.2 ** 2 * x[:, 0] ** 2 + 0.25
    np.testing.assert_allclose(predictive_variance(samples, 4.0, full=False)[:, 0], expected, rtol=0.05)


def test_predictive_variance_full_and_diagonal_agree():
    rng = np.random.default_rng(5)
    samples = rng.normal(size=(200, 4, 3))
    full = predictive_variance(samples, 2.0)
    diag = predictive_variance(samples, 2.0, full=False)
    assert full.shape == (4, 3, 3)
    np.testing.assert_allclose(np.diagonal(full, axis1=-2, axis2=-1), diag, rtol=1e-12)
    np.testing.assert_array_equal(full, np.swapaxes(full, -1, -2))
    assert np.all(np.linalg.eigvalsh(full) >= 0.5 - 1e-12)


def test_predictive_variance_matches_definition():
    rng = np.random.default_rng(6)
    samples = rng.normal(size=(50, 2))
    mean = samples.mean(axis=0)
    direct = np.eye(2) / 3.0 + np.mean([np.outer(s, s) for s in samples], axis=0) - np.outer(mean, mean)
    np.testing.assert_allclose(predictive_variance(samples, 3.0), direct, rtol=1e-10, atol=1e-12)
    assert np.all(predictive_variance(samples, None, full=False) >= 0)


def test_credible_interval():
    samples = np.arange(101.0).reshape(-1, 1)
    lo, hi = credible_interval(samples, 0.9)
    np.testing.assert_allclose(lo, [5.0])
    np.testing.assert_allclose(hi, [95.0])
    rng = np.random.default_rng(7)
    draws = rng.normal(size=(4000, 3, 1))
    lo, hi = credible_interval(draws, 0.5)
    assert np.all(lo <= np.median(draws, axis=0)) and np.all(np.median(draws, axis=0) <= hi)
    for level in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            credible_interval(draws, level)
    with pytest.raises(ValueError, match='two draws'):
        credible_interval(draws[:1], 0.9)


def test_summarize_regression_frame():
    rng = np.random.default_rng(8)
    samples = rng.normal(size=(30, 4, 1))
    summary = summarize(samples, tau_eps=2.0, levels=(0.95, 0.5))
    assert summary.n_draws == 30
    assert summary.tau_eps == 2.0
    assert sorted(summary.intervals) == [0.5, 0.95]
    assert np.all(summary.variance >= 0.5 - 1e-12)
    frame = summary.to_frame(np.arange(4.0))
    assert list(frame.columns) == ['x1', 'mean_y1', 'var_y1', 'lo0.95_y1', 'hi0.95_y1', 'lo0.5_y1', 'hi0.5_y1']
    np.testing.assert_array_equal(frame['mean_y1'], summary.mean[:, 0])


def test_summarize_classification_ignores_noise():
    probs = np.array([[[0.2, 0.8]], [[0.4, 0.6]]])
    summary = summarize(probs, tau_eps=5.0, levels=(), task='classification')
    assert summary.tau_eps is None
    np.testing.assert_allclose(summary.mean, [[0.3, 0.7]])
    np.testing.assert_allclose(summary.variance, [[0.01, 0.01]])
    assert list(summary.to_frame([[1.0, 2.0]]).columns) == ['x1', 'x2', 'mean_p1', 'var_p1', 'mean_p2', 'var_p2']


def test_summarize_single_draw_omits_intervals(caplog):
    with caplog.at_level(logging.WARNING, logger=predictive.__name__):
        summary = summarize(np.ones((1, 3, 1)), tau_eps=1.0)
    assert summary.intervals == {}
    assert 'intervals are omitted' in caplog.text
    np.testing.assert_array_equal(summary.variance, np.ones((3, 1)))


def test_sample_vector_counts_as_one_output():
    np.testing.assert_array_equal(predictive_mean([0.0, 2.0]), [1.0])
    np.testing.assert_allclose(predictive_variance([0.0, 2.0], 2.0), [[1.5]])
    np.testing.assert_allclose(predictive_variance([0.0, 2.0], None, full=False), [1.0])
    with pytest.raises(ValueError, match='non-empty'):
        predictive_mean([])


def test_mean_error_shrinks_with_more_draws():
    # 200 outputs with identical independent weights: their predictive means are i.i.d. replicates.
    n_out = 200
    spec = NetworkSpec([1, n_out], ('identity',))
    vs = _linear_state(np.full(2 * n_out, 0.5), np.full(2 * n_out, 0.3))
    x = np.array([[1.0]])
    spread = {}
    for k, seed in ((100, 11), (10000, 12)):
        means = predictive_mean(predict_samples(spec, vs, x, k=k, rng=np.random.default_rng(seed)))
        spread[k] = np.std(means, ddof=1)
        assert spread[k] == pytest.approx(np.sqrt(2 * 0.3 ** 2 / k), rel=0.25)
    assert 10.0 / 1.5 <= spread[100] / spread[10000] <= 10.0 * 1.5
