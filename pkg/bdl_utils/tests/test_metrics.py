"""
Unit tests for the metrics module.
"""
import math

import numpy as np
import pytest
from scipy import stats

from bdl_utils.analysis import metrics
from bdl_utils.analysis.datasets import Dataset
from bdl_utils.analysis.metrics import MetricReport, UndefinedMetricError
from bdl_utils.inference.predictive import summarize
from bdl_utils.inference.variational import VariationalState
from bdl_utils.model.network import NetworkSpec


def test_r2():
    assert metrics.r2([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0
    assert metrics.r2([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]) == 0.0
    assert metrics.r2([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-3.0)
    with pytest.raises(UndefinedMetricError):
        metrics.r2([2.0, 2.0], [1.0, 3.0])
    with pytest.raises(ValueError, match='entries'):
        metrics.r2([1.0, 2.0], [1.0])


def test_rmse():
    assert metrics.rmse([0.0, 0.0], [3.0, -4.0]) == pytest.approx(math.sqrt(12.5))
    assert metrics.rmse([[1.0], [2.0]], [1.0, 2.0]) == 0.0
    with pytest.raises(ValueError):
        metrics.rmse([], [])


def test_accuracy_and_ties():
    probs = np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]])
    np.testing.assert_array_equal(metrics.predicted_labels(probs), [0, 0, 1])
    assert metrics.accuracy([0, 1, 1], probs) == pytest.approx(2.0 / 3.0)
    with pytest.raises(ValueError, match='sum to 1'):
        metrics.accuracy([0], [[0.7, 0.7]])
    with pytest.raises(ValueError, match='labels'):
        metrics.accuracy([0, 1], [[1.0, 0.0]])


def test_coverage():
    lo, hi = np.array([0.0, 0.0, 0.0, 0.0]), np.array([1.0, 1.0, 1.0, 1.0])
    assert metrics.coverage([0.0, 0.5, 1.0, 2.0], (lo, hi)) == 0.75
    assert metrics.coverage([[0.5], [3.0]], (0.0, 1.0)) == 0.5


def test_log_predictive_density_regression():
    ds = Dataset([[0.0], [1.0]], [[0.0], [1.0]])
    # Every draw predicts the truth exactly.
    samples = np.tile(ds.y, (3, 1, 1))
    expected = stats.norm(0.0, 1.0 / math.sqrt(2.0)).logpdf(0.0)
    assert metrics.log_predictive_density(ds, samples, 2.0) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError, match='noise precision'):
        metrics.log_predictive_density(ds, samples, None)


def test_log_predictive_density_averages_over_draws():
    ds = Dataset([[0.0]], [[0.0]])
    samples = np.array([[[0.0]], [[1.0]]])
    dist = stats.norm(0.0, 1.0)
    expected = math.log(0.5 * (dist.pdf(0.0) + dist.pdf(1.0)))
    assert metrics.log_predictive_density(ds, samples, 1.0) == pytest.approx(expected, rel=1e-12)


def test_log_predictive_density_classification():
    ds = Dataset([[0.0], [1.0]], [0, 1], task='classification')
    samples = np.array([[[0.8, 0.2], [0.4, 0.6]], [[0.6, 0.4], [0.2, 0.8]]])
    expected = 0.5 * (math.log(0.7) + math.log(0.7))
    assert metrics.log_predictive_density(ds, samples) == pytest.approx(expected, rel=1e-12)


def test_test_log_likelihood_of_point_mass():
    spec = NetworkSpec([1, 1], ('identity',))
    ds = Dataset([[1.0], [-1.0]], [[2.0], [0.0]])
    vs = VariationalState.point_mass([1.0, 1.0], tau_eps=1.0)
    value = metrics.test_log_likelihood(spec, vs, ds, k=5, rng=np.random.default_rng(0))
    assert value == pytest.approx(-0.5 * math.log(2.0 * math.pi), rel=1e-12)


def test_metric_report_regression():
    ds = Dataset([[0.0], [1.0], [2.0]], [[0.0], [1.0], [2.0]])
    rng = np.random.default_rng(1)
    samples = ds.y[np.newaxis] + 0.1 * rng.standard_normal((200, 3, 1))
    report = MetricReport.from_summary(ds, summarize(samples, tau_eps=100.0, levels=(0.9,)))
    assert report.r2 > 0.99 and report.rmse < 0.05
    assert report.accuracy is None
    assert 0.0 <= report.coverage[0.9] <= 1.0
    assert math.isfinite(report.test_loglik)
    lines = report.lines()
    assert lines[0].startswith('r2: ') and lines[-1].startswith('coverage at 0.9: ')


def test_metric_report_constant_targets_skip_r2():
    ds = Dataset([[0.0], [1.0]], [[1.0], [1.0]])
    report = MetricReport.from_summary(ds, summarize(np.ones((2, 2, 1)), tau_eps=1.0))
    assert report.r2 is None
    assert report.rmse == 0.0


def test_metric_report_classification():
    ds = Dataset([[0.0], [1.0]], [0, 1], task='classification')
    samples = np.array([[[0.8, 0.2], [0.4, 0.6]], [[0.6, 0.4], [0.2, 0.8]]])
    report = MetricReport.from_summary(ds, summarize(samples, task='classification'))
    assert report.accuracy == 1.0
    assert report.r2 is None and report.coverage == {}
    assert report.test_loglik == pytest.approx(math.log(0.7), rel=1e-12)
