"""
Unit tests for the priors module.
"""
import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gammaln

from bdl_utils.autodiff import tensor as ops
from bdl_utils.model import priors
from bdl_utils.model.priors import (
    CauchyPrior, GaussianPrior, HierGaussianGammaPrior, HierScaleIGPrior, LaplacePrior, StudentTParams,
    log_marginal_numeric, log_prior, marginalize_gamma, parse_prior, student_t_logpdf
)


def _gaussian_gamma_density(w, alpha, beta):
    """int N(w | 0, 1/tau) Gamma(tau | alpha, beta) dtau by adaptive quadrature."""
    def integrand(tau):
        log_f = (0.5 * math.log(tau / (2.0 * math.pi)) - 0.5 * tau * w * w
                 + alpha * math.log(beta) - gammaln(alpha) + (alpha - 1.0) * math.log(tau) - beta * tau)
        return math.exp(log_f)
    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    return value


def _scale_ig_density(base, w, alpha, beta):
    """int p(w | s) IG(s | alpha, beta) ds by adaptive quadrature on the log-scale axis."""
    def integrand(u):
        s = math.exp(u)
        if base == 'gaussian':
            log_base = -0.5 * math.log(2.0 * math.pi * s) - 0.5 * w * w / s
        elif base == 'laplace':
            log_base = -math.log(2.0 * s) - abs(w) / s
        else:
            log_base = -math.log(math.pi * s) - math.log1p((w / s) ** 2)
        log_ig = alpha * math.log(beta) - gammaln(alpha) - (alpha + 1.0) * u - beta / s
        return math.exp(log_base + log_ig + u)
    value, _ = integrate.quad(integrand, -30.0, 60.0, epsabs=1e-13, epsrel=1e-12, limit=400, points=[0.0])
    return value


def test_log_prior_direct_examples():
    assert log_prior(GaussianPrior(0.0, 1.0), [0.0]).item() == pytest.approx(-0.9189385, abs=1e-7)
    assert log_prior(LaplacePrior(0.0, 1.0), [0.0]).item() == pytest.approx(-0.6931472, abs=1e-7)
    assert log_prior(CauchyPrior(1.0, 1.0), [1.0]).item() == pytest.approx(-1.1447299, abs=1e-7)


def test_log_prior_matches_scipy():
    w = np.linspace(-4.0, 4.0, 9)
    cases = [
        (GaussianPrior(0.5, 2.0), stats.norm(0.5, 2.0)),
        (LaplacePrior(-1.0, 0.5), stats.laplace(-1.0, 0.5)),
        (CauchyPrior(1.0, 3.0), stats.cauchy(1.0, 3.0)),
        (HierGaussianGammaPrior(2.0, 3.0), stats.t(df=4.0, scale=math.sqrt(3.0 / 2.0))),
    ]
    for prior, dist in cases:
        assert log_prior(prior, w).item() == pytest.approx(dist.logpdf(w).sum(), rel=1e-12)


def test_log_prior_is_exchangeable():
    rng = np.random.default_rng(0)
    omega = rng.normal(size=101)
    perm = rng.permutation(101)
    for prior in (GaussianPrior(0.0, 0.1), LaplacePrior(0.0, 1.0)):
        assert log_prior(prior, omega).item() == log_prior(prior, omega[perm]).item()


@pytest.mark.parametrize('prior', [
    GaussianPrior(0.0, 0.7),
    LaplacePrior(0.0, 1.0),
    CauchyPrior(1.0, 1.0),
    HierGaussianGammaPrior(1.0, 1.0),
    HierScaleIGPrior('gaussian', 1.0, 1.0),
    HierScaleIGPrior('laplace', 1.0, 1.0),
    HierScaleIGPrior('cauchy', 1.0, 1.0),
])
def test_log_prior_gradient(prior):
    rng = np.random.default_rng(1)
    # Away from 0, where the Laplace-type densities have a kink.
    omega = rng.uniform(0.2, 2.0, 5) * rng.choice([-1.0, 1.0], 5)
    assert ops.finite_diff_check(lambda w: log_prior(prior, w), omega) <= 1e-5


@pytest.mark.parametrize('prior, bound', [
    (GaussianPrior(0.0, 1.0), 50.0),
    (LaplacePrior(0.0, 1.0), 50.0),
    (HierGaussianGammaPrior(1.0, 1.0), np.inf),
    (HierScaleIGPrior('laplace', 1.0, 1.0), np.inf),
])
def test_density_integrates_to_one(prior, bound):
    total, _ = integrate.quad(lambda w: math.exp(prior.logpdf(w)), -bound, bound, limit=200)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_cauchy_density_integrates_to_one():
    prior = CauchyPrior(0.0, 1.0)
    total, _ = integrate.quad(lambda w: math.exp(prior.logpdf(w)), -1e4, 1e4, limit=500, points=[0.0])
    # Mass beyond |w| = 1e4 is 2 arctan(1e-4) / pi.
    assert total + 2.0 * math.atan(1e-4) / math.pi == pytest.approx(1.0, abs=1e-4)


def test_marginalize_gamma():
    assert marginalize_gamma(1.0, 1.0) == StudentTParams(0.0, 1.0, 2.0)
    assert marginalize_gamma(2.0, 4.0) == StudentTParams(0.0, 0.5, 4.0)
    assert math.exp(student_t_logpdf(0.0, marginalize_gamma(1.0, 1.0))) == pytest.approx(1.0 / (2.0 * math.sqrt(2.0)))
    for bad in ((0.0, 1.0), (1.0, -2.0)):
        with pytest.raises(ValueError, match='strictly positive'):
            marginalize_gamma(*bad)


@pytest.mark.parametrize('alpha', [0.5, 1.0, 2.0])
@pytest.mark.parametrize('beta', [0.5, 1.0, 2.0])
def test_student_t_equals_gaussian_gamma_integral(alpha, beta):
    params = marginalize_gamma(alpha, beta)
    for w in range(-3, 4):
        direct = _gaussian_gamma_density(float(w), alpha, beta)
        assert abs(math.exp(student_t_logpdf(float(w), params)) - direct) <= 1e-6


def test_log_marginal_numeric_gaussian_base():
    closed = math.exp(student_t_logpdf(0.0, marginalize_gamma(1.0, 1.0)))
    assert abs(math.exp(log_marginal_numeric('gaussian', 1.0, 1.0, 0.0)) - closed) <= 1e-8


@pytest.mark.parametrize('base', ['gaussian', 'laplace', 'cauchy'])
def test_log_marginal_numeric_is_symmetric(base):
    for w in (0.3, 1.7, 6.0):
        assert log_marginal_numeric(base, 1.5, 0.8, w) == log_marginal_numeric(base, 1.5, 0.8, -w)


def test_log_marginal_numeric_laplace_base():
    for w in (0.0, 0.5, 3.0, -8.0):
        numeric = math.exp(log_marginal_numeric('laplace', 1.0, 1.0, w))
        assert numeric == pytest.approx(math.exp(priors.laplace_ig_logpdf(w, 1.0, 1.0)), abs=1e-8)
        assert numeric == pytest.approx(_scale_ig_density('laplace', w, 1.0, 1.0), abs=1e-8)


@pytest.mark.parametrize('alpha, beta', [(0.5, 0.5), (1.0, 1.0), (4.0, 0.5), (0.5, 4.0), (2.5, 3.0)])
def test_log_marginal_numeric_matches_adaptive_quadrature(alpha, beta):
    for base in ('gaussian', 'cauchy'):
        for w in (0.0, 0.4, -2.0, 10.0):
            numeric = math.exp(log_marginal_numeric(base, alpha, beta, w))
            assert numeric == pytest.approx(_scale_ig_density(base, w, alpha, beta), abs=1e-8)


def test_hier_scale_ig_logpdf_vectorized():
    prior = HierScaleIGPrior('cauchy', 1.0, 1.0)
    w = np.array([[0.0, 1.0], [-2.0, 5.0]])
    values = prior.logpdf(w)
    assert values.shape == (2, 2)
    assert values[1, 1] == pytest.approx(log_marginal_numeric('cauchy', 1.0, 1.0, 5.0), rel=1e-12)


@pytest.mark.parametrize('text, expected', [
    ('gaussian(0,0.1)', GaussianPrior(0.0, 0.1)),
    ('normal(0, 1)', GaussianPrior(0.0, 1.0)),
    (' Laplace(0,1) ', LaplacePrior(0.0, 1.0)),
    ('cauchy(1,1)', CauchyPrior(1.0, 1.0)),
    ('hier-gauss-gamma(1,1)', HierGaussianGammaPrior(1.0, 1.0)),
    ('hier(laplace, ig(1, 2.5))', HierScaleIGPrior('laplace', 1.0, 2.5)),
    ('none', None),
])
def test_parse_prior(text, expected):
    assert parse_prior(text) == expected


def test_parse_prior_round_trip():
    for text in priors.MOONS_PRIORS + ('gaussian(0,0.1)', 'hier-gauss-gamma(0.5,2)'):
        assert str(parse_prior(text)) == text


@pytest.mark.parametrize('text', [
    'gauss(0,1)', 'gaussian(0,-1)', 'laplace(0)', 'hier(student,ig(1,1))', 'cauchy(1,0)'
])
def test_parse_prior_errors(text):
    with pytest.raises(ValueError):
        parse_prior(text)
