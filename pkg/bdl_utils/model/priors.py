"""
Direct and hierarchical priors over network parameters.

Hierarchical priors are evaluated through their marginal density over the weight: the
hyperparameter is integrated out, in closed form where one exists and by quadrature otherwise.
Every prior is applied i.i.d. to all entries of the flat parameter vector.
"""
import re
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from bdl_utils.autodiff import tensor as ops
from bdl_utils.autodiff.tensor import NumericError, as_tensor

LOG_2PI = math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)
BASE_TAGS = ('gaussian', 'laplace', 'cauchy')

GL_ORDER = 64
GL_PANELS = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)


def _check_positive(**params):
    for name, value in params.items():
        if not (np.isfinite(value) and value > 0):
            raise ValueError(f"Prior parameter {name} must be strictly positive, got {value!r}")


def _fmt(x):
    text = repr(float(x))
    return text[:-2] if text.endswith('.0') else text


@dataclass(frozen=True)
class StudentTParams:
    """Location, precision ``lam`` and degrees of freedom ``nu`` of a Student-t distribution."""
    location: float
    precision: float
    dof: float

    def __post_init__(self):
        _check_positive(precision=self.precision, dof=self.dof)


def student_t_logpdf(w, params):
    """
    Log density of ``St(w | location, lam, nu)`` in the precision parameterization::

        ln G((nu+1)/2) - ln G(nu/2) + 1/2 ln(lam / (pi nu)) - (nu+1)/2 ln(1 + lam (w - location)^2 / nu)
    """
    w = np.asarray(w, dtype=float)
    lam, nu = params.precision, params.dof
    const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) + 0.5 * (math.log(lam) - LOG_PI - math.log(nu))
    return const - 0.5 * (nu + 1.0) * np.log1p(lam * (w - params.location) ** 2 / nu)


def student_t_grad_logpdf(w, params):
    d = np.asarray(w, dtype=float) - params.location
    lam, nu = params.precision, params.dof
    return -(nu + 1.0) * lam * d / (nu + lam * d * d)


def marginalize_gamma(alpha_tau, beta_tau):
    """
    Integrates a Gamma(alpha_tau, beta_tau) precision out of a zero-mean Gaussian.

    Parameters
    ----------
    alpha_tau : float
        Shape of the Gamma hyperprior.
    beta_tau : float
        Rate of the Gamma hyperprior.

    Returns
    -------
    params : StudentTParams
        ``St(0, alpha_tau / beta_tau, 2 alpha_tau)``.
    """
    _check_positive(alpha_tau=alpha_tau, beta_tau=beta_tau)
    return StudentTParams(0.0, alpha_tau / beta_tau, 2.0 * alpha_tau)


@dataclass(frozen=True)
class GaussianPrior:
    mu: float = 0.0
    sigma: float = 1.0
    tag = 'gaussian'

    def __post_init__(self):
        _check_positive(sigma=self.sigma)

    def logpdf(self, w):
        z = (np.asarray(w, dtype=float) - self.mu) / self.sigma
        return -0.5 * LOG_2PI - math.log(self.sigma) - 0.5 * z * z

    def grad_logpdf(self, w):
        return -(np.asarray(w, dtype=float) - self.mu) / self.sigma ** 2

    def __str__(self):
        return f"gaussian({_fmt(self.mu)},{_fmt(self.sigma)})"


@dataclass(frozen=True)
class LaplacePrior:
    alpha: float = 0.0
    beta: float = 1.0
    tag = 'laplace'

    def __post_init__(self):
        _check_positive(beta=self.beta)

    def logpdf(self, w):
        return -math.log(2.0 * self.beta) - np.abs(np.asarray(w, dtype=float) - self.alpha) / self.beta

    def grad_logpdf(self, w):
        return -np.sign(np.asarray(w, dtype=float) - self.alpha) / self.beta

    def __str__(self):
        return f"laplace({_fmt(self.alpha)},{_fmt(self.beta)})"


@dataclass(frozen=True)
class CauchyPrior:
    alpha: float = 0.0
    beta: float = 1.0
    tag = 'cauchy'

    def __post_init__(self):
        _check_positive(beta=self.beta)

    def logpdf(self, w):
        z = (np.asarray(w, dtype=float) - self.alpha) / self.beta
        return -LOG_PI - math.log(self.beta) - np.log1p(z * z)

    def grad_logpdf(self, w):
        z = (np.asarray(w, dtype=float) - self.alpha) / self.beta
        return -2.0 * z / (self.beta * (1.0 + z * z))

    def __str__(self):
        return f"cauchy({_fmt(self.alpha)},{_fmt(self.beta)})"


@dataclass(frozen=True)
class HierGaussianGammaPrior:
    """Zero-mean Gaussian whose precision carries a Gamma(alpha_tau, beta_tau) hyperprior."""
    alpha_tau: float = 1.0
    beta_tau: float = 1.0
    tag = 'hier-gauss-gamma'

    def __post_init__(self):
        _check_positive(alpha_tau=self.alpha_tau, beta_tau=self.beta_tau)

    @property
    def marginal(self):
        return marginalize_gamma(self.alpha_tau, self.beta_tau)

    def logpdf(self, w):
        return student_t_logpdf(w, self.marginal)

    def grad_logpdf(self, w):
        return student_t_grad_logpdf(w, self.marginal)

    def __str__(self):
        return f"hier-gauss-gamma({_fmt(self.alpha_tau)},{_fmt(self.beta_tau)})"


@dataclass(frozen=True)
class HierScaleIGPrior:
    """
    Zero-centred base density with an Inverse-Gamma(alpha, beta) hyperprior.

    The hyperprior sits on the variance for the Gaussian base (which makes the marginal an exact
    Student-t) and on the scale ``beta`` for the Laplace and Cauchy bases.
    """
    base: str = 'gaussian'
    alpha: float = 1.0
    beta: float = 1.0
    tag = 'hier'

    def __post_init__(self):
        if self.base not in BASE_TAGS:
            raise ValueError(f"Unknown base density {self.base!r}. Supported: {', '.join(BASE_TAGS)}.")
        _check_positive(alpha=self.alpha, beta=self.beta)

    def logpdf(self, w):
        w = np.asarray(w, dtype=float)
        if self.base == 'gaussian':
            return student_t_logpdf(w, marginalize_gamma(self.alpha, self.beta))
        if self.base == 'laplace':
            return laplace_ig_logpdf(w, self.alpha, self.beta)
        return _marginal_quadrature(self.base, self.alpha, self.beta, w)[0].reshape(w.shape)

    def grad_logpdf(self, w):
        w = np.asarray(w, dtype=float)
        if self.base == 'gaussian':
            return student_t_grad_logpdf(w, marginalize_gamma(self.alpha, self.beta))
        if self.base == 'laplace':
            return -(self.alpha + 1.0) * np.sign(w) / (self.beta + np.abs(w))
        return _marginal_quadrature(self.base, self.alpha, self.beta, w)[1].reshape(w.shape)

    def __str__(self):
        return f"hier({self.base},ig({_fmt(self.alpha)},{_fmt(self.beta)}))"


def laplace_ig_logpdf(w, alpha, beta):
    """
    Closed-form marginal of a zero-mean Laplace with IG(alpha, beta) on its scale:
    a beta^a / (2 (beta+|w|)^(a+1)).
    """
    w = np.asarray(w, dtype=float)
    return math.log(alpha) + alpha * math.log(beta) - math.log(2.0) - (alpha + 1.0) * np.log(beta + np.abs(w))


def _log_base(base, w, s):
    if base == 'gaussian':
        return -0.5 * (LOG_2PI + np.log(s)) - 0.5 * w * w / s
    if base == 'laplace':
        return -np.log(2.0 * s) - np.abs(w) / s
    return -LOG_PI - np.log(s) - np.log1p((w / s) ** 2)


def _dlog_base_dw(base, w, s):
    if base == 'gaussian':
        return -w / s
    if base == 'laplace':
        return -np.sign(w) / s
    return -2.0 * w / (s * s + w * w)


def _marginal_quadrature(base, alpha, beta, w):
    """
    Log marginal density and its derivative in ``w`` by Gauss-Legendre quadrature on ``u = ln s``.

    The axis is cut where the integrand has fallen below ``e^-40`` of its peak on both sides and
    covered by ``GL_PANELS`` panels of ``GL_ORDER`` nodes each.
    """
    if base not in BASE_TAGS:
        raise ValueError(f"Unknown base density {base!r}. Supported: {', '.join(BASE_TAGS)}.")
    _check_positive(alpha=alpha, beta=beta)
    w = np.asarray(w, dtype=float).reshape(-1, 1)
    tail_power = 0.5 if base == 'gaussian' else 1.0  # IG on the variance vs. on the scale
    reach = (2.0 if base == 'gaussian' else 1.0) * np.log(np.maximum(np.abs(w), 1e-300))

    u_lo = np.full_like(w, math.log(beta) - math.log(60.0 + 10.0 * alpha))
    u_hi = np.maximum(math.log(beta / alpha), reach) + 40.0 / (alpha + tail_power) + 2.0

    edges = u_lo + (u_hi - u_lo) * np.linspace(0.0, 1.0, GL_PANELS + 1)[None, :]
    half = 0.5 * (edges[:, 1:] - edges[:, :-1])
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    u = (mid[:, :, None] + half[:, :, None] * _GL_NODES[None, None, :]).reshape(w.shape[0], -1)
    log_wts = (np.log(half)[:, :, None] + np.log(_GL_WEIGHTS)[None, None, :]).reshape(w.shape[0], -1)

    s = np.exp(u)
    with np.errstate(over='ignore', divide='ignore'):
        log_ig = alpha * math.log(beta) - gammaln(alpha) - (alpha + 1.0) * u - beta / s
        log_terms = _log_base(base, w, s) + log_ig + u + log_wts
        log_p = logsumexp(log_terms, axis=1)
        post = np.exp(log_terms - log_p[:, None])
        dlog_p = np.sum(post * _dlog_base_dw(base, w, s), axis=1)

    if not (np.all(np.isfinite(log_p)) and np.all(np.isfinite(dlog_p))):
        raise NumericError(f"Quadrature of the {base}-IG({alpha}, {beta}) marginal is not finite")
    return log_p, dlog_p


def log_marginal_numeric(base, alpha, beta, w):
    """
    Log of ``int p(w | s) IG(s | alpha, beta) ds`` by fixed Gauss-Legendre quadrature.

    Parameters
    ----------
    base : str
        ``gaussian`` (``s`` is the variance), ``laplace`` or ``cauchy`` (``s`` is the scale).
    alpha : float
        Inverse-Gamma shape.
    beta : float
        Inverse-Gamma scale.
    w : float
        The weight value.

    Returns
    -------
    log_p : float
        The log marginal density at ``w``.
    """
    return float(_marginal_quadrature(base, alpha, beta, w)[0][0])


def log_prior(prior, omega):
    """
    Sum of the per-weight log prior density over all entries of ``omega``.

    Parameters
    ----------
    prior : PriorSpec
        One of the prior classes of this module.
    omega : Tensor or array_like
        The weights. Tracked tensors keep the result differentiable.

    Returns
    -------
    value : Tensor
        A scalar tensor. The sum is correctly rounded, so it does not depend on the entry order.
    """
    return ops.fsum(ops.apply_unary(as_tensor(omega), prior.logpdf, prior.grad_logpdf, tag=f'log_prior:{prior.tag}'))


PRIOR_CLASSES = {
    'gaussian': GaussianPrior,
    'normal': GaussianPrior,
    'laplace': LaplacePrior,
    'cauchy': CauchyPrior,
    'hier-gauss-gamma': HierGaussianGammaPrior,
}

_NUM = r'\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*'
_SIMPLE = re.compile(r'^\s*([a-z-]+)\s*\(' + _NUM + ',' + _NUM + r'\)\s*$')
_HIER = re.compile(r'^\s*hier\s*\(\s*([a-z]+)\s*,\s*ig\s*\(' + _NUM + ',' + _NUM + r'\)\s*\)\s*$')


def parse_prior(text):
    """
    Parses a prior string.

    Parameters
    ----------
    text : str
        ``none``, ``gaussian(m,s)``, ``laplace(a,b)``, ``cauchy(a,b)``, ``hier-gauss-gamma(a,b)``
        or ``hier(<base>,ig(a,b))``.

    Returns
    -------
    prior : PriorSpec or None
        ``None`` for ``none`` (deterministic training).
    """
    text = str(text).strip().lower()
    if text in ('none', ''):
        return None
    m = _HIER.match(text)
    if m:
        return HierScaleIGPrior(m.group(1), float(m.group(2)), float(m.group(3)))
    m = _SIMPLE.match(text)
    if m and m.group(1) in PRIOR_CLASSES:
        return PRIOR_CLASSES[m.group(1)](float(m.group(2)), float(m.group(3)))
    raise ValueError(
        f"Invalid prior {text!r}. Expected none, gaussian(m,s), laplace(a,b), cauchy(a,b), "
        "hier-gauss-gamma(a,b) or hier(<gaussian|laplace|cauchy>,ig(a,b))."
    )


# The six priors compared on the classification benchmark.
MOONS_PRIORS = (
    'gaussian(0,1)', 'laplace(0,1)', 'cauchy(1,1)',
    'hier(gaussian,ig(1,1))', 'hier(laplace,ig(1,1))', 'hier(cauchy,ig(1,1))',
)
