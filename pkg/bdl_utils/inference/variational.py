"""
Mean-field Gaussian variational inference over the flat parameter vector.

The proxy posterior is ``q(w) = prod_i N(w_i | mu_i, sigma_i^2)`` with ``sigma = softplus(rho)``.
Samples are reparameterized as ``w = mu + softplus(rho) * eps`` with ``eps ~ N(0, I)``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from bdl_utils.autodiff import tensor as ops
from bdl_utils.autodiff.tensor import Tape, Tensor, ShapeError, as_tensor, backward
from bdl_utils.model.network import forward, init_params, param_count
from bdl_utils.model.priors import log_prior

LOG_2PI = math.log(2.0 * math.pi)
SIGMA_INIT = 0.05
# softplus(-1000) is exactly 0.0 in float64: a point mass at mu.
DEGENERATE_RHO = -1000.0


def softplus(x):
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


def inverse_softplus(s):
    s = np.asarray(s, dtype=float)
    return s + np.log(-np.expm1(-s))


@dataclass
class VariationalState:
    """
    Parameters of the mean-field Gaussian proxy.

    Parameters
    ----------
    mu : np.ndarray or Tensor
        Means, one per network parameter.
    rho : np.ndarray or Tensor
        Unconstrained scales; the standard deviations are ``softplus(rho)``.
    tau_eps : float
        Observation-noise precision (regression only).
    """
    mu: np.ndarray
    rho: np.ndarray
    tau_eps: float = 1.0

    def __post_init__(self):
        if not isinstance(self.mu, Tensor):
            self.mu = np.array(self.mu, dtype=float).reshape(-1)
        if not isinstance(self.rho, Tensor):
            self.rho = np.array(self.rho, dtype=float).reshape(-1)
        if self.mu.shape != self.rho.shape:
            raise ShapeError(f"mu and rho must have the same shape, got {self.mu.shape} and {self.rho.shape}")
        if not self.tau_eps > 0:
            raise ValueError(f"tau_eps must be positive, got {self.tau_eps!r}")

    @classmethod
    def initialize(cls, spec, rng, tau_eps=1.0, sigma0=SIGMA_INIT):
        """Means from N(0, 1/fan_in), all standard deviations equal to ``sigma0``."""
        mu = init_params(spec, rng)
        return cls(mu, np.full(mu.shape, float(inverse_softplus(sigma0))), tau_eps)

    @classmethod
    def point_mass(cls, flat, tau_eps=1.0):
        """A degenerate state whose samples all equal ``flat``."""
        flat = np.asarray(flat, dtype=float).reshape(-1)
        return cls(flat, np.full(flat.shape, DEGENERATE_RHO), tau_eps)

    @property
    def n_params(self):
        return self.mu.shape[0]

    @property
    def sigma(self):
        return softplus(np.asarray(self.rho))

    def copy(self):
        return VariationalState(np.array(self.mu, dtype=float), np.array(self.rho, dtype=float), self.tau_eps)

    def flat(self):
        """The concatenated ``(mu, rho)`` vector optimized during training."""
        return np.concatenate([np.asarray(self.mu), np.asarray(self.rho)])

    def set_flat(self, vec):
        n = self.n_params
        self.mu, self.rho = np.array(vec[:n], dtype=float), np.array(vec[n:], dtype=float)


@dataclass(frozen=True)
class ElboEstimate:
    """
    A Monte Carlo ELBO estimate. ``elbo == data_term - kl_term`` holds exactly.

    ``stderr`` is the standard error over the per-sample values (0 for a single sample).
    """
    elbo: float
    data_term: float
    kl_term: float
    samples_used: int
    stderr: float = 0.0

    @classmethod
    def from_samples(cls, data_values, kl_values):
        data_values, kl_values = np.asarray(data_values), np.asarray(kl_values)
        n = data_values.size
        data_term, kl_term = float(np.mean(data_values)), float(np.mean(kl_values))
        stderr = float(np.std(data_values - kl_values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(data_term - kl_term, data_term, kl_term, n, stderr)


@dataclass(frozen=True)
class ElboGradient:
    """Gradients of the ELBO (ascent direction) with respect to ``mu`` and ``rho``."""
    mu: np.ndarray
    rho: np.ndarray
    estimate: ElboEstimate = field(repr=False)

    @property
    def flat(self):
        return np.concatenate([self.mu, self.rho])


def sample_weights(vs, eps):
    """
    Reparameterized draw ``w = mu + softplus(rho) * eps``.

    Parameters
    ----------
    vs : VariationalState
        The proxy. If ``mu``/``rho`` are tracked tensors the draw is differentiable in them.
    eps : array_like
        Standard-normal noise of the same length as ``mu``.

    Returns
    -------
    omega : Tensor
    """
    mu, rho = as_tensor(vs.mu), as_tensor(vs.rho)
    eps = np.asarray(eps.data if isinstance(eps, Tensor) else eps, dtype=float)
    if eps.shape != mu.shape:
        raise ShapeError(f"eps has shape {eps.shape} but mu has shape {mu.shape}")
    return mu + ops.softplus(rho) * eps


def log_q(vs, omega):
    """``sum_i ln N(omega_i | mu_i, sigma_i^2)`` as a scalar tensor."""
    mu, rho, omega = as_tensor(vs.mu), as_tensor(vs.rho), as_tensor(omega)
    if omega.shape != mu.shape:
        raise ShapeError(f"omega has shape {omega.shape} but mu has shape {mu.shape}")
    sigma = ops.softplus(rho)
    z = (omega - mu) / sigma
    return ops.fsum((-0.5 * LOG_2PI) - ops.ln(sigma) - 0.5 * ops.square(z))


def gaussian_kl(mu_q, sigma_q, mu_p, sigma_p):
    """Closed-form ``KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2))`` summed over entries."""
    mu_q, sigma_q = np.asarray(mu_q, dtype=float), np.asarray(sigma_q, dtype=float)
    return float(np.sum(
        np.log(sigma_p / sigma_q) + (sigma_q ** 2 + (mu_q - mu_p) ** 2) / (2.0 * sigma_p ** 2) - 0.5
    ))


def log_likelihood(spec, omega, batch, tau_eps=1.0, task=None):
    """
    Log-likelihood of a batch under the weights ``omega``.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    omega : Tensor or array_like
        Flat weights.
    batch : Dataset
        A non-empty batch.
    tau_eps : float, Optional
        Noise precision (regression).
    task : str, Optional
        ``regression`` (Gaussian) or ``classification`` (categorical through a softmax).
        Defaults to the batch's task.

    Returns
    -------
    value : Tensor
        A scalar tensor.
    """
    task = batch.task if task is None else task
    if len(batch) == 0:
        raise ValueError("The batch is empty")
    if task == 'regression':
        if not tau_eps > 0:
            raise ValueError(f"tau_eps must be positive, got {tau_eps!r}")
        out = forward(spec, omega, batch.X)
        if batch.y.shape != out.shape:
            raise ShapeError(f"Targets of shape {batch.y.shape} do not match network outputs {out.shape}")
        sq = ops.reduce_sum(ops.square(out - batch.y))
        return 0.5 * math.log(tau_eps / (2.0 * math.pi)) * batch.y.size - (0.5 * tau_eps) * sq
    if task == 'classification':
        labels = np.asarray(batch.y, dtype=int).reshape(-1)
        if np.any(labels < 0) or np.any(labels >= spec.n_outputs):
            raise ValueError(f"Labels out of range for a network with {spec.n_outputs} outputs")
        logits = forward(spec, omega, batch.X, return_logits=True)
        return ops.reduce_sum(ops.take_rows(ops.log_softmax_rows(logits), labels))
    raise ValueError(f"Unknown task {task!r}. Supported: regression, classification.")


def _check_estimator_args(spec, vs, batch, n_total, n_samples):
    m = len(batch)
    if m < 1:
        raise ValueError("The batch is empty")
    if m > n_total:
        raise ValueError(f"The batch size M={m} exceeds the dataset size N={n_total}")
    if n_samples < 1:
        raise ValueError(f"At least one Monte Carlo sample is needed, got S={n_samples}")
    if vs.n_params != param_count(spec):
        raise ShapeError(f"The state holds {vs.n_params} parameters, the network needs {param_count(spec)}")
    return m


def _noise(rng, n_samples, n_params, eps):
    if eps is not None:
        eps = np.asarray(eps, dtype=float).reshape(n_samples, n_params)
        return eps
    if rng is None:
        raise ValueError("Either rng or eps must be given")
    return rng.standard_normal((n_samples, n_params))


def _elbo_graph(spec, vs, prior, batch, n_total, eps, task):
    """Builds the S-sample ELBO on whatever tape ``vs.mu``/``vs.rho`` live on."""
    scale = n_total / len(batch)
    data_sum, kl_sum = 0.0, 0.0
    data_values, kl_values = [], []
    for e in eps:
        omega = sample_weights(vs, e)
        data_s = log_likelihood(spec, omega, batch, vs.tau_eps, task) * scale
        kl_s = log_q(vs, omega) - log_prior(prior, omega)
        data_values.append(data_s.item())
        kl_values.append(kl_s.item())
        data_sum = data_sum + data_s
        kl_sum = kl_sum + kl_s
    objective = (data_sum - kl_sum) / float(len(eps))
    return objective, ElboEstimate.from_samples(data_values, kl_values)


def elbo_minibatch(spec, vs, prior, batch, n_total, n_samples=1, rng=None, task=None, eps=None):
    """
    Mini-batch Monte Carlo estimate of the ELBO.

    ``(1/S) sum_s [ (N/M) ln p(batch | w_s) + ln p(w_s) - ln q(w_s) ]`` with reparameterized
    draws ``w_s``; the KL term ``(1/S) sum_s [ln q(w_s) - ln p(w_s)]`` uses the same draws.

    Parameters
    ----------
    spec : NetworkSpec
    vs : VariationalState
    prior : PriorSpec
    batch : Dataset
        The mini-batch (``M = len(batch)``).
    n_total : int
        Size ``N`` of the full training set.
    n_samples : int, Optional
        Number of Monte Carlo samples ``S``. The default is 1.
    rng : np.random.Generator, Optional
        Source of the noise draws.
    task : str, Optional
        Defaults to the batch's task.
    eps : array_like, Optional
        Explicit ``S x P`` noise, for common-random-number comparisons.

    Returns
    -------
    estimate : ElboEstimate
    """
    _check_estimator_args(spec, vs, batch, n_total, n_samples)
    eps = _noise(rng, n_samples, vs.n_params, eps)
    plain = VariationalState(np.asarray(vs.mu), np.asarray(vs.rho), vs.tau_eps)
    return _elbo_graph(spec, plain, prior, batch, n_total, eps, task)[1]


def elbo_grad_pathwise(spec, vs, prior, batch, n_total, n_samples=1, rng=None, task=None, eps=None):
    """
    Reparameterization (pathwise) gradient of the S-sample ELBO estimate.

    The arguments are those of :func:`elbo_minibatch`.

    Returns
    -------
    grad : ElboGradient
        Gradients with respect to ``mu`` and ``rho`` plus the ELBO estimate they belong to.
    """
    _check_estimator_args(spec, vs, batch, n_total, n_samples)
    eps = _noise(rng, n_samples, vs.n_params, eps)
    with Tape() as tape:
        mu_t, rho_t = tape.watch(np.asarray(vs.mu)), tape.watch(np.asarray(vs.rho))
        objective, estimate = _elbo_graph(
            spec, VariationalState(mu_t, rho_t, vs.tau_eps), prior, batch, n_total, eps, task
        )
    grads = backward(objective)
    return ElboGradient(grads[mu_t].numpy(), grads[rho_t].numpy(), estimate)


def elbo_grad_score(spec, vs, prior, batch, n_total, n_samples=1, rng=None, task=None, eps=None):
    """
    Score-function (log-derivative) gradient of the ELBO.

    ``(1/S) sum_s [ grad ln q(w_s) * A(w_s) + grad A(w_s) ]`` where
    ``A(w) = (N/M) ln p(batch | w) + ln p(w) - ln q(w)`` and the draws ``w_s`` are held fixed
    with respect to the variational parameters. Kept for estimator-variance comparisons.
    """
    _check_estimator_args(spec, vs, batch, n_total, n_samples)
    eps = _noise(rng, n_samples, vs.n_params, eps)
    scale = n_total / len(batch)
    mu, rho = np.asarray(vs.mu, dtype=float), np.asarray(vs.rho, dtype=float)
    sigma = softplus(rho)
    grad_mu, grad_rho = np.zeros_like(mu), np.zeros_like(rho)
    data_values, kl_values = [], []
    for e in eps:
        omega = Tensor(mu + sigma * e)
        ll = log_likelihood(spec, omega, batch, vs.tau_eps, task).item()
        lp = log_prior(prior, omega).item()
        with Tape() as tape:
            mu_t, rho_t = tape.watch(mu), tape.watch(rho)
            lq = log_q(VariationalState(mu_t, rho_t, vs.tau_eps), omega)
        score = backward(lq)
        weight = scale * ll + lp - lq.item()
        # grad A at fixed w is -grad ln q, hence the (A - 1) factor.
        grad_mu += score[mu_t].data * (weight - 1.0)
        grad_rho += score[rho_t].data * (weight - 1.0)
        data_values.append(scale * ll)
        kl_values.append(lq.item() - lp)
    n = float(len(eps))
    return ElboGradient(grad_mu / n, grad_rho / n, ElboEstimate.from_samples(data_values, kl_values))
