"""Conjugate posteriors and their eta-generalized predictive distributions.

Every posterior function works along the last axis of ``data``, so a
``(B, n)`` stack of bootstrap data sets yields a posterior whose fields are
length-``B`` arrays.  The predictive families accept array parameters in
the same way, which keeps the calibration loop vectorized over replicates.

The predictive families expose ``logpdf``, ``pdf``, ``cdf``, ``ppf`` and
``support``.  ``ppf`` uses the special-function inverses from scipy; the
bracketed bisection in :func:`gprc.predictive.predictive_quantile` is the
independent route and is the one used when a quantile must be certified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaincinv, betaln, gammaln, stdtr, stdtrit

from ._normal import norm_cdf, norm_logpdf, norm_ppf
from .errors import DomainError, InsufficientDataError, InvalidParameterError

__all__ = [
    "GammaPosterior",
    "NormalPosterior",
    "NIGPosterior",
    "GeneralizedBetaPrime",
    "NormalPredictive",
    "StudentTLocationScale",
    "ExpTransformed",
    "gamma_posterior",
    "gamma_generalized_predictive",
    "normal_posterior",
    "normal_knownvar_generalized_predictive",
    "nig_posterior",
    "nig_generalized_predictive",
    "laplace_ideal_eta",
]


def _positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")


def _check_eta(eta):
    if not np.all(np.asarray(eta) > 0):
        raise InvalidParameterError(f"learning rate must be positive, got {eta!r}")


# ---------------------------------------------------------------------------
# predictive families


@dataclass(frozen=True)
class GeneralizedBetaPrime:
    """Generalized beta prime law with density proportional to
    ``(y/d)**(c*p - 1) / (1 + (y/d)**c)**(p + q)`` on ``(0, inf)``.
    """

    c: float
    d: float
    p: float
    q: float

    def __post_init__(self):
        for name in ("c", "d", "p", "q"):
            _positive(name, getattr(self, name))

    @property
    def support(self):
        return 0.0, np.inf

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = y / self.d
            logx = np.log(x)
            out = (
                np.log(self.c)
                + (self.c * self.p - 1.0) * logx
                - (self.p + self.q) * np.logaddexp(0.0, self.c * logx)
                - np.log(self.d)
                - betaln(self.p, self.q)
            )
        return np.where(y > 0, out, -np.inf)

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = np.power(np.maximum(y, 0.0) / self.d, self.c)
            t = xc / (1.0 + xc)
            t = np.where(np.isinf(xc), 1.0, t)
        return np.where(y > 0, betainc(self.p, self.q, t), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        z = betaincinv(self.p, self.q, u)
        w = betaincinv(self.q, self.p, 1.0 - u)  # 1 - z without cancellation
        return self.d * np.power(z / w, 1.0 / self.c)


@dataclass(frozen=True)
class NormalPredictive:
    mean: float
    variance: float

    def __post_init__(self):
        _positive("variance", self.variance)

    @property
    def support(self):
        return -np.inf, np.inf

    @property
    def scale(self):
        return np.sqrt(self.variance)

    def logpdf(self, y):
        return norm_logpdf(y, self.mean, self.scale)

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def cdf(self, y):
        return norm_cdf((np.asarray(y, dtype=float) - self.mean) / self.scale)

    def ppf(self, u):
        return self.mean + self.scale * norm_ppf(u)


@dataclass(frozen=True)
class StudentTLocationScale:
    df: float
    location: float
    scale: float

    def __post_init__(self):
        _positive("df", self.df)
        _positive("scale", self.scale)

    @property
    def support(self):
        return -np.inf, np.inf

    def logpdf(self, y):
        z = (np.asarray(y, dtype=float) - self.location) / self.scale
        nu = self.df
        return (
            gammaln(0.5 * (nu + 1.0))
            - gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi)
            - np.log(self.scale)
            - 0.5 * (nu + 1.0) * np.log1p(z * z / nu)
        )

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def cdf(self, y):
        z = (np.asarray(y, dtype=float) - self.location) / self.scale
        return stdtr(self.df, z)

    def ppf(self, u):
        return self.location + self.scale * stdtrit(self.df, u)


@dataclass(frozen=True)
class ExpTransformed:
    """Law of ``exp(X)`` where ``X`` follows ``base``.

    Used for the log-normal model, which is fitted on the log scale.
    """

    base: object

    @property
    def support(self):
        return 0.0, np.inf

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logy = np.log(y)
            out = self.base.logpdf(logy) - logy
        return np.where(y > 0, out, -np.inf)

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y > 0, self.base.cdf(np.log(np.maximum(y, 0.0))), 0.0)

    def ppf(self, u):
        return np.exp(self.base.ppf(u))


# ---------------------------------------------------------------------------
# gamma model with fixed shape


@dataclass(frozen=True)
class GammaPosterior:
    """Gamma(a_n, b_n) posterior for the rate of a Gamma(model_shape, rate)
    model."""

    a_n: float
    b_n: float
    model_shape: float = 3.0

    def __post_init__(self):
        _positive("a_n", self.a_n)
        _positive("b_n", self.b_n)


def gamma_posterior(prior_shape, prior_rate, model_shape, data) -> GammaPosterior:
    """Posterior of the rate under a Gamma(prior_shape, prior_rate) prior."""
    _positive("prior_shape", prior_shape)
    _positive("prior_rate", prior_rate)
    _positive("model_shape", model_shape)
    data = np.asarray(data, dtype=float)
    if data.size and not np.all(data > 0):
        raise DomainError("gamma model data must be strictly positive")
    n = data.shape[-1] if data.ndim else 1
    return GammaPosterior(
        a_n=prior_shape + model_shape * n,
        b_n=prior_rate + data.sum(axis=-1),
        model_shape=model_shape,
    )


def gamma_generalized_predictive(post: GammaPosterior, eta) -> GeneralizedBetaPrime:
    """Generalized beta prime predictive of the gamma model at learning rate
    ``eta``.

    Raising the Gamma(k, theta) density to the power ``eta`` and integrating
    the rate against its Gamma(a_n, b_n) posterior gives
    ``(c, d, p, q) = (1, b_n/eta, (k - 1)*eta + 1, a_n + eta - 1)``.
    """
    _check_eta(eta)
    q = post.a_n + eta - 1.0
    p = (post.model_shape - 1.0) * eta + 1.0
    if not (np.all(q > 0) and np.all(p > 0)):
        raise InvalidParameterError(
            f"predictive not normalizable: a_n + eta - 1 = {q!r}, p = {p!r}"
        )
    return GeneralizedBetaPrime(c=1.0, d=post.b_n / eta, p=p, q=q)


# ---------------------------------------------------------------------------
# normal model with known variance


@dataclass(frozen=True)
class NormalPosterior:
    m_n: float
    v_n: float


def normal_posterior(prior_mean, prior_var, sigma2, data) -> NormalPosterior:
    """N(m_n, v_n) posterior for the mean of a N(theta, sigma2) model."""
    _positive("prior_var", prior_var)
    _positive("sigma2", sigma2)
    data = np.asarray(data, dtype=float)
    n = data.shape[-1]
    denom = sigma2 + n * prior_var
    m_n = (sigma2 * prior_mean + prior_var * data.sum(axis=-1)) / denom
    return NormalPosterior(m_n=m_n, v_n=sigma2 * prior_var / denom)


def normal_knownvar_generalized_predictive(m_n, v_n, sigma2, eta) -> NormalPredictive:
    _check_eta(eta)
    if not np.all(np.asarray(v_n) >= 0):
        raise InvalidParameterError("posterior variance must be nonnegative")
    return NormalPredictive(mean=m_n, variance=v_n + sigma2 / eta)


# ---------------------------------------------------------------------------
# normal model with normal-inverse-gamma prior


@dataclass(frozen=True)
class NIGPosterior:
    """Posterior of (mu, sigma2) under mu | sigma2 ~ N(m, k sigma2),
    1/sigma2 ~ Gamma(a, b)."""

    m_n: float
    a_n: float
    b_n: float
    k: float
    n: int

    def __post_init__(self):
        _positive("a_n", self.a_n)
        _positive("b_n", self.b_n)
        _positive("k", self.k)


def nig_posterior(m, k, a, b, data) -> NIGPosterior:
    _positive("k", k)
    _positive("a", a)
    _positive("b", b)
    data = np.asarray(data, dtype=float)
    if data.ndim == 0 or data.shape[-1] == 0:
        raise InsufficientDataError("NIG posterior needs at least one observation")
    n = data.shape[-1]
    mu_hat = data.mean(axis=-1)
    s2_hat = data.var(axis=-1)  # 1/n convention
    shrink = n * k + 1.0
    return NIGPosterior(
        m_n=(n * k / shrink) * mu_hat + m / shrink,
        a_n=a + 0.5 * n,
        b_n=b + 0.5 * n * s2_hat + n * (mu_hat - m) ** 2 / (2.0 * shrink),
        k=k,
        n=n,
    )


def nig_generalized_predictive(post: NIGPosterior, eta) -> StudentTLocationScale:
    """Location-scale Student-t predictive of the NIG normal model."""
    _check_eta(eta)
    df = 2.0 * post.a_n + eta - 1.0
    if not np.all(df > 0):
        raise InvalidParameterError(f"degrees of freedom must be positive, got {df!r}")
    spread = 1.0 / eta + post.k / (post.n * post.k + 1.0)
    scale2 = spread * 2.0 * post.b_n / df
    return StudentTLocationScale(df=df, location=post.m_n, scale=np.sqrt(scale2))


def laplace_ideal_eta(alpha: float) -> float:
    """Learning rate that matches the upper-alpha quantile of a normal model
    to a Laplace truth in the large-sample limit."""
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha}")
    return 2.0 * (norm_ppf(1.0 - alpha) / np.log(2.0 * alpha)) ** 2
