"""Regression families and their per-observation log-likelihoods.

Every family is written on a linear predictor ``eta = a + b * x`` and, where
the family has a nuisance parameter, on ``tau = log(nuisance)``:

==========  ==================  =================
family      link                nuisance (tau)
==========  ==================  =================
logistic    logit(p) = eta      --
poisson     log(mean) = eta     --
gamma       log(mean) = eta     log shape
negbin      log(mean) = eta     log size r
beta        logit(mean) = eta   log precision phi
weibull     log(scale) = eta    log shape kappa
==========  ==================  =================

:class:`FamilyModel` binds a response vector, caches the response-only
terms and evaluates the log-likelihood together with the first and second
derivatives in ``eta`` and ``tau`` that the Newton solvers need.
"""

from __future__ import annotations

import enum

import numpy as np

from .special import digamma, log_gamma, trigamma


class ResponseKind(str, enum.Enum):
    BINARY = "binary"
    COUNT = "count"
    POSITIVE = "positive"
    UNIT_INTERVAL = "unit_interval"
    CONTINUOUS = "continuous"


class RegressionFamily(str, enum.Enum):
    LOGISTIC = "logistic"
    POISSON = "poisson"
    GAMMA = "gamma"
    NEGBIN = "negbin"
    BETA = "beta"
    WEIBULL = "weibull"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown family {value!r}; expected one of {names}") from None

    @property
    def has_nuisance(self):
        return self not in (RegressionFamily.LOGISTIC, RegressionFamily.POISSON)

    @property
    def n_params(self):
        return 3 if self.has_nuisance else 2


COMPATIBLE_KINDS = {
    RegressionFamily.LOGISTIC: ResponseKind.BINARY,
    RegressionFamily.POISSON: ResponseKind.COUNT,
    RegressionFamily.NEGBIN: ResponseKind.COUNT,
    RegressionFamily.GAMMA: ResponseKind.POSITIVE,
    RegressionFamily.WEIBULL: ResponseKind.POSITIVE,
    RegressionFamily.BETA: ResponseKind.UNIT_INTERVAL,
}


def _expit(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


class FamilyModel:
    """Log-likelihood of one family evaluated against a fixed response.

    Parameters
    ----------
    family : RegressionFamily
    y : ndarray of shape (n,)
        Response; assumed already validated for the family.
    """

    def __init__(self, family, y):
        self.family = RegressionFamily.parse(family)
        self.y = np.asarray(y, dtype=float)
        fam = self.family
        y = self.y
        if fam in (RegressionFamily.POISSON, RegressionFamily.NEGBIN):
            self.lgamma_y1 = log_gamma(y + 1.0)
        if fam in (RegressionFamily.GAMMA, RegressionFamily.WEIBULL):
            self.log_y = np.log(y)
        if fam is RegressionFamily.BETA:
            self.log_y = np.log(y)
            self.log1m_y = np.log1p(-y)

    # -- log-likelihood --------------------------------------------------
    def logpdf(self, eta, tau=None):
        """Per-observation log density (array broadcast against ``y``)."""
        y = self.y
        fam = self.family
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if fam is RegressionFamily.LOGISTIC:
                return y * eta - np.logaddexp(0.0, eta)
            if fam is RegressionFamily.POISSON:
                return y * eta - np.exp(eta) - self.lgamma_y1
            if fam is RegressionFamily.GAMMA:
                alpha = np.exp(tau)
                return (
                    alpha * tau
                    - alpha * eta
                    + (alpha - 1.0) * self.log_y
                    - alpha * y * np.exp(-eta)
                    - log_gamma(alpha)
                )
            if fam is RegressionFamily.NEGBIN:
                r = np.exp(tau)
                return (
                    log_gamma(y + r)
                    - log_gamma(r)
                    - self.lgamma_y1
                    + r * tau
                    + y * eta
                    - (r + y) * np.logaddexp(tau, eta)
                )
            if fam is RegressionFamily.BETA:
                phi = np.exp(tau)
                mu = _expit(eta)
                a = mu * phi
                b = _expit(-eta) * phi
                if np.any(a <= 0) or np.any(b <= 0):
                    return np.full(np.broadcast(y, eta).shape, -np.inf)
                return (
                    log_gamma(phi)
                    - log_gamma(a)
                    - log_gamma(b)
                    + (a - 1.0) * self.log_y
                    + (b - 1.0) * self.log1m_y
                )
            if fam is RegressionFamily.WEIBULL:
                kappa = np.exp(tau)
                return tau + (kappa - 1.0) * self.log_y - kappa * eta - np.exp(kappa * (self.log_y - eta))
        raise AssertionError(fam)

    def loglik(self, eta, tau=None):
        value = float(np.sum(self.logpdf(eta, tau)))
        return value if np.isfinite(value) else -np.inf

    # -- derivatives -----------------------------------------------------
    def derivatives(self, eta, tau=None):
        """Per-observation derivatives of the log density.

        Returns ``(d_eta, d_eta2, d_tau, d_tau2, d_eta_tau)``; the last
        three are ``None`` for families without a nuisance parameter.
        """
        y = self.y
        fam = self.family
        if fam is RegressionFamily.LOGISTIC:
            p = _expit(eta)
            return y - p, -p * (1.0 - p), None, None, None
        if fam is RegressionFamily.POISSON:
            mu = np.exp(eta)
            return y - mu, -mu, None, None, None
        if fam is RegressionFamily.GAMMA:
            alpha = np.exp(tau)
            ratio = y * np.exp(-eta)
            d_eta = alpha * (ratio - 1.0)
            d_alpha = tau + 1.0 - eta + self.log_y - ratio - digamma(alpha)
            d_tau = alpha * d_alpha
            d_tau2 = d_tau + alpha - alpha * alpha * trigamma(alpha)
            return d_eta, -alpha * ratio, d_tau, d_tau2, d_eta
        if fam is RegressionFamily.NEGBIN:
            r = np.exp(tau)
            mu = np.exp(eta)
            rm = r + mu
            d_eta = r * (y - mu) / rm
            d_eta2 = -r * mu * (r + y) / (rm * rm)
            d_r = digamma(y + r) - digamma(r) + np.log(r / rm) + (mu - y) / rm
            d_r2 = trigamma(y + r) - trigamma(r) + 1.0 / r - 1.0 / rm - (mu - y) / (rm * rm)
            d_eta_r = mu * (y - mu) / (rm * rm)
            return d_eta, d_eta2, r * d_r, r * d_r + r * r * d_r2, r * d_eta_r
        if fam is RegressionFamily.BETA:
            phi = np.exp(tau)
            mu = _expit(eta)
            one_mu = _expit(-eta)
            a = mu * phi
            b = one_mu * phi
            dmu = mu * one_mu
            psi_a, psi_b = digamma(a), digamma(b)
            tri_a, tri_b = trigamma(a), trigamma(b)
            resid = self.log_y - self.log1m_y - (psi_a - psi_b)
            d_eta = phi * dmu * resid
            d_eta2 = phi * (dmu * (one_mu - mu) * resid - dmu * dmu * phi * (tri_a + tri_b))
            d_phi = (
                digamma(phi) - mu * psi_a - one_mu * psi_b + mu * self.log_y + one_mu * self.log1m_y
            )
            d_phi2 = trigamma(phi) - mu * mu * tri_a - one_mu * one_mu * tri_b
            d_mu_phi = resid - phi * (mu * tri_a - one_mu * tri_b)
            return d_eta, d_eta2, phi * d_phi, phi * d_phi + phi * phi * d_phi2, phi * dmu * d_mu_phi
        if fam is RegressionFamily.WEIBULL:
            kappa = np.exp(tau)
            z = kappa * (self.log_y - eta)
            w = np.exp(z)
            d_eta = kappa * (w - 1.0)
            d_tau = 1.0 + z * (1.0 - w)
            d_tau2 = z * (1.0 - w) - z * z * w
            d_eta_tau = kappa * (w - 1.0) + kappa * w * z
            return d_eta, -kappa * kappa * w, d_tau, d_tau2, d_eta_tau
        raise AssertionError(fam)
