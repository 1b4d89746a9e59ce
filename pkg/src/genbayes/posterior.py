"""Generalised posteriors: prior x exp(-beta * loss), over constrained and
unconstrained parameterisations.

Only log-density differences ever matter (MCMC), so all densities are up to
additive constants. A non-finite loss value maps to log-density -inf, which
the samplers treat as an automatic rejection.
"""

import numpy as np
from scipy.special import gammaln, logsumexp

from .losses import _fd_gradient, _fd_hessian_trace


class ChiSquaredPrior:
    """Independent chi-squared(3) coordinates: log pi = 0.5 log theta
    - theta / 2 on theta > 0 (mode 1, mean 3)."""

    def __init__(self, p):
        self.p = p

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0.0):
            return -np.inf
        return float(np.sum(0.5 * np.log(theta) - 0.5 * theta))

    def grad_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return 0.5 / theta - 0.5

    def mean(self):
        return np.full(self.p, 3.0)


class NormalPrior:
    """Independent zero-mean normal coordinates with a common scale."""

    def __init__(self, p, scale=1.0):
        self.p = p
        self.scale = float(scale)

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(-0.5 * np.sum(theta ** 2) / self.scale ** 2)

    def grad_log_density(self, theta):
        return -np.asarray(theta, dtype=float) / self.scale ** 2

    def mean(self):
        return np.zeros(self.p)


class HalfNormalPrior:
    """Independent half-normal coordinates on theta >= 0."""

    def __init__(self, p, scale):
        self.p = p
        self.scale = float(scale)

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0.0):
            return -np.inf
        return float(-0.5 * np.sum(theta ** 2) / self.scale ** 2)

    def grad_log_density(self, theta):
        return -np.asarray(theta, dtype=float) / self.scale ** 2

    def mean(self):
        return np.full(self.p, self.scale * np.sqrt(2.0 / np.pi))


class CompositePrior:
    """Independent blocks of coordinates, each with its own prior;
    blocks is a list of (prior, index_array)."""

    def __init__(self, blocks):
        self.blocks = [(pr, np.asarray(ix, dtype=np.int64)) for pr, ix in blocks]
        self.p = sum(len(ix) for _, ix in self.blocks)

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(sum(pr.log_density(theta[ix]) for pr, ix in self.blocks))

    def grad_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for pr, ix in self.blocks:
            out[ix] = pr.grad_log_density(theta[ix])
        return out

    def mean(self):
        out = np.zeros(self.p)
        for pr, ix in self.blocks:
            out[ix] = pr.mean()
        return out


class GeneralisedPosterior:
    """log pi(theta) - beta * D_n(theta), with the unconstrained view
    picking up the transform's Jacobian term."""

    def __init__(self, prior, loss, beta, transform):
        # beta = 0 is admitted as the degenerate prior-only target; negative
        # weights would invert the loss and are refused.
        if beta < 0.0:
            raise ValueError("beta must be nonnegative, got %r" % (beta,))
        self.prior = prior
        self.loss = loss
        self.beta = float(beta)
        self.transform = transform

    def log_density_constrained(self, theta):
        lp = self.prior.log_density(theta)
        if not np.isfinite(lp):
            return -np.inf
        if self.beta == 0.0:      # prior-only target: the loss never enters
            return lp
        val = self.loss.value(theta)
        if not np.isfinite(val):
            return -np.inf
        return lp - self.beta * val

    def log_density_unconstrained(self, z):
        z = np.asarray(z, dtype=float)
        theta = self.transform.to_constrained(z)
        lp = self.prior.log_density(theta)
        lj = self.transform.log_jacobian(z)
        if not (np.isfinite(lp) and np.isfinite(lj)):
            return -np.inf
        if self.beta == 0.0:
            return lp + lj
        val = self.loss.value(theta)
        if not np.isfinite(val):
            return -np.inf
        return lp + lj - self.beta * val

    def grad_log_density_unconstrained(self, z):
        """Chain rule through the coordinatewise transform; may contain
        non-finite entries, which gradient-based samplers treat as a
        rejection."""
        z = np.asarray(z, dtype=float)
        theta = self.transform.to_constrained(z)
        g_theta = self.prior.grad_log_density(theta)
        if self.beta != 0.0:
            g_theta = g_theta - self.beta * np.asarray(
                self.loss.gradient(theta))
        return (g_theta * self.transform.dtheta_dz(z)
                + self.transform.grad_log_jacobian(z))


class CmpTruncatedNllLoss:
    """Standard-Bayes comparator for the count model: negative log-likelihood
    with the normaliser truncated to sum_{y=0}^{99}. Weight beta is meant to
    be fixed at 1 when this loss enters a posterior."""

    TRUNCATION = 99

    def __init__(self, data):
        self.data = data
        x = data.X[:, 0].astype(float)
        self._sum_x = float(np.sum(x))
        self._sum_lf = float(np.sum(gammaln(x + 1.0)))
        y = np.arange(self.TRUNCATION + 1, dtype=float)
        self._y = y
        self._lf_y = gammaln(y + 1.0)

    def value(self, theta):
        t1, t2 = float(theta[0]), float(theta[1])
        if t1 <= 0.0 or t2 <= 0.0:
            return np.inf
        log_z = logsumexp(self._y * np.log(t1) - t2 * self._lf_y)
        return (-(self._sum_x * np.log(t1) - t2 * self._sum_lf)
                + self.data.n * float(log_z))

    def gradient(self, theta):
        return _fd_gradient(self.value, theta)

    def hessian_trace(self, theta):
        return _fd_hessian_trace(self.value, theta)
