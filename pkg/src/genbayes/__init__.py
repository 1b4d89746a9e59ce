"""Generalised Bayesian inference for discrete models with intractable
normalising constants: discrete-Fisher-divergence, kernel-Stein, and
pseudo-likelihood losses, MCMC samplers, and bootstrap loss-weight
calibration."""

__version__ = "0.1.0"
