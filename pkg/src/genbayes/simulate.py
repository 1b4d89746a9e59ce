"""Data generators: exact count sampling, grid-model MH ensembles,
systematic-scan Gibbs for count graphical models, and posterior predictives.

Every generator is a deterministic function of (theta, config, seed).
Independent draws consume per-draw derived RNG streams, so a parallel
scheduler producing the same draw indices would produce identical output.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .domains import count_domain
from .losses import Dataset
from .samplers import derive_seed, stream

# Truncation: stop once the current term falls below this fraction of the
# running sum (and the mode has been passed).  Far below every test tolerance.
_REL_TOL = 1e-14
_MAX_SUPPORT = 1_000_000


@dataclass(frozen=True)
class SimConfig:
    """Ensemble size and per-draw chain length for the MH/Gibbs generators."""

    n_draws: int
    iters_per_draw: int
    seed: int

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        if self.iters_per_draw < 1:
            raise ValueError("iters_per_draw must be >= 1")


# ---------------------------------------------------------------------------
# Count pmf truncation + inverse-CDF sampling

def _count_pmf(log_rate, dispersion):
    """Normalised pmf table for p(y) propto exp(log_rate*y - disp*log y!).

    Truncates at the first y past the (unnormalised) mode whose term drops
    below _REL_TOL times the running sum.  Returns a 1-d probability vector.
    """
    if dispersion < 0.0:
        raise ValueError("dispersion must be nonnegative")
    if dispersion == 0.0 and log_rate >= 0.0:
        raise ValueError(
            "series diverges: zero dispersion with rate >= 1 has no "
            "normalisable pmf")
    # unnormalised mode ~ exp(log_rate / dispersion); geometric case mode 0
    mode = np.exp(log_rate / dispersion) if dispersion > 0.0 else 0.0
    size = int(min(_MAX_SUPPORT, max(64, 2.0 * mode + 16.0)))
    while True:
        ys = np.arange(size, dtype=float)
        logt = log_rate * ys - dispersion * gammaln(ys + 1.0)
        terms = np.exp(logt - logt.max())
        running = np.cumsum(terms)
        ok = (terms < _REL_TOL * running) & (ys > mode)
        hit = np.flatnonzero(ok)
        if hit.size:
            stop = hit[0] + 1
            return terms[:stop] / running[stop - 1]
        if size >= _MAX_SUPPORT:
            raise ValueError(
                "count pmf truncation exceeded %d support points" %
                _MAX_SUPPORT)
        size = min(_MAX_SUPPORT, size * 2)


def _inverse_cdf(pmf, u):
    """Positions for uniforms u under the cumulative of a pmf table."""
    cum = np.cumsum(pmf)
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="right").astype(np.int64)


def cmp_sample(theta, n, seed):
    """n exact draws from the two-parameter count model at theta.

    Inverse-CDF over the adaptively truncated normalised pmf; deterministic
    given seed.
    """
    theta1, theta2 = float(theta[0]), float(theta[1])
    if theta1 <= 0.0:
        raise ValueError("theta1 must be positive")
    if theta2 < 0.0:
        raise ValueError("theta2 must be nonnegative")
    if theta2 == 0.0 and theta1 >= 1.0:
        raise ValueError(
            "theta2 = 0 with theta1 >= 1: the series diverges and the model "
            "is not normalisable")
    pmf = _count_pmf(np.log(theta1), theta2)
    u = stream(seed, 0).uniform(size=n)
    return Dataset(count_domain(1), _inverse_cdf(pmf, u)[:, None])


# ---------------------------------------------------------------------------
# Grid model: ensembles of independent single-site MH chains

def ising_simulate(model, theta, config):
    """Final states of n_draws independent single-site MH chains.

    Each chain starts uniform at random per site and runs iters_per_draw
    steps; a step picks one site uniformly, proposes the flip, and accepts
    with min(1, ratio) computed from log-unnormalised-density differences.
    """
    theta = float(theta)
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    n, iters = config.n_draws, config.iters_per_draw
    d = model.dim_x
    # padded neighbour table: (d, max_degree), -1 marks absent
    max_deg = max(len(nb) for nb in model.neighbors)
    nbr = np.full((d, max_deg), -1, dtype=np.int64)
    nbr_mask = np.zeros((d, max_deg))
    for j, nb in enumerate(model.neighbors):
        nbr[j, :len(nb)] = nb
        nbr_mask[j, :len(nb)] = 1.0

    X = np.empty((n, d), dtype=np.int64)
    sites = np.empty((n, iters), dtype=np.int64)
    log_u = np.empty((n, iters))
    for i in range(n):
        rng = stream(config.seed, i)
        X[i] = rng.integers(0, 2, size=d)
        sites[i] = rng.integers(0, d, size=iters)
        log_u[i] = np.log(rng.uniform(size=iters))

    rows = np.arange(n)
    for t in range(iters):
        j = sites[:, t]
        neigh = nbr[j]                                    # (n, max_deg)
        vals = X[rows[:, None], np.maximum(neigh, 0)] * nbr_mask[j]
        ns = vals.sum(axis=1)
        # flipping site j changes the double-counted interaction sum by
        # 2 * (1 - 2 x_j) * (neighbour sum); the density divides by theta
        delta = 2.0 * (1.0 - 2.0 * X[rows, j]) * ns / theta
        acc = log_u[:, t] < delta
        X[rows[acc], j[acc]] = 1 - X[rows[acc], j[acc]]
    return Dataset(model.domain, X)


# ---------------------------------------------------------------------------
# Count graphical models: systematic-scan Gibbs ensembles

def pgm_gibbs_sample(model, theta, n, sweeps, seed):
    """Final states of n independent systematic-scan Gibbs chains.

    Each sweep resamples every coordinate from its one-dimensional
    conditional, itself a count pmf sampled by the same adaptive-truncation
    inverse CDF as cmp_sample.  Nonnegative interactions are required so the
    conditionals are summable.
    """
    theta = np.asarray(theta, dtype=float)
    d = model.dim_x
    inter = theta[d:d + model.n_edges]
    if np.any(inter < 0.0):
        raise ValueError("interaction parameters must be nonnegative")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")

    U = np.empty((n, sweeps, d))
    for i in range(n):
        U[i] = stream(seed, i).uniform(size=(sweeps, d))

    X = np.zeros((n, d), dtype=np.int64)
    for s in range(sweeps):
        for m in range(d):
            a, disp = model.conditional_params(theta, X, m)
            X[:, m] = _conditional_draw(a, float(disp), U[:, s, m], m)
    return Dataset(model.domain, X)


def _conditional_draw(a, disp, u, coord):
    """Vector of count draws, one per row, for per-row log-rates a."""
    if disp <= 0.0:
        raise ValueError(
            "coordinate %d: nonpositive dispersion leaves the conditional "
            "unnormalisable" % coord)
    mode = np.exp(np.max(a) / disp)
    size = int(min(_MAX_SUPPORT, max(64, 2.0 * mode + 16.0)))
    while True:
        ys = np.arange(size, dtype=float)
        logt = a[:, None] * ys[None, :] - disp * gammaln(ys + 1.0)[None, :]
        logt -= logt.max(axis=1, keepdims=True)
        terms = np.exp(logt)
        running = np.cumsum(terms, axis=1)
        if np.all(terms[:, -1] < _REL_TOL * running[:, -1]) and \
                size - 1 > np.exp(a.max() / disp):
            cum = running / running[:, -1:]
            cum[:, -1] = 1.0
            # row-wise inverse CDF
            return (cum < u[:, None]).sum(axis=1).astype(np.int64)
        if size >= _MAX_SUPPORT:
            raise ValueError(
                "conditional for coordinate %d required more than %d "
                "support points" % (coord, _MAX_SUPPORT))
        size = min(_MAX_SUPPORT, size * 2)


# ---------------------------------------------------------------------------
# Posterior predictive

def posterior_predictive(chain, model, draws_per_theta, seed, gibbs_sweeps=30,
                         ising_iters=None):
    """Pooled predictive draws plus a per-cell histogram summary.

    Each distinct retained theta is simulated once (draws_per_theta points)
    and its histogram enters the across-theta mean/sd once per repetition,
    so MH rejections cost nothing extra and a chain stuck at a single theta
    reports exactly zero sd.  Cell frequencies pool over coordinates.
    """
    draws = np.asarray(getattr(chain, "draws", chain), dtype=float)
    if len(draws) == 0:
        raise ValueError("chain holds no draws")
    uniq, inverse = np.unique(draws, axis=0, return_inverse=True)
    parts = []
    for u, th in enumerate(uniq):
        sub_seed = derive_seed(seed, u)
        parts.append(_simulate_for(model, th, draws_per_theta, sub_seed,
                                   gibbs_sweeps, ising_iters).X)
    max_val = max(int(p.max()) for p in parts)
    cells = np.arange(max_val + 1)
    uf = np.empty((len(parts), max_val + 1))
    for u, p in enumerate(parts):
        uf[u] = np.bincount(p.ravel(), minlength=max_val + 1) / p.size
    freqs = uf[inverse]
    pooled = Dataset(model.domain, np.concatenate(parts, axis=0))
    summary = {
        "cells": cells.tolist(),
        "mean": freqs.mean(axis=0).tolist(),
        "sd": freqs.std(axis=0, ddof=0).tolist(),
        "draws_per_theta": int(draws_per_theta),
        "n_theta": int(len(draws)),
    }
    return pooled, summary


def _simulate_for(model, theta, n, seed, gibbs_sweeps, ising_iters):
    kind = type(model).__name__
    if kind == "CmpModel":
        return cmp_sample(theta, n, seed)
    if kind == "IsingModel":
        iters = ising_iters if ising_iters is not None else 100 * model.dim_x
        return ising_simulate(model, float(theta[0]),
                              SimConfig(n_draws=n, iters_per_draw=iters,
                                        seed=seed))
    if kind in ("PoissonGraphicalModel", "CmpGraphicalModel"):
        return pgm_gibbs_sample(model, theta, n, gibbs_sweeps, seed)
    raise TypeError("no simulator for model type %s" % kind)


# ---------------------------------------------------------------------------
# Dataset CSV serialisation (one row per observation, columns x_0..x_{d-1})

def write_dataset_csv(path, dataset):
    header = ",".join("x_%d" % j for j in range(dataset.d))
    np.savetxt(path, dataset.X, fmt="%d", delimiter=",", header=header,
               comments="")


def read_dataset_csv(path, domain):
    with open(path) as fh:
        first = fh.readline().strip()
    has_header = first.startswith("x_")
    X = np.loadtxt(path, dtype=np.int64, delimiter=",",
                   skiprows=1 if has_header else 0, ndmin=2)
    return Dataset(domain, X)
