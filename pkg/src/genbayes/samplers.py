"""MCMC kernels over unconstrained log-densities, plus diagnostics and
chain serialisation.

Randomness: every stream is a counter-based Philox generator keyed by a
splitmix64 hash of (seed XOR index), so per-chain streams are decorrelated
and results depend only on (seed, config, target), never on scheduling.
Each kernel draws its full noise and uniform arrays up front in one
generator call apiece, making the sample path a pure function of the key.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x):
    """One splitmix64 step of the 64-bit state x."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed, index):
    return splitmix64((int(seed) ^ int(index)) & _MASK)


def stream(seed, index):
    """Philox generator on the derived 64-bit key."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, index)))


@dataclass(frozen=True)
class RwmhConfig:
    sigma: float
    n_samples: int
    burn_in: int
    thin: int
    seed: int

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("proposal sigma must be positive")
        if self.thin < 1 or self.n_samples < 1 or self.burn_in < 0:
            raise ValueError("bad chain length configuration")


@dataclass(frozen=True)
class MalaConfig:
    step_size: float
    n_samples: int
    burn_in: int
    thin: int
    seed: int
    adapt: bool = True          # tune step to ~0.574 acceptance in burn-in
    adapt_rate: float = 0.05

    def __post_init__(self):
        if not self.step_size > 0.0:
            raise ValueError("step size must be positive")
        if self.thin < 1 or self.n_samples < 1 or self.burn_in < 0:
            raise ValueError("bad chain length configuration")


@dataclass(frozen=True)
class Chain:
    draws: np.ndarray            # (n_samples, p), CONSTRAINED space
    log_densities: np.ndarray    # (n_samples,)
    acceptance_rate: float
    seed: int
    config: object
    warnings: tuple = ()
    adapted_step: float = None


MALA_TARGET_ACCEPT = 0.574


def _total_steps(config):
    return config.burn_in + config.n_samples * config.thin


def rwmh_sample(logdensity, transform, init_z, config):
    """Random-walk Metropolis with isotropic Gaussian proposals."""
    z = np.asarray(init_z, dtype=float).copy()
    p = len(z)
    lp = float(logdensity(z))
    if not np.isfinite(lp):
        raise ValueError("initial state has non-finite log-density")

    total = _total_steps(config)
    noise = stream(config.seed, 0).standard_normal((total, p))
    log_u = np.log(stream(config.seed, 1).uniform(size=total))

    keep = np.empty((config.n_samples, p))
    keep_lp = np.empty(config.n_samples)
    accepts = 0
    kept = 0
    for t in range(total):
        prop = z + config.sigma * noise[t]
        lpp = float(logdensity(prop))
        if lpp - lp > log_u[t]:
            z, lp = prop, lpp
            accepts += 1
        s = t + 1
        if s > config.burn_in and (s - config.burn_in) % config.thin == 0:
            keep[kept] = transform.to_constrained(z)
            keep_lp[kept] = lp
            kept += 1
    warnings = ()
    if accepts == 0:
        warnings = ("no proposal was accepted over the whole run",)
    return Chain(draws=keep, log_densities=keep_lp,
                 acceptance_rate=accepts / total, seed=config.seed,
                 config=config, warnings=warnings)


def mala_sample(logdensity_grad, transform, init_z, config):
    """Metropolis-adjusted Langevin: drift (eps^2/2) grad, exact MH
    correction; non-finite proposal density or gradient rejects the move.
    With adapt=True the step size multiplies exp(rate*(alpha - 0.574))
    during burn-in and is frozen afterwards."""
    z = np.asarray(init_z, dtype=float).copy()
    p = len(z)
    lp, g = logdensity_grad(z)
    lp = float(lp)
    if not np.isfinite(lp):
        raise ValueError("initial state has non-finite log-density")
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        g = np.zeros(p)

    total = _total_steps(config)
    noise = stream(config.seed, 0).standard_normal((total, p))
    log_u = np.log(stream(config.seed, 1).uniform(size=total))

    eps = float(config.step_size)
    keep = np.empty((config.n_samples, p))
    keep_lp = np.empty(config.n_samples)
    accepts = 0
    kept = 0
    for t in range(total):
        drift = 0.5 * eps * eps * g
        prop = z + drift + eps * noise[t]
        lpp, gp = logdensity_grad(prop)
        lpp = float(lpp)
        gp = np.asarray(gp, dtype=float)
        ok = np.isfinite(lpp) and np.all(np.isfinite(gp))
        if ok:
            fwd = prop - z - 0.5 * eps * eps * g
            rev = z - prop - 0.5 * eps * eps * gp
            correction = (fwd @ fwd - rev @ rev) / (2.0 * eps * eps)
            log_ratio = lpp - lp + correction
        else:
            log_ratio = -np.inf
        if log_ratio > log_u[t]:
            z, lp, g = prop, lpp, gp
            accepts += 1
        if config.adapt and t < config.burn_in:
            alpha = min(1.0, np.exp(log_ratio)) if np.isfinite(log_ratio) else 0.0
            eps *= float(np.exp(config.adapt_rate * (alpha - MALA_TARGET_ACCEPT)))
        s = t + 1
        if s > config.burn_in and (s - config.burn_in) % config.thin == 0:
            keep[kept] = transform.to_constrained(z)
            keep_lp[kept] = lp
            kept += 1
    warnings = ()
    if accepts == 0:
        warnings = ("no proposal was accepted over the whole run",)
    return Chain(draws=keep, log_densities=keep_lp,
                 acceptance_rate=accepts / total, seed=config.seed,
                 config=config, warnings=warnings, adapted_step=eps)


def gelman_rubin(chains):
    """Per-coordinate potential scale reduction over constrained draws:
    sqrt((((L-1)/L) W + B/L) / W); +inf where the within-variance is 0."""
    if len(chains) < 2:
        raise ValueError("need at least two chains")
    L = len(chains[0].draws)
    if L < 10:
        raise ValueError("chains too short for a variance diagnostic")
    if any(len(c.draws) != L for c in chains):
        raise ValueError("chains must have equal length")
    draws = np.stack([c.draws for c in chains])          # (M, L, p)
    means = draws.mean(axis=1)                           # (M, p)
    within = draws.var(axis=1, ddof=1).mean(axis=0)      # (p,)
    b_over_l = means.var(axis=0, ddof=1)                 # B/L
    out = np.empty(draws.shape[2])
    for k in range(len(out)):
        if within[k] == 0.0:
            out[k] = np.inf
        else:
            out[k] = np.sqrt(((L - 1) / L * within[k] + b_over_l[k]) / within[k])
    return out


def write_chain_csv(path, chains):
    """All chains in one CSV: chain_id, absolute iteration of each kept draw,
    log-density, then the constrained coordinates. Floats via repr for exact
    round-trips."""
    p = chains[0].draws.shape[1]
    header = ["chain_id", "iter", "log_density"] + [
        "theta_%d" % k for k in range(p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for cid, chain in enumerate(chains):
            cfg = chain.config
            for k in range(len(chain.draws)):
                it = cfg.burn_in + (k + 1) * cfg.thin
                row = [cid, it, repr(float(chain.log_densities[k]))]
                row += [repr(float(v)) for v in chain.draws[k]]
                writer.writerow(row)


def chain_set_metadata(chains, master_seed):
    """Sidecar metadata for a chain CSV."""
    cfg = chains[0].config
    config_dict = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    config_dict.pop("seed", None)
    rhat = gelman_rubin(chains).tolist() if len(chains) >= 2 else []
    meta = {
        "seed": int(master_seed),
        "config": config_dict,
        "kind": type(cfg).__name__,
        "chain_seeds": [int(c.seed) for c in chains],
        "acceptance_rate": [float(c.acceptance_rate) for c in chains],
        "rhat": rhat,
        "warnings": [list(c.warnings) for c in chains],
    }
    steps = [c.adapted_step for c in chains if c.adapted_step is not None]
    if steps:
        meta["adapted_step"] = [float(s) for s in steps]
    return meta
