"""Samplers: random-walk and Langevin kernels, diagnostics, serialisation."""

import csv
import io
import math

import numpy as np
import pytest

from genbayes.models import CoordinatewiseTransform
from genbayes.samplers import (
    Chain,
    MalaConfig,
    RwmhConfig,
    chain_set_metadata,
    derive_seed,
    gelman_rubin,
    mala_sample,
    rwmh_sample,
    splitmix64,
    stream,
    write_chain_csv,
)

IDENT1 = CoordinatewiseTransform(["identity"])
IDENT2 = CoordinatewiseTransform(["identity", "identity"])


def std_normal(z):
    return -0.5 * float(z @ z)


def std_normal_grad(z):
    return -0.5 * float(z @ z), -z


# ---------------------------------------------------------------------------
# RNG derivation

def test_splitmix_reference_values():
    # first outputs of the standard splitmix64 sequence from state 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(1) == 0x910A2DEC89025CC1


def test_derived_seeds_distinct():
    seeds = {derive_seed(1234, i) for i in range(100)}
    assert len(seeds) == 100
    a = stream(99, 0).standard_normal(4)
    b = stream(99, 0).standard_normal(4)
    c = stream(99, 1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# Config validation

def test_config_validation():
    with pytest.raises(ValueError):
        RwmhConfig(sigma=0.0, n_samples=10, burn_in=0, thin=1, seed=0)
    with pytest.raises(ValueError):
        RwmhConfig(sigma=1.0, n_samples=10, burn_in=0, thin=0, seed=0)
    with pytest.raises(ValueError):
        MalaConfig(step_size=-1.0, n_samples=10, burn_in=0, thin=1, seed=0)


# ---------------------------------------------------------------------------
# RWMH

def test_rwmh_standard_normal_moments():
    cfg = RwmhConfig(sigma=2.4, n_samples=50000, burn_in=1000, thin=1, seed=7)
    chain = rwmh_sample(std_normal, IDENT1, np.array([0.0]), cfg)
    assert len(chain.draws) == 50000
    m = float(chain.draws.mean())
    v = float(chain.draws.var())
    assert abs(m) <= 0.05
    assert 0.9 <= v <= 1.1
    assert 0.2 <= chain.acceptance_rate <= 0.7


def test_rwmh_deterministic():
    cfg = RwmhConfig(sigma=0.5, n_samples=200, burn_in=50, thin=2, seed=11)
    c1 = rwmh_sample(std_normal, IDENT2, np.zeros(2), cfg)
    c2 = rwmh_sample(std_normal, IDENT2, np.zeros(2), cfg)
    np.testing.assert_array_equal(c1.draws, c2.draws)
    np.testing.assert_array_equal(c1.log_densities, c2.log_densities)
    assert c1.acceptance_rate == c2.acceptance_rate


def test_rwmh_vanishing_proposal():
    cfg = RwmhConfig(sigma=1e-9, n_samples=100, burn_in=10, thin=1, seed=3)
    chain = rwmh_sample(std_normal, IDENT1, np.array([1.5]), cfg)
    assert chain.acceptance_rate > 0.999
    np.testing.assert_allclose(chain.draws, 1.5, atol=1e-6)


def test_rwmh_requires_finite_init():
    cfg = RwmhConfig(sigma=1.0, n_samples=10, burn_in=0, thin=1, seed=0)
    bad = lambda z: -np.inf
    with pytest.raises(ValueError):
        rwmh_sample(bad, IDENT1, np.array([0.0]), cfg)


def test_rwmh_translation_invariance():
    """Adding a constant to the log-density leaves the sample path
    bit-identical (only differences enter the acceptance ratio)."""
    cfg = RwmhConfig(sigma=0.7, n_samples=300, burn_in=100, thin=1, seed=13)
    c1 = rwmh_sample(std_normal, IDENT1, np.array([0.2]), cfg)
    c2 = rwmh_sample(lambda z: std_normal(z) + 1234.5, IDENT1,
                     np.array([0.2]), cfg)
    np.testing.assert_array_equal(c1.draws, c2.draws)


def test_rwmh_all_rejected_warns():
    cfg = RwmhConfig(sigma=50.0, n_samples=20, burn_in=0, thin=1, seed=5)
    # narrow spike at the origin: any sizeable move is rejected
    spike = lambda z: -1e8 * float(z @ z)
    chain = rwmh_sample(spike, IDENT1, np.array([0.0]), cfg)
    assert chain.acceptance_rate == 0.0
    assert chain.warnings


def test_rwmh_draws_are_constrained():
    tr = CoordinatewiseTransform(["log"])
    cfg = RwmhConfig(sigma=2.0, n_samples=20000, burn_in=1000, thin=1, seed=17)
    target = lambda z: -0.5 * float((z - 1.0) @ (z - 1.0))
    chain = rwmh_sample(target, tr, np.array([1.0]), cfg)
    assert np.all(chain.draws > 0)
    assert np.isclose(np.log(chain.draws).mean(), 1.0, atol=0.1)


# ---------------------------------------------------------------------------
# MALA

def test_mala_standard_normal_moments():
    cfg = MalaConfig(step_size=1.0, n_samples=30000, burn_in=1000, thin=1,
                     seed=19, adapt=False)
    chain = mala_sample(std_normal_grad, IDENT1, np.array([0.0]), cfg)
    assert abs(float(chain.draws.mean())) <= 0.05
    assert 0.9 <= float(chain.draws.var()) <= 1.1


def test_mala_flat_gradient_reduces_to_rwmh():
    flat = lambda z: 0.0
    flat_grad = lambda z: (0.0, np.zeros_like(z))
    sig = 0.8
    rcfg = RwmhConfig(sigma=sig, n_samples=100, burn_in=20, thin=1, seed=23)
    mcfg = MalaConfig(step_size=sig, n_samples=100, burn_in=20, thin=1,
                      seed=23, adapt=False)
    c1 = rwmh_sample(flat, IDENT2, np.zeros(2), rcfg)
    c2 = mala_sample(flat_grad, IDENT2, np.zeros(2), mcfg)
    np.testing.assert_array_equal(c1.draws, c2.draws)


def test_mala_deterministic():
    cfg = MalaConfig(step_size=0.9, n_samples=150, burn_in=50, thin=2, seed=29)
    c1 = mala_sample(std_normal_grad, IDENT1, np.array([0.3]), cfg)
    c2 = mala_sample(std_normal_grad, IDENT1, np.array([0.3]), cfg)
    np.testing.assert_array_equal(c1.draws, c2.draws)
    assert c1.adapted_step == c2.adapted_step


def test_mala_adaptation_targets_optimal_acceptance():
    cfg = MalaConfig(step_size=5.0, n_samples=4000, burn_in=3000, thin=1,
                     seed=31, adapt=True)
    chain = mala_sample(std_normal_grad, IDENT1, np.array([0.0]), cfg)
    assert chain.adapted_step < 5.0           # shrank from the absurd start
    # post-burn-in acceptance should sit near the 0.574 target
    assert 0.35 <= chain.acceptance_rate <= 0.8


def test_mala_rejects_nonfinite_gradient_states():
    def half_line(z):
        if z[0] > 0.0:
            return -0.5 * float(z @ z), -z
        return -np.inf, np.full_like(z, np.nan)

    cfg = MalaConfig(step_size=0.5, n_samples=200, burn_in=100, thin=1,
                     seed=37, adapt=False)
    chain = mala_sample(half_line, IDENT1, np.array([1.0]), cfg)
    assert np.all(chain.draws > 0.0)


# ---------------------------------------------------------------------------
# Gelman-Rubin

def _const_chain(value, L=50, p=1):
    return Chain(draws=np.full((L, p), value), log_densities=np.zeros(L),
                 acceptance_rate=1.0, seed=0,
                 config=RwmhConfig(1.0, L, 0, 1, 0))


def test_gelman_rubin_constant_chains_inf():
    rhat = gelman_rubin([_const_chain(1.0), _const_chain(1.0)])
    assert np.isposinf(rhat).all()


def test_gelman_rubin_iid_normal_near_one():
    rng = np.random.default_rng(41)
    chains = []
    for _ in range(10):
        draws = rng.standard_normal((5000, 2))
        chains.append(Chain(draws=draws, log_densities=np.zeros(5000),
                            acceptance_rate=1.0, seed=0,
                            config=RwmhConfig(1.0, 5000, 0, 1, 0)))
    rhat = gelman_rubin(chains)
    assert np.all((rhat >= 0.99) & (rhat <= 1.02))


def test_gelman_rubin_separated_chains_large():
    rng = np.random.default_rng(43)
    a = Chain(draws=rng.normal(-10, 1, (200, 1)), log_densities=np.zeros(200),
              acceptance_rate=1.0, seed=0, config=RwmhConfig(1.0, 200, 0, 1, 0))
    b = Chain(draws=rng.normal(10, 1, (200, 1)), log_densities=np.zeros(200),
              acceptance_rate=1.0, seed=0, config=RwmhConfig(1.0, 200, 0, 1, 0))
    assert gelman_rubin([a, b])[0] > 1.5


def test_gelman_rubin_input_validation():
    with pytest.raises(ValueError):
        gelman_rubin([_const_chain(1.0)])
    with pytest.raises(ValueError):
        gelman_rubin([_const_chain(1.0, L=5), _const_chain(1.0, L=5)])


# ---------------------------------------------------------------------------
# Detailed balance on an enumerable target

def test_rwmh_detailed_balance_three_state():
    """Staircase density on [0,3): long-run cell frequencies match the
    target weights to small total variation."""
    w = np.array([0.5, 0.3, 0.2])
    logw = np.log(w)

    def target(z):
        if 0.0 <= z[0] < 3.0:
            return float(logw[int(z[0])])
        return -np.inf

    cfg = RwmhConfig(sigma=1.0, n_samples=1_000_000, burn_in=2000, thin=1,
                     seed=47)
    chain = rwmh_sample(target, IDENT1, np.array([0.5]), cfg)
    cells = np.floor(chain.draws[:, 0]).astype(int)
    freq = np.bincount(cells, minlength=3) / len(cells)
    tv = 0.5 * float(np.abs(freq - w).sum())
    assert tv <= 0.02


# ---------------------------------------------------------------------------
# Serialisation

def test_chain_csv_round_trip(tmp_path):
    cfg = RwmhConfig(sigma=0.5, n_samples=20, burn_in=10, thin=3, seed=53)
    chains = [
        rwmh_sample(std_normal, IDENT2, np.zeros(2), cfg),
        rwmh_sample(std_normal, IDENT2, np.zeros(2),
                    RwmhConfig(sigma=0.5, n_samples=20, burn_in=10, thin=3,
                               seed=54)),
    ]
    path = tmp_path / "chains.csv"
    write_chain_csv(path, chains)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chain_id", "iter", "log_density", "theta_0", "theta_1"]
    assert len(rows) == 1 + 2 * 20
    # first kept draw of chain 0 sits at absolute step burn_in + thin
    assert rows[1][0] == "0" and rows[1][1] == "13"
    got = float(rows[1][3])
    assert got == chains[0].draws[0, 0]   # repr round-trips exactly

    meta = chain_set_metadata(chains, master_seed=999)
    assert meta["seed"] == 999
    assert meta["kind"] == "RwmhConfig"
    assert len(meta["rhat"]) == 2
    assert meta["chain_seeds"] == [53, 54]
