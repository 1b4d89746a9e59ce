"""Models: unnormalised masses, ratio ops, exp-family structure, transforms."""

import math

import numpy as np
import pytest

import oracles
from genbayes.domains import STAR
from genbayes.models import (
    CmpGraphicalModel,
    CmpModel,
    CoordinatewiseTransform,
    IsingModel,
    PoissonGraphicalModel,
    cmp_ratio_minus,
    default_transform,
    ising_ratio_minus,
    pseudo_conditional,
)

ALL_MODELS = [
    ("cmp", lambda: CmpModel()),
    ("ising3", lambda: IsingModel(3)),
    ("pgm", lambda: PoissonGraphicalModel(4, [(0, 1), (1, 2), (2, 3)])),
    ("cmppgm", lambda: CmpGraphicalModel(3, [(0, 1), (1, 2)])),
]


def random_theta(model, rng):
    p = model.dim_theta
    if isinstance(model, CmpModel):
        return rng.uniform(0.5, 6.0, size=2)
    if isinstance(model, IsingModel):
        return rng.uniform(1.0, 9.0, size=1)
    th = rng.uniform(-1.0, 1.5, size=p)
    th[model.dim_x:] = rng.uniform(0.0, 0.8, size=p - model.dim_x)
    if getattr(model, "has_dispersion", False):
        th[model.dim_x + model.n_edges:] = rng.uniform(0.3, 1.5, size=model.dim_x)
    return th


def random_points(model, rng, n):
    if isinstance(model, IsingModel):
        return rng.integers(0, 2, size=(n, model.dim_x))
    return rng.integers(0, 7, size=(n, model.dim_x))


# ---------------------------------------------------------------------------
# CMP

def test_cmp_ratio_closed_form_simple():
    assert cmp_ratio_minus((4.0, 1.0), 2) == 0.5


def test_cmp_ratio_at_zero():
    assert cmp_ratio_minus((4.0, 1.0), 0) == 0.0
    assert cmp_ratio_minus((2.5, 0.3), 0) == 0.0


def test_cmp_ratio_frozen_value():
    # independent route: exp of the log-mass difference at x=3 vs x=2
    assert cmp_ratio_minus((4.0, 0.75), 3) == pytest.approx(
        0.569876764238695, abs=1e-12)
    direct = math.exp(oracles.cmp_log_unnorm(2, 4.0, 0.75)
                      - oracles.cmp_log_unnorm(3, 4.0, 0.75))
    assert cmp_ratio_minus((4.0, 0.75), 3) == pytest.approx(direct, abs=1e-12)


def test_cmp_ratio_rejects_bad_theta():
    with pytest.raises(ValueError):
        cmp_ratio_minus((0.0, 1.0), 2)
    with pytest.raises(ValueError):
        cmp_ratio_minus((4.0, -1.0), 2)


def test_cmp_model_ratio_matches_closed_form():
    model = CmpModel()
    rng = np.random.default_rng(3)
    for _ in range(30):
        th = random_theta(model, rng)
        x = int(rng.integers(0, 12))
        assert model.ratio_minus(th, (x,), 0) == pytest.approx(
            cmp_ratio_minus(th, x), rel=1e-12)


def test_cmp_poisson_special_case():
    """theta2 = 1 is Poisson(theta1) up to a constant normaliser."""
    model = CmpModel()
    lam = 3.7
    ratios = []
    for x in range(31):
        lp = model.log_tilde_p((lam, 1.0), (x,))
        ratios.append(math.exp(lp) / oracles.poisson_pmf(x, lam))
    assert np.ptp(ratios) / ratios[0] < 1e-10


# ---------------------------------------------------------------------------
# Ising

def test_ising_neighbor_structure():
    model = IsingModel(3)
    assert np.array_equal(model.adjacency, model.adjacency.T)
    assert model.adjacency.sum() == 2 * 12  # 12 edges on a 3x3 grid
    assert np.all(np.diag(model.adjacency) == 0)
    nbrs = oracles.grid_neighbors(3)
    for i in range(9):
        assert sorted(model.neighbors[i].tolist()) == sorted(nbrs[i])


def test_ising_log_mass_matches_oracle():
    model = IsingModel(3)
    nbrs = oracles.grid_neighbors(3)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.integers(0, 2, size=9)
        th = rng.uniform(1.0, 9.0)
        expect = oracles.ising_log_unnorm(x.tolist(), th, nbrs)
        assert model.log_tilde_p((th,), tuple(x)) == pytest.approx(expect, abs=1e-12)


def test_ising_flip_ratio_all_zeros():
    model = IsingModel(3)
    x = np.zeros(9, dtype=int)
    for j in range(9):
        assert ising_ratio_minus(model, (5.0,), x, j) == pytest.approx(1.0)


def test_ising_flip_ratio_frozen_2x2():
    model = IsingModel(2)
    x = np.ones(4, dtype=int)
    for j in range(4):
        assert ising_ratio_minus(model, (5.0,), x, j) == pytest.approx(
            0.44932896411722156, abs=1e-14)


def test_ising_flip_ratio_involution():
    model = IsingModel(3)
    rng = np.random.default_rng(9)
    for _ in range(25):
        x = rng.integers(0, 2, size=9)
        th = (float(rng.uniform(1, 9)),)
        j = int(rng.integers(0, 9))
        y = x.copy()
        y[j] = 1 - y[j]
        prod = ising_ratio_minus(model, th, x, j) * ising_ratio_minus(model, th, y, j)
        assert prod == pytest.approx(1.0, rel=1e-12)


def test_ising_ratio_matches_generic_route():
    model = IsingModel(3)
    rng = np.random.default_rng(13)
    for _ in range(20):
        x = tuple(int(v) for v in rng.integers(0, 2, size=9))
        th = (float(rng.uniform(1, 9)),)
        j = int(rng.integers(0, 9))
        assert ising_ratio_minus(model, th, np.array(x), j) == pytest.approx(
            model.ratio_minus(th, x, j), rel=1e-12)


def test_pseudo_conditional_isolated_site():
    model = IsingModel(3)
    x = np.zeros(9, dtype=int)
    x[4] = 1  # value at the queried site itself must not matter
    assert pseudo_conditional(model, (5.0,), x, 4) == pytest.approx(0.5)


def test_pseudo_conditional_weak_interaction_limit():
    model = IsingModel(2)
    x = np.ones(4, dtype=int)
    assert pseudo_conditional(model, (1e9,), x, 0) == pytest.approx(0.5, abs=1e-8)


def test_pseudo_conditional_frozen_2x2():
    model = IsingModel(2)
    x = np.ones(4, dtype=int)
    assert pseudo_conditional(model, (5.0,), x, 0) == pytest.approx(
        0.6899744811276125, abs=1e-14)


# ---------------------------------------------------------------------------
# Graphical count models

def test_pgm_rejects_bad_edges():
    with pytest.raises(ValueError):
        PoissonGraphicalModel(3, [(1, 0)])
    with pytest.raises(ValueError):
        PoissonGraphicalModel(3, [(0, 3)])
    with pytest.raises(ValueError):
        PoissonGraphicalModel(3, [(0, 1), (0, 1)])


def test_pgm_log_mass_by_hand():
    model = PoissonGraphicalModel(2, [(0, 1)])
    th = np.array([0.4, -0.2, 0.3])
    x = (2, 3)
    expect = (0.4 * 2 - 0.2 * 3 - 0.3 * 6
              - oracles.log_factorial(2) - oracles.log_factorial(3))
    assert model.log_tilde_p(th, x) == pytest.approx(expect, abs=1e-12)


def test_cmp_pgm_unit_dispersion_recovers_pgm():
    pgm = PoissonGraphicalModel(3, [(0, 1), (1, 2)])
    cpgm = CmpGraphicalModel(3, [(0, 1), (1, 2)])
    rng = np.random.default_rng(17)
    for _ in range(20):
        th_p = random_theta(pgm, rng)
        th_c = np.concatenate([th_p, np.ones(3)])
        x = tuple(int(v) for v in rng.integers(0, 8, size=3))
        assert cpgm.log_tilde_p(th_c, x) == pytest.approx(
            pgm.log_tilde_p(th_p, x), abs=1e-12)


def test_graphical_conditional_params_by_hand():
    model = PoissonGraphicalModel(3, [(0, 1), (1, 2)])
    th = np.array([0.5, 0.1, -0.3, 0.2, 0.4])
    X = np.array([[1, 2, 3]])
    a, disp = model.conditional_params(th, X, 1)
    # theta_1 - theta_{01} x_0 - theta_{12} x_2
    assert a[0] == pytest.approx(0.1 - 0.2 * 1 - 0.4 * 3)
    assert disp == 1.0
    cm = CmpGraphicalModel(3, [(0, 1), (1, 2)])
    thc = np.concatenate([th, [0.7, 0.8, 0.9]])
    a2, disp2 = cm.conditional_params(thc, X, 1)
    assert a2[0] == pytest.approx(a[0])
    assert disp2 == pytest.approx(0.8)


# ---------------------------------------------------------------------------
# Exp-family structure consistency (every model)

@pytest.mark.parametrize("name,make", ALL_MODELS)
def test_exp_family_reproduces_log_mass(name, make):
    model = make()
    ef = model.exp_family
    rng = np.random.default_rng(hash(name) % (2**32))
    for _ in range(25):
        th = random_theta(model, rng)
        x = tuple(int(v) for v in random_points(model, rng, 1)[0])
        via_ef = float(ef.eta(th) @ ef.T(x) + ef.b(x))
        assert via_ef == pytest.approx(model.log_tilde_p(th, x), abs=1e-10)


@pytest.mark.parametrize("name,make", ALL_MODELS)
def test_exp_family_ratio_route_agrees(name, make):
    """exp(eta·(T(x^{j-})-T(x)) + b(x^{j-})-b(x)) vs log-mass difference."""
    model = make()
    ef = model.exp_family
    rng = np.random.default_rng((hash(name) + 1) % (2**32))
    for _ in range(25):
        th = random_theta(model, rng)
        x = tuple(int(v) for v in random_points(model, rng, 1)[0])
        j = int(rng.integers(0, model.dim_x))
        down = model.domain.pred(x, j)
        if STAR in down:
            assert model.ratio_minus(th, x, j) == 0.0
            continue
        via_ef = math.exp(
            float(ef.eta(th) @ (ef.T(down) - ef.T(x)) + ef.b(down) - ef.b(x)))
        assert via_ef == pytest.approx(model.ratio_minus(th, x, j), rel=1e-10)


@pytest.mark.parametrize("name,make", ALL_MODELS)
def test_forward_ratio_identity(name, make):
    """ratio_minus at the successor equals p(x)/p(x^{j+})."""
    model = make()
    rng = np.random.default_rng((hash(name) + 2) % (2**32))
    for _ in range(15):
        th = random_theta(model, rng)
        x = tuple(int(v) for v in random_points(model, rng, 1)[0])
        j = int(rng.integers(0, model.dim_x))
        up = model.domain.succ(x, j)
        expect = math.exp(model.log_tilde_p(th, x) - model.log_tilde_p(th, up))
        assert model.ratio_minus(th, up, j) == pytest.approx(expect, rel=1e-10)


@pytest.mark.parametrize("name,make", ALL_MODELS)
def test_diff_stats_match_pointwise_statistics(name, make):
    """Vectorised sufficient-statistic differences vs direct T/b evaluation."""
    model = make()
    ef = model.exp_family
    rng = np.random.default_rng((hash(name) + 3) % (2**32))
    X = random_points(model, rng, 12)
    stats = model.diff_stats(X)
    for r in range(len(X)):
        x = tuple(int(v) for v in X[r])
        for j in range(model.dim_x):
            down = model.domain.pred(x, j)
            up = model.domain.succ(x, j)
            if STAR in down:
                assert stats.star[r, j]
            else:
                assert not stats.star[r, j]
                np.testing.assert_allclose(
                    stats.dT_b[r, j], ef.T(down) - ef.T(x), atol=1e-10)
                assert stats.db_b[r, j] == pytest.approx(
                    ef.b(down) - ef.b(x), abs=1e-10)
            np.testing.assert_allclose(
                stats.dT_f[r, j], ef.T(x) - ef.T(up), atol=1e-10)
            assert stats.db_f[r, j] == pytest.approx(
                ef.b(x) - ef.b(up), abs=1e-10)


@pytest.mark.parametrize("name,make", ALL_MODELS)
def test_batch_ratios_match_scalar(name, make):
    model = make()
    rng = np.random.default_rng((hash(name) + 4) % (2**32))
    X = random_points(model, rng, 10)
    stats = model.diff_stats(X)
    th = random_theta(model, rng)
    R = model.ratios_minus_batch(th, stats)
    for r in range(len(X)):
        x = tuple(int(v) for v in X[r])
        for j in range(model.dim_x):
            assert R[r, j] == pytest.approx(
                model.ratio_minus(th, x, j), rel=1e-10, abs=1e-12)


def test_grad_eta_matches_fd():
    for name, make in ALL_MODELS:
        model = make()
        ef = model.exp_family
        rng = np.random.default_rng(23)
        th = random_theta(model, rng)
        for c in range(ef.k):
            g = oracles.fd_gradient(lambda t: ef.eta(t)[c], th)
            np.testing.assert_allclose(ef.grad_eta(th)[c], g, rtol=1e-6, atol=1e-8)
            tr = oracles.fd_hessian_trace(lambda t: ef.eta(t)[c], th)
            assert float(np.trace(ef.hess_eta(th)[c])) == pytest.approx(
                tr, rel=1e-3, abs=1e-6)


# ---------------------------------------------------------------------------
# Transforms

def test_transform_round_trip():
    tr = CoordinatewiseTransform(["log", "identity", "square"])
    rng = np.random.default_rng(29)
    for _ in range(50):
        theta = np.array([rng.uniform(0.1, 9), rng.normal(), rng.uniform(0, 4)])
        back = tr.to_constrained(tr.to_unconstrained(theta))
        np.testing.assert_allclose(back, theta, atol=1e-12)


def test_transform_examples():
    cmp_tr = default_transform(CmpModel())
    np.testing.assert_allclose(
        cmp_tr.to_unconstrained([4.0, 0.75]), [math.log(4), math.log(0.75)])
    ising_tr = default_transform(IsingModel(2))
    np.testing.assert_allclose(ising_tr.to_unconstrained([5.0]), [math.log(5)])
    sq = CoordinatewiseTransform(["square"])
    assert sq.to_constrained([-0.3])[0] == pytest.approx(0.09)


def test_transform_log_jacobian_fd():
    tr = CoordinatewiseTransform(["log", "identity", "square", "log"])
    rng = np.random.default_rng(31)
    for _ in range(20):
        z = rng.uniform(0.2, 2.0, size=4) * rng.choice([-1, 1], size=4)
        h = 1e-6
        log_det = 0.0
        for k in range(4):
            up = z.copy(); up[k] += h
            dn = z.copy(); dn[k] -= h
            deriv = (tr.to_constrained(up)[k] - tr.to_constrained(dn)[k]) / (2 * h)
            log_det += math.log(abs(deriv))
        assert tr.log_jacobian(z) == pytest.approx(log_det, rel=1e-6)
        np.testing.assert_allclose(
            tr.dtheta_dz(z),
            oracles.fd_gradient(lambda zz: float(np.sum(tr.to_constrained(zz))), z),
            rtol=1e-6)
        np.testing.assert_allclose(
            tr.grad_log_jacobian(z),
            oracles.fd_gradient(tr.log_jacobian, z), rtol=1e-5)


def test_default_transform_graphical():
    pgm = PoissonGraphicalModel(3, [(0, 2)])
    tr = default_transform(pgm)
    assert tr.kinds == ("identity", "identity", "identity", "square")
    cm = CmpGraphicalModel(2, [(0, 1)])
    trc = default_transform(cm)
    assert trc.kinds == ("identity", "identity", "square", "square", "square")


def test_transform_rejects_unknown_kind():
    with pytest.raises(ValueError):
        CoordinatewiseTransform(["banana"])
