"""Discrete models with unnormalised log-mass and exponential-family structure.

Each model exposes:

* ``dim_x`` / ``dim_theta`` and a ``domain`` (positions, see domains.py);
* ``log_tilde_p(theta, x)`` for a single point and ``log_tilde_p_batch`` for
  an (n, d) position array — the normalising constant is never computed;
* ``ratio_minus(theta, x, j)`` = p(x^{j-})/p(x), zero when x^{j-} has a star
  coordinate;
* an ``ExpFamilyStructure`` (eta, T, b and eta-derivatives) plus vectorised
  sufficient-statistic differences (``diff_stats``) that the loss module
  consumes.

The backward difference block of ``diff_stats`` stores T(x^{j-}) - T(x) and
b(x^{j-}) - b(x) (so exp(eta·dT + db) is the backward ratio); the forward
block stores T(x) - T(x^{j+}) and b(x) - b(x^{j+}) (so the same exp gives
the ratio evaluated at the successor, p(x)/p(x^{j+})).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .domains import ProductDomain, STAR, binary_grid_domain, count_domain


@dataclass(frozen=True)
class ExpFamilyStructure:
    """Natural parameter map and sufficient statistics: log p~ = eta·T + b."""

    k: int
    eta: callable
    grad_eta: callable       # (k, p)
    hess_eta: callable       # (k, p, p)
    T: callable              # point -> (k,)
    b: callable              # point -> real
    eta_is_identity: bool = False


@dataclass(frozen=True)
class DiffStats:
    """Per-(datum, axis) sufficient-statistic differences for a dataset."""

    dT_b: np.ndarray       # (n, d, k)
    db_b: np.ndarray       # (n, d)
    star: np.ndarray       # (n, d) bool: x^{j-} has a star coordinate
    dT_f: np.ndarray       # (n, d, k)
    db_f: np.ndarray       # (n, d)


class _ModelBase:
    """Shared plumbing: scalar evaluations ride on the batch ones."""

    def log_tilde_p(self, theta, x):
        X = np.asarray([x], dtype=np.int64)
        return float(self.log_tilde_p_batch(theta, X)[0])

    def ratio_minus(self, theta, x, j):
        """p_theta(x^{j-}) / p_theta(x); 0 when the predecessor is starred."""
        down = self.domain.pred(x, j)
        if STAR in down:
            return 0.0
        return float(np.exp(self.log_tilde_p(theta, down)
                            - self.log_tilde_p(theta, x)))

    def ratios_minus_batch(self, theta, stats):
        """(n, d) backward ratios from cached DiffStats."""
        eta = self.exp_family.eta(np.asarray(theta, dtype=float))
        out = np.exp(stats.dT_b @ eta + stats.db_b)
        out[stats.star] = 0.0
        return out


class CmpModel(_ModelBase):
    """Two-parameter count model p~(x) = theta1^x (x!)^(-theta2) on d=1.

    theta2 < 1 gives heavier-than-Poisson tails, theta2 > 1 lighter;
    theta2 = 1 is Poisson(theta1) up to normalisation.
    """

    def __init__(self):
        self.dim_x = 1
        self.dim_theta = 2
        self.domain = count_domain(1)
        self.exp_family = ExpFamilyStructure(
            k=2,
            eta=lambda th: np.array([np.log(th[0]), th[1]]),
            grad_eta=lambda th: np.array([[1.0 / th[0], 0.0], [0.0, 1.0]]),
            hess_eta=lambda th: np.array([
                [[-1.0 / th[0] ** 2, 0.0], [0.0, 0.0]],
                [[0.0, 0.0], [0.0, 0.0]],
            ]),
            T=lambda x: np.array([float(x[0]), -gammaln(x[0] + 1.0)]),
            b=lambda x: 0.0,
        )

    def log_tilde_p_batch(self, theta, X):
        x = X[:, 0].astype(float)
        return x * np.log(theta[0]) - theta[1] * gammaln(x + 1.0)

    def diff_stats(self, X):
        x = X[:, 0].astype(float)
        n = len(x)
        dT_b = np.zeros((n, 1, 2))
        dT_b[:, 0, 0] = -1.0
        with np.errstate(divide="ignore"):
            dT_b[:, 0, 1] = np.where(x >= 1.0, np.log(np.maximum(x, 1.0)), 0.0)
        star = (X[:, 0] == 0)[:, None]
        dT_f = np.zeros((n, 1, 2))
        dT_f[:, 0, 0] = -1.0
        dT_f[:, 0, 1] = np.log(x + 1.0)
        zeros = np.zeros((n, 1))
        return DiffStats(dT_b, zeros, star, dT_f, zeros.copy())


def cmp_ratio_minus(theta, x):
    """Closed-form backward ratio x^{theta2} / theta1 (0 at the minimum)."""
    t1, t2 = float(theta[0]), float(theta[1])
    if t1 <= 0.0 or t2 <= 0.0:
        raise ValueError("CMP parameters must be positive, got %r" % (theta,))
    if x == 0:
        return 0.0
    return x ** t2 / t1


class IsingModel(_ModelBase):
    """Binary m x m lattice with 4-neighbour interactions and temperature theta.

    log p~(x) = (1/theta) sum_i sum_{j in N_i} x_i x_j  — every edge counted
    from both ends, exactly as written; rescaling it would silently rescale
    theta.
    """

    def __init__(self, m):
        if m < 2:
            raise ValueError("grid side must be at least 2")
        self.m = int(m)
        self.dim_x = m * m
        self.dim_theta = 1
        self.domain = binary_grid_domain(self.dim_x)
        self.adjacency = self._grid_adjacency(self.m)
        self.neighbors = [np.flatnonzero(row) for row in self.adjacency]
        self.exp_family = ExpFamilyStructure(
            k=1,
            eta=lambda th: np.array([1.0 / th[0]]),
            grad_eta=lambda th: np.array([[-1.0 / th[0] ** 2]]),
            hess_eta=lambda th: np.array([[[2.0 / th[0] ** 3]]]),
            T=lambda x: np.array([self._interaction_sum(np.asarray(x))]),
            b=lambda x: 0.0,
        )

    @staticmethod
    def _grid_adjacency(m):
        d = m * m
        A = np.zeros((d, d))
        for r in range(m):
            for c in range(m):
                i = r * m + c
                if r + 1 < m:
                    A[i, i + m] = A[i + m, i] = 1.0
                if c + 1 < m:
                    A[i, i + 1] = A[i + 1, i] = 1.0
        return A

    def _interaction_sum(self, x):
        return float(x @ self.adjacency @ x)

    def neighbor_sums(self, X):
        return X.astype(float) @ self.adjacency

    def log_tilde_p_batch(self, theta, X):
        Xf = X.astype(float)
        return np.einsum("nd,nd->n", Xf, Xf @ self.adjacency) / theta[0]

    def diff_stats(self, X):
        Xf = X.astype(float)
        ns = Xf @ self.adjacency
        # flipping bit j changes the double-counted sum by 2(1-2x_j)·nbrsum_j
        delta = 2.0 * (1.0 - 2.0 * Xf) * ns
        n, d = X.shape
        star = np.zeros((n, d), dtype=bool)
        zeros = np.zeros((n, d))
        return DiffStats(delta[:, :, None], zeros, star,
                         -delta[:, :, None], zeros.copy())


def ising_ratio_minus(model, theta, x, j):
    """Backward ratio on the binary lattice; decrement = increment = flip."""
    x = np.asarray(x)
    flipped = x.copy()
    flipped[j] = 1 - flipped[j]
    ns = float(x @ model.adjacency[j])
    return float(np.exp(2.0 * (1.0 - 2.0 * x[j]) * ns / theta[0]))


def pseudo_conditional(model, theta, x, i):
    """P(x_i = 1 | rest) from the unnormalised mass; always in (0, 1)."""
    x1 = np.asarray(x, dtype=np.int64).copy()
    x0 = x1.copy()
    x1[i] = 1
    x0[i] = 0
    delta = model.log_tilde_p(theta, tuple(x1)) - model.log_tilde_p(theta, tuple(x0))
    return float(1.0 / (1.0 + np.exp(-delta)))


class PoissonGraphicalModel(_ModelBase):
    """Multivariate counts with nonnegative pairwise inhibition.

    log p~(x) = sum_i theta_i x_i - sum_{(i,j) in E} theta_{ij} x_i x_j
                - sum_i log x_i!
    theta packs the d linear coefficients first, then one interaction
    coefficient per edge (i < j), both in constrained space (interactions
    must be >= 0 for summability).
    """

    has_dispersion = False

    def __init__(self, d, edges):
        self.dim_x = int(d)
        self.edges = self._check_edges(d, edges)
        self.n_edges = len(self.edges)
        self.dim_theta = self.dim_x + self.n_edges
        self.domain = count_domain(self.dim_x)
        # incidence[m] = list of (edge_index, other_endpoint)
        self.incidence = [[] for _ in range(self.dim_x)]
        for e, (i, j) in enumerate(self.edges):
            self.incidence[i].append((e, j))
            self.incidence[j].append((e, i))
        k = self.dim_theta
        self.exp_family = ExpFamilyStructure(
            k=k,
            eta=lambda th: np.asarray(th, dtype=float),
            grad_eta=lambda th: np.eye(k),
            hess_eta=lambda th: np.zeros((k, k, k)),
            T=self._suff_stat,
            b=self._log_base,
            eta_is_identity=True,
        )

    @staticmethod
    def _check_edges(d, edges):
        out = []
        seen = set()
        for (i, j) in edges:
            if not (0 <= i < j < d):
                raise ValueError("edge (%r, %r) must satisfy 0 <= i < j < d" % (i, j))
            if (i, j) in seen:
                raise ValueError("duplicate edge (%r, %r)" % (i, j))
            seen.add((i, j))
            out.append((int(i), int(j)))
        return tuple(out)

    def _suff_stat(self, x):
        x = np.asarray(x, dtype=float)
        inter = np.array([-x[i] * x[j] for (i, j) in self.edges])
        return np.concatenate([x, inter])

    def _log_base(self, x):
        x = np.asarray(x, dtype=float)
        return float(-np.sum(gammaln(x + 1.0)))

    def log_tilde_p_batch(self, theta, X):
        theta = np.asarray(theta, dtype=float)
        Xf = X.astype(float)
        lin = Xf @ theta[:self.dim_x]
        inter = np.zeros(len(Xf))
        for e, (i, j) in enumerate(self.edges):
            inter += theta[self.dim_x + e] * Xf[:, i] * Xf[:, j]
        return lin - inter - np.sum(gammaln(Xf + 1.0), axis=1)

    def _interaction_diffs(self, Xf):
        """(n, d, n_edges) entries +x_other for each axis incident to an edge.

        Valid for both step directions: the interaction statistic is
        -x_i x_j, and stepping x_m by -1 or +1 changes it by +x_other or
        -x_other respectively; the forward block stores T(x) - T(x^{m+}),
        flipping the sign back to +x_other.
        """
        n, d = Xf.shape
        out = np.zeros((n, d, self.n_edges))
        for m in range(d):
            for (e, other) in self.incidence[m]:
                out[:, m, e] = Xf[:, other]
        return out

    def diff_stats(self, X):
        Xf = X.astype(float)
        n, d = Xf.shape
        k = self.dim_x + self.n_edges   # base block, excluding any dispersion
        inter = self._interaction_diffs(Xf)

        dT_b = np.zeros((n, d, k))
        dT_f = np.zeros((n, d, k))
        for m in range(d):
            dT_b[:, m, m] = -1.0
            dT_f[:, m, m] = -1.0
        dT_b[:, :, self.dim_x:] = inter
        dT_f[:, :, self.dim_x:] = inter

        with np.errstate(divide="ignore"):
            db_b = np.where(Xf >= 1.0, np.log(np.maximum(Xf, 1.0)), 0.0)
        db_f = np.log(Xf + 1.0)
        star = X == 0
        return DiffStats(dT_b, db_b, star, dT_f, db_f)

    def conditional_params(self, theta, X, m):
        """Parameters of x_m | rest: count model with log-rate a and unit
        dispersion; a = theta_m - sum over edges at m of theta_e * x_other."""
        theta = np.asarray(theta, dtype=float)
        Xf = X.astype(float)
        a = np.full(len(Xf), theta[m])
        for (e, other) in self.incidence[m]:
            a -= theta[self.dim_x + e] * Xf[:, other]
        return a, 1.0


class CmpGraphicalModel(PoissonGraphicalModel):
    """Graphical count model with per-coordinate dispersion.

    theta packs [linear (d), interactions (n_edges), dispersions (d)]; the
    dispersion coefficients multiply -log x_i! in place of the fixed unit
    coefficient, so all-ones dispersion reproduces PoissonGraphicalModel.
    """

    has_dispersion = True

    def __init__(self, d, edges):
        super().__init__(d, edges)
        self.dim_theta = self.dim_x + self.n_edges + self.dim_x
        k = self.dim_theta
        self.exp_family = ExpFamilyStructure(
            k=k,
            eta=lambda th: np.asarray(th, dtype=float),
            grad_eta=lambda th: np.eye(k),
            hess_eta=lambda th: np.zeros((k, k, k)),
            T=self._suff_stat_disp,
            b=lambda x: 0.0,
            eta_is_identity=True,
        )

    def _suff_stat_disp(self, x):
        x = np.asarray(x, dtype=float)
        inter = np.array([-x[i] * x[j] for (i, j) in self.edges])
        return np.concatenate([x, inter, -gammaln(x + 1.0)])

    def log_tilde_p_batch(self, theta, X):
        theta = np.asarray(theta, dtype=float)
        Xf = X.astype(float)
        lin = Xf @ theta[:self.dim_x]
        inter = np.zeros(len(Xf))
        for e, (i, j) in enumerate(self.edges):
            inter += theta[self.dim_x + e] * Xf[:, i] * Xf[:, j]
        disp = gammaln(Xf + 1.0) @ theta[self.dim_x + self.n_edges:]
        return lin - inter - disp

    def diff_stats(self, X):
        base = super().diff_stats(X)
        Xf = X.astype(float)
        n, d = Xf.shape
        k = self.dim_theta
        off = self.dim_x + self.n_edges

        dT_b = np.zeros((n, d, k))
        dT_b[:, :, :off] = base.dT_b
        dT_f = np.zeros((n, d, k))
        dT_f[:, :, :off] = base.dT_f
        for m in range(d):
            # the -log x! statistic moves from b into the dispersion block
            dT_b[:, m, off + m] = base.db_b[:, m]
            dT_f[:, m, off + m] = base.db_f[:, m]
        zeros = np.zeros((n, d))
        return DiffStats(dT_b, zeros, base.star, dT_f, zeros.copy())

    def conditional_params(self, theta, X, m):
        a, _ = super().conditional_params(theta, X, m)
        disp = float(theta[self.dim_x + self.n_edges + m])
        return a, disp


# ---------------------------------------------------------------------------
# Parameter transforms (constrained theta <-> unconstrained z, coordinatewise)

class CoordinatewiseTransform:
    """Per-coordinate bijections: 'identity', 'log' (theta>0, z=log theta),
    or 'square' (theta=z^2 for nonnegative theta; readback uses sqrt)."""

    KINDS = ("identity", "log", "square")

    def __init__(self, kinds):
        kinds = tuple(kinds)
        for k in kinds:
            if k not in self.KINDS:
                raise ValueError("unknown transform kind %r" % (k,))
        self.kinds = kinds
        self.p = len(kinds)
        self._ident = np.array([k == "identity" for k in kinds])
        self._log = np.array([k == "log" for k in kinds])
        self._square = np.array([k == "square" for k in kinds])

    def to_constrained(self, z):
        z = np.asarray(z, dtype=float)
        out = z.copy()
        out[self._log] = np.exp(z[self._log])
        out[self._square] = z[self._square] ** 2
        return out

    def to_unconstrained(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = theta.copy()
        out[self._log] = np.log(theta[self._log])
        out[self._square] = np.sqrt(theta[self._square])
        return out

    def log_jacobian(self, z):
        """log |det d theta / d z|; -inf on the square kind's z=0 axis."""
        z = np.asarray(z, dtype=float)
        total = float(np.sum(z[self._log]))
        if np.any(self._square):
            zz = z[self._square]
            with np.errstate(divide="ignore"):
                total += float(np.sum(np.log(np.abs(2.0 * zz))))
        return total

    def dtheta_dz(self, z):
        """Diagonal of the Jacobian (all kinds are coordinatewise)."""
        z = np.asarray(z, dtype=float)
        out = np.ones_like(z)
        out[self._log] = np.exp(z[self._log])
        out[self._square] = 2.0 * z[self._square]
        return out

    def grad_log_jacobian(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        out[self._log] = 1.0
        zz = z[self._square]
        with np.errstate(divide="ignore"):
            out[self._square] = np.where(zz != 0.0, 1.0 / zz, np.inf)
        return out


def default_transform(model):
    """Sampling parameterisation used throughout the experiments:
    positive scalars go through log, graphical-model linear terms stay
    identity, and sign-constrained interaction/dispersion terms are squared."""
    if isinstance(model, CmpModel):
        return CoordinatewiseTransform(["log", "log"])
    if isinstance(model, IsingModel):
        return CoordinatewiseTransform(["log"])
    if isinstance(model, CmpGraphicalModel):
        kinds = (["identity"] * model.dim_x + ["square"] * model.n_edges
                 + ["square"] * model.dim_x)
        return CoordinatewiseTransform(kinds)
    if isinstance(model, PoissonGraphicalModel):
        kinds = ["identity"] * model.dim_x + ["square"] * model.n_edges
        return CoordinatewiseTransform(kinds)
    raise TypeError("no default transform for %r" % (model,))
