"""Loss functions D_n(theta) entering exp(-beta D_n): discrete-Fisher,
kernel-Stein, and negative pseudo-log-likelihood.

Conventions fixed across every loss here:

* value/gradient/hessian_trace refer to the TOTAL loss, i.e. n times the
  per-datum mean, so the bootstrap weight formula applies to them verbatim.
* Everything is a function of position indices only; re-encoding raw data
  values in an order-preserving way cannot change any output.

The DFD and KSD evaluators aggregate (datum, axis) cells by their unique
sufficient-statistic differences at construction time, which makes repeated
evaluation (MCMC, bootstrap optimisation) cost O(#unique cells) instead of
O(n d) or O(n^2 d); the unaggregated routes are kept alongside and the test
suite pins the two routes together.
"""

import numpy as np

from .domains import STAR


class Dataset:
    """(n, d) integer position array tied to its domain."""

    def __init__(self, domain, X):
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("expected an (n, d) array, got shape %r" % (X.shape,))
        if len(X) < 1:
            raise ValueError("dataset must contain at least one point")
        domain.validate_positions(X)
        self.domain = domain
        self.X = X
        self.n, self.d = X.shape
        self._unique = None

    @classmethod
    def from_points(cls, domain, points):
        return cls(domain, np.asarray([tuple(p) for p in points], dtype=np.int64))

    def unique(self):
        """Unique rows and their multiplicities (cached)."""
        if self._unique is None:
            Xu, counts = np.unique(self.X, axis=0, return_counts=True)
            self._unique = (Xu, counts.astype(float))
        return self._unique

    def n_unique(self):
        return len(self.unique()[0])


# ---------------------------------------------------------------------------
# Kernels on the discrete domain

class AgreementKernel:
    """k0(x, x') = exp(-(1/d) * #{i : x_i = x'_i}); k0(x, x) = e^{-1} <= 1."""

    weighted = False

    def __init__(self, domain):
        self.domain = domain
        self.d = domain.d

    def k0_matrix(self, Xa, Xb):
        agree = np.zeros((len(Xa), len(Xb)))
        for i in range(self.d):
            agree += Xa[:, i, None] == Xb[None, :, i]
        return np.exp(-agree / self.d)

    def weight(self, X):
        return np.ones(len(X))

    def weight_succ(self, X):
        """m(x^{i+}) for every axis i; shape (n, d)."""
        return np.ones(X.shape)

    def evaluate(self, x, y):
        agree = sum(1 for a, b in zip(x, y) if a == b)
        return float(np.exp(-agree / self.d)) * self.weight_point(x) * self.weight_point(y)

    def weight_point(self, x):
        return 1.0


class WeightedAgreementKernel(AgreementKernel):
    """Agreement kernel damped away from the domain's extreme spin sums:
    both arguments are multiplied by m(x) = sigmoid(90 - |sum_i (2x_i - 1)|),
    which discounts near-constant configurations on large lattices."""

    weighted = True

    @staticmethod
    def _m(spin_sums):
        return 1.0 / (1.0 + np.exp(-(90.0 - np.abs(spin_sums))))

    def weight(self, X):
        return self._m((2.0 * X - 1.0).sum(axis=1))

    def weight_succ(self, X):
        s = (2.0 * X - 1.0).sum(axis=1)
        out = np.empty(X.shape)
        for i in range(self.d):
            up = self.domain.succ_positions(X, i)
            out[:, i] = self._m(s + 2.0 * (up - X[:, i]))
        return out

    def weight_point(self, x):
        return float(self._m(np.array([sum(2.0 * v - 1.0 for v in x)]))[0])


# ---------------------------------------------------------------------------
# Discrete Fisher divergence loss

class DfdLoss:
    """TOTAL empirical DFD loss n * (1/n) sum_i sum_j [r_{j-}(x_i)^2
    - 2 r_{j-}(x_i^{j+})] with analytic derivatives through the model's
    natural parameter map.

    aggregate: True / False / "auto" — "auto" aggregates over unique data
    points when there are fewer than n/2 of them, the regime where count
    data repeat; cells are then further merged by identical statistic
    differences, which is exact.
    """

    def __init__(self, model, data, aggregate="auto"):
        self.model = model
        self.data = data
        self.exp_family = getattr(model, "exp_family", None)
        if aggregate == "auto":
            aggregate = data.n_unique() < data.n / 2
        self.aggregated = bool(aggregate)
        if self.exp_family is not None:
            self._build_features()

    def _build_features(self):
        if self.aggregated:
            X, w = self.data.unique()
        else:
            X, w = self.data.X, np.ones(self.data.n)
        stats = self.model.diff_stats(X)
        k = self.exp_family.k

        live = ~stats.star
        Fb = np.column_stack([
            stats.dT_b[live].reshape(-1, k), stats.db_b[live]])
        wb = np.broadcast_to(w[:, None], stats.star.shape)[live].astype(float)
        d = X.shape[1]
        Ff = np.column_stack([
            stats.dT_f.reshape(-1, k), stats.db_f.reshape(-1)])
        wf = np.repeat(w, d).astype(float)

        if self.aggregated:
            Fb, wb = _merge_rows(Fb, wb)
            Ff, wf = _merge_rows(Ff, wf)
        self._Fb, self._wb = Fb, wb
        self._Ff, self._wf = Ff, wf
        self._k = k

    def _terms(self, theta):
        eta = self.exp_family.eta(np.asarray(theta, dtype=float))
        k = self._k
        # Overflow saturates to inf, which is the intended value of the
        # loss at parameters this extreme; the posterior rejects them.
        with np.errstate(over="ignore"):
            A = np.exp(2.0 * (self._Fb[:, :k] @ eta + self._Fb[:, k]))
            B = np.exp(self._Ff[:, :k] @ eta + self._Ff[:, k])
        return A, B

    _VALUE_BLOCK = 65536

    @staticmethod
    def _weighted_exp_sum(F, w, eta, k, scale):
        """sum_u w_u * exp(scale * (F[u,:k] @ eta + F[u,k])), accumulated in
        row blocks so large inputs stay cache-resident (keeps evaluation
        time linear in the row count)."""
        rows = F.shape[0]
        step = DfdLoss._VALUE_BLOCK
        total = 0.0
        with np.errstate(over="ignore"):
            for lo in range(0, rows, step):
                blk = F[lo:lo + step]
                t = blk[:, :k] @ eta
                t += blk[:, k]
                if scale != 1.0:
                    t *= scale
                np.exp(t, out=t)
                total += float(w[lo:lo + step] @ t)
        return total

    def value(self, theta):
        if self.exp_family is None:
            return self._value_slow(theta)
        eta = self.exp_family.eta(np.asarray(theta, dtype=float))
        k = self._k
        if self._Fb.shape[0] <= self._VALUE_BLOCK:
            A, B = self._terms(theta)
            return float(self._wb @ A - 2.0 * (self._wf @ B))
        return (self._weighted_exp_sum(self._Fb, self._wb, eta, k, 2.0)
                - 2.0 * self._weighted_exp_sum(self._Ff, self._wf, eta, k,
                                               1.0))

    def gradient(self, theta):
        if self.exp_family is None:
            return _fd_gradient(self.value, theta)
        theta = np.asarray(theta, dtype=float)
        A, B = self._terms(theta)
        k = self._k
        g_eta = (2.0 * (self._wb * A) @ self._Fb[:, :k]
                 - 2.0 * (self._wf * B) @ self._Ff[:, :k])
        return g_eta @ self.exp_family.grad_eta(theta)

    def hessian_trace(self, theta):
        if self.exp_family is None:
            return _fd_hessian_trace(self.value, theta)
        theta = np.asarray(theta, dtype=float)
        A, B = self._terms(theta)
        k = self._k
        J = self.exp_family.grad_eta(theta)
        Pb = self._Fb[:, :k] @ J
        Pf = self._Ff[:, :k] @ J
        quad = (4.0 * (self._wb * A) @ np.einsum("up,up->u", Pb, Pb)
                - 2.0 * (self._wf * B) @ np.einsum("up,up->u", Pf, Pf))
        g_eta = (2.0 * (self._wb * A) @ self._Fb[:, :k]
                 - 2.0 * (self._wf * B) @ self._Ff[:, :k])
        trh = np.trace(self.exp_family.hess_eta(theta), axis1=1, axis2=2)
        return float(quad + g_eta @ trh)

    def _value_slow(self, theta):
        """Ratio-function route for models without natural-parameter maps."""
        total = 0.0
        dom = self.model.domain
        for row in self.data.X:
            x = tuple(int(v) for v in row)
            for j in range(self.data.d):
                r = self.model.ratio_minus(theta, x, j)
                fwd = self.model.ratio_minus(theta, dom.succ(x, j), j)
                total += r * r - 2.0 * fwd
        return total


def _merge_rows(F, w):
    """Sum weights of identical feature rows (exact float equality)."""
    Fu, inv = np.unique(F, axis=0, return_inverse=True)
    wu = np.bincount(inv, weights=w, minlength=len(Fu))
    return Fu, wu


def _fd_gradient(f, theta, rel=1e-5):
    theta = np.asarray(theta, dtype=float)
    g = np.zeros_like(theta)
    for k in range(len(theta)):
        h = rel * (1.0 + abs(theta[k]))
        up = theta.copy(); up[k] += h
        dn = theta.copy(); dn[k] -= h
        g[k] = (f(up) - f(dn)) / (2.0 * h)
    return g


def _fd_hessian_trace(f, theta, rel=5e-4):
    theta = np.asarray(theta, dtype=float)
    f0 = f(theta)
    out = 0.0
    for k in range(len(theta)):
        h = rel * (1.0 + abs(theta[k]))
        up = theta.copy(); up[k] += h
        dn = theta.copy(); dn[k] -= h
        out += (f(up) - 2.0 * f0 + f(dn)) / (h * h)
    return out


def dfd_empirical(model, theta, data):
    """Per-datum mean of the empirical divergence (TOTAL loss / n)."""
    return DfdLoss(model, data).value(theta) / data.n


def dfd_gradient(model, theta, data):
    """Gradient of the TOTAL loss."""
    return DfdLoss(model, data).gradient(theta)


def dfd_hessian_trace(model, theta, data):
    """Hessian trace of the TOTAL loss."""
    return DfdLoss(model, data).hessian_trace(theta)


# ---------------------------------------------------------------------------
# Kernel Stein discrepancy loss

def stein_kernel(model, kernel, theta, x, y):
    """Stein-kernelised kernel value: the base kernel hit with the model's
    Stein operator in each argument; symmetric in (x, y)."""
    dom = model.domain
    total = 0.0
    for i in range(dom.d):
        xu = dom.succ(x, i)
        yu = dom.succ(y, i)
        rx = model.ratio_minus(theta, x, i)
        ry = model.ratio_minus(theta, y, i)
        total += (kernel.evaluate(xu, yu) - ry * kernel.evaluate(xu, y)
                  - rx * kernel.evaluate(x, yu) + rx * ry * kernel.evaluate(x, y))
    return float(total)


class KsdLoss:
    """TOTAL V-statistic Stein-discrepancy loss n * KSD^2
    = (1/n) sum_{a,b} stein_kernel(x_a, x_b).

    path:
      "bucket" — O(n^2) precompute at construction, then O(#buckets^2) per
                 evaluation with analytic derivatives (needs exp-family);
      "direct" — O(n^2 d) per evaluation, no precompute (all-binary domains
                 with the unweighted kernel take a matrix-product route,
                 everything else an axis-by-axis one);
      "auto"   — bucket when the model has exp-family structure.
    """

    def __init__(self, model, data, kernel=None, path="auto"):
        self.model = model
        self.data = data
        self.kernel = kernel if kernel is not None else AgreementKernel(model.domain)
        self.exp_family = getattr(model, "exp_family", None)
        if path == "auto":
            path = "bucket" if self.exp_family is not None else "direct"
        if path == "bucket" and self.exp_family is None:
            raise ValueError("bucket path needs exponential-family structure")
        self.path = path
        self._stats = None
        if path == "bucket":
            self._precompute_buckets()

    # -- bucket path -------------------------------------------------------

    def _precompute_buckets(self):
        X = self.data.X
        n, d = X.shape
        stats = self.model.diff_stats(X)
        k = self.exp_family.k
        live = ~stats.star

        feats = np.column_stack([
            stats.dT_b.reshape(-1, k), stats.db_b.reshape(-1)])
        flat_live = live.reshape(-1)
        Fu, inv_live = np.unique(feats[flat_live], axis=0, return_inverse=True)
        U = len(Fu)
        # cell -> bucket index, -1 on starred cells
        cell_bucket = np.full(n * d, -1, dtype=np.int64)
        cell_bucket[flat_live] = inv_live
        cell_bucket = cell_bucket.reshape(n, d)

        m = self.kernel.weight(X)
        Mp = self.kernel.weight_succ(X)
        K0 = self.kernel.k0_matrix(X, X)

        KMp = K0 @ Mp                      # (n, d): plain part of inc
        alpha = np.exp(1.0 / d) - 1.0
        beta = np.exp(-1.0 / d) - 1.0

        inc = KMp.copy()
        for i in range(d):
            col = X[:, i]
            up = self.model.domain.succ_positions(X, i)
            vocab, idx = np.unique(np.concatenate([col, up]), return_inverse=True)
            idx_col = idx[:n]
            idx_up = idx[n:]
            V = len(vocab)
            OH = np.zeros((n, V))
            OH[np.arange(n), idx_col] = Mp[:, i]
            OHup = np.zeros((n, V))
            OHup[np.arange(n), idx_up] = Mp[:, i]
            P = K0 @ OH
            Pup = K0 @ OHup
            inc[:, i] += alpha * P[np.arange(n), idx_col]
            inc[:, i] += beta * Pup[np.arange(n), idx_col]

        W1 = np.zeros(U)
        live_cells = cell_bucket >= 0
        np.add.at(W1, cell_bucket[live_cells],
                  (m[:, None] * inc)[live_cells])

        Q = np.zeros((U, U))
        for i in range(d):
            rows = live_cells[:, i]
            Mb = np.zeros((n, U))
            Mb[np.flatnonzero(rows), cell_bucket[rows, i]] = m[rows]
            Q += Mb.T @ (K0 @ Mb)

        C1 = float(np.einsum("ni,ni->", Mp, K0 @ Mp))
        self._C1, self._W1, self._Q = C1, W1, Q
        self._Fu = Fu
        self._k = k

    def _rho(self, theta):
        eta = self.exp_family.eta(np.asarray(theta, dtype=float))
        k = self._k
        # Overflow saturates to inf: the loss is rightly infinite there.
        with np.errstate(over="ignore"):
            return np.exp(self._Fu[:, :k] @ eta + self._Fu[:, k])

    def value(self, theta):
        if self.path != "bucket":
            return self.value_direct(theta)
        rho = self._rho(theta)
        return float(
            (self._C1 - 2.0 * (self._W1 @ rho) + rho @ self._Q @ rho)
            / self.data.n)

    def gradient(self, theta):
        if self.path != "bucket":
            return _fd_gradient(self.value, theta)
        theta = np.asarray(theta, dtype=float)
        rho = self._rho(theta)
        k = self._k
        G = self._Fu[:, :k] @ self.exp_family.grad_eta(theta)   # (U, p)
        common = 2.0 * (self._Q @ rho - self._W1) * rho
        return (common @ G) / self.data.n

    def hessian_trace(self, theta):
        if self.path != "bucket":
            return _fd_hessian_trace(self.value, theta)
        theta = np.asarray(theta, dtype=float)
        rho = self._rho(theta)
        k = self._k
        J = self.exp_family.grad_eta(theta)
        G = self._Fu[:, :k] @ J
        Gsq = np.einsum("up,up->u", G, G)
        h = self._Fu[:, :k] @ np.trace(
            self.exp_family.hess_eta(theta), axis1=1, axis2=2)
        common = 2.0 * (self._Q @ rho - self._W1) * rho
        RG = rho[:, None] * G
        quad_cross = 2.0 * float(np.sum(RG * (self._Q @ RG)))
        return float(common @ (Gsq + h) + quad_cross) / self.data.n

    # -- direct path -------------------------------------------------------

    def _ratios(self, theta):
        if self.exp_family is not None:
            if self._stats is None:
                self._stats = self.model.diff_stats(self.data.X)
            return self.model.ratios_minus_batch(theta, self._stats)
        X = self.data.X
        R = np.zeros(X.shape)
        for a, row in enumerate(X):
            x = tuple(int(v) for v in row)
            for i in range(X.shape[1]):
                R[a, i] = self.model.ratio_minus(theta, x, i)
        return R

    def value_direct(self, theta, block=512):
        X = self.data.X
        n, d = X.shape
        binary = all(getattr(c, "size", 0) == 2 for c in self.model.domain.coords)
        if binary and not self.kernel.weighted:
            return self._value_binary(theta, block)
        return self._value_generic(theta)

    def _value_binary(self, theta, block):
        """All-binary, unweighted kernel: strip-blocked matrix products.

        With binary coordinates succ = flip, so the off-axis indicator is
        1 - (agreement indicator) and every pair sum reduces to products of
        0/1 matrices with the ratio matrix.
        """
        X = self.data.X.astype(float)
        n, d = X.shape
        R = self._ratios(theta)                 # (n, d)
        Xc = 1.0 - X
        RX = R * X
        RXc = R * Xc
        Sr = R.sum(axis=1)
        alpha = np.exp(1.0 / d) - 1.0
        beta = np.exp(-1.0 / d) - 1.0
        total = 0.0
        for lo in range(0, n, block):
            hi = min(lo + block, n)
            Xs, Xcs = X[lo:hi], Xc[lo:hi]
            agree = Xs @ X.T + Xcs @ Xc.T
            K0 = np.exp(-agree / d)
            # sum_i r_i(b) E_i(a,b) and the mirrored a-side version
            ErB = Xs @ RX.T + Xcs @ RXc.T
            ErA = (RX[lo:hi] @ X.T) + (RXc[lo:hi] @ Xc.T)
            RRT = R[lo:hi] @ R.T
            bracket = (d
                       - (1.0 + beta) * (Sr[lo:hi, None] + Sr[None, :])
                       - (alpha - beta) * (ErA + ErB)
                       + RRT)
            total += float(np.sum(K0 * bracket))
        return total / n

    def _value_generic(self, theta):
        """Axis-by-axis O(n^2 d) assembly for any domain/kernel."""
        X = self.data.X
        n, d = X.shape
        R = self._ratios(theta)
        m = self.kernel.weight(X)
        Mp = self.kernel.weight_succ(X)
        K0 = self.kernel.k0_matrix(X, X)
        alpha = np.exp(1.0 / d) - 1.0
        beta = np.exp(-1.0 / d) - 1.0
        total = 0.0
        for i in range(d):
            col = X[:, i]
            up = self.model.domain.succ_positions(X, i)
            E = (col[:, None] == col[None, :]).astype(float)
            F = (up[:, None] == col[None, :]).astype(float)
            t1 = np.outer(Mp[:, i], Mp[:, i])
            t2 = (Mp[:, i][:, None] * (m * R[:, i])[None, :]) * (1.0 + alpha * E + beta * F)
            t3 = ((m * R[:, i])[:, None] * Mp[:, i][None, :]) * (1.0 + alpha * E + beta * F.T)
            t4 = np.outer(m * R[:, i], m * R[:, i])
            total += float(np.sum(K0 * (t1 - t2 - t3 + t4)))
        return total / n


def ksd_loss(model, kernel, theta, data):
    """TOTAL Stein-discrepancy loss n * KSD^2 (V-statistic)."""
    return KsdLoss(model, data, kernel=kernel).value(theta)


# ---------------------------------------------------------------------------
# Negative pseudo-log-likelihood (binary lattice)

class PseudoNllLoss:
    """TOTAL -log of the product of per-site full conditionals.

    Each conditional is Bernoulli with logit 2 * neighbour_sum / theta, so
    the loss is sum over data and sites of softplus(L) - x * L, which is
    nonnegative. Derivatives use scale-aware central differences.
    """

    def __init__(self, model, data):
        self.model = model
        self.data = data
        self._NS = model.neighbor_sums(data.X)
        self._X = data.X.astype(float)

    def value(self, theta):
        L = 2.0 * self._NS / theta[0]
        return float(np.sum(np.logaddexp(0.0, L) - self._X * L))

    def gradient(self, theta):
        return _fd_gradient(self.value, theta)

    def hessian_trace(self, theta):
        return _fd_hessian_trace(self.value, theta)


def pseudo_nll(model, theta, data):
    return PseudoNllLoss(model, data).value(theta)
