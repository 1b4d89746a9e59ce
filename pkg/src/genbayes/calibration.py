"""Bootstrap selection of the loss weight beta.

The weight minimises a score-matching objective over the bootstrap
minimisers and has the closed form

    beta* = sum_b [ grad D(th_b) . grad log prior(th_b) + tr hess D(th_b) ]
            -----------------------------------------------------------
                         sum_b || grad D(th_b) ||^2

with every derivative taken in the original (constrained) parameter space
and D the full-data total loss.  The objective is quadratic in beta, so the
ratio is the unique minimiser whenever the numerator is positive and at
least one gradient is nonzero.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .losses import Dataset
from .samplers import stream


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    init: tuple = None   # unconstrained start; None -> transformed prior mean

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be positive")


@dataclass(frozen=True)
class BootstrapConfig:
    B: int
    seed: int
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")


class CalibrationError(Exception):
    """Raised when the closed-form weight is undefined.

    code is DEGENERATE_GRADIENTS (every minimiser has zero loss gradient)
    or THEOREM_CONDITION_VIOLATED (nonpositive numerator); the computed
    sums ride along for diagnosis.
    """

    def __init__(self, code, numerator, denominator):
        self.code = code
        self.numerator = float(numerator)
        self.denominator = float(denominator)
        super().__init__(
            "%s: numerator=%r denominator=%r" %
            (code, self.numerator, self.denominator))


# ---------------------------------------------------------------------------
# Bootstrap resampling

def bootstrap_resample(data, b_index, seed):
    """Uniform with-replacement resample of the same size; deterministic
    in (seed, b_index)."""
    rng = stream(seed, b_index)
    idx = rng.integers(0, data.n, size=data.n)
    return Dataset(data.domain, data.X[idx])


# ---------------------------------------------------------------------------
# Loss minimisation in unconstrained coordinates

@dataclass
class MinimiseResult:
    theta: np.ndarray       # constrained
    z: np.ndarray           # unconstrained
    grad_norm: float        # unconstrained-space gradient norm at theta
    converged: bool
    n_iters: int


_ARMIJO_C = 1e-4
_MIN_STEP_FACTOR = 1e-14
_MAX_STEP_NORM = 1.0     # per-iteration travel cap in z-space


def minimise_loss(loss, transform, config, init_z):
    """Gradient descent with Armijo backtracking on z -> loss(theta(z)).

    Each move is capped at unit z-norm so a steep start cannot vault over
    the valley into a flat far field.  Stops when the unconstrained gradient
    norm falls below grad_tol; hitting max_iters (or a dead line search)
    instead returns converged=False.
    """
    z = np.array(init_z, dtype=float)
    f = loss.value(transform.to_constrained(z))
    if not np.isfinite(f):
        raise ValueError("loss is not finite at the starting point")
    t = 1.0
    converged = False
    gnorm = np.inf
    it = 0
    for it in range(1, config.max_iters + 1):
        theta = transform.to_constrained(z)
        gz = np.asarray(loss.gradient(theta)) * transform.dtheta_dz(z)
        gnorm = float(np.linalg.norm(gz))
        if gnorm <= config.grad_tol:
            converged = True
            break
        gsq = gnorm * gnorm
        t = min(t * 2.0, _MAX_STEP_NORM / gnorm)
        t_floor = t * _MIN_STEP_FACTOR
        while True:
            f_new = loss.value(transform.to_constrained(z - t * gz))
            if np.isfinite(f_new) and f_new <= f - _ARMIJO_C * t * gsq:
                break
            t *= 0.5
            if t < t_floor:
                break
        if t < t_floor:
            break               # line search dead: report as-is
        z = z - t * gz
        f = f_new
    theta = transform.to_constrained(z)
    gz = np.asarray(loss.gradient(theta)) * transform.dtheta_dz(z)
    gnorm = float(np.linalg.norm(gz))
    if gnorm <= config.grad_tol:
        converged = True
    return MinimiseResult(theta=theta, z=z, grad_norm=gnorm,
                          converged=converged, n_iters=it)


def default_init(prior, transform):
    """Unconstrained start at the transformed prior mean."""
    z = transform.to_unconstrained(np.asarray(prior.mean(), dtype=float))
    if not np.all(np.isfinite(z)):
        raise ValueError("prior mean does not transform to a finite start")
    return z


def graphical_init(transform):
    """Unconstrained start at zero, nudged to 0.1 on square-mapped
    coordinates (exact zero is a stationary point of that map)."""
    z = np.zeros(transform.p)
    for i, kind in enumerate(transform.kinds):
        if kind == "square":
            z[i] = 0.1
    return z


# ---------------------------------------------------------------------------
# Closed-form weight

def _beta_terms(loss, prior, minimisers):
    num = 0.0
    den = 0.0
    grad_norms = []
    for th in np.asarray(minimisers, dtype=float):
        g = np.asarray(loss.gradient(th), dtype=float)
        pg = np.asarray(prior.grad_log_density(th), dtype=float)
        tr = float(loss.hessian_trace(th))
        num += float(g @ pg) + tr
        den += float(g @ g)
        grad_norms.append(float(np.linalg.norm(g)))
    return num, den, grad_norms


def beta_star(loss, prior, minimisers):
    """The closed-form weight at the given constrained-space minimisers."""
    num, den, _ = _beta_terms(loss, prior, minimisers)
    if den == 0.0:
        raise CalibrationError("DEGENERATE_GRADIENTS", num, den)
    if num <= 0.0:
        raise CalibrationError("THEOREM_CONDITION_VIOLATED", num, den)
    return num / den


# ---------------------------------------------------------------------------
# Orchestration

@dataclass
class CalibrationResult:
    beta_star: float
    B: int
    minimisers: np.ndarray        # (B, p) constrained
    grad_norms: list              # bootstrap-loss gradient norms (z-space)
    converged: list
    numerator: float
    denominator: float

    def to_json(self):
        return json.dumps({
            "beta_star": self.beta_star,
            "B": self.B,
            "minimisers": [[float(v) for v in row]
                           for row in self.minimisers],
            "grad_norms": [float(v) for v in self.grad_norms],
            "converged": [bool(c) for c in self.converged],
            "numerator": self.numerator,
            "denominator": self.denominator,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(beta_star=d["beta_star"], B=d["B"],
                   minimisers=np.asarray(d["minimisers"], dtype=float),
                   grad_norms=d["grad_norms"], converged=d["converged"],
                   numerator=d["numerator"], denominator=d["denominator"])


def calibrate(data, loss_factory, prior, transform, config, threads=1):
    """Full bootstrap calibration.

    loss_factory maps a Dataset to a loss object; the b-th bootstrap loss is
    minimised from the configured start, and the closed-form weight is then
    assembled from the FULL-DATA loss at those minimisers.  Per-b randomness
    is fixed by (seed, b), so any parallel schedule gives identical output;
    non-converged minimisers are kept in the sums but flagged.
    """
    if config.optimizer.init is not None:
        z0 = np.asarray(config.optimizer.init, dtype=float)
    else:
        z0 = default_init(prior, transform)

    def one(b):
        ds_b = bootstrap_resample(data, b, config.seed)
        return minimise_loss(loss_factory(ds_b), transform, config.optimizer,
                             z0)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(config.B)))
    else:
        results = [one(b) for b in range(config.B)]

    minimisers = np.array([r.theta for r in results])
    full_loss = loss_factory(data)
    num, den, _ = _beta_terms(full_loss, prior, minimisers)
    if den == 0.0:
        raise CalibrationError("DEGENERATE_GRADIENTS", num, den)
    if num <= 0.0:
        raise CalibrationError("THEOREM_CONDITION_VIOLATED", num, den)
    return CalibrationResult(
        beta_star=num / den, B=config.B, minimisers=minimisers,
        grad_norms=[r.grad_norm for r in results],
        converged=[r.converged for r in results],
        numerator=num, denominator=den)
