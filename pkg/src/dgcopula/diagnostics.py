"""Bootstrap exactness diagnostic and distribution-calibration checks.

The headline statistic kappa measures how far the jump-midpoint objective is
from behaving like a true likelihood. Under a true likelihood the expected
outer product of the score equals the expected negated Hessian (the second
Bartlett identity); kappa is the Frobenius distance between parametric
bootstrap estimates of the two sides, both taken at the same parameter
value on the natural scale.

The remaining helpers calibrate likelihood-ratio samples: a Kolmogorov-
Smirnov test against a chi-squared reference, maximum likelihood gamma and
chi-squared fits with AIC, and Krippendorff's interval-data alpha for
agreement between two raters.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammainc, gammaln, polygamma

from .fit import hessian_fd, score_fd
from .likelihood import loglik_dt
from .model import CopulaModel, ParamVector
from .rng import BOOTSTRAP, RESAMPLE, stream

__all__ = [
    "KappaResult",
    "kappa",
    "kappa_grid",
    "ks_test_chisq",
    "fit_gamma_mle",
    "fit_chisq_mle",
    "krippendorff_alpha",
]

_Z975 = 1.959963984540054


@dataclass(frozen=True)
class KappaResult:
    """Bootstrap estimates of the two Bartlett-identity sides and their gap."""

    v_hat: np.ndarray
    j_hat: np.ndarray
    kappa_hat: float
    n_b: int
    n_dropped: int
    theta_used: ParamVector

    def __post_init__(self):
        for name in ("v_hat", "j_hat"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def _kappa_replicate(args) -> tuple[np.ndarray, np.ndarray]:
    model, theta, seed, i = args
    rng = stream(seed, BOOTSTRAP, i)
    y = model.simulate(theta, rng)
    names = theta.names

    def ll(values: np.ndarray) -> float:
        return loglik_dt(model, y, ParamVector(names, values))

    g = score_fd(ll, theta.values)
    h = hessian_fd(ll, theta.values)
    return g, h


def kappa(
    model: CopulaModel,
    theta: ParamVector,
    *,
    n_b: int = 2000,
    seed: int = 0,
    parallelism: int = 1,
) -> KappaResult:
    """Parametric-bootstrap Bartlett gap of the jump-midpoint objective.

    Simulates n_b datasets at theta, differentiates the objective at theta
    on the natural scale for each, and compares the mean score outer product
    V with the mean negated Hessian J. Replicates whose derivatives come
    back non-finite are dropped (counted in the result); results are placed
    by replicate index, so the estimate does not depend on parallelism.

    Args:
        model: the data-generating model.
        theta: natural-scale parameter value, used for both simulation and
            differentiation.
        n_b: number of bootstrap replicates.
        seed: base seed; replicate i draws from the stream (seed, boot, i).
        parallelism: worker processes; 1 runs inline.
    """
    if n_b < 2:
        raise ValueError("the bootstrap needs at least two replicates")
    theta = theta.to_natural()
    d = len(theta.names)
    tasks = [(model, theta, seed, i) for i in range(n_b)]
    if parallelism <= 1:
        results = [_kappa_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_kappa_replicate, tasks, chunksize=64))
    scores = np.array([g for g, _ in results])
    hessians = np.array([h for _, h in results])
    ok = np.all(np.isfinite(scores), axis=1) & np.all(
        np.isfinite(hessians), axis=(1, 2)
    )
    dropped = int(n_b - ok.sum())
    if dropped > 0.01 * n_b:
        raise ValueError(
            f"{dropped} of {n_b} bootstrap replicates failed differentiation"
        )
    scores = scores[ok]
    hessians = hessians[ok]
    v_hat = scores.T @ scores / scores.shape[0]
    j_hat = -hessians.mean(axis=0)
    kappa_hat = float(np.linalg.norm(j_hat - v_hat))
    assert v_hat.shape == (d, d)
    return KappaResult(
        v_hat=v_hat,
        j_hat=j_hat,
        kappa_hat=kappa_hat,
        n_b=n_b,
        n_dropped=dropped,
        theta_used=theta,
    )


def kappa_grid(
    model: CopulaModel,
    rate_values,
    omega_values,
    *,
    n_b: int = 2000,
    seed: int = 0,
    parallelism: int = 1,
) -> np.ndarray:
    """kappa over a (rate, omega) grid for an exchangeable Poisson model.

    Cell (i, j) runs the diagnostic at lambda = rate_values[i],
    omega = omega_values[j]. Every cell reuses the same replicate streams
    (common random numbers), which makes cell-to-cell comparisons much less
    noisy than independent draws would be.

    Returns an array of shape (len(rate_values), len(omega_values)).
    """
    if model.correlation_family != "exch" or model.marginal_family != "poisson":
        raise ValueError("the grid diagnostic is defined for exchangeable Poisson models")
    rates = [float(v) for v in rate_values]
    omegas = [float(v) for v in omega_values]
    if not rates or not omegas:
        raise ValueError("the grid needs at least one value per axis")
    out = np.empty((len(rates), len(omegas)))
    for i, lam in enumerate(rates):
        for j, om in enumerate(omegas):
            theta = model.pack((om,), (lam,))
            # All cells share the replicate streams (common random numbers),
            # so cell-to-cell comparisons are made on positively correlated
            # noise and the ordering of nearby cells is far more stable than
            # with independent draws.
            res = kappa(model, theta, n_b=n_b, seed=seed, parallelism=parallelism)
            out[i, j] = res.kappa_hat
    return out


def _kolmogorov_sf(t: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Uses the alternating series 2 sum_r (-1)^(r-1) exp(-2 r^2 t^2) for
    t >= 1 and the dual theta-function form of the same distribution,
    1 - sqrt(2 pi)/t sum_{k odd} exp(-k^2 pi^2 / (8 t^2)), below it; each
    converges in a handful of terms on its side of the crossover. Values
    are clipped to [0, 1].
    """
    if t <= 0.0:
        return 1.0
    total = 0.0
    if t < 1.0:
        for k in range(1, 401, 2):
            term = math.exp(-k * k * math.pi * math.pi / (8.0 * t * t))
            total += term
            if term < 1e-18:
                break
        value = 1.0 - math.sqrt(2.0 * math.pi) / t * total
    else:
        sign = 1.0
        for r in range(1, 201):
            term = math.exp(-2.0 * r * r * t * t)
            total += sign * term
            sign = -sign
            if term < 1e-18:
                break
        value = 2.0 * total
    return min(max(value, 0.0), 1.0)


def ks_test_chisq(sample, df: float) -> tuple[float, float]:
    """Kolmogorov-Smirnov test of a sample against chi-squared(df).

    Returns (D, p) where D is the supremum distance between the empirical
    cdf and the chi-squared cdf, and p comes from the Kolmogorov series at
    the finite-sample adjusted argument D (sqrt(n) + 0.12 + 0.11 / sqrt(n))
    (Stephens' approximation).
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.shape[0]
    if n < 1:
        raise ValueError("the test needs a nonempty sample")
    if df <= 0.0 or not math.isfinite(df):
        raise ValueError("df must be positive")
    if np.any(x < 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("chi-squared samples must be finite and nonnegative")
    cdf = gammainc(df / 2.0, x / 2.0)
    grid = np.arange(1, n + 1, dtype=float) / n
    d_plus = float(np.max(grid - cdf))
    d_minus = float(np.max(cdf - (grid - 1.0 / n)))
    d = max(d_plus, d_minus)
    root = math.sqrt(n)
    p = _kolmogorov_sf(d * (root + 0.12 + 0.11 / root))
    return d, p


def fit_gamma_mle(sample) -> tuple[float, float, float]:
    """Gamma maximum likelihood fit: returns (shape, scale, aic).

    Solves log(shape) - digamma(shape) = log(mean) - mean(log) by Newton
    from the standard closed-form starting value. Raises on degenerate
    samples and on non-convergence within 100 steps.
    """
    x = np.asarray(sample, dtype=float)
    if x.shape[0] < 10:
        raise ValueError("gamma fit needs at least 10 observations")
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("gamma samples must be finite and positive")
    mean = float(x.mean())
    s = math.log(mean) - float(np.mean(np.log(x)))
    if s <= 0.0:
        raise ValueError("degenerate sample: no spread in the logs")
    shape = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(100):
        g = math.log(shape) - digamma(shape) - s
        gp = 1.0 / shape - polygamma(1, shape)
        step = g / gp
        new = shape - step
        while new <= 0.0:
            step *= 0.5
            new = shape - step
        shape = new
        if abs(step) <= 1e-12 * max(shape, 1.0):
            break
    else:
        raise RuntimeError("gamma shape iteration did not converge")
    scale = mean / shape
    n = x.shape[0]
    ll = float(
        np.sum((shape - 1.0) * np.log(x) - x / scale)
        - n * (gammaln(shape) + shape * math.log(scale))
    )
    return shape, scale, 2.0 * 2 - 2.0 * ll


def fit_chisq_mle(sample) -> tuple[float, tuple[float, float], float]:
    """Chi-squared maximum likelihood fit of the degrees of freedom.

    Returns (df, (lo, hi), aic) where the interval is the 95 percent Wald
    interval from the observed information of the one-parameter family.
    """
    x = np.asarray(sample, dtype=float)
    if x.shape[0] < 10:
        raise ValueError("chi-squared fit needs at least 10 observations")
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("chi-squared samples must be finite and positive")
    target = float(np.mean(np.log(x)))
    df = max(float(x.mean()), 1e-3)
    for _ in range(100):
        g = digamma(df / 2.0) + math.log(2.0) - target
        gp = polygamma(1, df / 2.0) / 2.0
        step = g / gp
        new = df - step
        while new <= 0.0:
            step *= 0.5
            new = df - step
        df = new
        if abs(step) <= 1e-12 * max(df, 1.0):
            break
    else:
        raise RuntimeError("degrees-of-freedom iteration did not converge")
    n = x.shape[0]
    info = n * polygamma(1, df / 2.0) / 4.0
    half = _Z975 / math.sqrt(info)
    ll = float(
        np.sum((df / 2.0 - 1.0) * np.log(x) - x / 2.0)
        - n * (df / 2.0 * math.log(2.0) + gammaln(df / 2.0))
    )
    return df, (df - half, df + half), 2.0 * 1 - 2.0 * ll


def krippendorff_alpha(
    x,
    y,
    *,
    n_boot: int = 1000,
    seed: int = 0,
) -> tuple[float, tuple[float, float]]:
    """Krippendorff's alpha for two interval-scale raters.

    Observed disagreement is the mean squared difference within units;
    expected disagreement is the mean squared difference over all ordered
    pairs of the 2N pooled values. The confidence interval is a percentile
    bootstrap over units (pairs resampled together). Degenerate bootstrap
    draws with zero pooled spread count as perfect agreement.

    Returns (alpha, (lo, hi)) with a 95 percent interval.
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("raters must be two equal-length vectors")
    n = a.shape[0]
    if n < 2:
        raise ValueError("agreement needs at least two units")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("rater values must be finite")
    alpha = _alpha_value(a, b)
    if math.isnan(alpha):
        raise ValueError("zero pooled variance: alpha is undefined")
    rng = stream(seed, RESAMPLE)
    idx = rng.integers(0, n, size=(n_boot, n))
    alphas = _alpha_value_rows(a[idx], b[idx])
    alphas = np.where(np.isnan(alphas), 1.0, alphas)
    lo, hi = np.percentile(alphas, [2.5, 97.5])
    return alpha, (float(lo), float(hi))


def _alpha_value(a: np.ndarray, b: np.ndarray) -> float:
    out = _alpha_value_rows(a[None, :], b[None, :])
    return float(out[0])


def _alpha_value_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[1]
    m = 2 * n
    do = np.mean((a - b) ** 2, axis=1)
    pooled_sum = a.sum(axis=1) + b.sum(axis=1)
    pooled_sq = (a * a).sum(axis=1) + (b * b).sum(axis=1)
    de = (2.0 * m * pooled_sq - 2.0 * pooled_sum ** 2) / (m * (m - 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(de > 0.0, 1.0 - do / de, np.nan)
