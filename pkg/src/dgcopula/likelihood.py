"""Likelihood approximations for the discrete Gaussian copula model.

Two computable objectives stand in for the intractable discrete likelihood:

* the distributional-transform objective ``loglik_dt``, which places each
  observation at the midpoint of its cdf jump and evaluates the Gaussian
  copula density there, and
* the jittered objective ``loglik_ce``, which averages the continued
  (piecewise-linear) model over m uniform jitters shared across parameter
  values, giving a smooth simulated likelihood.

``loglik_exact`` is the slow reference: the actual probability of the
observed integer vector as a multivariate normal rectangle, for small n.

All cdf values pass to the normal quantile through whichever tail is
smaller, clipped into [1e-15, 1 - 1e-15], so deep-tail observations degrade
gracefully instead of producing infinities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtri

from .correlation import CorrelationModel
from .marginals import Marginal
from .model import CopulaModel, ParamVector
from .mvn import RectangleProbResult, rectangle_prob
from .rng import JITTER, derive_seed, stream

__all__ = [
    "JitterMatrix",
    "gauss_copula_core",
    "loglik_dt",
    "loglik_ce",
    "ce_std_error",
    "loglik_exact",
    "alternating_orthant_prob",
]

_CLAMP = 1e-15


@dataclass(frozen=True)
class JitterMatrix:
    """An m-by-n matrix of uniforms in the open interval, fixed across calls.

    The jittered objective is a deterministic function of (theta, data,
    jitters); holding the matrix fixed while theta varies is what makes the
    objective smooth enough to optimize.
    """

    w: np.ndarray
    seed: int

    def __post_init__(self):
        arr = np.array(self.w, dtype=float)
        if arr.ndim != 2:
            raise ValueError("jitter matrix must be two dimensional")
        if not np.all((arr > 0.0) & (arr < 1.0)):
            raise ValueError("jitters must lie strictly inside (0, 1)")
        arr.flags.writeable = False
        object.__setattr__(self, "w", arr)

    @property
    def m(self) -> int:
        return self.w.shape[0]

    @property
    def n(self) -> int:
        return self.w.shape[1]

    @classmethod
    def generate(cls, m: int, n: int, seed: int) -> "JitterMatrix":
        """Draw an m-by-n matrix from the stream keyed (seed, jitter-tag)."""
        if m < 1 or n < 1:
            raise ValueError("jitter matrix dimensions must be positive")
        rng = stream(seed, JITTER)
        w = rng.random((m, n))
        # rng.random can return exactly 0.0; nudge into the open interval.
        np.clip(w, 1e-16, np.nextafter(1.0, 0.0), out=w)
        return cls(w, seed)


def _z_two_sided(tail_value: np.ndarray, is_upper: np.ndarray) -> np.ndarray:
    """Normal scores from whichever-tail cdf values, clipped at 1e-15.

    ``tail_value`` holds u where is_upper is False and 1 - u where True, so
    the quantile is taken on a well-scaled number in both tails.
    """
    v = np.clip(tail_value, _CLAMP, 1.0 - _CLAMP)
    z = ndtri(v)
    return np.where(is_upper, -z, z)


def gauss_copula_core(corr: CorrelationModel, z) -> float | np.ndarray:
    """Log Gaussian copula density at normal scores z.

    Equals -log|R|/2 - z'(inv(R) - I)z/2 for a vector z, or one value per
    row when z is a matrix. Identically zero for the identity correlation.
    """
    quad = corr.quad_form_excess(z)
    return -0.5 * corr.log_det() - 0.5 * quad


def loglik_dt(model: CopulaModel, y: np.ndarray, theta: ParamVector) -> float:
    """Jump-midpoint (distributional transform) log likelihood."""
    corr, marg = _prepare(model, y, theta)
    val, upper = marg.dt_midpoint_parts(y)
    z = _z_two_sided(val, upper)
    lp = marg.log_pmf(np.asarray(y))
    return float(gauss_copula_core(corr, z) + lp.sum())


def loglik_ce(
    model: CopulaModel, y: np.ndarray, theta: ParamVector, jitters: JitterMatrix
) -> float:
    """Jittered (continued) log likelihood averaged over a fixed jitter matrix.

    Each jitter row j evaluates the continued model at y - w_j; as w ranges
    over (0, 1) the continued cdf there sweeps the jump interval
    [cdf(y-1), cdf(y)], which is what the vectorized form below exploits.
    """
    corr, marg = _prepare(model, y, theta)
    if jitters.n != model.n:
        raise ValueError("jitter matrix width must match the model dimension")
    z = _ce_scores(marg, np.asarray(y), jitters)
    quad = corr.quad_form_excess(z)
    lp = marg.log_pmf(np.asarray(y))
    avg = float(logsumexp(-0.5 * quad)) - math.log(jitters.m)
    return float(-0.5 * corr.log_det() + lp.sum() + avg)


def ce_std_error(
    model: CopulaModel, y: np.ndarray, theta: ParamVector, jitters: JitterMatrix
) -> float:
    """Delta-method standard error of loglik_ce over the jitter draws.

    Writes the objective as log of a mean of positive weights and propagates
    the standard error of that mean through the log.
    """
    if jitters.m < 2:
        raise ValueError("standard error needs at least two jitter rows")
    corr, marg = _prepare(model, y, theta)
    z = _ce_scores(marg, np.asarray(y), jitters)
    a = -0.5 * corr.quad_form_excess(z)
    ratios = np.exp(a - (logsumexp(a) - math.log(jitters.m)))
    return float(ratios.std(ddof=1) / math.sqrt(jitters.m))


def _ce_scores(marg: Marginal, y: np.ndarray, jitters: JitterMatrix) -> np.ndarray:
    """Normal scores of the continued cdf at y - w for every jitter row.

    Since w is strictly inside (0, 1), floor(y - w) = y - 1 and the
    continued cdf at y - w is cdf(y-1) + (1 - w) pmf(y); the upper-tail
    branch uses the complement sf(y-1) - (1 - w) pmf(y), floored at its
    exact lower bound w pmf(y).
    """
    cdf_prev, sf_prev, p = marg.interval_parts(y)
    g = 1.0 - jitters.w
    upper = cdf_prev > 0.5
    z = np.empty_like(g)
    lo = ~upper
    if np.any(lo):
        u = cdf_prev[lo] + g[:, lo] * p[lo]
        z[:, lo] = ndtri(np.clip(u, _CLAMP, 1.0 - _CLAMP))
    if np.any(upper):
        t = np.maximum(sf_prev[upper] - g[:, upper] * p[upper], jitters.w[:, upper] * p[upper])
        z[:, upper] = -ndtri(np.clip(t, _CLAMP, 1.0 - _CLAMP))
    return z


def loglik_exact(
    model: CopulaModel,
    y: np.ndarray,
    theta: ParamVector,
    *,
    target_se: float = 1e-6,
    seed: int = 0,
) -> tuple[float, float]:
    """Exact log likelihood: the normal rectangle over the observed cell.

    Returns (log probability, standard error of the log). Practical only
    for small n; n = 1 is computed in closed form with zero error.
    """
    corr, marg = _prepare(model, y, theta)
    y = np.asarray(y)
    if model.n == 1:
        return float(marg.log_pmf(y).sum()), 0.0
    z_lo, z_hi = _cell_bounds(marg, y)
    res = rectangle_prob(corr, z_lo, z_hi, target_se=target_se, seed=seed)
    if res.estimate <= 0.0:
        return -math.inf, math.inf
    return math.log(res.estimate), res.standard_error / res.estimate


def alternating_orthant_prob(
    model: CopulaModel,
    y: np.ndarray,
    theta: ParamVector,
    *,
    target_se: float = 1e-6,
    seed: int = 0,
) -> tuple[float, float]:
    """Rectangle probability as a signed sum of 2**n lower orthants.

    An independent route to the same cell probability as loglik_exact,
    useful as a consistency check. Exponential in n, so n is capped at 6.
    Returns (probability, combined standard error).
    """
    corr, marg = _prepare(model, y, theta)
    y = np.asarray(y)
    n = model.n
    if n > 6:
        raise ValueError("orthant expansion is limited to n <= 6")
    z_lo, z_hi = _cell_bounds(marg, y)
    total = 0.0
    var = 0.0
    for code in range(2 ** n):
        bits = np.array([(code >> i) & 1 for i in range(n)], dtype=bool)
        top = np.where(bits, z_lo, z_hi)
        sign = -1.0 if bits.sum() % 2 else 1.0
        if np.any(np.isneginf(top)):
            continue
        if np.all(np.isposinf(top)):
            total += sign
            continue
        res = rectangle_prob(
            corr,
            np.full(n, -np.inf),
            top,
            target_se=target_se,
            seed=derive_seed(seed, code),
        )
        total += sign * res.estimate
        var += res.standard_error ** 2
    return total, math.sqrt(var)


def _prepare(model: CopulaModel, y, theta: ParamVector):
    corr, marg = model.parts(theta)
    arr = np.asarray(y)
    if arr.shape != (model.n,):
        raise ValueError(f"data must be a length-{model.n} vector")
    return corr, marg


def _cell_bounds(marg: Marginal, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normal-scale bounds of the cell {Y = y}: scores of cdf(y-1) and cdf(y).

    Bounds are exact where representable; a cdf value of exactly 0 or 1
    maps to an infinite bound, which the rectangle integrator accepts.
    """
    cdf_prev, sf_prev, _ = marg.interval_parts(y)
    upper = cdf_prev > 0.5
    z_lo = np.where(
        upper,
        -_raw_quantile(sf_prev),
        _raw_quantile(cdf_prev),
    )
    cdf_cur = marg.cdf(y)
    sf_cur = marg.sf(y)
    upper_cur = cdf_cur > 0.5
    z_hi = np.where(upper_cur, -_raw_quantile(sf_cur), _raw_quantile(cdf_cur))
    return z_lo, z_hi


def _raw_quantile(p: np.ndarray) -> np.ndarray:
    return ndtri(np.asarray(p, dtype=float))
