"""Maximum likelihood fitting and finite-difference derivatives.

Optimization runs on the unconstrained parameter scale with a
derivative-free simplex search, restarted once from its own solution; the
restart costs little and recovers from premature simplex collapse.
Objective evaluations that raise or return non-finite values are treated as
-inf, so the search simply backs away from bad regions.

The finite-difference helpers use steps relative to max(|x|, 1) and fall
back to one-sided differences (flagged with a warning) when a point on one
side is not evaluable.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .likelihood import JitterMatrix, loglik_ce, loglik_dt
from .model import CopulaModel, ParamVector

__all__ = [
    "FitResult",
    "BoundaryStepWarning",
    "optimize",
    "mle_dt",
    "mle_ce",
    "default_start",
    "score_fd",
    "hessian_fd",
    "likelihood_ratio",
]


class BoundaryStepWarning(RuntimeWarning):
    """A finite-difference stencil lost a point and fell back to one-sided."""


@dataclass(frozen=True)
class FitResult:
    """Outcome of a likelihood maximization."""

    theta_hat: ParamVector
    loglik_at_max: float
    converged: bool
    iterations: int
    hessian_unconstrained: np.ndarray
    objective_kind: str

    def __post_init__(self):
        h = np.array(self.hessian_unconstrained, dtype=float)
        h.flags.writeable = False
        object.__setattr__(self, "hessian_unconstrained", h)


def optimize(
    objective: Callable[[ParamVector], float],
    theta0: ParamVector,
    *,
    maxiter: int = 2000,
    fatol: float = 1e-8,
    xatol: float = 1e-8,
    kind: str = "custom",
) -> FitResult:
    """Maximize a natural-scale objective over the unconstrained scale.

    Args:
        objective: maps a natural-scale ParamVector to a real value.
        theta0: starting point (natural scale, strictly inside the domain).
        maxiter: simplex iteration cap per pass (two passes are run).
        fatol, xatol: simplex termination tolerances.
        kind: label recorded on the result.

    Returns:
        FitResult with the natural-scale maximizer and the negated
        unconstrained-scale curvature at it.
    """
    names = theta0.names
    x0 = theta0.to_unconstrained().values

    def negated(x: np.ndarray) -> float:
        try:
            pv = ParamVector(names, x, "unconstrained").to_natural()
            val = objective(pv)
        except (ValueError, FloatingPointError, OverflowError):
            return math.inf
        return -val if math.isfinite(val) else math.inf

    opts = {"maxiter": maxiter, "fatol": fatol, "xatol": xatol}
    first = minimize(negated, x0, method="Nelder-Mead", options=opts)
    second = minimize(negated, first.x, method="Nelder-Mead", options=opts)
    best = second if second.fun <= first.fun else first
    if not math.isfinite(best.fun):
        raise ValueError("optimization never found a finite objective value")

    x_hat = np.asarray(best.x, dtype=float)
    unconstrained_ll = lambda x: -negated(x)
    hess = hessian_fd(unconstrained_ll, x_hat)
    theta_hat = ParamVector(names, x_hat, "unconstrained").to_natural()
    return FitResult(
        theta_hat=theta_hat,
        loglik_at_max=-float(best.fun),
        converged=bool(first.success and second.success),
        iterations=int(first.nit + second.nit),
        hessian_unconstrained=-hess,
        objective_kind=kind,
    )


def mle_dt(
    model: CopulaModel, y: np.ndarray, theta0: ParamVector | None = None, **options
) -> FitResult:
    """Fit by maximizing the jump-midpoint objective."""
    start = theta0 if theta0 is not None else default_start(model, y)
    return optimize(lambda pv: loglik_dt(model, y, pv), start, kind="DT", **options)


def mle_ce(
    model: CopulaModel,
    y: np.ndarray,
    theta0: ParamVector | None = None,
    *,
    jitters: JitterMatrix | None = None,
    m: int = 1000,
    seed: int = 0,
    **options,
) -> FitResult:
    """Fit by maximizing the jittered objective over a fixed jitter matrix.

    Pass ``jitters`` to share a matrix with other evaluations (for example a
    likelihood ratio against the same objective); otherwise one is generated
    from (seed, m).
    """
    start = theta0 if theta0 is not None else default_start(model, y)
    jit = jitters if jitters is not None else JitterMatrix.generate(m, model.n, seed)
    return optimize(
        lambda pv: loglik_ce(model, y, pv, jit), start, kind="CE", **options
    )


def default_start(model: CopulaModel, y: np.ndarray) -> ParamVector:
    """Moment-matched starting values, pulled inside the domain boundaries.

    Correlation starts are deliberately mild (0.3 within the valid range);
    the simplex handles the rest. Marginal starts match the sample mean and,
    for the negative binomial, the sample variance.
    """
    arr = np.asarray(y, dtype=float)
    mean = float(arr.mean())
    var = float(arr.var(ddof=1)) if arr.size > 1 else mean

    fam = model.marginal_family
    if fam == "poisson":
        marg = (max(mean, 0.05),)
    elif fam == "negbinomial":
        mu = max(mean, 0.05)
        excess = max(var - mu, mu * mu / 50.0)
        marg = (mu, mu * mu / excess)
    else:
        marg = (min(max(mean, 0.02), 0.98),)

    corr_fam = model.correlation_family
    if corr_fam == "ar1":
        corr = (0.3,)
    elif corr_fam == "exch":
        corr = (0.3,)
    else:
        corr = ()
    return model.pack(corr, marg)


def _try_eval(f: Callable[[np.ndarray], float], x: np.ndarray) -> float:
    try:
        v = f(x)
    except (ValueError, FloatingPointError, OverflowError):
        return math.nan
    return v if math.isfinite(v) else math.nan


def score_fd(
    f: Callable[[np.ndarray], float], x, *, rel_step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient with steps h_j = rel_step * max(|x_j|, 1).

    Falls back to a one-sided difference, with a BoundaryStepWarning, when
    one side cannot be evaluated; entries where neither side works are NaN.
    """
    x = np.asarray(x, dtype=float)
    g = np.empty(x.shape[0])
    f0 = None
    for j in range(x.shape[0]):
        h = rel_step * max(abs(x[j]), 1.0)
        xp = x.copy()
        xp[j] += h
        xm = x.copy()
        xm[j] -= h
        fp = _try_eval(f, xp)
        fm = _try_eval(f, xm)
        if math.isfinite(fp) and math.isfinite(fm):
            g[j] = (fp - fm) / (2.0 * h)
            continue
        if f0 is None:
            f0 = _try_eval(f, x)
        if math.isfinite(fp) and math.isfinite(f0):
            warnings.warn("one-sided difference in coordinate %d" % j, BoundaryStepWarning)
            g[j] = (fp - f0) / h
        elif math.isfinite(fm) and math.isfinite(f0):
            warnings.warn("one-sided difference in coordinate %d" % j, BoundaryStepWarning)
            g[j] = (f0 - fm) / h
        else:
            g[j] = math.nan
    return g


def hessian_fd(
    f: Callable[[np.ndarray], float], x, *, rel_step: float = 1e-4
) -> np.ndarray:
    """Symmetric central-difference Hessian.

    Diagonal entries use the three-point second difference; off-diagonal
    entries the four-point cross stencil. If a stencil point cannot be
    evaluated the entry falls back to a forward variant (flagged), matching
    score_fd's behavior near domain boundaries. The result is exactly
    symmetric by construction.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    h = rel_step * np.maximum(np.abs(x), 1.0)
    f0 = _try_eval(f, x)
    H = np.empty((d, d))

    def at(*steps) -> float:
        xp = x.copy()
        for j, s in steps:
            xp[j] += s
        return _try_eval(f, xp)

    for j in range(d):
        fp = at((j, h[j]))
        fm = at((j, -h[j]))
        if math.isfinite(fp) and math.isfinite(fm) and math.isfinite(f0):
            H[j, j] = (fp - 2.0 * f0 + fm) / (h[j] * h[j])
        else:
            f2 = at((j, 2.0 * h[j])) if math.isfinite(fp) else at((j, -2.0 * h[j]))
            f1 = fp if math.isfinite(fp) else fm
            warnings.warn("one-sided curvature in coordinate %d" % j, BoundaryStepWarning)
            H[j, j] = (f2 - 2.0 * f1 + f0) / (h[j] * h[j])

    for i in range(d):
        for j in range(i + 1, d):
            pp = at((i, h[i]), (j, h[j]))
            pm = at((i, h[i]), (j, -h[j]))
            mp = at((i, -h[i]), (j, h[j]))
            mm = at((i, -h[i]), (j, -h[j]))
            if all(map(math.isfinite, (pp, pm, mp, mm))):
                H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * h[i] * h[j])
            else:
                fi = at((i, h[i]))
                fj = at((j, h[j]))
                warnings.warn(
                    "one-sided cross difference in (%d, %d)" % (i, j), BoundaryStepWarning
                )
                H[i, j] = H[j, i] = (pp - fi - fj + f0) / (h[i] * h[j])
    return 0.5 * (H + H.T)


def likelihood_ratio(
    objective: Callable[[ParamVector], float],
    theta_hat: ParamVector,
    theta0: ParamVector,
) -> float:
    """2 * (objective(theta_hat) - objective(theta0)), floored at zero.

    A materially negative value means theta_hat does not actually maximize
    the objective; tiny negatives from optimizer slack are clipped.
    """
    lam = 2.0 * (objective(theta_hat) - objective(theta0))
    if lam < -1e-6:
        warnings.warn(
            f"likelihood ratio {lam:.3g} is negative; theta_hat is not a maximizer",
            RuntimeWarning,
        )
    return max(lam, 0.0)
