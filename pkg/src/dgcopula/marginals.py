"""Integer-supported marginal distributions.

Besides the usual pmf/cdf/quantile surface, each family exposes the two
smoothed cdf values the copula objectives need: the midpoint of the cdf jump
at an observed count, and the piecewise-linear interpolation of the cdf at
real arguments. Both are computed from whichever tail is smaller, so they
stay accurate far beyond the point where ``1 - cdf`` saturates in floats.

Probabilities are accumulated in a cached table that covers the support up
to a remainder below 1e-22. Above 0.5 the cdf column switches to the
complement of the survival column, which keeps absolute (not just relative)
error near machine epsilon in both tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

__all__ = ["Marginal", "Poisson", "NegBinomial", "Bernoulli", "make_marginal"]

# Tail mass below which the cached table is truncated.
_TAIL_EPS = 1e-22


@dataclass(frozen=True)
class _Table:
    pmf: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray
    neg_sf: np.ndarray
    top: int


def _as_counts(y) -> tuple[np.ndarray, bool]:
    """Coerce to an int64 array of counts; reject non-integer values."""
    arr = np.asarray(y)
    scalar = arr.ndim == 0
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)):
            raise ValueError("count values must be integers")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind not in "iu":
        raise ValueError("count values must be integers")
    return np.atleast_1d(arr.astype(np.int64)), scalar


class Marginal:
    """Base class for integer-supported marginals.

    Subclasses implement ``_log_pmf`` over nonnegative integer arrays,
    ``_mean_sd`` for sizing the probability table, and ``_ratio_bound`` (an
    upper bound on pmf(s+1)/pmf(s) for all s at or beyond a given point)
    for bounding the truncated tail. Instances are immutable; the lazily
    built table is attached once and shared by all later calls.
    """

    param_names: tuple[str, ...] = ()

    def _log_pmf(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _mean_sd(self) -> tuple[float, float]:
        raise NotImplementedError

    def _ratio_bound(self, t: int) -> float:
        raise NotImplementedError

    def param_values(self) -> tuple[float, ...]:
        raise NotImplementedError

    @cached_property
    def _tab(self) -> _Table:
        mean, sd = self._mean_sd()
        top = int(math.ceil(mean + 10.0 * sd + 30.0))
        while True:
            grid = np.arange(top + 1)
            pmf = np.exp(self._log_pmf(grid))
            ratio = self._ratio_bound(top)
            if pmf[-1] == 0.0:
                break
            if ratio < 1.0 and pmf[-1] * ratio / (1.0 - ratio) <= _TAIL_EPS:
                break
            top = 2 * top + 10
        # Survival accumulated from the far end so tiny tail terms are not
        # swallowed by the bulk: sf[t] = sum of pmf over (t, top].
        rev = np.cumsum(pmf[::-1])[::-1]
        sf = np.concatenate([rev[1:], [0.0]])
        cdf = np.cumsum(pmf)
        upper = cdf > 0.5
        cdf = np.where(upper, 1.0 - sf, cdf)
        np.minimum(cdf, 1.0, out=cdf)
        for a in (pmf, cdf, sf):
            a.flags.writeable = False
        neg = -sf
        neg.flags.writeable = False
        return _Table(pmf=pmf, cdf=cdf, sf=sf, neg_sf=neg, top=top)

    # -- point mass ------------------------------------------------------

    def log_pmf(self, y):
        """Log probability mass at integer y; -inf off the support."""
        arr, scalar = _as_counts(y)
        out = np.full(arr.shape, -np.inf)
        ok = arr >= 0
        if np.any(ok):
            out[ok] = self._log_pmf(arr[ok])
        return float(out[0]) if scalar else out

    def pmf(self, y):
        """Probability mass at integer y; zero off the support."""
        arr, scalar = _as_counts(y)
        out = np.zeros(arr.shape)
        ok = arr >= 0
        if np.any(ok):
            out[ok] = np.exp(self._log_pmf(arr[ok]))
        return float(out[0]) if scalar else out

    # -- distribution function --------------------------------------------

    def cdf(self, y):
        """P(Y <= y) at integer y."""
        arr, scalar = _as_counts(y)
        t = self._tab
        idx = np.clip(arr, 0, t.top)
        out = t.cdf[idx]
        out = np.where(arr < 0, 0.0, out)
        out = np.where(arr > t.top, 1.0, out)
        return float(out[0]) if scalar else out

    def sf(self, y):
        """P(Y > y) at integer y, accurate in the upper tail."""
        arr, scalar = _as_counts(y)
        t = self._tab
        idx = np.clip(arr, 0, t.top)
        out = t.sf[idx]
        out = np.where(arr < 0, 1.0, out)
        out = np.where(arr > t.top, 0.0, out)
        return float(out[0]) if scalar else out

    def quantile(self, u):
        """Smallest integer y with cdf(y) >= u, for u strictly inside (0, 1).

        For u above one half the search runs in survival space on the exact
        complement 1 - u, so upper-tail quantiles do not collapse to the
        saturation point of the cdf.
        """
        arr = np.asarray(u, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise ValueError("quantile requires probabilities strictly inside (0, 1)")
        t = self._tab
        out = np.searchsorted(t.cdf, arr, side="left")
        hi = arr > 0.5
        if np.any(hi):
            comp = 1.0 - arr[hi]
            out[hi] = np.searchsorted(t.neg_sf, -comp, side="left")
        out = np.minimum(out, t.top)
        return int(out[0]) if scalar else out.astype(np.int64)

    # -- smoothed cdf values ----------------------------------------------

    def dt_midpoint_parts(self, y):
        """Tail representation of the cdf jump midpoint at observed counts.

        Returns (value, is_upper): where is_upper is False the midpoint is
        value = cdf(y-1) + pmf(y)/2 directly; where True the midpoint equals
        1 - value with value = sf(y-1) - pmf(y)/2 held at or above pmf(y)/2,
        its exact floor. Raises if any pmf(y) underflows to zero, since the
        midpoint of a zero-width jump is not meaningful.
        """
        arr, scalar = _as_counts(y)
        cdf_prev, sf_prev, p = self.interval_parts(arr)
        upper = cdf_prev > 0.5
        half = 0.5 * p
        val = np.where(upper, np.maximum(sf_prev - half, half), cdf_prev + half)
        if scalar:
            return float(val[0]), bool(upper[0])
        return val, upper

    def dt_midpoint(self, y):
        """Midpoint of the cdf jump at y: cdf(y-1) + pmf(y)/2."""
        val, upper = self.dt_midpoint_parts(y)
        out = np.where(upper, 1.0 - np.asarray(val), val)
        return float(out) if np.ndim(y) == 0 else out

    def interval_parts(self, y):
        """(cdf(y-1), sf(y-1), pmf(y)) for observed counts y.

        The three pieces let callers form any smoothed cdf value within the
        jump at y from whichever tail is smaller. Raises when pmf(y)
        underflows to zero.
        """
        arr, scalar = _as_counts(y)
        p = self.pmf(arr)
        if np.any(p <= 0.0):
            raise ValueError("value outside the representable support (pmf is zero)")
        cdf_prev = self.cdf(arr - 1)
        sf_prev = self.sf(arr - 1)
        if scalar:
            return float(cdf_prev[0]), float(sf_prev[0]), float(p[0])
        return cdf_prev, sf_prev, p

    def continued_cdf(self, y):
        """Piecewise-linear cdf: cdf(floor(y)) + frac(y) * pmf(floor(y) + 1).

        Defined for real y > -1; continuous, strictly increasing across the
        support, and 0 at -1 from the right. At integer y it equals cdf(y).
        """
        arr = np.asarray(y, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if np.any(~np.isfinite(arr)) or np.any(arr <= -1.0):
            raise ValueError("continued cdf requires finite arguments above -1")
        fl = np.floor(arr).astype(np.int64)
        frac = arr - fl
        p_next = self.pmf(fl + 1)
        base_cdf = self.cdf(fl)
        base_sf = self.sf(fl)
        upper = base_cdf > 0.5
        lo = base_cdf + frac * p_next
        tail = np.maximum(base_sf - frac * p_next, (1.0 - frac) * p_next)
        out = np.where(upper, 1.0 - tail, np.minimum(lo, 1.0))
        return float(out[0]) if scalar else out

    def mean(self) -> float:
        return self._mean_sd()[0]


@dataclass(frozen=True)
class Poisson(Marginal):
    """Poisson marginal with rate ``lambda``."""

    rate: float

    param_names = ("lambda",)

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ValueError("poisson rate must be finite and positive")

    def _log_pmf(self, y: np.ndarray) -> np.ndarray:
        return y * math.log(self.rate) - self.rate - gammaln(y + 1.0)

    def _mean_sd(self) -> tuple[float, float]:
        return self.rate, math.sqrt(self.rate)

    def _ratio_bound(self, t: int) -> float:
        return self.rate / (t + 1.0)

    def param_values(self) -> tuple[float, ...]:
        return (self.rate,)


@dataclass(frozen=True)
class NegBinomial(Marginal):
    """Negative binomial with mean ``mu`` and dispersion ``k``.

    Parameterized so the variance is mu + mu**2 / k; large k approaches the
    Poisson with the same mean.
    """

    mu: float
    k: float

    param_names = ("mu", "k")

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError("negbinomial mean must be finite and positive")
        if not (math.isfinite(self.k) and self.k > 0.0):
            raise ValueError("negbinomial dispersion must be finite and positive")

    def _log_pmf(self, y: np.ndarray) -> np.ndarray:
        k, mu = self.k, self.mu
        return (
            gammaln(y + k)
            - gammaln(k)
            - gammaln(y + 1.0)
            + k * math.log(k / (k + mu))
            + y * math.log(mu / (k + mu))
        )

    def _mean_sd(self) -> tuple[float, float]:
        return self.mu, math.sqrt(self.mu + self.mu * self.mu / self.k)

    def _ratio_bound(self, t: int) -> float:
        p = self.mu / (self.mu + self.k)
        return p * max(1.0, (t + self.k) / (t + 1.0))

    def param_values(self) -> tuple[float, ...]:
        return (self.mu, self.k)


@dataclass(frozen=True)
class Bernoulli(Marginal):
    """Bernoulli marginal on {0, 1} with success probability ``p``."""

    p: float

    param_names = ("p",)

    def __post_init__(self):
        if not (math.isfinite(self.p) and 0.0 < self.p < 1.0):
            raise ValueError("bernoulli p must lie strictly inside (0, 1)")

    def _log_pmf(self, y: np.ndarray) -> np.ndarray:
        out = np.full(y.shape, -np.inf)
        out[y == 0] = math.log1p(-self.p)
        out[y == 1] = math.log(self.p)
        return out

    def _mean_sd(self) -> tuple[float, float]:
        return self.p, math.sqrt(self.p * (1.0 - self.p))

    @cached_property
    def _tab(self) -> _Table:
        q = 1.0 - self.p
        pmf = np.array([q, self.p])
        cdf = np.array([q, 1.0])
        sf = np.array([self.p, 0.0])
        neg = -sf
        for a in (pmf, cdf, sf, neg):
            a.flags.writeable = False
        return _Table(pmf=pmf, cdf=cdf, sf=sf, neg_sf=neg, top=1)

    def param_values(self) -> tuple[float, ...]:
        return (self.p,)


_FAMILIES = {"poisson": Poisson, "negbinomial": NegBinomial, "bernoulli": Bernoulli}


def make_marginal(family: str, values) -> Marginal:
    """Construct a marginal from its family name and parameter values in order.

    Args:
        family: one of "poisson", "negbinomial", "bernoulli".
        values: sequence of parameter values matching the family's
            ``param_names`` order.
    """
    try:
        cls = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown marginal family {family!r}") from None
    values = tuple(float(v) for v in values)
    if len(values) != len(cls.param_names):
        raise ValueError(
            f"{family} expects {len(cls.param_names)} parameter(s), got {len(values)}"
        )
    return cls(*values)
