"""Model assembly and parameter handling.

A model couples one correlation family with one marginal family shared by
all coordinates. Parameters live in a ParamVector: a named, ordered vector
that can be moved between the natural scale (where constraints like
|rho| < 1 hold) and an unconstrained scale used by the optimizer. The
transform is elementwise and keyed by parameter name, so a packed vector
never needs side information about which entry is which.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import expit, ndtr

from .correlation import AR1, CorrelationModel, ExchangeableBlocks, Identity
from .marginals import Marginal, make_marginal, _FAMILIES

__all__ = ["ParamVector", "CopulaModel", "transform"]


def _logit(v: float) -> float:
    return math.log(v / (1.0 - v))


# name -> (natural domain check, to unconstrained, to natural)
_TRANSFORMS = {
    "rho": (lambda v: -1.0 < v < 1.0, math.atanh, math.tanh),
    "omega": (lambda v: 0.0 < v < 1.0, _logit, expit),
    "mu": (lambda v: v > 0.0, math.log, math.exp),
    "k": (lambda v: v > 0.0, math.log, math.exp),
    "lambda": (lambda v: v > 0.0, math.log, math.exp),
    "p": (lambda v: 0.0 < v < 1.0, _logit, expit),
}


@dataclass(frozen=True)
class ParamVector:
    """Named parameter vector on either the natural or unconstrained scale."""

    names: tuple[str, ...]
    values: np.ndarray
    scale: str = "natural"

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        for name in names:
            if name not in _TRANSFORMS:
                raise ValueError(f"unknown parameter name {name!r}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(names),):
            raise ValueError("values must be a vector matching the names")
        if not np.all(np.isfinite(vals)):
            raise ValueError("parameter values must be finite")
        if self.scale not in ("natural", "unconstrained"):
            raise ValueError("scale must be 'natural' or 'unconstrained'")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise KeyError(name) from None

    def asdict(self) -> dict[str, float]:
        return dict(zip(self.names, (float(v) for v in self.values)))

    def with_values(self, values) -> "ParamVector":
        return replace(self, values=np.asarray(values, dtype=float))

    def to_unconstrained(self) -> "ParamVector":
        return transform(self, "unconstrained")

    def to_natural(self) -> "ParamVector":
        return transform(self, "natural")


def transform(theta: ParamVector, scale: str) -> ParamVector:
    """Move a ParamVector to the requested scale.

    Natural values on or outside their domain boundary (for example
    rho = 1.0) raise, as do unconstrained values that overflow the inverse
    map. The transform is a bijection on the open natural domain, so
    round-tripping reproduces the input to floating point accuracy.
    """
    if scale not in ("natural", "unconstrained"):
        raise ValueError("scale must be 'natural' or 'unconstrained'")
    if theta.scale == scale:
        return theta
    out = np.empty(len(theta.names))
    for i, name in enumerate(theta.names):
        check, fwd, inv = _TRANSFORMS[name]
        v = float(theta.values[i])
        if scale == "unconstrained":
            if not check(v):
                raise ValueError(f"{name}={v} is on or outside its natural domain")
            out[i] = fwd(v)
        else:
            try:
                w = float(inv(v))
            except OverflowError:
                w = math.inf
            if not (math.isfinite(w) and check(w)):
                raise ValueError(f"unconstrained {name}={v} maps outside the domain")
            out[i] = w
    return ParamVector(theta.names, out, scale)


_CORR_PARAMS = {"ar1": ("rho",), "exch": ("omega",), "identity": ()}


@dataclass(frozen=True)
class CopulaModel:
    """A correlation family and a marginal family over n coordinates.

    The parameter layout is the correlation parameters followed by the
    marginal parameters, in each family's own order.
    """

    correlation_family: str
    marginal_family: str
    n: int
    block_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.correlation_family not in _CORR_PARAMS:
            raise ValueError(f"unknown correlation family {self.correlation_family!r}")
        if self.marginal_family not in _FAMILIES:
            raise ValueError(f"unknown marginal family {self.marginal_family!r}")
        if self.n < 1:
            raise ValueError("model dimension must be at least 1")
        if self.correlation_family == "exch":
            if self.block_sizes is None:
                raise ValueError("exchangeable correlation needs block sizes")
            sizes = tuple(int(m) for m in self.block_sizes)
            object.__setattr__(self, "block_sizes", sizes)
            if sum(sizes) != self.n:
                raise ValueError("block sizes must sum to the model dimension")
        elif self.block_sizes is not None:
            raise ValueError("block sizes only apply to the exchangeable family")

    @property
    def param_names(self) -> tuple[str, ...]:
        return _CORR_PARAMS[self.correlation_family] + _FAMILIES[self.marginal_family].param_names

    @property
    def n_corr_params(self) -> int:
        return len(_CORR_PARAMS[self.correlation_family])

    def pack(self, corr_values, marg_values) -> ParamVector:
        vals = tuple(corr_values) + tuple(marg_values)
        return ParamVector(self.param_names, np.array(vals, dtype=float))

    def split(self, theta: ParamVector) -> tuple[tuple[float, ...], tuple[float, ...]]:
        if theta.names != self.param_names:
            raise ValueError(
                f"parameter names {theta.names} do not match model layout {self.param_names}"
            )
        if theta.scale != "natural":
            raise ValueError("model parameters must be on the natural scale")
        nc = self.n_corr_params
        vals = tuple(float(v) for v in theta.values)
        return vals[:nc], vals[nc:]

    def build_correlation(self, corr_values) -> CorrelationModel:
        return _cached_correlation(
            self.correlation_family, self.n, self.block_sizes, tuple(corr_values)
        )

    def build_marginal(self, marg_values) -> Marginal:
        return _cached_marginal(self.marginal_family, tuple(marg_values))

    def parts(self, theta: ParamVector) -> tuple[CorrelationModel, Marginal]:
        corr_values, marg_values = self.split(theta)
        return self.build_correlation(corr_values), self.build_marginal(marg_values)

    def simulate(self, theta: ParamVector, rng: np.random.Generator) -> np.ndarray:
        """Draw one dataset: correlated normals pushed through the copula.

        Returns an int64 vector of length n.
        """
        corr, marg = self.parts(theta)
        z = corr.cholesky() @ rng.standard_normal(self.n)
        u = ndtr(z)
        np.clip(u, 1e-16, np.nextafter(1.0, 0.0), out=u)
        return marg.quantile(u)


# Repeated evaluations (simplex search, finite differences, bootstrap loops)
# hit the same parameter values over and over; instances are immutable, so
# sharing them also shares their cached tables and factorizations.
@lru_cache(maxsize=512)
def _cached_marginal(family: str, values: tuple[float, ...]) -> Marginal:
    return make_marginal(family, values)


@lru_cache(maxsize=512)
def _cached_correlation(
    family: str, n: int, block_sizes: tuple[int, ...] | None, values: tuple[float, ...]
) -> CorrelationModel:
    if family == "ar1":
        (rho,) = values
        return AR1(rho, n)
    if family == "exch":
        (omega,) = values
        return ExchangeableBlocks(omega, block_sizes)
    return Identity(n)
