"""Structured correlation matrices.

Each family knows its own closed-form log-determinant and an O(n) quadratic
form, so likelihood evaluations never factor a dense n-by-n matrix. Dense
construction and a dense Cholesky remain available both for sampling and as
an independent cross-check of the structured paths.

The quadratic form is exposed in "excess" form, z' (inv(R) - I) z, because
that is the combination the copula objectives use; it vanishes identically
when R is the identity, with no cancellation error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

__all__ = [
    "CorrelationModel",
    "AR1",
    "ExchangeableBlocks",
    "Identity",
    "FactorizationError",
    "dense_log_det",
    "dense_quad_form_excess",
]

# Smallest eigenvalue tolerated at construction time.
_MIN_EIG = 1e-10


class FactorizationError(ValueError):
    """Raised when a correlation matrix is too close to singular to factor."""


def _check_batch(z, n: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != n:
            raise ValueError(f"expected a length-{n} vector, got {arr.shape[0]}")
        return arr[None, :], True
    if arr.ndim == 2:
        if arr.shape[1] != n:
            raise ValueError(f"expected rows of length {n}, got {arr.shape[1]}")
        return arr, False
    raise ValueError("quadratic form takes a vector or a matrix of row vectors")


class CorrelationModel:
    """Base class for structured correlation families."""

    @property
    def n(self) -> int:
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        raise NotImplementedError

    def log_det(self) -> float:
        raise NotImplementedError

    def quad_form_excess(self, z):
        """z' (inv(R) - I) z for a vector, or one value per row of a matrix."""
        raise NotImplementedError

    def cholesky(self) -> np.ndarray:
        """Lower-triangular L with L L' = R, cached per instance."""
        return self._chol

    @cached_property
    def _chol(self) -> np.ndarray:
        try:
            L = scipy.linalg.cholesky(self.dense(), lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise FactorizationError(str(exc)) from None
        L.flags.writeable = False
        return L


@dataclass(frozen=True)
class AR1(CorrelationModel):
    """First-order autoregressive correlation: R[i, j] = rho ** |i - j|."""

    rho: float
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("AR1 needs at least one coordinate")
        if not math.isfinite(self.rho):
            raise ValueError("AR1 coefficient must be finite")
        if self.size > 1 and 1.0 - self.rho * self.rho <= _MIN_EIG:
            raise FactorizationError(
                f"AR1 with rho={self.rho} is numerically singular"
            )

    @property
    def n(self) -> int:
        return self.size

    def dense(self) -> np.ndarray:
        idx = np.arange(self.size)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])

    def log_det(self) -> float:
        return (self.size - 1) * math.log1p(-self.rho * self.rho)

    def quad_form_excess(self, z):
        zz, single = _check_batch(z, self.size)
        if self.size == 1:
            out = np.zeros(zz.shape[0])
            return float(out[0]) if single else out
        rho = self.rho
        s_all = np.einsum("ij,ij->i", zz, zz)
        mid = zz[:, 1:-1]
        s_mid = np.einsum("ij,ij->i", mid, mid)
        cross = np.einsum("ij,ij->i", zz[:, :-1], zz[:, 1:])
        quad = (s_all + rho * rho * s_mid - 2.0 * rho * cross) / (1.0 - rho * rho)
        out = quad - s_all
        return float(out[0]) if single else out


@dataclass(frozen=True)
class ExchangeableBlocks(CorrelationModel):
    """Block-diagonal exchangeable correlation.

    Within a block of size m every off-diagonal entry is ``omega``; distinct
    blocks are independent. Valid when omega < 1 and omega > -1/(m - 1) for
    the largest block, with a margin so the matrix stays factorable.
    """

    omega: float
    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.block_sizes)
        object.__setattr__(self, "block_sizes", sizes)
        if not sizes or any(m < 1 for m in sizes):
            raise ValueError("block sizes must be positive integers")
        if not math.isfinite(self.omega):
            raise ValueError("exchangeable correlation must be finite")
        top = max(sizes)
        if top > 1:
            min_eig = min(1.0 - self.omega, 1.0 + (top - 1) * self.omega)
            if min_eig <= _MIN_EIG:
                raise FactorizationError(
                    f"exchangeable correlation omega={self.omega} is numerically "
                    f"singular for block size {top}"
                )

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        at = 0
        for m in self.block_sizes:
            blk = np.full((m, m), self.omega)
            np.fill_diagonal(blk, 1.0)
            out[at : at + m, at : at + m] = blk
            at += m
        return out

    def log_det(self) -> float:
        total = 0.0
        for m in self.block_sizes:
            if m > 1:
                total += (m - 1) * math.log1p(-self.omega)
                total += math.log1p((m - 1) * self.omega)
        return total

    def quad_form_excess(self, z):
        zz, single = _check_batch(z, self.n)
        w = self.omega
        sizes = self.block_sizes
        # inv of (1-w) I + w J is (I - w J / (1 + (m-1) w)) / (1-w), applied
        # per block; equal block sizes collapse the loop into one reshape.
        if len(set(sizes)) == 1 and sizes[0] > 1:
            m = sizes[0]
            blocks = zz.reshape(zz.shape[0], len(sizes), m)
            ssq = np.einsum("igj,igj->i", blocks, blocks)
            tot = blocks.sum(axis=2)
            quad = (ssq - w * np.einsum("ig,ig->i", tot, tot) / (1.0 + (m - 1) * w)) / (1.0 - w)
            out = quad - ssq
            return float(out[0]) if single else out
        out = np.zeros(zz.shape[0])
        at = 0
        for m in sizes:
            blk = zz[:, at : at + m]
            at += m
            if m == 1:
                continue
            ssq = np.einsum("ij,ij->i", blk, blk)
            tot = blk.sum(axis=1)
            quad = (ssq - w * tot * tot / (1.0 + (m - 1) * w)) / (1.0 - w)
            out += quad - ssq
        return float(out[0]) if single else out


@dataclass(frozen=True)
class Identity(CorrelationModel):
    """Independence: the identity correlation matrix."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("Identity needs at least one coordinate")

    @property
    def n(self) -> int:
        return self.size

    def dense(self) -> np.ndarray:
        return np.eye(self.size)

    def log_det(self) -> float:
        return 0.0

    def quad_form_excess(self, z):
        zz, single = _check_batch(z, self.size)
        out = np.zeros(zz.shape[0])
        return float(out[0]) if single else out


def dense_log_det(matrix: np.ndarray) -> float:
    """Log-determinant via dense Cholesky; cross-check for the closed forms."""
    cho = _factor(matrix)
    return 2.0 * float(np.sum(np.log(np.diag(cho[0]))))


def dense_quad_form_excess(matrix: np.ndarray, z) -> float | np.ndarray:
    """z' (inv(R) - I) z computed from a dense factorization."""
    cho = _factor(matrix)
    zz, single = _check_batch(z, matrix.shape[0])
    solved = scipy.linalg.cho_solve(cho, zz.T).T
    out = np.einsum("ij,ij->i", zz, solved) - np.einsum("ij,ij->i", zz, zz)
    return float(out[0]) if single else out


def _factor(matrix: np.ndarray):
    try:
        return scipy.linalg.cho_factor(np.asarray(matrix, dtype=float), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(str(exc)) from None
