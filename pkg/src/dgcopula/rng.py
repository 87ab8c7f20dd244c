"""Deterministic random number streams.

Every stochastic component in the package draws from a generator derived
from a user-supplied integer seed plus a structured key: a purpose tag and
zero or more indices (replicate number, shift number, bootstrap index).
Two calls with the same arguments yield identical streams, and streams with
different keys are statistically independent, so results do not depend on
evaluation order or on how work is split across processes.
"""
from __future__ import annotations

import numpy as np

# Purpose tags. Keeping them distinct means a simulation replicate and a
# jitter matrix built from the same base seed never share a stream.
SIMULATE = 1
JITTER = 2
BOOTSTRAP = 3
QMC_SHIFT = 4
RESAMPLE = 5

__all__ = [
    "SIMULATE",
    "JITTER",
    "BOOTSTRAP",
    "QMC_SHIFT",
    "RESAMPLE",
    "stream",
    "derive_seed",
]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for (seed, *key).

    Args:
        seed: base seed, a nonnegative integer.
        key: purpose tag and indices identifying the consumer.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.default_rng([seed, *key])


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic child seed for components that accept a bare seed."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence([seed, *key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
