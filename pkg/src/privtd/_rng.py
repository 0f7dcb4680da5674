"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, *counters)``: the counters
are hashed with the SplitMix64 finalizer and mapped to a uniform in (0, 1).
Draws for one user therefore never depend on how many other users exist or
on the order in which users are processed.
"""

import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream tags
TRUTH = 1
ERROR_VARIANCE = 2
ERROR = 3
NOISE_VARIANCE = 4
NOISE = 5
TRIAL = 6


def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(x):
    if isinstance(x, (int, np.integer)):
        return np.uint64(int(x) & _MASK)
    return np.asarray(x).astype(np.int64).view(np.uint64)


def hash_key(seed, *counters):
    """Hash a seed and any number of (broadcastable) integer counters to uint64."""
    with np.errstate(over="ignore"):
        h = _mix(np.atleast_1d(_as_u64(seed) + _GAMMA))
        for c in counters:
            h = _mix(h ^ (_as_u64(c) + _GAMMA))
    return h


def uniform(seed, *counters):
    """Uniform draws strictly inside (0, 1), one per broadcast counter tuple."""
    h = hash_key(seed, *counters)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normal(seed, *counters):
    return ndtri(uniform(seed, *counters))


def exponential(rate, seed, *counters):
    """Exponential draws with the given rate (mean ``1 / rate``)."""
    return -np.log(uniform(seed, *counters)) / rate


def derive_seed(seed, *counters):
    """A non-negative 63-bit child seed."""
    return int(hash_key(seed, *counters)[0] >> np.uint64(1))
