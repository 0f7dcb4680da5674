"""User-side perturbation: exponential noise variances, Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .core import write_vector


@dataclass(frozen=True)
class NoiseProfile:
    """Per-user noise variances sampled with rate ``lambda2``.

    ``seed`` also keys the Gaussian noise streams used by :func:`perturb`.
    """

    lambda2: float
    per_user_variance: np.ndarray
    seed: int

    def __post_init__(self):
        v = np.array(self.per_user_variance, dtype=np.float64)
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("per_user_variance must be a non-empty 1-d vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("noise variances must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "per_user_variance", v)

    @property
    def n_users(self):
        return len(self.per_user_variance)

    @classmethod
    def forced(cls, variances, seed=0, lambda2=float("nan")):
        """Test hook: a profile with caller-chosen variances (zeros allowed)."""
        return cls(lambda2=lambda2, per_user_variance=np.asarray(variances, dtype=np.float64), seed=seed)

    def scaled(self, user, factor):
        """Copy with one user's variance multiplied by ``factor``."""
        v = self.per_user_variance.copy()
        v[user] *= factor
        return NoiseProfile(self.lambda2, v, self.seed)

    def to_csv(self, path):
        write_vector(self.per_user_variance, path, ("user", "variance"))


@dataclass(frozen=True)
class NoiseLevel:
    """Ratio of expected noise variance to expected error variance."""

    c: float

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c >= 0):
            raise ValueError("noise level must be finite and >= 0")


def sample_variances(lambda2, n_users, seed):
    if not lambda2 > 0:
        raise ValueError(f"lambda2 must be positive, got {lambda2}")
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    v = _rng.exponential(lambda2, seed, _rng.NOISE_VARIANCE, np.arange(n_users))
    return NoiseProfile(lambda2=float(lambda2), per_user_variance=v, seed=int(seed))


def noise(table, profile):
    """The Gaussian noise each entry of ``table`` receives under ``profile``.

    Entry (n, s) draws from the stream keyed by (seed, s, n), so a user's noise
    is independent of every other user's presence or data.
    """
    if table.n_users > profile.n_users:
        raise ValueError(f"profile covers {profile.n_users} users, table has {table.n_users}")
    z = _rng.standard_normal(profile.seed, _rng.NOISE, table.users, table.objects)
    return z * np.sqrt(profile.per_user_variance[table.users])


def perturb(table, profile):
    return table.with_values(table.values + noise(table, profile))


def noise_level(lambda1, lambda2):
    if not (lambda1 > 0 and lambda2 > 0):
        raise ValueError("rates must be positive")
    return NoiseLevel(lambda1 / lambda2)


def lambda2_for(lambda1, c):
    """Noise rate giving noise level ``c``; ``inf`` for ``c == 0`` (no noise)."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive")
    if c < 0:
        raise ValueError("noise level must be >= 0")
    return np.inf if c == 0 else lambda1 / c
