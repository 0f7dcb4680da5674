"""Synthetic crowd-sensing data: users with exponentially distributed error
variances reporting on uniformly drawn ground truths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .core import GroundTruth, ObservationTable
from .discovery import crh_weights


@dataclass(frozen=True)
class SynthConfig:
    n_objects: int = 30
    n_users: int = 150
    lambda1: float = 1.0
    truth_low: float = 0.0
    truth_high: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_objects < 1 or self.n_users < 1:
            raise ValueError("n_objects and n_users must be >= 1")
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be > 0")
        if not self.truth_low <= self.truth_high:
            raise ValueError("truth_low must not exceed truth_high")


@dataclass(frozen=True)
class SynthData:
    table: ObservationTable
    truth: GroundTruth
    error_variances: np.ndarray

    def __iter__(self):
        return iter((self.table, self.truth, self.error_variances))


def generate(config):
    N, S, seed = config.n_objects, config.n_users, config.seed
    u = _rng.uniform(seed, _rng.TRUTH, np.arange(N))
    truth = config.truth_low + (config.truth_high - config.truth_low) * u
    sigma2 = _rng.exponential(config.lambda1, seed, _rng.ERROR_VARIANCE, np.arange(S))

    obj, usr = np.meshgrid(np.arange(N), np.arange(S), indexing="ij")
    obj, usr = obj.ravel(), usr.ravel()
    err = _rng.standard_normal(seed, _rng.ERROR, usr, obj) * np.sqrt(sigma2[usr])
    table = ObservationTable(obj, usr, truth[obj] + err, n_objects=N, n_users=S)
    sigma2.setflags(write=False)
    return SynthData(table, GroundTruth(truth), sigma2)


def true_weights(table, truth, floor=1e-12):
    """CRH weights measured against the ground truth instead of an estimate."""
    truth.check_covers(table)
    return crh_weights(table, truth.values, floor)
