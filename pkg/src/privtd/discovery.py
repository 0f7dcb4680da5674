"""Iterative truth discovery with the CRH weight update, plus naive baselines."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import AggregateResult, WeightVector, mae


class WeightUpdate(str, enum.Enum):
    CRH = "crh"
    UNIFORM = "uniform"


class Baseline(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"


class DiscoveryError(ValueError):
    pass


@dataclass(frozen=True)
class DiscoveryConfig:
    max_iterations: int = 100
    convergence_threshold: float = 1e-6
    distance_floor: float = 1e-12
    weight_update: WeightUpdate = WeightUpdate.CRH
    # scale squared distances by each object's observed variance
    standardize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weight_update", WeightUpdate(self.weight_update))
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be an integer >= 1")
        if not self.convergence_threshold > 0:
            raise ValueError("convergence_threshold must be > 0")
        if not self.distance_floor > 0:
            raise ValueError("distance_floor must be > 0")


def weighted_aggregate(table, weights):
    """Per-object weighted mean of the observed values.

    Only observed entries enter the sums. Raises ``DiscoveryError`` if some
    object's observers all have zero weight.
    """
    w = weights.weights if isinstance(weights, WeightVector) else WeightVector(weights).weights
    if len(w) != table.n_users:
        raise DiscoveryError(f"{len(w)} weights for {table.n_users} users")
    ew = w[table.users]
    den = np.bincount(table.objects, weights=ew, minlength=table.n_objects)
    if np.any(den <= 0):
        n = int(np.flatnonzero(den <= 0)[0])
        raise DiscoveryError(f"object {n} has zero total observer weight")
    num = np.bincount(table.objects, weights=ew * table.values, minlength=table.n_objects)
    lo, hi = table.object_bounds()
    # rounding can push a weighted mean one ulp outside the observed range
    return np.clip(num / den, lo, hi)


def _object_scale(table):
    n = np.bincount(table.objects, minlength=table.n_objects)
    mean = np.bincount(table.objects, weights=table.values, minlength=table.n_objects) / n
    var = np.bincount(table.objects, weights=(table.values - mean[table.objects]) ** 2, minlength=table.n_objects) / n
    var[var <= 0] = 1.0
    return var


def user_distances(table, aggregate, scale=None):
    """Total squared distance of each user's entries to ``aggregate``."""
    aggregate = np.asarray(aggregate, dtype=np.float64)
    if aggregate.shape != (table.n_objects,):
        raise DiscoveryError(f"aggregate must have {table.n_objects} values")
    d = (table.values - aggregate[table.objects]) ** 2
    if scale is not None:
        d = d / scale[table.objects]
    return np.bincount(table.users, weights=d, minlength=table.n_users)


def crh_weights_from_distances(t, floor=1e-12):
    t = np.maximum(np.asarray(t, dtype=np.float64), floor)
    if len(t) < 2:
        raise DiscoveryError("CRH weights need at least 2 users")
    return WeightVector(-np.log(t / t.sum()))


def crh_weights(table, aggregate, floor=1e-12, standardize=False):
    """CRH weights: negative log of each user's share of the total distance.

    Per-user distances are clamped below at ``floor`` so a user sitting exactly
    on the aggregate gets the largest (finite) weight.
    """
    if table.n_users < 2:
        raise DiscoveryError("CRH weights need at least 2 users")
    scale = _object_scale(table) if standardize else None
    return crh_weights_from_distances(user_distances(table, aggregate, scale), floor)


def run(table, config=None):
    """Alternate weighted aggregation and weight estimation until the
    aggregate moves by less than the threshold (MAE) or the iteration cap is hit.
    """
    config = config or DiscoveryConfig()
    if config.weight_update is WeightUpdate.CRH and table.n_users < 2:
        raise DiscoveryError("CRH weights need at least 2 users")
    scale = _object_scale(table) if config.standardize else None

    weights = WeightVector.uniform(table.n_users)
    prev = None
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        agg = weighted_aggregate(table, weights)
        if config.weight_update is WeightUpdate.CRH:
            weights = crh_weights_from_distances(user_distances(table, agg, scale), config.distance_floor)
        if prev is not None and mae(agg, prev) < config.convergence_threshold:
            converged = True
            break
        prev = agg
    agg.setflags(write=False)
    return AggregateResult(values=agg, weights=weights, iterations=it, converged=converged)


def baseline_aggregate(table, kind=Baseline.MEAN):
    kind = Baseline(kind)
    if kind is Baseline.MEAN:
        n = np.bincount(table.objects, minlength=table.n_objects)
        return np.bincount(table.objects, weights=table.values, minlength=table.n_objects) / n
    return np.array([np.median(g) for g in table.groups()])
