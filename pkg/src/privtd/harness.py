"""Batch experiments for the utility/privacy trade-off.

Every job is a pure function of its configuration and seed. Trial seeds are
derived from ``(master_seed, point_index, trial_index)`` and rows are sorted
before being reported, so results do not depend on the worker count.
"""

from __future__ import annotations

import enum
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from . import _rng, bounds, discovery, perturb, synth
from .core import mae

log = logging.getLogger(__name__)

RAW_COLUMNS = (
    "variable", "value", "trial", "seed", "mae", "mean_abs_noise",
    "epsilon", "iters_orig", "iters_pert", "wall_ms",
)

# seed sub-keys
_DATA = 1
_NOISE = 2


class SweepVariable(str, enum.Enum):
    NOISE_LEVEL_C = "noise_level_c"
    LAMBDA1 = "lambda1"
    N_USERS = "n_users"


@dataclass(frozen=True)
class TrialResult:
    mae_utility: float
    mean_abs_noise: float
    iters_orig: int
    iters_pert: int
    wall_ms: float = math.nan

    def __iter__(self):
        return iter((self.mae_utility, self.mean_abs_noise, self.iters_orig, self.iters_pert))


def _trial_inputs(synth_cfg, c, seed, boost=None):
    data = synth.generate(replace(synth_cfg, seed=_rng.derive_seed(seed, _DATA)))
    noise_seed = _rng.derive_seed(seed, _NOISE)
    if c == 0:
        profile = perturb.NoiseProfile.forced(np.zeros(synth_cfg.n_users), noise_seed, lambda2=math.inf)
    else:
        profile = perturb.sample_variances(perturb.lambda2_for(synth_cfg.lambda1, c), synth_cfg.n_users, noise_seed)
    if boost is not None:
        profile = profile.scaled(*boost)
    return data, profile


def run_trial(synth_cfg, c, disc=None, seed=0, timing=False):
    """Generate data, aggregate it before and after perturbation at noise level ``c``.

    ``c == 0`` disables perturbation. Returns utility loss (MAE between the
    two aggregates), the empirical mean |noise| and both iteration counts.
    """
    if not c >= 0:
        raise ValueError("noise level must be >= 0")
    disc = disc or discovery.DiscoveryConfig()
    data, profile = _trial_inputs(synth_cfg, c, seed)
    orig = discovery.run(data.table, disc)

    t0 = time.perf_counter()
    xi = perturb.noise(data.table, profile)
    pert = discovery.run(data.table.with_values(data.table.values + xi), disc)
    wall = (time.perf_counter() - t0) * 1e3 if timing else math.nan

    return TrialResult(
        mae_utility=mae(orig.values, pert.values),
        mean_abs_noise=float(np.mean(np.abs(xi))),
        iters_orig=orig.iterations,
        iters_pert=pert.iterations,
        wall_ms=wall,
    )


@dataclass(frozen=True)
class SweepSpec:
    variable: SweepVariable
    values: tuple
    trials: int = 20
    synth: synth.SynthConfig = field(default_factory=synth.SynthConfig)
    discovery: discovery.DiscoveryConfig = field(default_factory=discovery.DiscoveryConfig)
    # noise level used when the swept variable is not c
    c: float = 1.0
    # when set, c at each point is the privacy floor for this epsilon instead
    epsilon: float | None = None
    delta: float = 0.05
    sensitivity: bounds.SensitivityParams = field(default_factory=bounds.SensitivityParams)

    def __post_init__(self):
        object.__setattr__(self, "variable", SweepVariable(self.variable))
        vals = tuple(self.values)
        if not vals:
            raise ValueError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if self.variable is SweepVariable.N_USERS:
            if any(int(v) != v for v in vals):
                raise ValueError("n_users values must be integers")
            vals = tuple(int(v) for v in vals)
        object.__setattr__(self, "values", vals)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def point(self, value):
        """(synth config, noise level) for one sweep value."""
        cfg = self.synth
        if self.variable is SweepVariable.LAMBDA1:
            cfg = replace(cfg, lambda1=float(value))
        elif self.variable is SweepVariable.N_USERS:
            cfg = replace(cfg, n_users=int(value))
        if self.variable is SweepVariable.NOISE_LEVEL_C:
            c = float(value)
        elif self.epsilon is not None:
            c = bounds.privacy_noise_floor(cfg.lambda1, bounds.PrivacyTarget(self.epsilon, self.delta), self.sensitivity)
        else:
            c = self.c
        return cfg, c

    def epsilon_label(self, lambda1, c):
        return math.inf if c == 0 else bounds.epsilon_for_noise(lambda1, c, self.delta, self.sensitivity)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown sweep spec keys: {sorted(unknown)}")
        if "synth" in d:
            d["synth"] = synth.SynthConfig(**d["synth"])
        if "discovery" in d:
            d["discovery"] = discovery.DiscoveryConfig(**d["discovery"])
        if "sensitivity" in d:
            d["sensitivity"] = bounds.SensitivityParams(**d["sensitivity"])
        return cls(**d)

    def to_dict(self):
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    return obj


@dataclass(frozen=True)
class SweepRow:
    variable: str
    value: float
    point: int
    trial: int
    seed: int
    c: float
    epsilon: float
    result: TrialResult | None
    error: str | None = None

    def csv_fields(self):
        r = self.result
        nan = math.nan
        return (
            self.variable, self.value, self.trial, self.seed,
            r.mae_utility if r else nan, r.mean_abs_noise if r else nan, self.epsilon,
            r.iters_orig if r else "", r.iters_pert if r else "", r.wall_ms if r else nan,
        )


@dataclass(frozen=True)
class SweepReport:
    spec: SweepSpec
    master_seed: int
    rows: tuple

    def summary(self):
        points = []
        for i, value in enumerate(self.spec.values):
            rows = [r for r in self.rows if r.point == i]
            ok = [r.result for r in rows if r.result is not None]
            m = np.array([r.mae_utility for r in ok])
            nz = np.array([r.mean_abs_noise for r in ok])
            walls = np.array([r.wall_ms for r in ok])
            points.append({
                "value": value,
                "c": rows[0].c,
                "epsilon": rows[0].epsilon,
                "trials": len(rows),
                "failed": len(rows) - len(ok),
                "mae_mean": float(m.mean()) if len(ok) else math.nan,
                "mae_median": float(np.median(m)) if len(ok) else math.nan,
                "mae_std": float(m.std()) if len(ok) else math.nan,
                "mean_abs_noise": float(nz.mean()) if len(ok) else math.nan,
                "iters_orig_median": float(np.median([r.iters_orig for r in ok])) if ok else math.nan,
                "iters_pert_median": float(np.median([r.iters_pert for r in ok])) if ok else math.nan,
                "wall_ms_median": float(np.median(walls)) if ok and np.all(np.isfinite(walls)) else math.nan,
            })
        return _plain({"master_seed": self.master_seed, "config": self.spec.to_dict(), "points": points})


def _sweep_job(args):
    spec, i, value, t, seed, timing = args
    cfg, c = spec.point(value)
    eps = spec.epsilon_label(cfg.lambda1, c)
    try:
        res = run_trial(cfg, c, spec.discovery, seed, timing)
        err = None
    except Exception as e:  # a failed trial is recorded, never fatal
        log.warning("trial %s=%s #%d failed: %s", spec.variable.value, value, t, e)
        res, err = None, f"{type(e).__name__}: {e}"
    return SweepRow(spec.variable.value, value, i, t, seed, c, eps, res, err)


def resolve_workers(workers=None):
    if workers is None:
        workers = int(os.environ.get("LDP_TD_WORKERS", "1"))
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def _map(fn, jobs, workers):
    if workers == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def trial_seed(master_seed, point, trial):
    return _rng.derive_seed(master_seed, _rng.TRIAL, point, trial)


def sweep(spec, master_seed=0, workers=1, timing=False):
    jobs = [
        (spec, i, v, t, trial_seed(master_seed, i, t), timing)
        for i, v in enumerate(spec.values)
        for t in range(spec.trials)
    ]
    rows = sorted(_map(_sweep_job, jobs, resolve_workers(workers)), key=lambda r: (r.point, r.trial))
    return SweepReport(spec, master_seed, tuple(rows))


@dataclass(frozen=True)
class WeightComparison:
    boosted_user: int
    boost_factor: float
    error_variance: np.ndarray
    noise_variance: np.ndarray
    true_orig: np.ndarray
    est_orig: np.ndarray
    true_pert: np.ndarray
    est_pert: np.ndarray

    @property
    def rank_correlation(self):
        """Spearman correlation of true vs estimated weights on original data."""
        return float(stats.spearmanr(self.true_orig, self.est_orig).statistic)

    @property
    def rank_correlation_perturbed(self):
        return float(stats.spearmanr(self.true_pert, self.est_pert).statistic)

    def rows(self):
        cols = (self.error_variance, self.noise_variance, self.true_orig, self.est_orig, self.true_pert, self.est_pert)
        return [(s, *(float(c[s]) for c in cols)) for s in range(len(self.true_orig))]


def weight_comparison(synth_cfg, c, boosted_user, boost_factor, seed, disc=None):
    """True vs estimated user weights before and after perturbation, with one
    user's noise variance inflated by ``boost_factor``."""
    if not boost_factor >= 1:
        raise ValueError("boost_factor must be >= 1")
    if not 0 <= boosted_user < synth_cfg.n_users:
        raise ValueError("boosted_user out of range")
    disc = disc or discovery.DiscoveryConfig()
    data, profile = _trial_inputs(synth_cfg, c, seed, boost=(boosted_user, boost_factor))
    pert_table = perturb.perturb(data.table, profile)
    orig = discovery.run(data.table, disc)
    pert = discovery.run(pert_table, disc)
    floor = disc.distance_floor
    return WeightComparison(
        boosted_user=boosted_user,
        boost_factor=float(boost_factor),
        error_variance=data.error_variances,
        noise_variance=profile.per_user_variance,
        true_orig=synth.true_weights(data.table, data.truth, floor).weights,
        est_orig=orig.weights.weights,
        true_pert=synth.true_weights(pert_table, data.truth, floor).weights,
        est_pert=pert.weights.weights,
    )


@dataclass(frozen=True)
class BenchReport:
    c_values: tuple
    # one row per (c, trial): c, trial, seed, iters_orig, iters_pert, wall_ms_orig, wall_ms_pert
    rows: tuple

    def medians(self):
        out = []
        for c in self.c_values:
            rs = np.array([r[3:] for r in self.rows if r[0] == c], dtype=np.float64)
            med = np.median(rs, axis=0)
            out.append({
                "c": c,
                "iters_orig_median": float(med[0]),
                "iters_pert_median": float(med[1]),
                "wall_ms_orig_median": float(med[2]),
                "wall_ms_pert_median": float(med[3]),
            })
        return _plain(out)

    @property
    def iteration_spread(self):
        m = [p["iters_pert_median"] for p in self.medians()]
        return max(m) - min(m)


def _timed_run(table, disc, timing):
    t0 = time.perf_counter()
    res = discovery.run(table, disc)
    return res, ((time.perf_counter() - t0) * 1e3 if timing else math.nan)


def _bench_job(args):
    synth_cfg, c, t, seed, disc, timing = args
    data, profile = _trial_inputs(synth_cfg, c, seed)
    orig, w_orig = _timed_run(data.table, disc, timing)
    pert, w_pert = _timed_run(perturb.perturb(data.table, profile), disc, timing)
    return (c, t, seed, orig.iterations, pert.iterations, w_orig, w_pert)


def efficiency_bench(synth_cfg, c_values, trials, master_seed=0, disc=None, timing=True, workers=1):
    """Discovery iteration counts and wall-clock on original vs perturbed data
    for each noise level. Wall-clock is only meaningful with ``workers=1``."""
    c_values = tuple(float(c) for c in c_values)
    if not c_values:
        raise ValueError("c_values must be non-empty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    disc = disc or discovery.DiscoveryConfig()
    # the same data seeds at every c isolate the effect of the noise level
    jobs = [
        (synth_cfg, c, t, trial_seed(master_seed, 0, t), disc, timing)
        for c in c_values
        for t in range(trials)
    ]
    rows = _map(_bench_job, jobs, resolve_workers(workers))
    order = {c: i for i, c in enumerate(c_values)}
    rows.sort(key=lambda r: (order[r[0]], r[1]))
    return BenchReport(c_values, tuple(rows))


def scaling_bench(synth_cfg, n_objects_values, iterations=20, repeats=5, seed=0):
    """Median wall-clock (ms) of a fixed number of discovery iterations per N."""
    disc = discovery.DiscoveryConfig(max_iterations=iterations, convergence_threshold=1e-300)
    out = []
    for n in n_objects_values:
        table = synth.generate(replace(synth_cfg, n_objects=int(n), seed=seed)).table
        discovery.run(table, disc)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            discovery.run(table, disc)
            times.append((time.perf_counter() - t0) * 1e3)
        out.append(float(np.median(times)))
    return out
