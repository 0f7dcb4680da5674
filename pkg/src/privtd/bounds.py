"""Closed-form utility and privacy bounds on the noise level ``c``, plus the
property checkers used to spot-check them.

Notation: ``lambda1`` is the rate of the users' error-variance exponential,
``c = lambda1 / lambda2`` the noise level.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class UtilityTarget:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError("alpha must be > 0")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")


@dataclass(frozen=True)
class PrivacyTarget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be > 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class SensitivityParams:
    """Tail constants ``b`` and ``eta`` for the sensitivity bound."""

    b: float = 2.0
    eta: float = 0.99

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0):
            raise ValueError("b must be > 0")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")

    @property
    def gamma(self):
        return self.b * math.sqrt(2.0 * math.log(1.0 / (1.0 - self.eta)))

    @classmethod
    def from_gamma(cls, gamma, eta=0.99):
        """Pick ``b`` so that ``gamma`` comes out as requested for this ``eta``."""
        return cls(b=gamma / math.sqrt(2.0 * math.log(1.0 / (1.0 - eta))), eta=eta)


@dataclass(frozen=True)
class BoundReport:
    c_lower: float
    c_upper: float
    alpha_floor: float
    feasible: bool

    @property
    def feasible_interval(self):
        return (self.c_lower, self.c_upper) if self.feasible else None

    def to_json_dict(self):
        d = asdict(self)
        for k in ("c_lower", "c_upper", "alpha_floor"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d


def _check_rate(lambda1):
    if not (math.isfinite(lambda1) and lambda1 > 0):
        raise ValueError("lambda1 must be > 0")


def utility_noise_cap(lambda1, target, n_users):
    """Largest noise level for which (alpha, beta)-utility is guaranteed.

    Can be negative, meaning no positive noise level meets the target.
    """
    _check_rate(lambda1)
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    a, b, S = target.alpha, target.beta, n_users
    sp = math.sqrt(math.pi)
    inner = a * a * b * S * S / (4 * math.sqrt(2)) + a * a * sp / 8 + a + 2 / sp
    return lambda1 * sp * inner - 2


def utility_alpha_floor(lambda1, c):
    """Smallest alpha the utility guarantee covers at noise level ``c != 1``."""
    _check_rate(lambda1)
    if not (math.isfinite(c) and c >= 0):
        raise ValueError("c must be finite and >= 0")
    if c == 1:
        raise ValueError("alpha floor is singular at c = 1; use special_case_c1")
    rc = math.sqrt(c)
    second = c * (c + rc + 1) / (math.sqrt(2) * (1 + rc))
    return 2 * math.sqrt(2) / (math.sqrt(lambda1) * (1 - c)) * (0.75 - second)


def privacy_noise_floor(lambda1, target, sens):
    """Smallest noise level giving (epsilon, delta)-local differential privacy."""
    _check_rate(lambda1)
    return sens.gamma**2 / (2 * lambda1 * target.epsilon * math.log(1 / (1 - target.delta)))


def epsilon_for_noise(lambda1, c, delta, sens):
    """Inverse of :func:`privacy_noise_floor`: the epsilon a noise level buys."""
    _check_rate(lambda1)
    if not c > 0:
        raise ValueError("c must be > 0")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return sens.gamma**2 / (2 * lambda1 * c * math.log(1 / (1 - delta)))


def sensitivity_bound(lambda1, sens):
    """(bound on the sensitive range, probability the bound holds)."""
    _check_rate(lambda1)
    b = sens.b
    return sens.gamma / lambda1, sens.eta * (1 - 2 * math.exp(-b * b / 2) / b)


def special_case_c1(lambda1, n_users, alpha):
    """Alpha floor and Chebyshev tail bound when noise and error variances
    share one distribution. The tail bound is clamped to [0, 1]."""
    _check_rate(lambda1)
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    floor = 15 * math.sqrt(2 * lambda1) / 8
    raw = math.sqrt(2 / math.pi) * (48 - 12 * lambda1**2 * math.pi) / (n_users**2 * alpha**2 * lambda1)
    return floor, min(max(raw, 0.0), 1.0)


def alpha_floor_at(lambda1, c, n_users=1, alpha=1.0):
    """Alpha floor at any ``c``, routing ``c == 1`` to the special case."""
    if c == 1:
        return special_case_c1(lambda1, n_users, alpha)[0]
    return utility_alpha_floor(lambda1, c)


def tradeoff(lambda1, n_users, utility, privacy, sens, grid_points=1000):
    """Interval of noise levels meeting both targets.

    Feasible when the privacy floor does not exceed the utility cap and
    ``utility.alpha`` beats the alpha floor everywhere on a dense grid over
    the interval. ``alpha_floor`` reports the largest floor seen on the grid
    (or the floor at ``c_lower`` when the interval is empty).
    """
    c_up = utility_noise_cap(lambda1, utility, n_users)
    c_lo = privacy_noise_floor(lambda1, privacy, sens)
    ordered = math.isfinite(c_lo) and math.isfinite(c_up) and c_lo <= c_up
    if ordered:
        grid = np.linspace(c_lo, c_up, grid_points)
        floors = [alpha_floor_at(lambda1, float(c), n_users, utility.alpha) for c in grid]
        a_floor = float(max(floors))
    else:
        a_floor = alpha_floor_at(lambda1, c_lo, n_users, utility.alpha) if math.isfinite(c_lo) else math.inf
    feasible = bool(ordered and utility.alpha > a_floor)
    return BoundReport(c_lower=c_lo, c_upper=c_up, alpha_floor=a_floor, feasible=feasible)


def check_weighted_mean_lemma(t, f):
    """True iff the f(t)-weighted mean of ``t`` is at most its plain mean.

    ``f`` must be non-increasing on the values of ``t``; the inequality then
    always holds, so a False return flags a broken input or implementation.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 1 or len(t) == 0 or not np.all(np.isfinite(t)):
        raise ValueError("t must be a non-empty vector of finite values")
    w = _apply(f, t)
    total = w.sum()
    if not total > 0:
        raise ValueError("sum of f(t) must be positive")
    mean = t.mean()
    return bool(np.dot(w, t) / total <= mean + 1e-12 * max(1.0, abs(mean)))


def _apply(f, t):
    try:
        w = np.asarray(f(t), dtype=np.float64)
    except (TypeError, ValueError):
        w = None
    if w is None or w.shape != t.shape:
        w = np.array([f(x) for x in t], dtype=np.float64)
    return w


def ldp_ratio_check(x1, x2, variance, epsilon):
    """Whether noise of this variance keeps the density ratio of the two
    inputs within ``exp(epsilon)`` everywhere."""
    if not variance > 0:
        raise ValueError("variance must be > 0")
    return bool(variance >= (x1 - x2) ** 2 / (2 * epsilon))


def privacy_coverage(lambda2, sensitivity, epsilon):
    """Probability that an exponential(lambda2) variance passes ``ldp_ratio_check``
    for inputs ``sensitivity`` apart."""
    return math.exp(-lambda2 * sensitivity**2 / (2 * epsilon))
