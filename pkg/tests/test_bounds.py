import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privtd import bounds
from privtd.bounds import PrivacyTarget, SensitivityParams, UtilityTarget

mp.mp.dps = 40
DELTA_HALF = 1 - math.exp(-0.5)  # ln(1/(1-delta)) = 1/2
GAMMA1 = SensitivityParams(b=1.0, eta=DELTA_HALF)  # gamma = 1


def cap_oracle(l1, a, b, S):
    pi = mp.pi
    return l1 * mp.sqrt(pi) * (a**2 * b * S**2 / (4 * mp.sqrt(2)) + a**2 * mp.sqrt(pi) / 8 + a + 2 / mp.sqrt(pi)) - 2


def alpha_oracle(l1, c):
    c = mp.mpf(c)
    return 2 * mp.sqrt(2) / (mp.sqrt(l1) * (1 - c)) * (mp.mpf(3) / 4 - c * (c + mp.sqrt(c) + 1) / (mp.sqrt(2) * (1 + mp.sqrt(c))))


def test_gamma_one():
    assert GAMMA1.gamma == pytest.approx(1.0, abs=1e-15)
    assert SensitivityParams.from_gamma(1.0, 0.99).gamma == pytest.approx(1.0, abs=1e-15)


def test_utility_cap():
    assert bounds.utility_noise_cap(1, UtilityTarget(1, 0.1), 10) == pytest.approx(5.29838, abs=1e-4)
    assert bounds.utility_noise_cap(1, UtilityTarget(1, 0.1), 10) == pytest.approx(float(cap_oracle(1, 1, 0.1, 10)), abs=1e-12)
    caps = [bounds.utility_noise_cap(1, UtilityTarget(1, 0.1), S) for S in range(1, 30)]
    assert all(b > a for a, b in zip(caps, caps[1:]))
    for l1 in (0.3, 1.0, 2.5):
        c1 = bounds.utility_noise_cap(l1, UtilityTarget(0.7, 0.2), 12)
        c2 = bounds.utility_noise_cap(2 * l1, UtilityTarget(0.7, 0.2), 12)
        assert c2 == pytest.approx(2 * c1 + 2, rel=1e-12)


def test_alpha_floor():
    assert bounds.utility_alpha_floor(1, 0) == pytest.approx(3 * math.sqrt(2) / 2, rel=1e-12)
    assert bounds.utility_alpha_floor(1, 0.25) == pytest.approx(2.0506, abs=1e-3)
    assert bounds.utility_alpha_floor(4, 0) == pytest.approx(1.06066, abs=1e-5)
    for c in (0.1, 0.25, 0.9, 1.5, 4.0):
        assert bounds.utility_alpha_floor(1.7, c) == pytest.approx(float(alpha_oracle(1.7, c)), rel=1e-12)
    with pytest.raises(ValueError):
        bounds.utility_alpha_floor(1, 1.0)


def test_privacy_floor():
    assert bounds.privacy_noise_floor(1, PrivacyTarget(1, DELTA_HALF), GAMMA1) == pytest.approx(1.0, rel=1e-12)
    assert bounds.privacy_noise_floor(1, PrivacyTarget(0.5, 0.1), GAMMA1) == pytest.approx(9.491, abs=1e-2)
    a = bounds.privacy_noise_floor(1.3, PrivacyTarget(0.8, 0.2), SensitivityParams())
    b = bounds.privacy_noise_floor(1.3, PrivacyTarget(0.4, 0.2), SensitivityParams())
    assert b == pytest.approx(2 * a, rel=1e-12)
    with pytest.raises(ValueError):
        PrivacyTarget(1, 0.0)


def test_epsilon_for_noise():
    assert bounds.epsilon_for_noise(1, 1, DELTA_HALF, GAMMA1) == pytest.approx(1.0, rel=1e-12)
    assert bounds.epsilon_for_noise(1, 2, 0.05, GAMMA1) < bounds.epsilon_for_noise(1, 1, 0.05, GAMMA1)
    with pytest.raises(ValueError):
        bounds.epsilon_for_noise(1, 0, 0.05, GAMMA1)
    rng = np.random.default_rng(3)
    for _ in range(100):
        l1, eps, delta = rng.uniform(0.1, 5), rng.uniform(0.01, 10), rng.uniform(0.001, 0.999)
        sens = SensitivityParams(rng.uniform(0.5, 4), rng.uniform(0.01, 0.999))
        c = bounds.privacy_noise_floor(l1, PrivacyTarget(eps, delta), sens)
        assert abs(bounds.epsilon_for_noise(l1, c, delta, sens) - eps) <= 1e-12 * max(1, eps)


def test_sensitivity_bound():
    bound, conf = bounds.sensitivity_bound(2, SensitivityParams(2, 0.99))
    assert bound == pytest.approx(3.035, abs=1e-3)
    assert conf == pytest.approx(0.8560, abs=1e-3)
    assert bounds.sensitivity_bound(4, SensitivityParams(2, 0.99))[0] == pytest.approx(bound / 2)
    assert bounds.sensitivity_bound(1, SensitivityParams(40, 0.9))[1] == pytest.approx(0.9, abs=1e-12)


def test_special_case():
    floor, _ = bounds.special_case_c1(1, 10, 3)
    assert floor == pytest.approx(2.6517, abs=1e-3)
    _, tail = bounds.special_case_c1(1, 100, 3)
    oracle = mp.sqrt(2 / mp.pi) * (48 - 12 * mp.pi) / (100**2 * 9)
    assert tail == pytest.approx(float(oracle), rel=1e-12)
    assert tail == pytest.approx(9.13e-5, abs=1e-6)
    for l1 in (2, 3, 10):
        assert bounds.special_case_c1(l1, 5, 1)[1] == 0.0
    assert bounds.special_case_c1(0.01, 1, 0.01)[1] == 1.0


def test_tradeoff_reference_case():
    rep = bounds.tradeoff(1, 10, UtilityTarget(1, 0.1), PrivacyTarget(1, DELTA_HALF), GAMMA1)
    assert rep.c_lower == pytest.approx(1.0, rel=1e-12)
    assert rep.c_upper == pytest.approx(5.298, abs=1e-3)
    # the alpha floor blows up near c = 1 and exceeds 1 across the interval
    assert rep.alpha_floor > 1
    assert rep.feasible is False
    assert rep.to_json_dict().keys() == {"c_lower", "c_upper", "alpha_floor", "feasible"}


def test_tradeoff_feasible_case():
    # interval entirely below c = 1, where the alpha floor decreases in c
    rep = bounds.tradeoff(0.05, 2, UtilityTarget(9.5, 0.001), PrivacyTarget(100, DELTA_HALF), GAMMA1)
    assert rep.c_lower == pytest.approx(0.2)
    assert rep.c_upper == pytest.approx(0.71963, abs=1e-4)
    assert rep.alpha_floor == pytest.approx(bounds.utility_alpha_floor(0.05, 0.2), rel=1e-12)
    assert rep.feasible and rep.feasible_interval == (rep.c_lower, rep.c_upper)
    # an alpha just under the floor flips it
    rep = bounds.tradeoff(0.05, 2, UtilityTarget(9.3, 0.001), PrivacyTarget(100, DELTA_HALF), GAMMA1)
    assert not rep.feasible


def test_tradeoff_ordering_infeasible():
    rep = bounds.tradeoff(1, 2, UtilityTarget(0.1, 0.01), PrivacyTarget(0.01, 0.01), SensitivityParams())
    assert rep.c_lower > rep.c_upper and not rep.feasible and rep.feasible_interval is None


def test_tradeoff_larger_S_enlarges_interval():
    args = (UtilityTarget(1, 0.1), PrivacyTarget(1, 0.05), SensitivityParams())
    a, b = bounds.tradeoff(1, 10, *args), bounds.tradeoff(1, 50, *args)
    assert b.c_upper > a.c_upper and b.c_lower == a.c_lower


def test_monotonicity_sign_table():
    rng = np.random.default_rng(5)
    for _ in range(200):
        l1, a, b, S = rng.uniform(0.1, 4), rng.uniform(0.1, 3), rng.uniform(0.01, 1), int(rng.integers(1, 100))
        cap = bounds.utility_noise_cap(l1, UtilityTarget(a, b), S)
        assert bounds.utility_noise_cap(l1 * 1.1, UtilityTarget(a, b), S) > cap
        assert bounds.utility_noise_cap(l1, UtilityTarget(a * 1.1, b), S) > cap
        assert bounds.utility_noise_cap(l1, UtilityTarget(a, b * 0.9), S) < cap
        assert bounds.utility_noise_cap(l1, UtilityTarget(a, b), S + 1) > cap

        eps, delta = rng.uniform(0.05, 5), rng.uniform(0.01, 0.9)
        sens = SensitivityParams(rng.uniform(0.5, 3), rng.uniform(0.1, 0.99))
        fl = bounds.privacy_noise_floor(l1, PrivacyTarget(eps, delta), sens)
        assert bounds.privacy_noise_floor(l1 * 1.1, PrivacyTarget(eps, delta), sens) < fl
        assert bounds.privacy_noise_floor(l1, PrivacyTarget(eps * 1.1, delta), sens) < fl
        assert bounds.privacy_noise_floor(l1, PrivacyTarget(eps, min(delta * 1.1, 0.99)), sens) < fl
        assert bounds.privacy_noise_floor(l1, PrivacyTarget(eps, delta), SensitivityParams(sens.b * 1.1, sens.eta)) > fl

        # alpha floor shrinks like 1/sqrt(lambda1) wherever it is positive
        c = rng.uniform(0, 0.7)
        af = bounds.utility_alpha_floor(l1, c)
        assert af > 0 and bounds.utility_alpha_floor(l1 * 1.1, c) < af


@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=30),
    st.floats(0.001, 5),
)
def test_lemma_exponential(t, k):
    t = np.array(t)
    t = t - t.min()  # keep exp(-k t) away from underflow
    assert bounds.check_weighted_mean_lemma(t, lambda x: np.exp(-k * x))


def test_lemma_examples():
    assert bounds.check_weighted_mean_lemma([1, 2, 3], lambda x: 1 / x)
    lhs = (1 + 1 + 1) / (1 + 1 / 2 + 1 / 3)
    assert lhs == pytest.approx(1.6364, abs=1e-4)
    assert bounds.check_weighted_mean_lemma([1, 2, 3], lambda x: 1.0)
    with pytest.raises(ValueError):
        bounds.check_weighted_mean_lemma([1, 2], lambda x: 0.0)


def test_lemma_fails_for_increasing_f():
    # sanity: the checker is not vacuous
    assert not bounds.check_weighted_mean_lemma([1, 2, 3], lambda x: x)


def test_ldp_ratio_check():
    assert bounds.ldp_ratio_check(3.0, 3.0, 1e-9, 0.1)
    assert bounds.ldp_ratio_check(0.0, 1.0, 1.0, 0.5)
    assert not bounds.ldp_ratio_check(0.0, 2.0, 1.0, 0.5)


def test_ldp_ratio_check_threshold(rng):
    for _ in range(200):
        x1, x2, eps = rng.normal(), rng.normal(), rng.uniform(0.1, 2)
        need = (x1 - x2) ** 2 / (2 * eps)
        assert bounds.ldp_ratio_check(x1, x2, need * 1.000001, eps)
        assert not bounds.ldp_ratio_check(x1, x2, need * 0.999999, eps)


def test_analytic_coverage_at_floor():
    sens = GAMMA1
    l1, target = 1.0, PrivacyTarget(1.0, DELTA_HALF)
    c = bounds.privacy_noise_floor(l1, target, sens)
    delta_s = bounds.sensitivity_bound(l1, sens)[0]
    assert bounds.privacy_coverage(l1 / c, delta_s, target.epsilon) == pytest.approx(1 - target.delta, abs=1e-9)
