import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibl_delegation.errors import EmptyActivations, EmptyCandidates, NonMonotoneTime, TimeParadox
from ibl_delegation.ibl import (
    IBLMemory,
    IBLParams,
    InstanceKey,
    InstanceRecord,
    base_activation,
    retrieval_probabilities,
)

QUIET = IBLParams(d=0.5, sigma=0.0, tau=0.25 * math.sqrt(2), k=5)


def exact_activation(times, now, d=0.5):
    return math.log(math.fsum((now - t) ** -d for t in times))


def bounded(times, k=5):
    return InstanceRecord(InstanceKey("s", "a", 0.0), times[0], list(times[-k:]), len(times))


# record_observation --------------------------------------------------------


def test_fresh_instance():
    m = IBLMemory(QUIET)
    rec = m.record(("s", "a", 1.0), 5)
    assert (rec.first_time, rec.recent_times, rec.total_count) == (5, [5], 1)


def test_eviction_keeps_k_most_recent():
    m = IBLMemory(QUIET)
    for t in range(5, 11):
        rec = m.record(("s", "a", 1.0), t)
    assert rec.total_count == 6
    assert rec.recent_times == [6, 7, 8, 9, 10]
    assert rec.first_time == 5


def test_outcome_is_part_of_the_key():
    m = IBLMemory(QUIET)
    m.record(("s", "a", 1.0), 1)
    m.record(("s", "a", 2.0), 2)
    assert len(m.matching("s", "a")) == 2


def test_time_cannot_go_backwards():
    m = IBLMemory(QUIET)
    m.record(("s", "a", 1.0), 7)
    with pytest.raises(NonMonotoneTime):
        m.record(("s", "a", 1.0), 6)


# base_activation -----------------------------------------------------------


def test_activation_one_tick_old_is_zero():
    assert base_activation(bounded([9]), 10, QUIET) == 0.0


def test_activation_four_ticks_old():
    expected = float(mpmath.log(mpmath.mpf(4) ** -0.5))
    assert base_activation(bounded([6]), 10, QUIET) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-0.693147, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_no_tail_matches_exact_sum_bitwise(n):
    times = [2 * i + 1 for i in range(n)]
    now = times[-1] + 3
    direct = 0.0
    for t in times:
        direct += (now - t) ** -0.5
    assert base_activation(bounded(times), now, QUIET) == math.log(direct)


def test_activation_requires_time_after_observations():
    with pytest.raises(TimeParadox):
        base_activation(bounded([3, 4]), 4, QUIET)


def test_noise_is_logistic_with_scale_sigma():
    params = IBLParams(sigma=0.25)
    rng = np.random.default_rng(0)
    rec = bounded([9])
    draws = np.array([base_activation(rec, 10, params, rng) for _ in range(20_000)])
    # logistic(0, s) has variance s^2 pi^2 / 3
    assert draws.mean() == pytest.approx(0.0, abs=0.01)
    assert draws.var() == pytest.approx(0.25**2 * math.pi**2 / 3, rel=0.05)


def test_activation_grows_with_frequency_and_fades_with_time():
    base = bounded([10, 20])
    more = bounded([5, 10, 20])
    assert base_activation(more, 30, QUIET) > base_activation(base, 30, QUIET)
    assert base_activation(base, 40, QUIET) < base_activation(base, 30, QUIET)


def _spaced(gaps):
    times = [0.0]
    for g in gaps:
        times.append(times[-1] + g)
    return times


def test_tail_approximation_uniform_spacing():
    for gap in (1, 3):
        for n in range(6, 101):
            times = [gap * i for i in range(1, n + 1)]
            now = times[-1] + 1
            exact = exact_activation(times, now)
            approx = base_activation(bounded(times), now, QUIET)
            assert abs(approx - exact) / abs(exact) <= 0.05


def test_tail_approximation_error_grows_with_irregular_spacing():
    # characterization: the uniform-spacing assumption of the tail breaks down
    # as gaps change faster; these are the measured worst cases over n = 6..100
    worst = {}
    for ratio in (1.01, 1.05):
        w = 0.0
        for n in range(6, 101):
            times = _spaced([ratio**i for i in range(n - 1)])
            now = times[-1] + 1
            exact = exact_activation(times, now)
            w = max(w, abs(base_activation(bounded(times), now, QUIET) - exact) / abs(exact))
        worst[ratio] = w
    assert worst[1.01] < 0.05
    assert 0.05 < worst[1.05] < 0.2


# retrieval probabilities ---------------------------------------------------


def test_equal_activations_are_uniform():
    np.testing.assert_allclose(retrieval_probabilities([0.3, 0.3, 0.3], 0.5), [1 / 3] * 3, rtol=0, atol=1e-15)


def test_two_term_softmax():
    a, b, tau = -0.346574, 0.0, 0.353553
    pb = 1 / (1 + mpmath.exp((a - b) / tau))
    p = retrieval_probabilities([a, b], tau)
    assert p[1] == pytest.approx(float(pb), abs=1e-12)
    # exact value of 1 / (1 + e^-0.980258); the oft-quoted 0.727263 is a rounding slip
    assert p[1] == pytest.approx(0.727159, abs=1e-6)


def test_cold_temperature_is_nearly_greedy():
    p = retrieval_probabilities([0.0, 1.0], 0.01)
    bound = 1 / (1 + math.exp(-1 / 0.01))
    assert p[1] >= 1 - 1e-9
    assert p[1] == pytest.approx(bound, abs=1e-15)


def test_retrieval_needs_activations():
    with pytest.raises(EmptyActivations):
        retrieval_probabilities([], 1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.floats(0.01, 10))
def test_retrieval_is_a_distribution(acts, tau):
    p = retrieval_probabilities(acts, tau)
    assert (p >= 0).all()
    assert abs(p.sum() - 1) <= 1e-12


def test_retrieval_survives_huge_activations():
    p = retrieval_probabilities([1e4, 1e4 + 1], 0.01)
    assert np.isfinite(p).all()


# blending ------------------------------------------------------------------


def test_lone_instance_blends_to_its_outcome():
    m = IBLMemory(IBLParams(sigma=0.25))
    m.record(("s", "a", 5.0), 3)
    assert m.blend("s", "a", 100, np.random.default_rng(0)) == 5.0


def test_symmetric_instances_blend_to_midpoint():
    m = IBLMemory(QUIET)
    m.record(("s", "a", 0.0), 4)
    m.record(("s", "a", 10.0), 4)
    assert m.blend("s", "a", 9) == pytest.approx(5.0, abs=1e-12)


def test_two_instance_blend_matches_direct_evaluation():
    m = IBLMemory(QUIET)
    m.record(("s", "a", 0.0), 8)
    m.record(("s", "a", 10.0), 9)
    act_a = mpmath.log(mpmath.mpf(2) ** -0.5)
    act_b = mpmath.log(mpmath.mpf(1) ** -0.5)
    tau = 0.25 * mpmath.sqrt(2)
    wa, wb = mpmath.exp(act_a / tau), mpmath.exp(act_b / tau)
    expected = float((0 * wa + 10 * wb) / (wa + wb))
    assert m.blend("s", "a", 10) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(7.271594, abs=1e-6)


def test_unseen_pair_returns_default_utility():
    m = IBLMemory(IBLParams(default_utility=-3.5))
    assert m.blend("s", "a", 1) == -3.5


def test_blend_refuses_reads_at_observation_time():
    m = IBLMemory(QUIET)
    m.record(("s", "a", 1.0), 4)
    m.record(("s", "a", 2.0), 4)
    with pytest.raises(TimeParadox):
        m.blend("s", "a", 4)


@settings(max_examples=60, deadline=None)
@given(
    obs=st.lists(st.tuples(st.integers(-300, 100), st.integers(1, 6)), min_size=1, max_size=30),
    seed=st.integers(0, 2**32),
)
def test_blend_is_convex_combination(obs, seed):
    m = IBLMemory(IBLParams())
    t = 0
    for outcome, reps in obs:
        for _ in range(reps):
            t += 1
            m.record(("s", "a", float(outcome)), t)
    v = m.blend("s", "a", t + 1, np.random.default_rng(seed))
    lo = min(o for o, _ in obs)
    hi = max(o for o, _ in obs)
    assert lo - 1e-9 <= v <= hi + 1e-9


def test_large_groups_agree_with_small_group_formula():
    # the numpy path for big groups must match the scalar formula without noise
    m = IBLMemory(QUIET)
    rng = np.random.default_rng(3)
    t = 0
    for _ in range(400):
        t += int(rng.integers(1, 4))
        m.record(("s", "a", float(rng.integers(-5, 5) * 10)), t)
    now = t + 2
    recs = m.matching("s", "a")
    assert len(recs) > 8
    acts = [base_activation(r, now, QUIET) for r in recs]
    p = retrieval_probabilities(acts, QUIET.tau)
    expected = sum(pi * r.key.outcome for pi, r in zip(p, recs))
    assert m.blend("s", "a", now) == pytest.approx(expected, rel=1e-12, abs=1e-12)


# choose_best ---------------------------------------------------------------


def test_single_candidate_short_circuits():
    assert IBLMemory().choose("s", ["only"], 1, None) == "only"


def test_choose_needs_candidates():
    with pytest.raises(EmptyCandidates):
        IBLMemory().choose("s", [], 1, np.random.default_rng(0))


def test_empty_memory_ties_are_uniform():
    m = IBLMemory(QUIET)
    rng = np.random.default_rng(42)
    picks = [m.choose("s", ["a", "b"], 1, rng) for _ in range(10_000)]
    assert picks.count("a") / 10_000 == pytest.approx(0.5, abs=0.02)


def test_dominant_action_wins():
    m = IBLMemory(QUIET)
    m.record(("s", "a1", 80.0), 1)
    m.record(("s", "a2", -250.0), 2)
    assert m.choose("s", ["a1", "a2"], 3, np.random.default_rng(0)) == "a1"


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-1000, 1000), seed=st.integers(0, 2**32))
def test_choice_is_shift_invariant(shift, seed):
    def build(c):
        m = IBLMemory(IBLParams(default_utility=0.0 + c))
        t = 0
        for s, a, x in [("s", 0, 10.0), ("s", 0, -5.0), ("s", 1, 3.0), ("s", 1, 4.0), ("s", 2, -1.0)]:
            t += 1
            m.record((s, a, x + c), t)
        return m

    base, moved = build(0.0), build(shift)
    r1, r2 = np.random.default_rng(seed), np.random.default_rng(seed)
    for now in range(6, 30):
        assert base.choose("s", [0, 1, 2, 3], now, r1) == moved.choose("s", [0, 1, 2, 3], now, r2)


# commit_trajectory ---------------------------------------------------------


def test_empty_commit_is_noop():
    m = IBLMemory()
    m.commit([], 10.0)
    assert len(m) == 0 and m.clock == 0


def test_commit_credits_every_step():
    m = IBLMemory()
    for _ in range(3):
        m.tick()
    m.commit([("a", 0, 1), ("b", 1, 2), ("c", 0, 3)], 77)
    assert len(m) == 3
    assert {r.key.outcome for r in m.instances.values()} == {77.0}
    assert m.clock == 3


def test_repeat_pair_in_one_trajectory():
    m = IBLMemory()
    m.commit([("a", 0, 1), ("b", 1, 2), ("a", 0, 3)], 5)
    rec = m.instances[("a", 0, 5.0)]
    assert rec.total_count == 2
    assert rec.recent_times == [1, 3]
