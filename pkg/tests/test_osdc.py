import itertools
import math

import numpy as np
import pytest

from contractsel.distributions import (
    DiscreteLaw,
    Exponential,
    NonIidInstance,
    UniformUnit,
)
from contractsel.osdc import (
    act,
    build_dp,
    build_noniid_dp,
    noniid_alg_cost,
    noniid_opt_exact,
    optimal_alg_cost,
    run_trajectory,
)
from contractsel.harness import make_noniid_impossibility, osdc_batch

UNIT = UniformUnit()


def test_build_dp_unit_cases():
    dp1 = build_dp(UNIT, 1)
    assert dp1.d == (0.5,) and dp1.q == (1.0,)
    dp2 = build_dp(UNIT, 2)
    assert dp2.d[1] == pytest.approx(0.375, abs=1e-12)
    assert dp2.q[1] == pytest.approx(0.5, abs=1e-12)
    dp3 = build_dp(UNIT, 3)
    assert dp3.d[2] == pytest.approx(0.3046875, abs=1e-12)
    assert dp3.q[2] == pytest.approx(0.375, abs=1e-12)


def test_build_dp_grid_search_oracle():
    # minimize q^2/2 + (1-q) d over a 1e-6 grid, independently of the
    # stationarity shortcut
    d_prev = 0.5
    qs = np.arange(0.0, 1.0 + 1e-6, 1e-6)
    for want_d, want_q in [(0.375, 0.5), (0.3046875, 0.375)]:
        objective = 0.5 * qs * qs + (1.0 - qs) * d_prev
        k = int(np.argmin(objective))
        assert objective[k] == pytest.approx(want_d, abs=1e-9)
        assert qs[k] == pytest.approx(want_q, abs=2e-6)
        d_prev = want_d


def test_alg_cost_and_ratio():
    assert optimal_alg_cost(build_dp(UNIT, 1)) == 0.5
    assert optimal_alg_cost(build_dp(UNIT, 2)) == pytest.approx(0.875, abs=1e-12)
    ratio = optimal_alg_cost(build_dp(UNIT, 2)) / (0.5 + 1.0 / 3.0)
    assert ratio == pytest.approx(1.05, abs=1e-12)


def test_monotone_chain_large_n():
    for dist in (UNIT, Exponential(1.0)):
        dp = build_dp(dist, 200)
        d, q = np.array(dp.d), np.array(dp.q)
        assert np.all(np.diff(d) < 0)
        assert np.all(np.diff(q) < 0)
        # first-order condition inv_cdf(q_i) = d_{i-1}
        vals = np.asarray(dist.inv_cdf(q[1:]))
        assert np.max(np.abs(vals - d[:-1])) <= 1e-8


def test_act_examples():
    dp2 = build_dp(UNIT, 2)
    assert act(dp2, 1, 0, 0.9, UNIT) == 1
    assert act(dp2, 1, 0, 0.3, UNIT) == 2
    assert act(dp2, 2, 2, 0.1, UNIT) == 0
    assert act(dp2, 1, 0, 0.5, UNIT) == 2  # boundary tie accepts
    with pytest.raises(RuntimeError):
        act(dp2, 2, 0, 0.5, UNIT)


def test_act_forces_coverage():
    dp = build_dp(UNIT, 4)
    for x in (0.999999, 0.5, 1e-9):
        assert act(dp, 1, 0, x, UNIT) >= 1


def test_run_trajectory_contracts_back_to_back():
    n = 12
    dp = build_dp(UNIT, n)
    rng = np.random.default_rng(8)
    for _ in range(200):
        prices = rng.random(n)
        cost, log = run_trajectory(dp, UNIT, prices)
        covered = 0
        for (i, length, price) in log:
            assert i <= covered + 1  # decided before any gap opens
            covered += length        # next contract extends the queue
        assert covered >= n
        assert cost == pytest.approx(sum(l * p for (_, l, p) in log), rel=1e-12)


def test_simulation_consistency_with_dp_sum():
    n, trials = 8, 1_000_000
    dp = build_dp(UNIT, n)
    rng = np.random.default_rng(123)
    alg, _, viol = osdc_batch(dp, UNIT, trials, rng)
    assert viol == 0
    stderr = alg.std(ddof=1) / math.sqrt(trials)
    assert abs(alg.mean() - optimal_alg_cost(dp)) <= 4 * stderr


def test_batch_matches_scalar_policy():
    n, trials = 6, 500
    dp = build_dp(UNIT, n)
    rng = np.random.default_rng(77)
    us = np.array([rng.random(trials) for _ in range(n)])
    rng2 = np.random.default_rng(77)
    alg, opt, viol = osdc_batch(dp, UNIT, trials, rng2)
    assert viol == 0
    for tr in range(0, trials, 37):
        prices = us[:, tr]
        cost, _ = run_trajectory(dp, UNIT, prices)
        assert cost == pytest.approx(alg[tr], rel=1e-12)
        brute_opt = sum(min(prices[: i + 1]) for i in range(n))
        assert opt[tr] == pytest.approx(brute_opt, rel=1e-12)


def test_micro_instance_enumeration():
    # 3-point law: DP cost equals the best deterministic threshold policy,
    # enumerated exhaustively
    law = DiscreteLaw([0.2, 0.5, 1.0], [0.3, 0.4, 0.3])
    values, probs = law.values, law.probs

    def dp_cost(i):
        d = law.mean()
        for _ in range(i - 1):
            d = law.expected_min_with(d)
        return d

    def policy_cost(thresholds):
        # thresholds[t] = accept at step t iff X <= thresholds[t]; last step forced
        total = 0.0
        remaining = 1.0
        for tau in thresholds:
            acc = sum(p for v, p in zip(values, probs) if v <= tau)
            val = sum(v * p for v, p in zip(values, probs) if v <= tau)
            total += remaining * val
            remaining *= 1.0 - acc
        total += remaining * law.mean()
        return total

    for i in range(1, 5):
        best = min(policy_cost(ths) for ths in
                   itertools.product([-1.0, 0.2, 0.5, 1.0], repeat=i - 1))
        assert dp_cost(i) == pytest.approx(best, abs=1e-12)


def test_noniid_reduces_to_iid():
    n = 6
    inst = NonIidInstance(laws=tuple(UNIT for _ in range(n)))
    table = build_noniid_dp(inst)
    dp = build_dp(UNIT, n)
    for i in range(1, n + 1):
        assert table.value(i, i) == pytest.approx(dp.d[i - 1], abs=1e-9)


def test_noniid_impossibility_instance():
    inst = make_noniid_impossibility(3)
    table = build_noniid_dp(inst)
    assert noniid_alg_cost(table) == pytest.approx(3.0, abs=1e-12)
    assert noniid_opt_exact(inst) == pytest.approx(1.75, abs=1e-12)
    ratio = noniid_alg_cost(table) / noniid_opt_exact(inst)
    assert ratio == pytest.approx(12.0 / 7.0, abs=1e-12)


def test_noniid_rejects_infinite_mean():
    class BadLaw:
        def mean(self):
            return math.inf

        def expected_min_with(self, c):
            return c

    inst = NonIidInstance(laws=(BadLaw(),))
    with pytest.raises(ValueError):
        build_noniid_dp(inst)


def test_build_dp_rejects_invalid_distribution():
    from contractsel.distributions import PiecewiseInverseCdf

    bad = PiecewiseInverseCdf([(0.0, 1.0), (0.5, 0.2), (1.0, 2.0)])
    with pytest.raises(ValueError):
        build_dp(bad, 3)
