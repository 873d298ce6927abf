import json
import math

import numpy as np
import pytest

from contractsel.distributions import (
    DiscreteLaw,
    Exponential,
    PiecewiseInverseCdf,
    UniformInterval,
    UniformUnit,
    distribution_from_json,
    opt_expected,
    opt_trajectories,
    opt_trajectory,
    parse_dist_spec,
    validate,
)

ALL_KINDS = [
    UniformUnit(),
    UniformInterval(0.0, 2.0),
    UniformInterval(0.5, 3.0),
    Exponential(1.0),
    Exponential(0.25),
    PiecewiseInverseCdf([(0.0, 0.0), (0.4, 0.0), (0.4001, 1.0), (0.9999, 1.0), (1.0, 50.0)],
                        slope=1e-4),
]


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.kind + str(id(d) % 97))
def test_validate_clean(dist):
    assert validate(dist) == []


def test_validate_flags_decreasing_breakpoints():
    bad = PiecewiseInverseCdf([(0.0, 0.5), (0.5, 0.2), (1.0, 1.0)])
    problems = validate(bad)
    assert any("decreasing" in p for p in problems)


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.kind + str(id(d) % 97))
def test_quantile_round_trip(dist):
    grid = np.linspace(1e-4, 1.0 - 1e-4, 10_000)
    vals = np.asarray(dist.inv_cdf(grid))
    rv = np.asarray(dist.r(grid))
    strict = rv > 1e-12
    back = np.asarray(dist.cdf(vals[strict]))
    assert np.max(np.abs(back - grid[strict])) <= 1e-9


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.kind + str(id(d) % 97))
def test_inv_cdf_integral_matches_quadrature(dist):
    from scipy.integrate import quad

    for (a, b) in [(0.0, 1.0), (0.2, 0.7), (0.39, 0.41)]:
        ref, _ = quad(dist.inv_cdf, a, b, points=[p for p in dist.quad_points() if a < p < b] or None,
                      limit=200)
        assert dist.inv_cdf_integral(a, b) == pytest.approx(ref, rel=1e-9, abs=1e-11)


def test_opt_expected_examples():
    assert opt_expected(UniformUnit(), 1) == pytest.approx(0.5, abs=1e-12)
    assert opt_expected(UniformUnit(), 3) == pytest.approx(13.0 / 12.0, abs=1e-12)
    # scale invariance: 2 * (1/2 + 1/3)
    assert opt_expected(UniformInterval(0.0, 2.0), 2) == pytest.approx(5.0 / 3.0, rel=1e-10)


def test_opt_expected_exponential_closed_form():
    # min of i exponentials is exponential with i-fold rate
    for rate in (1.0, 2.5):
        want = sum(1.0 / (i * rate) for i in range(1, 7))
        assert opt_expected(Exponential(rate), 6) == pytest.approx(want, rel=1e-9)


def test_opt_expected_monte_carlo_cross_check():
    dist = UniformInterval(0.0, 2.0)
    n, trials = 2, 1_000_000
    rng = np.random.default_rng(11)
    prices = np.asarray(dist.inv_cdf(rng.random((trials, n))))
    samples = opt_trajectories(prices)
    mean = samples.mean()
    stderr = samples.std(ddof=1) / math.sqrt(trials)
    assert abs(opt_expected(dist, n) - mean) <= 4 * stderr


def test_opt_expected_homogeneity():
    base = PiecewiseInverseCdf([(0.0, 0.0), (0.3, 0.2), (0.8, 1.0), (1.0, 3.0)], slope=1e-3)
    c = 7.5
    scaled = PiecewiseInverseCdf([(u, c * v) for u, v in base.breakpoints], slope=c * 1e-3)
    a = opt_expected(base, 5)
    b = opt_expected(scaled, 5)
    assert b == pytest.approx(c * a, rel=1e-9)


def test_opt_trajectory():
    assert opt_trajectory([1.0]) == 1.0
    assert opt_trajectory([0.5, 0.2, 0.9]) == pytest.approx(0.9, abs=1e-12)
    with pytest.raises(ValueError):
        opt_trajectory([])
    with pytest.raises(ValueError):
        opt_trajectory([0.3, -0.1])


def test_opt_trajectory_brute_force():
    rng = np.random.default_rng(3)
    prices = rng.random(1000)
    brute = sum(min(prices[: i + 1]) for i in range(len(prices)))
    assert opt_trajectory(prices) == pytest.approx(brute, rel=1e-12)
    assert opt_trajectories(prices[None, :])[0] == pytest.approx(brute, rel=1e-12)


def test_json_round_trip():
    for dist in ALL_KINDS:
        doc = json.loads(json.dumps(dist.to_json()))
        again = distribution_from_json(doc)
        grid = np.linspace(0.0, 1.0, 17)
        assert np.allclose(again.inv_cdf(grid), dist.inv_cdf(grid))


def test_parse_dist_spec(tmp_path):
    assert isinstance(parse_dist_spec("uniform"), UniformUnit)
    d = parse_dist_spec("uniform:1,3")
    assert (d.lo, d.hi) == (1.0, 3.0)
    assert parse_dist_spec("exp:0.5").rate == 0.5
    path = tmp_path / "dist.json"
    path.write_text(json.dumps(UniformInterval(0.0, 2.0).to_json()))
    assert parse_dist_spec(str(path)).hi == 2.0


def test_sampling_follows_inverse_cdf():
    dist = Exponential(2.0)
    rng = np.random.default_rng(0)
    xs = dist.sample(rng, size=200_000)
    assert np.mean(xs) == pytest.approx(0.5, abs=0.01)


def test_discrete_law():
    law = DiscreteLaw([0.0, 4.0], [0.5, 0.5])
    assert law.mean() == 2.0
    assert law.expected_min_with(1.0) == pytest.approx(0.5)
    assert law.survival(0.0) == 0.5
    assert law.survival(4.0) == 0.0
    rng = np.random.default_rng(2)
    draw = law.sample(rng, size=10_000)
    assert set(np.unique(draw)) <= {0.0, 4.0}


def test_piecewise_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        PiecewiseInverseCdf([(0.0, 0.0), (0.5, 1.0)], slope=-1.0)
    with pytest.raises(ValueError):
        PiecewiseInverseCdf([(0.5, 1.0), (0.5, 2.0)])
    with pytest.raises(ValueError):
        PiecewiseInverseCdf([])
