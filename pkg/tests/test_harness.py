import math

import pytest

from contractsel.distributions import Exponential, UniformUnit
from contractsel.oscc import disser_params, family_params
from contractsel.report import REPORT_CSV_HEADER, report_to_csv, to_json
from contractsel.harness import (
    SimulationReport,
    make_noniid_impossibility,
    simulate,
)

UNIT = UniformUnit()


def ratio_stderr(report: SimulationReport) -> float:
    """Conservative delta-method spread, ignoring the favorable correlation."""
    ra = report.stderr_alg / report.mean_alg_cost
    ro = report.stderr_opt / report.mean_opt_cost
    return report.ratio_of_means * math.sqrt(ra * ra + ro * ro)


def test_osdc_ratio_matches_analytic():
    r = simulate(("osdc-optimal",), ("iid", UNIT, 2), trials=400_000, seed=1)
    assert r.violations == 0
    assert abs(r.ratio_of_means - 1.05) <= 3 * ratio_stderr(r)


def test_oscc_disser_ratio_below_published_bound():
    r = simulate(("oscc-meta", disser_params(64)), ("iid", UNIT, 64),
                 trials=100_000, seed=2)
    assert r.violations == 0
    assert r.ratio_of_means <= 6.052 + 3 * ratio_stderr(r)


def test_ratio_of_means_at_least_one():
    cases = [
        (("osdc-optimal",), ("iid", UNIT, 5)),
        (("osdc-optimal",), ("iid", Exponential(1.0), 7)),
        (("oscc-meta", disser_params(16)), ("iid", UNIT, 16)),
        (("oscc-meta", family_params(4.0, 0.89, 2.27, 24)), ("iid", UNIT, 24)),
    ]
    for policy, inst in cases:
        r = simulate(policy, inst, trials=60_000, seed=4)
        assert r.ratio_of_means >= 1.0 - 3 * ratio_stderr(r)
        assert r.violations == 0


def test_determinism_bit_identical():
    a = simulate(("osdc-optimal",), ("iid", UNIT, 6), trials=123_457, seed=99)
    b = simulate(("osdc-optimal",), ("iid", UNIT, 6), trials=123_457, seed=99)
    assert a == b
    assert to_json(a.to_dict()) == to_json(b.to_dict())
    c = simulate(("osdc-optimal",), ("iid", UNIT, 6), trials=123_457, seed=100)
    assert c != a


def test_exact_noniid_ratios():
    for n in (1, 3, 10, 20):
        inst = make_noniid_impossibility(n)
        r = simulate(("osdc-optimal",), ("noniid", inst), exact=True)
        want = n / (2.0 * (1.0 - 0.5**n))
        assert r.ratio_of_means == pytest.approx(want, rel=1e-14)
        assert r.exact and r.violations == 0
    assert simulate(("osdc-optimal",),
                    ("noniid", make_noniid_impossibility(1)), exact=True
                    ).ratio_of_means == pytest.approx(1.0)


def test_noniid_growth_tracks_half_n():
    for n in (10, 20, 40):
        r = simulate(("osdc-optimal",), ("noniid", make_noniid_impossibility(n)),
                     exact=True)
        assert abs(r.ratio_of_means - n / 2.0) / (n / 2.0) < 0.02


def test_incompatible_policy_instance():
    inst = make_noniid_impossibility(4)
    with pytest.raises(ValueError):
        simulate(("oscc-meta", disser_params(4)), ("noniid", inst), exact=True)
    with pytest.raises(ValueError):
        simulate(("osdc-optimal",), ("noniid", inst), exact=False)
    with pytest.raises(ValueError):
        simulate(("oscc-meta", disser_params(8)), ("iid", UNIT, 9), trials=10)


def test_json_round_trip_byte_identical():
    import json

    r = simulate(("osdc-optimal",), ("iid", UNIT, 3), trials=5_000, seed=0)
    text = to_json(r.to_dict())
    again = to_json(json.loads(text))
    assert again == text


def test_csv_header_stable():
    r = simulate(("osdc-optimal",), ("iid", UNIT, 3), trials=1_000, seed=0)
    csv = report_to_csv(r.to_dict())
    header = csv.splitlines()[0]
    assert header == REPORT_CSV_HEADER
    assert header.split(",")[0] == "trials"
    assert len(csv.splitlines()) == 2
