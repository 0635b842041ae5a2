import math

import numpy as np
import pytest

from convstab import scan, zoo
from convstab.dini import Verdict
from convstab.grid import GridSpec
from convstab.scan import DEFAULT_LADDER


def _interval_mismatch(points, lo, hi, h):
    """Grid points on the wrong side of [lo, hi], ignoring those within h of an end."""
    x = points[:, 0]
    return x[(np.abs(x - lo) > h) & (np.abs(x - hi) > h)]


@pytest.mark.parametrize("delta", [0.1, 0.01])
def test_square_flags_half_delta_interval(delta):
    f = zoo.get("quad").expr
    h = 1e-4
    res = scan.delta_scan(f, GridSpec.from_step(f.lower, f.upper, h), delta)
    flagged = np.array([p for p, _ in res])
    inside = np.abs(res.points[:, 0]) <= delta / 2
    want = set(np.flatnonzero(inside))
    got = set(np.flatnonzero(res.flagged))
    diff = res.points[sorted(want ^ got), 0]
    assert np.all(np.abs(np.abs(diff) - delta / 2) <= h + 1e-12)
    assert flagged.min() >= -delta / 2 - h and flagged.max() <= delta / 2 + h
    assert len(res.unknown_points) == 0


def test_abs_flags_only_origin():
    f = zoo.get("abs1d").expr
    res = scan.delta_scan(f, GridSpec((-1.0,), (1.0,), (2001,)), 0.5)
    assert [float(p[0]) for p, v in res] == [0.0]


def test_double_abs_flags_stay_in_flat_part():
    f = zoo.get("double_abs").expr
    h = 1e-3
    res = scan.delta_scan(f, GridSpec.from_step(f.lower, f.upper, h), 1.0)
    x = res.yes_points[:, 0]
    assert len(x) > 0 and x.min() > -1 - h and x.max() < 1 + h


def test_scan_iteration_yields_verdicts():
    f = zoo.get("cross_abs2d").expr
    res = scan.delta_scan(f, GridSpec((-0.1, -0.1), (0.1, 0.1), (5, 5)), 0.5)
    items = list(res)
    assert len(items) == len(res) == 1
    p, v = items[0]
    assert np.allclose(p, 0) and v is Verdict.UNKNOWN


def test_scan_csv_is_deterministic(tmp_path):
    f = zoo.get("quad").expr
    g = GridSpec.from_step(f.lower, f.upper, 1e-2)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    scan.delta_scan(f, g, 0.1).write_csv(a)
    scan.delta_scan(f, g, 0.1, jobs=2).write_csv(b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "delta,x0,verdict,gf"


def test_parallel_scan_matches_serial():
    f = zoo.get("two_pits").expr
    g = GridSpec.from_step(f.lower, f.upper, 1e-3)
    a = scan.delta_scan(f, g, 0.01)
    b = scan.delta_scan(f, g, 0.01, jobs=3)
    np.testing.assert_array_equal(a.codes, b.codes)
    np.testing.assert_array_equal(a.estimates, b.estimates)


def test_parse_ladder():
    assert scan.parse_ladder("1e-1..1e-5") == pytest.approx([1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    assert scan.parse_ladder("0.5,0.1") == pytest.approx([0.5, 0.1])


def test_square_profile_is_half_delta():
    f = zoo.get("quad").expr
    prof = scan.shrinkage_profile(f, 0.0, 0.5, scan.parse_ladder("1e-1..1e-5"))
    h = prof.rows[0].resolution_bound
    for row in prof.rows:
        assert abs(row.sup_distance - row.delta / 2) <= h
    assert prof.monotone() and prof.shrinks()


@pytest.mark.parametrize("name", ["quad", "abs1d", "two_pits", "cross_abs2d"])
def test_analytic_entries_shrink(name):
    from convstab.stability import certify

    e = zoo.get(name)
    cert = certify(e.expr, e.center, e.radius)
    prof = scan.shrinkage_profile(e.expr, e.center, cert.r1, DEFAULT_LADDER)
    assert prof.monotone()
    # sharp minima sit at distance 0 for every delta, so only non-increase is asserted
    assert prof.rows[-1].sup_distance <= prof.rows[0].sup_distance
    assert prof.rows[-1].sup_distance < 0.1 * cert.r1


def test_witness_parameters_examples():
    assert scan.witness_parameters("example31", 0.05, 0.02) == (6, pytest.approx(0.2))
    w = scan.counterexample_witness("example31", 0.05, 0.02)
    assert w.x0 == pytest.approx(1 / (12 * math.pi - 0.2)) and w.x0 == pytest.approx(0.026667, abs=1e-6)
    assert w.derivative == pytest.approx(1 - math.cos(0.2), abs=1e-10)
    assert w.verified
    w = scan.counterexample_witness("example31", 0.05, 0.5)
    assert w.t == 1.0 and w.derivative == pytest.approx(1 - math.cos(1.0), abs=1e-10) and w.verified
    k, t = scan.witness_parameters("example32", 0.1, 1e-3)
    assert k == 3
    assert t == pytest.approx(min(math.sqrt(1e-3 / (0.5 * (6 * math.pi) ** 2 * math.exp(6 * math.pi))), 1))
    assert scan.counterexample_witness("example32", 0.1, 1e-3).verified


@pytest.mark.parametrize("which", ["example31", "example32"])
@pytest.mark.parametrize("delta", DEFAULT_LADDER)
def test_witness_verified_on_ladder(which, delta):
    x0, k, t, ok = scan.counterexample_witness(which, 0.05, delta)
    assert ok and x0 >= 1 / (2 * k * math.pi + 1)


def test_counterexample_profile_does_not_shrink():
    e = zoo.get("diff_cx")
    probes = scan.witness_probes("example31", 0.05)
    prof = scan.shrinkage_profile(e.expr, 0.0, 0.05, DEFAULT_LADDER, probes=probes)
    bound = 1 / (2 * 6 * math.pi + 1)
    assert all(r.sup_distance >= bound for r in prof.rows)
    assert not prof.shrinks()


def test_cluster_values_gap_split():
    cl = scan.cluster_values([0.0, 1e-6, 2.0, 2.00001, 5.0], 1e-3)
    assert [c[3] for c in cl] == [2, 2, 1]


@pytest.mark.parametrize("name,value", [("double_abs", 2.0), ("quad", 0.0), ("two_pits", 0.0),
                                        ("abs1d", 0.0)])
def test_census_single_cluster(name, value):
    f = zoo.get(name).expr
    g = GridSpec.from_step(f.lower, f.upper, 1e-3)
    for grid in (g, g.refined()):
        c = scan.value_census(f, grid, 1e-3 if name == "double_abs" else 1e-6)
        assert c.count == 1
        assert c.clusters[0][0] == pytest.approx(value, abs=1e-6)
