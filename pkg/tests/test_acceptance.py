"""Acceptance suite: one test per criterion, each timed against its budget.

Run with ``pytest tests/test_acceptance.py -s`` to also see the per-criterion
detail lines; the PASS/FAIL summary is printed at the end of every run.
"""
import math
import time

import numpy as np
import pytest

from convstab import algos, dini, expr as E, scan, zoo
from convstab.dini import DirectionalQuery as Q
from convstab.grid import GridSpec
from convstab.scan import DEFAULT_LADDER
from convstab.stability import certify

criterion = pytest.mark.criterion
ANALYTIC_CERTIFIED = ("quad", "abs1d", "two_pits", "cross_abs2d")


class Clock:
    def __init__(self, limit):
        self.limit = limit
        self.t0 = time.perf_counter()

    def check(self):
        took = time.perf_counter() - self.t0
        assert took < self.limit, f"took {took:.1f} s, budget {self.limit} s"


def D(f, x, s):
    return dini.dini_directional(f, Q(x, s, normalized=False))


@criterion(1, "counterexample one-sided derivatives", 1)
def test_criterion_1_counterexample_derivatives():
    clock = Clock(1)
    f = zoo.get("diff_cx").expr
    assert D(f, 0.0, 1.0) == 1.0
    assert -D(f, 0.0, -1.0) == -1.0
    for k in range(1, 6):
        xk = 1 / (2 * k * math.pi)
        assert abs(-D(f, xk, -1.0) - 1.0) <= 1e-10
        assert abs(D(f, xk, 1.0) - 0.0) <= 1e-10
        for t in (0.1, 0.5, 1.0):
            xt = 1 / (2 * k * math.pi - t)
            want = 1 - math.cos(t)
            assert abs(D(f, xt, 1.0) - want) <= 1e-10
            assert abs(-D(f, xt, -1.0) - want) <= 1e-10
    clock.check()


@criterion(2, "delta-scan intervals for x^2 and |x+1|+|x-1|", 5)
def test_criterion_2_scan_intervals():
    clock = Clock(5)
    h = 1e-4
    f = zoo.get("quad").expr
    grid = GridSpec.from_step(f.lower, f.upper, h)
    for delta in (0.1, 0.01):
        res = scan.delta_scan(f, grid, delta)
        x = res.points[:, 0]
        want = np.abs(x) <= delta / 2
        wrong = x[want != res.flagged]
        # off-by-one-grid-point tolerance at the two ends
        assert np.all(np.abs(np.abs(wrong) - delta / 2) <= h + 1e-12), wrong
        print(f"x^2 delta={delta}: {res.flagged.sum()} flagged, {len(wrong)} boundary mismatches")
    g = zoo.get("double_abs").expr
    res = scan.delta_scan(g, GridSpec.from_step(g.lower, g.upper, h), 1.0)
    x = res.points[res.flagged, 0]
    assert len(x) > 0
    assert x.min() > -1 - h and x.max() < 1 + h
    print(f"|x+1|+|x-1| delta=1: flagged range [{x.min()!r}, {x.max()!r}]")
    clock.check()


@criterion(3, "shrinkage on analytic entries", 30)
def test_criterion_3_analytic_shrinkage():
    clock = Clock(30)
    for name in ANALYTIC_CERTIFIED:
        e = zoo.get(name)
        cert = certify(e.expr, e.center, e.radius)
        prof = scan.shrinkage_profile(e.expr, e.center, cert.r1, DEFAULT_LADDER)
        s = prof.sup_distances()
        print(name, "r1", cert.r1, "sup", s.tolist())
        assert prof.monotone(), name
        assert s[-1] < 0.1 * cert.r1, name
    clock.check()


@criterion(4, "counterexample witnesses and non-shrinkage", 5)
def test_criterion_4_counterexample_witnesses():
    clock = Clock(5)
    for name, family in (("diff_cx", "example31"), ("smooth_cx", "example32")):
        e = zoo.get(name)
        r0 = 0.05
        bounds = []
        for delta in DEFAULT_LADDER:
            w = scan.counterexample_witness(family, r0, delta)
            assert w.verified
            assert D(e.expr, w.x0, 1.0) >= -delta and D(e.expr, w.x0, -1.0) >= -delta
            bound = 1 / (2 * w.k * math.pi + 1)
            assert abs(w.x0) >= bound
            bounds.append(bound)
        prof = scan.shrinkage_profile(e.expr, 0.0, r0, DEFAULT_LADDER,
                                      probes=scan.witness_probes(family, r0))
        s = prof.sup_distances()
        print(name, "bound", min(bounds), "sup", s.tolist())
        assert np.all(s >= np.array(bounds))
    clock.check()


@criterion(5, "certificates for x^2 and the flat minimum", 5)
def test_criterion_5_certificates():
    clock = Clock(5)
    h = 1e-4
    c = certify(zoo.get("quad").expr, 0.0, 1.0, h=h)
    assert abs(c.lambda0 - 0.32) <= 2 * h
    assert abs(c.r1 - 0.56569) <= 2 * h
    print("quad", c.lambda0, c.r1)
    d = certify(zoo.get("double_abs").expr, 0.0, 1.0, h=h, raise_on_refusal=False)
    assert d.refused and d.lambda0 <= 0
    clock.check()


@criterion(6, "two-sided stability experiment", 120)
def test_criterion_6_stability_experiment():
    clock = Clock(120)
    for name in ("quad", "abs1d", "cross_abs2d"):
        e = zoo.get(name)
        cert = certify(e.expr, e.center, e.radius)
        r = algos.stability_experiment(e.expr, e.center, cert, 0.1 * cert.r1, starts=20, seeds=16)
        algs = {x.algorithm for x in r.records}
        starts = {x.start for x in r.records}
        seeds = {x.seed for x in r.records if x.algorithm == "sampling"}
        assert len(starts) >= 20 and len(seeds) >= 16 and algs == {"subgradient", "sampling"}
        print(name, r.verdict, "max tail distance", r.max_distance, "epsilon", r.epsilon)
        assert r.passed, name

    flat = zoo.get("double_abs").expr
    r = algos.stability_experiment(flat, 0.0, None, 0.4, r1=0.9, lam1=0.5, starts=0,
                                   start_points=[[0.9]], seeds=16)
    print("double_abs", r.verdict, r.max_distance)
    assert not r.passed

    e = zoo.get("diff_cx")
    cert = certify(e.expr, 0.0, e.radius)
    for delta in DEFAULT_LADDER:
        w = scan.counterexample_witness("example31", cert.r1, delta)
        r = algos.stability_experiment(e.expr, 0.0, cert, 0.1 * cert.r1, starts=0,
                                       start_points=[[w.x0]], delta1=delta, seeds=16)
        print("diff_cx", delta, r.verdict, r.max_distance)
        assert not r.passed
    clock.check()


def _fd_sweep(f, rng, count, alpha0=1e-3):
    worst, band, inconclusive, n = 0.0, 0, 0, 0
    lo, hi = f.box
    while n < count:
        x = rng.uniform(lo, hi)
        s = rng.standard_normal(f.n)
        s /= np.linalg.norm(s)
        if not np.all(f.contains(x + alpha0 * s)):
            continue
        n += 1
        kink = f.program.run(x[None, :], S=s[None, :], radius=2 * alpha0)[4]
        if np.any(kink):
            band += 1
            continue
        d = dini.dini_directional(f, Q(x, s))
        r = dini.fd_oracle(f, Q(x, s), alpha0=alpha0)
        if not r.converged:
            inconclusive += 1
            continue
        worst = max(worst, abs(d - r.value) / (1 + abs(d)))
    return worst, band, inconclusive


@criterion(7, "derivative oracle and scaling identity", 30)
def test_criterion_7_derivative_oracle():
    clock = Clock(30)
    rng = np.random.default_rng(2024)
    for name in zoo.NAMES:
        e = zoo.get(name)
        f = e.expr
        worst, band, inc = _fd_sweep(f, rng, 500)
        print(f"{name}: worst {worst:.2e}, kink-band excluded {band}, fd inconclusive {inc}")
        assert worst <= 1e-6, name
        assert band + inc < 250, name
        # declared kinks: one-sided schedules along each axis direction
        for k in e.kinks:
            x = np.atleast_1d(np.asarray(k, dtype=float))
            for s in np.concatenate([np.eye(f.n), -np.eye(f.n)]):
                if not np.all(f.contains(x + 1e-3 * s)):
                    continue
                r = dini.fd_oracle(f, Q(x, s))
                if r.converged:
                    d = dini.dini_directional(f, Q(x, s))
                    assert abs(d - r.value) <= 1e-6 * (1 + abs(d)), (name, k, s)
        lo, hi = f.box
        for _ in range(100):
            x = rng.uniform(lo, hi)
            s = rng.standard_normal(f.n)
            lam = rng.uniform(0, 10)
            a = D(f, x, s)
            b = D(f, x, lam * s)
            assert abs(b - lam * a) <= 1e-12 * max(1.0, abs(lam * a)), (name, x, s, lam)
    clock.check()


def _kink_points(e):
    pts = [np.atleast_1d(np.asarray(k, dtype=float)) for k in e.kinks]
    if e.name == "cross_abs2d":
        t = np.linspace(-0.9, 0.9, 7)
        pts += [np.array([v, 0.0]) for v in t] + [np.array([0.0, v]) for v in t]
    return pts


@criterion(8, "canonical equivalence, branch and closure consistency", 10)
def test_criterion_8_canonical_form():
    clock = Clock(10)
    rng = np.random.default_rng(8)
    for name in zoo.NAMES:
        e = zoo.get(name)
        f = e.expr
        lo, hi = f.box
        X = rng.uniform(lo, hi, size=(1000, f.n))
        dag = E.evaluate_many(f, X)
        tape = E.to_canonical(f).value(X)
        assert np.all(np.abs(dag - tape) <= 1e-12 * (1 + np.abs(dag))), name
        for x in X[:200]:
            sv = E.sign_vector(f, x)
            if 0 not in sv.s:
                assert E.eval_branch(f, sv, x)[0] == f.program.value(x)[0]
        tested = 0
        for x in _kink_points(e):
            sv = E.sign_vector(f, x)
            fx = E.evaluate(f, x)
            for s in sv.completions():
                v, _ = E.eval_branch(f, s, x)
                assert abs(v - fx) <= 1e-12 * (1 + abs(fx)), (name, x, s)
                tested += 1
        print(f"{name}: closure checks {tested}")
    clock.check()


@criterion(9, "finite stationary-value census", 20)
def test_criterion_9_value_census():
    clock = Clock(20)
    for name in ("quad", "abs1d", "double_abs", "two_pits"):
        f = zoo.get(name).expr
        grid = GridSpec.from_step(f.lower, f.upper, 1e-3)
        a = scan.value_census(f, grid)
        b = scan.value_census(f, grid.refined())
        print(name, a.count, b.count, a.values())
        assert a.count == 1 and b.count == a.count, name
    clock.check()
