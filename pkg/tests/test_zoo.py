import math

import numpy as np
import pytest

from convstab import dini, zoo
from convstab.primitives import special_value_and_derivative as sv


def test_unknown_name():
    with pytest.raises(KeyError):
        zoo.get("nope")


def test_analytic_flags():
    flags = {e.name: e.analytic for e in zoo.entries()}
    assert flags.pop("diff_cx") is False and flags.pop("smooth_cx") is False
    assert all(flags.values())


@pytest.mark.parametrize("name", zoo.NAMES)
def test_all_facts_pass(name):
    results = zoo.verify_entry(zoo.get(name))
    bad = [(r.fact.quantity, r.fact.at, r.value, r.fact.reference) for r in results if not r.passed]
    assert not bad


def test_anchored_tags_present():
    tags = {e.name: {f.tag for f in e.facts} for e in zoo.entries()}
    assert "PAPER" in tags["diff_cx"] and "PAPER" in tags["smooth_cx"] and "PAPER" in tags["quad"]


def test_diff_cx_left_derivative_positive():
    f = zoo.get("diff_cx").expr
    for t in np.linspace(1e-3, 1 / math.pi - 1e-3, 400):
        assert dini.one_sided(f, t)[1] > 0


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_diff_cx_odd_multiples(k):
    f = zoo.get("diff_cx").expr
    right, left = dini.one_sided(f, 1 / ((2 * k - 1) * math.pi))
    assert right == pytest.approx(1.0, abs=1e-10) and left == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_smooth_cx_left_derivative(k):
    f = zoo.get("smooth_cx").expr
    xk = 1 / (2 * k * math.pi)
    left = dini.one_sided(f, xk)[1]
    assert left == pytest.approx(xk ** -2 * math.exp(-1 / xk), rel=1e-9)


@pytest.mark.parametrize("u", [0.05, 0.2, 0.7])
def test_smooth_cx_derivative_formulas(u):
    e = u ** -2 * math.exp(-1 / u)
    assert sv("integral_g2", u)[1] == pytest.approx(e * (math.sin(1 / u) - 1), rel=1e-12)
    assert sv("cauchy_envelope", u)[1] == pytest.approx(e * (math.sin(1 / u) - math.cos(1 / u)), rel=1e-12)


def test_domains():
    assert zoo.get("quad").domain == [(-1.0, 1.0)]
    lo, hi = zoo.get("diff_cx").domain[0]
    assert hi == pytest.approx(1 / math.pi + 0.05) and lo == -hi
