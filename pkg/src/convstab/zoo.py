"""Catalog of test functions with machine-checkable reference facts.

Each fact names a quantity computed by the library (a value, a one-sided
derivative, G_f, ...), the point or interval it applies to, a reference value
and a provenance tag:

* PAPER    a value stated in the source analysis of the function,
* DERIVED  obtained independently (hand analysis or quadrature, frozen here),
* TRIVIAL  immediate from the definition.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import expr as E

PI = math.pi


@dataclass(frozen=True)
class Fact:
    quantity: str
    at: object
    reference: float
    tag: str
    compare: str = "eq"  # eq, gt (min over interval > ref), lt (max over interval < ref)
    tol: float = None
    note: str = ""


@dataclass(frozen=True)
class ZooEntry:
    name: str
    expr: E.Expr
    center: tuple
    radius: float
    facts: tuple = ()
    kinks: tuple = ()
    description: str = ""
    witness: str = None  # counterexample family, if any

    @property
    def analytic(self):
        return self.expr.analytic

    @property
    def domain(self):
        return list(zip(self.expr.lower, self.expr.upper))


@dataclass
class FactResult:
    fact: Fact
    value: float
    residual: float
    passed: bool


# --------------------------------------------------------------------------
# constructions
# --------------------------------------------------------------------------

def _x():
    return E.var(0)


def _quad():
    x = _x()
    f = E.Expr.build(x ** 2, [(-1, 1)], source="x^2")
    facts = [
        Fact("value", 0.3, 0.09, "TRIVIAL"),
        Fact("gf", 0.3, -0.6, "PAPER"),
        Fact("gf", 0.0, 0.0, "TRIVIAL"),
        Fact("stationary_halfwidth", 0.1, 0.05, "PAPER", tol=1e-4),
        Fact("stationary_halfwidth", 0.01, 0.005, "PAPER", tol=1e-4),
    ]
    return ZooEntry("quad", f, (0.0,), 1.0, tuple(facts), (), "x^2 on [-1, 1]")


def _abs1d():
    x = _x()
    f = E.Expr.build(abs(x), [(-1, 1)], source="|x|")
    facts = [
        Fact("right_derivative", 0.0, 1.0, "TRIVIAL"),
        Fact("left_derivative", 0.0, -1.0, "TRIVIAL"),
        Fact("gf", 0.0, 1.0, "TRIVIAL"),
        Fact("gf", 0.5, -1.0, "TRIVIAL"),
    ]
    return ZooEntry("abs1d", f, (0.0,), 1.0, tuple(facts), (0.0,), "|x| on [-1, 1]")


def _double_abs():
    x = _x()
    f = E.Expr.build(abs(x + 1) + abs(x - 1), [(-2, 2)], source="|x+1|+|x-1|")
    facts = [
        Fact("value", 0.0, 2.0, "PAPER"),
        Fact("value", 0.5, 2.0, "PAPER"),
        Fact("gf", 1.5, -2.0, "PAPER"),
        Fact("gf", 1.0, 0.0, "DERIVED", note="flat to the left, slope 2 to the right"),
        Fact("stationary_halfwidth", 1.0, 1.0, "DERIVED", tol=1e-4,
             note="stationary set is the closed flat piece [-1, 1]"),
    ]
    return ZooEntry("double_abs", f, (0.0,), 1.0, tuple(facts), (-1.0, 1.0),
                    "|x+1| + |x-1| on [-2, 2]")


def _two_pits():
    x = _x()
    f = E.Expr.build(E.minimum((x - 1) ** 2, (x + 1) ** 2), [(-3, 3)],
                     source="min((x-1)^2, (x+1)^2)")
    facts = [
        Fact("value", 1.0, 0.0, "DERIVED"),
        Fact("value", -1.0, 0.0, "DERIVED"),
        Fact("gf", 0.0, -2.0, "DERIVED", note="concave kink between the pits"),
        Fact("gf", 1.0, 0.0, "DERIVED"),
        Fact("right_derivative", 0.0, -2.0, "DERIVED"),
        Fact("left_derivative", 0.0, 2.0, "DERIVED"),
    ]
    return ZooEntry("two_pits", f, (1.0,), 1.0, tuple(facts), (0.0,),
                    "min{(x-1)^2, (x+1)^2} on [-3, 3]")


def _cross_abs2d():
    x0, x1 = E.var(0), E.var(1)
    f = E.Expr.build(abs(x0) + abs(x1), [(-1, 1), (-1, 1)], source="|x0|+|x1|")
    facts = [
        Fact("value", (0.3, -0.2), 0.5, "TRIVIAL"),
        Fact("gf", (0.3, -0.2), -math.sqrt(2.0), "DERIVED"),
        Fact("gf", (0.0, 0.5), -1.0, "DERIVED", note="kink on an axis; best direction is -e1"),
        Fact("gf", (0.0, 0.0), 1.0, "DERIVED", note="inf of |s0|+|s1| on the unit circle"),
    ]
    return ZooEntry("cross_abs2d", f, (0.0, 0.0), 1.0, tuple(facts), ((0.0, 0.0),),
                    "|x0| + |x1| on [-1, 1]^2")


# g1(1/pi) by oscillatory quadrature (mpmath, 30 digits), frozen
_DIFF_CX_AT_INV_PI = 0.355479047180011791945803374972
_DIFF_CX_AT_0_2 = 0.164132644757577229063585456606
_SMOOTH_CX_AT_0_5 = 0.101964945829788264492175128503


def _diff_cx():
    x = _x()
    h = E.special("sin_of_reciprocal", x)
    g = E.special("integral_g1", x)
    f = E.Expr.build(E.minimum(0.0, h) - g + abs(x),
                     [(-1 / PI - 0.05, 1 / PI + 0.05)],
                     source="min{0, x^2 sin(1/x)} - g1(x) + |x|")
    facts = [
        Fact("right_derivative", 0.0, 1.0, "PAPER"),
        Fact("left_derivative", 0.0, -1.0, "PAPER"),
        Fact("gf", 0.0, 1.0, "DERIVED"),
    ]
    t = 0.3
    for k in range(1, 6):
        a = 1 / (2 * k * PI)
        b = 1 / ((2 * k - 1) * PI)
        c = 1 / (2 * k * PI - t)
        facts += [
            Fact("left_derivative", a, 1.0, "PAPER"),
            Fact("right_derivative", a, 0.0, "PAPER"),
            Fact("left_derivative", b, 2.0, "PAPER"),
            Fact("right_derivative", b, 1.0, "PAPER"),
            Fact("right_derivative", c, 1 - math.cos(t), "PAPER"),
        ]
    facts += [
        Fact("min_left_derivative", (1e-3, 1 / PI), 0.0, "PAPER", compare="gt"),
        Fact("max_right_derivative", (-1 / PI, -1e-3), 0.0, "DERIVED", compare="lt",
             note="mirror of the positive side"),
        Fact("value", 1 / PI, _DIFF_CX_AT_INV_PI, "DERIVED", tol=1e-7),
        Fact("value", 0.2, _DIFF_CX_AT_0_2, "DERIVED", tol=1e-7),
    ]
    kinks = tuple(s / (j * PI) for j in range(1, 6) for s in (1, -1)) + (0.0,)
    return ZooEntry("diff_cx", f, (0.0,), 1 / PI, tuple(facts), kinks,
                    "C^1 counterexample: min{0, h} - g + |x| near 0", "example31")


def _smooth_cx():
    x = _x()
    u = abs(x)
    h = E.special("cauchy_envelope", u)
    g = E.special("integral_g2", u)
    f = E.Expr.build(E.minimum(0.0, h) - g, [(-1, 1)],
                     source="min{0, exp(-1/u) sin(1/u)} - g2(u), u = |x|")
    facts = [Fact("value", 0.0, 0.0, "TRIVIAL"),
             Fact("value", 0.5, _SMOOTH_CX_AT_0_5, "DERIVED", tol=1e-7)]
    t = 0.3
    for k in range(1, 4):
        a = 1 / (2 * k * PI)
        b = 1 / ((2 * k - 1) * PI)
        c = 1 / (2 * k * PI - t)
        ea = math.exp(-1 / a) / a ** 2
        eb = math.exp(-1 / b) / b ** 2
        ec = math.exp(-1 / c) / c ** 2
        facts += [
            Fact("left_derivative", a, ea, "PAPER"),
            Fact("right_derivative", a, 0.0, "DERIVED"),
            Fact("left_derivative", b, 2 * eb, "PAPER"),
            Fact("right_derivative", b, eb, "DERIVED"),
            Fact("right_derivative", c, ec * (1 - math.cos(t)), "PAPER"),
        ]
    facts.append(Fact("min_left_derivative", (0.01, 1.0), 0.0, "PAPER", compare="gt"))
    kinks = tuple(s / (j * PI) for j in range(1, 6) for s in (1, -1)) + (0.0,)
    return ZooEntry("smooth_cx", f, (0.0,), 1.0, tuple(facts), kinks,
                    "C^infinity counterexample built from exp(-1/x) sin(1/x)", "example32")


_BUILDERS = {
    "quad": _quad,
    "abs1d": _abs1d,
    "double_abs": _double_abs,
    "two_pits": _two_pits,
    "cross_abs2d": _cross_abs2d,
    "diff_cx": _diff_cx,
    "smooth_cx": _smooth_cx,
}
NAMES = tuple(_BUILDERS)
_CACHE = {}


def get(name):
    if name not in _BUILDERS:
        raise KeyError(f"unknown zoo entry {name!r}; choose from {', '.join(NAMES)}")
    if name not in _CACHE:
        _CACHE[name] = _BUILDERS[name]()
    return _CACHE[name]


def entries():
    return [get(n) for n in NAMES]


# --------------------------------------------------------------------------
# fact checking
# --------------------------------------------------------------------------

def _interval_points(expr, lo, hi, count=2001):
    # open interval; avoid exact endpoints
    return np.linspace(lo, hi, count + 2)[1:-1, None]


def measure(entry, fact):
    """Compute the library's value of ``fact.quantity``."""
    from . import dini, scan

    f = entry.expr
    q = fact.quantity
    if q == "value":
        return float(E.evaluate(f, fact.at))
    if q in ("right_derivative", "left_derivative"):
        r, l = dini.one_sided(f, fact.at)
        return r if q == "right_derivative" else l
    if q == "gf":
        return dini.gf(f, fact.at).gf_estimate
    if q == "stationary_halfwidth":
        grid = scan.GridSpec.from_step(f.lower, f.upper, 1e-4)
        res = scan.delta_scan(f, grid, fact.at)
        yes = res.points[res.codes == 1]
        c = np.asarray(entry.center)
        return float(np.max(np.linalg.norm(yes - c, axis=1))) if len(yes) else 0.0
    if q in ("min_left_derivative", "max_right_derivative"):
        X = _interval_points(f, *fact.at)
        b = dini.gf_batch(f, X)
        return float(np.min(b.left)) if q == "min_left_derivative" else float(np.max(b.right))
    raise KeyError(f"unknown quantity {q!r}")


def verify_entry(entry, tol=1e-9):
    if isinstance(entry, str):
        entry = get(entry)
    out = []
    for fact in entry.facts:
        v = measure(entry, fact)
        t = fact.tol if fact.tol is not None else tol
        if fact.compare == "gt":
            res = fact.reference - v
            ok = v > fact.reference
        elif fact.compare == "lt":
            res = v - fact.reference
            ok = v < fact.reference
        else:
            res = abs(v - fact.reference)
            ok = res <= t
        out.append(FactResult(fact, v, float(res), bool(ok)))
    return out


__all__ = ["Fact", "ZooEntry", "FactResult", "NAMES", "get", "entries", "verify_entry", "measure"]
