"""Grid-estimated (r1, lambda0) stability certificates around a strict local minimum.

lambda0 is half the gap between the minimum of f over the annulus
0.8r <= |x - x*| <= 0.9r and f(x*); r1 is the largest radius (at most 0.8r)
on which f stays below f(x*) + lambda0.  Both are estimates at the grid
resolution h; the certificate carries h and a sampled Lipschitz bound so a
consumer can inflate the margins.
"""
from dataclasses import dataclass

import numpy as np

from .errors import CertificationRefused
from .expr import evaluate, evaluate_many
from .grid import GridSpec

ANNULUS = (0.8, 0.9)
DEFAULT_H = {1: 1e-4, 2: 2e-3, 3: 2e-2}


@dataclass
class StabilityCertificate:
    x_star: tuple
    r: float
    lambda0: float
    r1: float
    annulus_min: float
    f_star: float
    h: float
    lipschitz: float
    refused: bool = False
    violating_point: tuple = ()
    rigor: str = "grid-estimate"

    def to_record(self):
        lines = [
            "x_star=" + ",".join(repr(v) for v in self.x_star),
            f"r={self.r!r}",
            f"lambda0={self.lambda0!r}",
            f"r1={self.r1!r}",
            f"annulus_min={self.annulus_min!r}",
            f"f_star={self.f_star!r}",
            f"h={self.h!r}",
            f"lipschitz={self.lipschitz!r}",
            f"refused={str(self.refused).lower()}",
            "violating_point=" + ",".join(repr(v) for v in self.violating_point),
            f"rigor={self.rigor}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record(cls, text):
        kv = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()

        def vec(s):
            return tuple(float(t) for t in s.split(",") if t)

        return cls(vec(kv["x_star"]), float(kv["r"]), float(kv["lambda0"]), float(kv["r1"]),
                   float(kv["annulus_min"]), float(kv["f_star"]), float(kv["h"]),
                   float(kv["lipschitz"]), kv["refused"] == "true",
                   vec(kv.get("violating_point", "")), kv.get("rigor", "grid-estimate"))


def _ball_grid(expr, x_star, r, grid=None, h=None):
    c = np.atleast_1d(np.asarray(x_star, dtype=float))
    if grid is None:
        h = h or DEFAULT_H.get(expr.n, 5e-2)
        grid = GridSpec.centered(c, r, h, box=expr.box)
    X = grid.points()
    X = X[expr.contains(X)]
    d = np.linalg.norm(X - c, axis=1)
    keep = d <= r * (1 + 1e-12)
    return c, X[keep], d[keep], float(np.max(grid.spacing))


def certify(expr, x_star, r, grid=None, h=None, raise_on_refusal=True):
    """Certificate for ``x_star`` from a grid over B(x_star, r).

    Raises :class:`CertificationRefused` (carrying the refused certificate)
    when the annulus minimum does not exceed f(x_star).
    """
    if not r > 0:
        raise ValueError("r must be positive")
    c, X, d, h = _ball_grid(expr, x_star, r, grid, h)
    if len(X) == 0:
        raise ValueError("B(x*, r) contains no grid point of the domain")
    f_star = evaluate(expr, c)
    vals, _, grads, _, _ = expr.program.run(X)
    lip = float(np.max(np.linalg.norm(grads, axis=1)))
    a_lo, a_hi = ANNULUS[0] * r, ANNULUS[1] * r
    ring = (d >= a_lo * (1 - 1e-12)) & (d <= a_hi * (1 + 1e-12))
    if not np.any(ring):
        raise ValueError("grid too coarse: no point in the annulus")
    j = np.flatnonzero(ring)[np.argmin(vals[ring])]
    annulus_min = float(vals[j])
    lam = 0.5 * (annulus_min - f_star)
    if not lam > 0:
        cert = StabilityCertificate(tuple(float(v) for v in c), float(r), lam, 0.0, annulus_min, f_star, h, lip,
                                    True, tuple(float(v) for v in X[j]))
        if raise_on_refusal:
            raise CertificationRefused(cert)
        return cert

    inner = d <= a_lo * (1 + 1e-12)
    bad = inner & (vals > f_star + lam)
    if np.any(bad):
        k = np.flatnonzero(bad)[np.argmin(d[bad])]
        first_bad = d[k]
        ok = inner & (d < first_bad)
        r1 = float(np.max(d[ok])) if np.any(ok) else 0.0
        viol = tuple(float(v) for v in X[k])
    else:
        r1, viol = float(a_lo), ()
    return StabilityCertificate(tuple(float(v) for v in c), float(r), lam, r1, annulus_min, f_star, h, lip,
                                False, viol)


@dataclass
class UniquenessReport:
    margin: float
    argmin: tuple
    h: float
    unique: bool


def verify_unique_min(expr, x_star, r, grid=None, h=None):
    """min of f - f(x*) over grid points of B(x*, r) farther than h from x*."""
    c, X, d, h = _ball_grid(expr, x_star, r, grid, h)
    f_star = evaluate(expr, c)
    far = d > h * (1 + 1e-9)
    if not np.any(far):
        raise ValueError("grid too coarse for a uniqueness check")
    vals = evaluate_many(expr, X[far]) - f_star
    j = int(np.argmin(vals))
    m = float(vals[j])
    return UniquenessReport(m, tuple(float(v) for v in X[far][j]), h, m > 0)


__all__ = ["StabilityCertificate", "UniquenessReport", "certify", "verify_unique_min", "ANNULUS"]
