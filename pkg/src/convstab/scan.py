"""Grid scans for delta-stationary points, shrinkage profiles, witnesses, census."""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass
import math

import numpy as np

from . import dini
from .dini import Verdict, gf_batch
from .expr import evaluate_many
from .grid import GridSpec

DEFAULT_LADDER = tuple(10.0 ** -k for k in range(1, 7))
PROFILE_HEADER = ("delta", "sup_distance", "count", "unknown", "decisive_fraction",
                  "resolution_bound")
_CODE_NAME = {1: "yes", 0: "unknown", -1: "no"}


def parse_ladder(text):
    """'1e-1..1e-5' -> decade ladder; otherwise a comma list."""
    text = str(text).strip()
    if ".." in text:
        a, b = (float(v) for v in text.split(".."))
        hi, lo = max(a, b), min(a, b)
        k0, k1 = round(math.log10(hi)), round(math.log10(lo))
        if not (math.isclose(10.0 ** k0, hi) and math.isclose(10.0 ** k1, lo)):
            raise ValueError(f"ladder endpoints must be powers of ten: {text!r}")
        return tuple(10.0 ** k for k in range(k0, k1 - 1, -1))
    vals = tuple(sorted((float(v) for v in text.split(",") if v.strip()), reverse=True))
    if not vals or min(vals) <= 0:
        raise ValueError("deltas must be positive")
    return vals


def _gf_chunk(args):
    expr, X, sampler, radius = args
    b = gf_batch(expr, X, sampler, radius)
    return b.estimate, b.decisive


def gf_grid(expr, X, sampler=None, kink_radius=0.0, jobs=1):
    """G_f estimate and decisiveness at every row of X, optionally in parallel."""
    if jobs is None or jobs <= 1 or len(X) < 2048:
        return _gf_chunk((expr, X, sampler, kink_radius))
    parts = np.array_split(X, jobs * 4)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        res = list(pool.map(_gf_chunk, [(expr, P, sampler, kink_radius) for P in parts]))
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


@dataclass
class ScanResult:
    """Verdicts on every grid point; iterating yields the flagged (yes/unknown) ones."""

    delta: float
    points: np.ndarray
    estimates: np.ndarray
    decisive: np.ndarray
    codes: np.ndarray
    spacing: np.ndarray

    @property
    def flagged(self):
        return self.codes >= 0

    @property
    def yes_points(self):
        return self.points[self.codes == 1]

    @property
    def unknown_points(self):
        return self.points[self.codes == 0]

    def __iter__(self):
        for i in np.flatnonzero(self.flagged):
            yield self.points[i], Verdict(_CODE_NAME[int(self.codes[i])])

    def __len__(self):
        return int(np.count_nonzero(self.flagged))

    def write_csv(self, path, all_points=False):
        n = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", *[f"x{i}" for i in range(n)], "verdict", "gf"])
            idx = range(len(self.points)) if all_points else np.flatnonzero(self.flagged)
            for i in idx:
                w.writerow([repr(self.delta), *[repr(float(v)) for v in self.points[i]],
                            _CODE_NAME[int(self.codes[i])], repr(float(self.estimates[i]))])


def delta_scan(expr, grid, delta, sampler=None, jobs=1):
    """Test every node of ``grid`` for delta-stationarity.

    ``grid.zeta`` is used as the kink radius: a node within that first-order
    distance of a kink is evaluated with the kink rule.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    X = grid.points()
    if not np.all(expr.contains(X, tol=1e-12)):
        raise ValueError("grid leaves the domain of the expression")
    X = expr.clamp(X)
    est, dec = gf_grid(expr, X, sampler, grid.zeta, jobs)
    codes = np.zeros(len(X), dtype=int)
    codes[dec & (est >= -delta)] = 1
    codes[est < -delta] = -1
    return ScanResult(float(delta), X, est, dec, codes, grid.spacing)


# --------------------------------------------------------------------------
# shrinkage profiles
# --------------------------------------------------------------------------

@dataclass
class ProfileRow:
    delta: float
    sup_distance: float
    count: int
    decisive_fraction: float
    resolution_bound: float
    unknown: int = 0
    farthest: tuple = ()


@dataclass
class ShrinkageProfile:
    center: tuple
    r1: float
    rows: list
    points_tested: int = 0

    def sup_distances(self):
        return np.array([r.sup_distance for r in self.rows])

    def monotone(self, slack=None):
        """Nonincreasing as delta decreases, within ``slack`` (default one resolution step)."""
        s = self.sup_distances()
        slack = self.rows[0].resolution_bound if slack is None else slack
        return bool(np.all(np.diff(s) <= slack + 1e-15))

    def shrinks(self, fraction=0.1):
        return self.monotone() and self.rows[-1].sup_distance < fraction * self.r1

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PROFILE_HEADER)
            for r in self.rows:
                w.writerow([repr(r.delta), repr(r.sup_distance), r.count, r.unknown,
                            repr(r.decisive_fraction), repr(r.resolution_bound)])


def shrinkage_profile(expr, center, r1, deltas=DEFAULT_LADDER, grid=None, probes=None,
                      sampler=None, jobs=1):
    """Largest distance from ``center`` of delta-stationary points in B(center, r1).

    Points come from ``grid`` (default: spacing r1/500, centered) restricted
    to the ball, plus any extra ``probes``.  Unknown verdicts count towards
    the distance (conservative for a shrinkage claim) but not towards
    ``count``.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    deltas = tuple(sorted((float(d) for d in deltas), reverse=True))
    if not deltas or deltas[-1] <= 0:
        raise ValueError("deltas must be positive")
    if grid is None:
        grid = GridSpec.centered(c, r1, r1 / 500.0, box=expr.box)
    X = grid.points()
    X = X[expr.contains(X)]
    if probes is not None and len(probes):
        P = np.asarray(probes, dtype=float).reshape(-1, expr.n)
        X = np.concatenate([X, P[expr.contains(P)]])
    dist = np.linalg.norm(X - c, axis=1)
    keep = dist <= r1 * (1 + 1e-12)
    X, dist = X[keep], dist[keep]
    if len(X) == 0:
        raise ValueError("no grid points inside B(center, r1)")
    est, dec = gf_grid(expr, X, sampler, grid.zeta, jobs)
    res = float(np.max(grid.spacing) * math.sqrt(expr.n))
    rows = []
    for d in deltas:
        yes = dec & (est >= -d)
        unk = ~dec & (est >= -d)
        flagged = yes | unk
        if np.any(flagged):
            j = np.flatnonzero(flagged)[np.argmax(dist[flagged])]
            sup, far = float(dist[j]), tuple(float(v) for v in X[j])
        else:
            sup, far = 0.0, ()
        rows.append(ProfileRow(d, sup, int(yes.sum()), float(dec.mean()), res,
                               int(unk.sum()), far))
    return ShrinkageProfile(tuple(float(v) for v in c), float(r1), rows, len(X))


# --------------------------------------------------------------------------
# counterexample witnesses
# --------------------------------------------------------------------------

@dataclass
class Witness:
    which: str
    x0: float
    k: int
    t: float
    epsilon: float
    derivative: float
    verified: bool

    def __iter__(self):
        return iter((self.x0, self.k, self.t, self.verified))


def growth_constant(k):
    """C(k) = (2k pi)^2 exp(2k pi) / 2, the quadratic-bound constant of the smooth family."""
    a = 2.0 * k * math.pi
    return 0.5 * a * a * math.exp(a)


def witness_parameters(which, r0, delta):
    if r0 <= 0 or delta <= 0:
        raise ValueError("r0 and delta must be positive")
    base = math.ceil(1.0 / (2.0 * math.pi * r0))
    if which == "example31":
        k = base + 2
        t = min(math.sqrt(2.0 * delta), 1.0)
    elif which == "example32":
        k = base + 1
        t = min(math.sqrt(delta / growth_constant(k)), 1.0)
    else:
        raise KeyError(f"unknown witness family {which!r}")
    return k, t


def counterexample_witness(which, r0, delta, sampler=None):
    """Closed-form delta-stationary point far from 0 for the two counterexamples.

    Returns a :class:`Witness`; it unpacks as (x0, k, t, verified).
    """
    from . import zoo

    k, t = witness_parameters(which, r0, delta)
    x0 = 1.0 / (2.0 * k * math.pi - t)
    eps = 1.0 / (2.0 * k * math.pi + 1.0)
    f = zoo.get("diff_cx" if which == "example31" else "smooth_cx").expr
    right, left = dini.one_sided(f, x0)
    verdict = dini.is_delta_stationary(f, x0, delta, sampler)
    ok = verdict is Verdict.YES and abs(x0) >= eps
    return Witness(which, x0, k, t, eps, right, bool(ok))


def witness_probes(which, r0, deltas=DEFAULT_LADDER):
    return np.array([counterexample_witness(which, r0, d).x0 for d in deltas])


# --------------------------------------------------------------------------
# value census
# --------------------------------------------------------------------------

@dataclass
class ValueCensus:
    clusters: list  # (representative, low, high, members)
    tolerance: float
    delta: float
    points: int = 0

    @property
    def count(self):
        return len(self.clusters)

    def values(self):
        return [c[0] for c in self.clusters]


def cluster_values(values, tol):
    """Single-linkage clusters of scalars: split sorted values at gaps > tol."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return []
    cut = np.flatnonzero(np.diff(v) > tol) + 1
    out = []
    for part in np.split(v, cut):
        out.append((float(np.median(part)), float(part[0]), float(part[-1]), int(part.size)))
    return out


def value_census(expr, grid, delta_census=1e-6, cluster_tol=None, sampler=None, jobs=1):
    scan = delta_scan(expr, grid, delta_census, sampler, jobs)
    pts = scan.yes_points
    vals = evaluate_many(expr, pts) if len(pts) else np.empty(0)
    if cluster_tol is None:
        scale = float(np.max(np.abs(evaluate_many(expr, scan.points)))) if len(scan.points) else 1.0
        cluster_tol = 1e-4 * max(1.0, scale)
    return ValueCensus(cluster_values(vals, cluster_tol), float(cluster_tol),
                       float(delta_census), int(len(pts)))


__all__ = ["GridSpec", "ScanResult", "ShrinkageProfile", "ProfileRow", "ValueCensus", "Witness",
           "DEFAULT_LADDER", "PROFILE_HEADER", "delta_scan", "shrinkage_profile",
           "counterexample_witness", "witness_parameters", "witness_probes", "growth_constant",
           "value_census", "cluster_values", "parse_ladder", "gf_grid"]
