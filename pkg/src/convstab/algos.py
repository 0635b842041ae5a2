"""Descent algorithms obeying a decrease / stationarity / path-bound contract.

Both algorithms only accept steps that strictly decrease f and keep every
sampled point of the segment below f(x0) + lambda; they stop at the first
iterate whose stationarity test passes, after which the sequence is constant.
"""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np

from . import dini
from .dini import Verdict
from .errors import UnsupportedDimension
from .expr import _as_points, evaluate, evaluate_many

STATIONARY = "stationary-found"
MAX_ITER = "max-iter"
MAX_HALVINGS = 40


@dataclass(frozen=True)
class AlgoParams:
    delta: float
    lam: float
    eta: float
    max_iter: int = 500
    seed: int = 0
    samples: int = 8
    radius: float = None  # gradient-sampling ball radius, default eta
    segment_samples: int = 8
    kink_radius: float = 1e-9

    def __post_init__(self):
        if not (self.delta > 0 and self.lam > 0 and self.eta > 0):
            raise ValueError("delta, lam and eta must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def sample_radius(self):
        return self.eta if self.radius is None else self.radius


@dataclass
class Trajectory:
    points: np.ndarray
    values: np.ndarray
    reason: str
    step_norms: np.ndarray
    segment_max: np.ndarray
    algorithm: str = ""
    params: AlgoParams = None

    @property
    def x0(self):
        return self.points[0]

    @property
    def final(self):
        return self.points[-1]

    def __len__(self):
        return len(self.points)

    def point(self, k):
        """x_k, frozen at the last iterate after termination."""
        return self.points[min(k, len(self.points) - 1)]

    def tail(self, fraction=0.1):
        if self.reason == STATIONARY:
            return self.points[-1:]
        m = max(1, int(math.ceil(fraction * len(self.points))))
        return self.points[-m:]

    def write_csv(self, path):
        n = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", *[f"x{i}" for i in range(n)], "f", "step_norm"])
            steps = np.concatenate([[0.0], self.step_norms])
            for k, (x, v, s) in enumerate(zip(self.points, self.values, steps)):
                w.writerow([k, *[repr(float(t)) for t in x], repr(float(v)), repr(float(s))])


# --------------------------------------------------------------------------
# shared step machinery
# --------------------------------------------------------------------------

def _segment_max(expr, x, y, count):
    th = np.linspace(0.0, 1.0, max(count, 2))[:, None]
    return float(np.max(evaluate_many(expr, (1 - th) * x + th * y, check=False)))


def _line_step(expr, x, fx, d, eta, cap, segs):
    """Backtrack along unit direction d: strict decrease and segment max <= cap."""
    for _ in range(MAX_HALVINGS + 1):
        y = expr.clamp(x + eta * d)
        if not np.array_equal(y, x):
            fy = float(evaluate_many(expr, y[None, :], check=False)[0])
            if fy < fx:
                sm = _segment_max(expr, x, y, segs)
                if sm <= cap:
                    return y, fy, sm
        eta *= 0.5
    return None


def pointwise_gauge(expr, x, kink_radius=0.0, sampler=None):
    """G_f at x: the better of the exact and the kink-banded evaluation.

    The band lets a point a rounding error away from a kink count as the
    kink; it never overrides a passing exact verdict at x itself.
    """
    v = dini.gf(expr, x, sampler, kink_radius)
    if kink_radius > 0:
        v0 = dini.gf(expr, x, sampler, 0.0)
        if v0.gf_estimate > v.gf_estimate:
            v = v0
    return v


def _start(expr, x0):
    x = _as_points(expr, x0)[0].astype(float)
    if not expr.contains(x[None, :])[0]:
        raise ValueError(f"start point {x.tolist()} is outside the domain")
    return x


def _finish(pts, vals, reason, steps, segs, name, p):
    return Trajectory(np.array(pts), np.array(vals), reason, np.array(steps),
                      np.array(segs), name, p)


# --------------------------------------------------------------------------
# steepest Dini descent
# --------------------------------------------------------------------------

def run_subgradient_descent(expr, x0, p, sampler=None):
    """Normalized steepest descent along the direction minimizing df/ds.

    The step is at most min(eta, lam / (2 L)) with L the running maximum of
    observed gradient norms and directional slopes.  The method is
    deterministic; ``p.seed`` is ignored.
    """
    x = _start(expr, x0)
    fx = evaluate(expr, x)
    cap = fx + p.lam
    pts, vals, steps, segs = [x.copy()], [fx], [], []
    lip = 0.0
    reason = MAX_ITER
    for _ in range(p.max_iter):
        v = pointwise_gauge(expr, x, p.kink_radius, sampler)
        if v.gf_estimate >= -p.delta:
            reason = STATIONARY
            break
        _, _, g, _, _ = expr.program.run(x[None, :])
        lip = max(lip, float(np.linalg.norm(g[0])), abs(v.gf_estimate))
        eta = min(p.eta, 0.5 * p.lam / lip)
        res = _line_step(expr, x, fx, v.direction, eta, cap, p.segment_samples)
        if res is None:
            break
        y, fy, sm = res
        steps.append(float(np.linalg.norm(y - x)))
        segs.append(sm)
        x, fx = y, fy
        pts.append(x.copy())
        vals.append(fx)
    return _finish(pts, vals, reason, steps, segs, "subgradient", p)


# --------------------------------------------------------------------------
# gradient sampling
# --------------------------------------------------------------------------

_SUPPORTS = {}


def _supports(m, k):
    if (m, k) not in _SUPPORTS:
        _SUPPORTS[m, k] = np.array(list(combinations(range(m), k)))
    return _SUPPORTS[m, k]


def _kkt_weights(Gs):
    """Affine-hull minimizers: solve [[Q, 1], [1', 0]] [w; mu] = [0; 1] per support.

    The system is singular exactly when the support is affinely dependent;
    those rows come back as NaN (some independent sub-support covers them).
    """
    B, k, _ = Gs.shape
    A = np.zeros((B, k + 1, k + 1))
    A[:, :k, :k] = Gs @ np.transpose(Gs, (0, 2, 1))
    A[:, :k, k] = 1.0
    A[:, k, :k] = 1.0
    scale = np.maximum(np.max(np.abs(A), axis=(1, 2)), 1.0)
    good = np.abs(np.linalg.det(A / scale[:, None, None])) > 1e-12
    sol = np.full((B, k), np.nan)
    if np.any(good):
        rhs = np.zeros((int(good.sum()), k + 1, 1))
        rhs[:, k] = 1.0
        sol[good] = np.linalg.solve(A[good], rhs)[:, :k, 0]
    return sol


def min_norm_element(G):
    """Exact minimum-norm point of conv{rows of G}.

    Enumerates supports of size <= n + 1 (Caratheodory) and keeps the best
    affine-hull minimizer with nonnegative weights.  Returns (point, weights).
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    m, n = G.shape
    if n == 1:
        g = G[:, 0]
        w = np.zeros(m)
        lo, hi = int(np.argmin(g)), int(np.argmax(g))
        if g[lo] <= 0.0 <= g[hi]:
            if g[hi] == g[lo]:
                w[lo] = 1.0
            else:
                w[lo] = g[hi] / (g[hi] - g[lo])
                w[hi] += 1.0 - w[lo]
            return np.zeros(1), w
        j = lo if g[lo] > 0 else hi
        w[j] = 1.0
        return G[j].copy(), w
    U, inv = np.unique(G, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    mu = len(U)
    best_u = np.zeros(mu)
    best_u[int(np.argmin(np.einsum("ij,ij->i", U, U)))] = 1.0
    best = best_u @ U
    best_nn = float(best @ best)
    for k in range(2, min(mu, n + 1) + 1):
        idx = _supports(mu, k)
        Gs = U[idx]  # (B, k, n)
        w = _kkt_weights(Gs)
        ok = np.all(w >= -1e-12, axis=1) & (np.abs(w.sum(axis=1) - 1.0) <= 1e-9)  # NaN rows drop out
        if not np.any(ok):
            continue
        w = np.clip(w[ok], 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        P = np.einsum("bk,bkn->bn", w, Gs[ok])
        nn = np.einsum("bn,bn->b", P, P)
        j = int(np.argmin(nn))
        if nn[j] < best_nn - 1e-15:
            best_nn = float(nn[j])
            best = P[j]
            best_u = np.zeros(mu)
            best_u[idx[ok][j]] = w[j]
    # spread each distinct gradient's weight over its first duplicate
    best_w = np.zeros(m)
    for u in range(mu):
        best_w[np.flatnonzero(inv == u)[0]] = best_u[u]
    return best, best_w


def _ball_samples(rng, n, count, radius):
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * (radius * rng.random((count, 1)) ** (1.0 / n))


def run_gradient_sampling(expr, x0, p):
    """Simplified gradient sampling.

    Gradients of the active branches at x_k and at ``p.samples`` uniform
    points of B(x_k, radius) span a convex hull whose minimum-norm element g
    is computed exactly.  When |g| <= delta the run stops if x itself passes
    the pointwise delta-stationarity test, and otherwise halves the sampling
    radius.  Steps go along -g with backtracking; a failed line search also
    halves the radius.
    """
    if expr.n > 3:
        raise UnsupportedDimension("gradient sampling supports n <= 3")
    rng = np.random.default_rng(p.seed)
    x = _start(expr, x0)
    fx = evaluate(expr, x)
    cap = fx + p.lam
    pts, vals, steps, segs = [x.copy()], [fx], [], []
    radius = p.sample_radius
    lip = 0.0
    reason = MAX_ITER
    for _ in range(p.max_iter):
        Y = np.concatenate([x[None, :], expr.clamp(x + _ball_samples(rng, expr.n, p.samples, radius))])
        _, _, G, _, _ = expr.program.run(Y)
        g, _ = min_norm_element(G)
        gn = float(np.linalg.norm(g))
        if gn <= p.delta:
            if pointwise_gauge(expr, x, p.kink_radius).gf_estimate >= -p.delta:
                reason = STATIONARY
                break
            # small hull norm but x itself is not delta-stationary: shrink the ball
            radius *= 0.5
            if radius < 1e-14:
                break
            continue
        lip = max(lip, float(np.max(np.linalg.norm(G, axis=1))))
        eta = min(p.eta, 0.5 * p.lam / lip)
        res = _line_step(expr, x, fx, -g / gn, eta, cap, p.segment_samples)
        if res is None:
            radius *= 0.5
            if radius < 1e-14:
                break
            continue
        y, fy, sm = res
        steps.append(float(np.linalg.norm(y - x)))
        segs.append(sm)
        x, fx = y, fy
        pts.append(x.copy())
        vals.append(fx)
    return _finish(pts, vals, reason, steps, segs, "sampling", p)


ALGORITHMS = {"subgradient": run_subgradient_descent, "sampling": run_gradient_sampling}


# --------------------------------------------------------------------------
# contract checking
# --------------------------------------------------------------------------

def cluster_points(P, tol):
    """Single-linkage clusters in order of appearance; representative = last member."""
    P = np.atleast_2d(P)
    label = -np.ones(len(P), dtype=int)
    nxt = 0
    for i in range(len(P)):
        if label[i] >= 0:
            continue
        label[i] = nxt
        stack = [i]
        while stack:
            j = stack.pop()
            near = np.flatnonzero((label < 0) & (np.linalg.norm(P - P[j], axis=1) <= tol))
            label[near] = nxt
            stack.extend(near.tolist())
        nxt += 1
    reps = [P[np.flatnonzero(label == c)[-1]] for c in range(nxt)]
    return np.array(reps), label


@dataclass
class ContractReport:
    ultimately_decreasing: bool
    decrease_gap: float
    result_stationary: bool
    worst_gf: float
    worst_point: tuple
    path_bounded: bool
    max_segment_value: float
    path_witness: tuple  # (k, theta) of the largest sampled value
    delta: float
    lam: float
    limit_points: np.ndarray = None
    unknown: int = 0

    @property
    def ok(self):
        return self.ultimately_decreasing and self.result_stationary and self.path_bounded


def check_contract(traj, expr, delta, lam, segment_samples=16, tol=1e-9, radius=None):
    """Check the three contract properties on a finite trajectory.

    Limit points are cluster representatives of the last 10% of iterates
    (cluster tolerance 10 eta).  Each is tested pointwise for
    delta-stationarity with the trajectory's own kink radius, or, when
    ``radius`` > 0, passes if some delta-stationary grid point lies within
    ``radius`` of it.
    """
    P = np.atleast_2d(traj.points)
    p = traj.params
    ctol = 10.0 * p.eta if p is not None else 0.0
    radius = radius or 0.0
    kink = p.kink_radius if p is not None else 0.0
    f0 = evaluate(expr, P[0])
    reps, _ = cluster_points(traj.tail(), ctol)

    fr = evaluate_many(expr, reps)
    gap = float(np.max(fr - f0))
    decreasing = gap <= tol

    worst, worst_pt, refuted, unknown = math.inf, (), False, 0
    for x in reps:
        if radius > 0:
            nv = dini.is_delta_stationary_near(expr, x, delta, radius)
            verdict, est = nv.verdict, nv.best_estimate
        else:
            v = pointwise_gauge(expr, x, kink)
            est = v.gf_estimate
            verdict = (Verdict.NO if est < -delta else
                       Verdict.YES if v.decisive else Verdict.UNKNOWN)
        refuted |= verdict is Verdict.NO
        unknown += verdict is Verdict.UNKNOWN
        if est < worst:
            worst, worst_pt = est, tuple(float(t) for t in x)

    th = np.linspace(0.0, 1.0, max(segment_samples, 2))
    best, wit = -math.inf, ()
    for k in range(len(P) - 1):
        S = (1 - th)[:, None] * P[k] + th[:, None] * P[k + 1]
        v = evaluate_many(expr, S, check=False)
        j = int(np.argmax(v))
        if v[j] > best:
            best, wit = float(v[j]), (k, float(th[j]))
    if len(P) == 1:
        best, wit = float(f0), (0, 0.0)
    bounded = best <= f0 + lam + tol
    return ContractReport(bool(decreasing), gap, not refuted, float(worst), worst_pt,
                          bool(bounded), best, wit, float(delta), float(lam), reps, unknown)


# --------------------------------------------------------------------------
# stability experiment
# --------------------------------------------------------------------------

def spread_starts(center, r, count, box=None):
    """Deterministic start points filling B(center, r): a line in 1-D, a Vogel spiral in 2-D."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    n = c.size
    if n == 1:
        P = c + np.linspace(-r, r, count)[:, None]
    elif n == 2:
        i = np.arange(count) + 0.5
        rad = r * np.sqrt(i / count)
        ang = i * math.pi * (3.0 - math.sqrt(5.0))
        P = c + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    else:
        rng = np.random.default_rng(0)
        P = c + _ball_samples(rng, n, count, r)
    if box is not None:
        P = np.clip(P, box[0], box[1])
    return P


def choose_delta(expr, center, r1, epsilon, deltas=None, probes=None):
    """Half the largest ladder delta whose profile stays inside epsilon / 2."""
    from .grid import GridSpec
    from .scan import DEFAULT_LADDER, shrinkage_profile

    deltas = deltas or DEFAULT_LADDER
    h = r1 / (400.0 if expr.n == 1 else 60.0)
    grid = GridSpec.centered(center, r1, h, box=expr.box)
    prof = shrinkage_profile(expr, center, r1, deltas, grid, probes)
    for row in prof.rows:
        if row.sup_distance + row.resolution_bound <= 0.5 * epsilon:
            return 0.5 * row.delta, prof
    return None, prof


@dataclass
class RunRecord:
    algorithm: str
    start: int
    seed: int
    x0: tuple
    tail_distance: float
    reason: str
    iterations: int
    contract_ok: bool


@dataclass
class ExperimentResult:
    records: list
    epsilon: float
    delta1: float
    lam1: float
    r1: float
    max_distance: float
    passed: bool
    notes: list = field(default_factory=list)

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"

    def write_csv(self, path):
        n = len(self.records[0].x0) if self.records else 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["algorithm", "start", "seed", *[f"x0_{i}" for i in range(n)],
                        "tail_distance", "reason", "iterations", "contract_ok", "result"])
            for r in self.records:
                w.writerow([r.algorithm, r.start, r.seed, *[repr(v) for v in r.x0],
                            repr(r.tail_distance), r.reason, r.iterations,
                            str(r.contract_ok).lower(),
                            "PASS" if r.tail_distance < self.epsilon else "FAIL"])


def _one_run(job):
    expr, name, x0, p, center, check, si = job
    traj = ALGORITHMS[name](expr, x0, p)
    d = float(np.max(np.linalg.norm(traj.tail() - center, axis=1)))
    ok = check_contract(traj, expr, p.delta, p.lam).ok if check else True
    return RunRecord(name, si, p.seed, tuple(float(v) for v in np.atleast_1d(x0)), d,
                     traj.reason, len(traj) - 1, bool(ok))


def stability_experiment(expr, x_star, cert=None, epsilon=None, starts=20, seeds=16,
                         algorithms=("subgradient", "sampling"), delta1=None, lam1=None,
                         r1=None, start_points=None, max_iter=400, check=True, jobs=1,
                         probes=None):
    """Run every algorithm from spread starts in B(x*, r1); PASS iff every
    tail stays within ``epsilon`` of x*.

    Parameters default from the certificate: lam1 = lambda0 / 2 and delta1
    from a shrinkage profile (half the largest ladder delta whose profile
    fits in epsilon / 2).  Without a certificate, ``r1`` and ``lam1`` (or
    ``start_points``) must be given explicitly.
    """
    c = np.atleast_1d(np.asarray(x_star, dtype=float))
    notes = []
    if cert is not None:
        r1 = cert.r1 if r1 is None else r1
        lam1 = 0.5 * cert.lambda0 if lam1 is None else lam1
    if epsilon is None:
        if r1 is None:
            raise ValueError("epsilon or r1 required")
        epsilon = 0.1 * r1
    if lam1 is None:
        raise ValueError("lam1 required when no certificate is given")
    if delta1 is None:
        if r1 is None:
            raise ValueError("delta1 or r1 required")
        delta1, _ = choose_delta(expr, c, r1, epsilon, probes=probes)
        if delta1 is None:
            from .scan import DEFAULT_LADDER
            delta1 = DEFAULT_LADDER[-1]
            notes.append("no ladder delta keeps the profile inside epsilon/2; using the smallest")
    X0 = []
    if r1 is not None and starts:
        X0.extend(spread_starts(c, r1, starts, expr.box))
    if start_points is not None:
        X0.extend(np.atleast_2d(np.asarray(start_points, dtype=float).reshape(-1, expr.n)))
    if not X0:
        raise ValueError("no start points")
    eta = 0.25 * epsilon
    jobs_list = []
    for si, x0 in enumerate(X0):
        for name in algorithms:
            seed_list = [0] if name == "subgradient" else range(seeds)
            for seed in seed_list:
                p = AlgoParams(delta=delta1, lam=lam1, eta=eta, max_iter=max_iter, seed=seed,
                               radius=epsilon / 8.0)
                jobs_list.append((expr, name, x0, p, c, check, si))
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_one_run, jobs_list, chunksize=8))
    else:
        records = [_one_run(j) for j in jobs_list]
    dmax = max(r.tail_distance for r in records)
    return ExperimentResult(records, float(epsilon), float(delta1), float(lam1),
                            float(r1) if r1 is not None else math.nan, dmax,
                            bool(dmax < epsilon), notes)


__all__ = ["AlgoParams", "Trajectory", "ContractReport", "ExperimentResult", "RunRecord",
           "run_subgradient_descent", "run_gradient_sampling", "min_norm_element",
           "check_contract", "stability_experiment", "spread_starts", "cluster_points",
           "choose_delta", "pointwise_gauge", "ALGORITHMS", "STATIONARY", "MAX_ITER"]
