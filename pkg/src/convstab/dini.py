"""One-sided directional derivatives and the stationarity gauge G_f.

Derivatives are propagated forward through the canonical tape.  Analytic
instructions use the ordinary chain rule; an abs stage at a kink (z = 0)
contributes |z'|, the exact one-sided derivative of |z(x + a s)| at a = 0.

G_f(x) is the infimum of the unit-rate derivative over feasible directions.
It is exact in 1-D and at points where no stage sits on a kink; elsewhere it
is the minimum over a deterministic direction set and the verdict is marked
indecisive.
"""
from dataclasses import dataclass
from enum import Enum
import warnings

import numpy as np

from .errors import FeasibilityError
from .expr import Expr, _as_points, check_domain, evaluate, evaluate_many


class KinkProximityWarning(UserWarning):
    """A stage value is within zeta of zero but not exactly zero."""


class Verdict(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class DirectionalQuery:
    x: tuple
    s: tuple
    normalized: bool = True

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        s = tuple(float(v) for v in np.atleast_1d(self.s))
        if len(x) != len(s):
            raise ValueError("x and s must have the same dimension")
        if not np.linalg.norm(s) > 0:
            raise ValueError("direction must be nonzero")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)


class DirectionSampler:
    """Deterministic unit directions: equal angles in 2-D, Fibonacci sphere in 3-D.

    The coordinate axes are always included since kinks of box-aligned
    functions are usually axis-aligned.
    """

    DEFAULTS = {2: 256, 3: 1024}

    def __init__(self, count=None):
        self.count = count
        self._cache = {}

    def directions(self, n):
        if n in self._cache:
            return self._cache[n]
        if n == 1:
            d = np.array([[1.0], [-1.0]])
        elif n == 2:
            k = self.count or self.DEFAULTS[2]
            th = 2.0 * np.pi * np.arange(k) / k
            d = np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            k = self.count or self.DEFAULTS.get(n, 1024)
            if n == 3:
                i = np.arange(k) + 0.5
                phi = np.arccos(1.0 - 2.0 * i / k)
                th = np.pi * (1.0 + 5.0 ** 0.5) * i
                d = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
            else:
                d = np.random.default_rng(12345).standard_normal((k, n))
                d /= np.linalg.norm(d, axis=1, keepdims=True)
            d = np.concatenate([np.eye(n), -np.eye(n), d])
        self._cache[n] = d
        return d


DEFAULT_SAMPLER = DirectionSampler()


@dataclass
class StationarityVerdict:
    gf_estimate: float
    decisive: bool
    directions_used: int
    certificate: tuple = None  # (f'_+, f'_-) in 1-D
    direction: np.ndarray = None  # a feasible direction attaining the estimate


# --------------------------------------------------------------------------
# raw derivatives
# --------------------------------------------------------------------------

def _active_faces(expr, X):
    lo, hi = expr.box
    return X <= lo, X >= hi


def feasible(expr, X, S):
    """True where s points into the box to first order at x."""
    at_lo, at_hi = _active_faces(expr, np.atleast_2d(X))
    S = np.atleast_2d(S)
    return ~np.any((at_lo & (S < 0)) | (at_hi & (S > 0)), axis=1)


def dini_batch(expr, X, S, kink_radius=0.0, zeta=0.0):
    """Df(x, x + s) for rows of X and S (no feasibility checks)."""
    _, d, _, _, _ = expr.program.run(X, S=S, radius=kink_radius, zeta=zeta)
    return d


def dini_directional(expr, q, zeta=0.0):
    """Exact Dini derivative for a :class:`DirectionalQuery`.

    Returns Df(x, x + s) when ``q.normalized`` is false and the unit-rate
    derivative df/ds otherwise.  The kink rule applies only where a stage
    value is exactly zero; stages with 0 < |z| <= zeta trigger a
    :class:`KinkProximityWarning` and use their smooth branch.
    """
    x = np.asarray(q.x)[None, :]
    s = np.asarray(q.s)[None, :]
    check_domain(expr, x)
    if not feasible(expr, x, s)[0]:
        raise FeasibilityError(f"direction {q.s} leaves the domain at {q.x}")
    _, d, _, z, _ = expr.program.run(x, S=s)
    if zeta > 0 and np.any((np.abs(z) > 0) & (np.abs(z) <= zeta)):
        warnings.warn(f"stage value within zeta={zeta:g} of a kink at {q.x}; "
                      "using the smooth branch", KinkProximityWarning, stacklevel=2)
    val = float(d[0])
    return val / float(np.linalg.norm(s)) if q.normalized else val


def one_sided(expr, x, kink_radius=0.0):
    """(f'_+(x), f'_-(x)) for a 1-D function; NaN where a side leaves the box."""
    if expr.n != 1:
        raise ValueError("one_sided derivatives are defined for n = 1")
    X = _as_points(expr, x)
    check_domain(expr, X)
    XX = np.concatenate([X, X])
    S = np.array([[1.0], [-1.0]])
    d = dini_batch(expr, XX, S, kink_radius)
    ok = feasible(expr, XX, S)
    right = d[0] if ok[0] else np.nan
    left = -d[1] if ok[1] else np.nan
    return float(right), float(left)


# --------------------------------------------------------------------------
# G_f
# --------------------------------------------------------------------------

def _cone_inf(g, at_lo, at_hi):
    """inf of g.s over unit s in the feasible cone of a box face (exact)."""
    d = -g.copy()
    d[at_lo & (d < 0)] = 0.0
    d[at_hi & (d > 0)] = 0.0
    nd = np.linalg.norm(d)
    if nd > 0:
        return -nd, d / nd
    free = ~(at_lo | at_hi)
    if np.any(free):
        e = np.zeros_like(g)
        e[np.argmax(free)] = 1.0
        return 0.0, e
    c = np.where(at_lo, g, -g)
    i = int(np.argmin(c))
    e = np.zeros_like(g)
    e[i] = 1.0 if at_lo[i] else -1.0
    return float(c[i]), e


@dataclass
class GfBatch:
    estimate: np.ndarray
    decisive: np.ndarray
    directions_used: np.ndarray
    direction: np.ndarray
    right: np.ndarray = None
    left: np.ndarray = None

    def verdicts(self, delta):
        yes = self.decisive & (self.estimate >= -delta)
        no = self.estimate < -delta
        out = np.full(self.estimate.shape, Verdict.UNKNOWN, dtype=object)
        out[yes] = Verdict.YES
        out[no] = Verdict.NO
        return out

    def codes(self, delta):
        """1 = yes, 0 = unknown, -1 = no."""
        c = np.zeros(self.estimate.shape, dtype=int)
        c[self.decisive & (self.estimate >= -delta)] = 1
        c[self.estimate < -delta] = -1
        return c


def gf_batch(expr, X, sampler=None, kink_radius=0.0):
    """G_f estimates at every row of X (assumed inside the box)."""
    sampler = sampler or DEFAULT_SAMPLER
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    prog = expr.program
    at_lo, at_hi = _active_faces(expr, X)
    est = np.empty(N)
    direction = np.zeros((N, n))
    used = np.zeros(N, dtype=int)
    if n == 1:
        XX = np.concatenate([X, X])
        S = np.concatenate([np.ones((N, 1)), -np.ones((N, 1))])
        _, d, _, _, _ = prog.run(XX, S=S, radius=kink_radius)
        dp = np.where(at_hi[:, 0], np.inf, d[:N])
        dm = np.where(at_lo[:, 0], np.inf, d[N:])
        est = np.minimum(dp, dm)
        direction[:, 0] = np.where(dp <= dm, 1.0, -1.0)
        used[:] = 2 - at_lo[:, 0] - at_hi[:, 0]
        right = np.where(at_hi[:, 0], np.nan, d[:N])
        left = np.where(at_lo[:, 0], np.nan, -d[N:])
        return GfBatch(est, np.ones(N, dtype=bool), used, direction, right, left)

    _, _, grad, _, kink = prog.run(X, radius=kink_radius)
    at_kink = np.any(kink, axis=1)
    decisive = ~at_kink
    on_face = np.any(at_lo | at_hi, axis=1)
    free = ~at_kink & ~on_face
    gn = np.linalg.norm(grad, axis=1)
    est[free] = -gn[free]
    safe = np.where(gn > 0, gn, 1.0)[:, None]
    direction[free] = np.where(gn[free, None] > 0, -grad[free] / safe[free], np.eye(n)[0])
    for i in np.flatnonzero(~at_kink & on_face):
        est[i], direction[i] = _cone_inf(grad[i], at_lo[i], at_hi[i])
    used[~at_kink] = 0
    idx = np.flatnonzero(at_kink)
    if idx.size:
        dirs = sampler.directions(n)
        D = dirs.shape[0]
        Xk = np.repeat(X[idx], D, axis=0)
        Sk = np.tile(dirs, (idx.size, 1))
        _, d, _, _, _ = prog.run(Xk, S=Sk, radius=kink_radius)
        ok = feasible(expr, Xk, Sk)
        d = np.where(ok, d, np.inf).reshape(idx.size, D)
        j = np.argmin(d, axis=1)
        est[idx] = d[np.arange(idx.size), j]
        direction[idx] = dirs[j]
        used[idx] = ok.reshape(idx.size, D).sum(axis=1)
    return GfBatch(est, decisive, used, direction)


def gf(expr, x, sampler=None, kink_radius=0.0):
    """Stationarity gauge G_f(x) = inf_s df/ds with its verdict."""
    X = _as_points(expr, x)
    check_domain(expr, X)
    b = gf_batch(expr, X, sampler, kink_radius)
    cert = None
    if expr.n == 1:
        cert = (float(b.right[0]), float(b.left[0]))
    return StationarityVerdict(float(b.estimate[0]), bool(b.decisive[0]),
                               int(b.directions_used[0]), cert, b.direction[0].copy())


def is_delta_stationary(expr, x, delta, sampler=None, kink_radius=0.0):
    """Tri-state test of df/ds >= -delta for every feasible direction."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    v = gf(expr, x, sampler, kink_radius)
    if v.gf_estimate < -delta:
        return Verdict.NO
    return Verdict.YES if v.decisive else Verdict.UNKNOWN


@dataclass
class NearVerdict:
    verdict: Verdict
    best_estimate: float
    best_point: np.ndarray
    radius: float


def is_delta_stationary_near(expr, x, delta, radius, sampler=None, per_axis=None):
    """Is there a delta-stationary point within ``radius`` of x?

    Scans a small grid around x; kinks closer than half a grid spacing to a
    node are treated as passing through it.  This is the finite-resolution
    stand-in for "x is a limit point that is delta-stationary".
    """
    X0 = _as_points(expr, x)
    n = expr.n
    per_axis = per_axis or {1: 2001, 2: 41}.get(n, 15)
    lo, hi = expr.box
    axes = [np.linspace(max(c - radius, l), min(c + radius, h), per_axis)
            for c, l, h in zip(X0[0], lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.concatenate([X0, np.stack([m.ravel() for m in mesh], axis=1)])
    spacing = 2.0 * radius / (per_axis - 1)
    b = gf_batch(expr, P, sampler, kink_radius=0.5 * spacing)
    codes = b.codes(delta)
    if np.any(codes == 1):
        cand = np.flatnonzero(codes == 1)
        verdict = Verdict.YES
    elif np.all(codes == -1):
        cand = np.arange(len(P))
        verdict = Verdict.NO
    else:
        cand = np.flatnonzero(codes == 0)
        verdict = Verdict.UNKNOWN
    k = cand[np.argmax(b.estimate[cand])]
    return NearVerdict(verdict, float(b.estimate[k]), P[k].copy(), float(radius))


# --------------------------------------------------------------------------
# finite-difference oracle
# --------------------------------------------------------------------------

@dataclass
class FDResult:
    value: float
    converged: bool
    alpha: float
    estimates: np.ndarray


def fd_oracle(expr, q, alpha0=1e-3, ratio=0.5, steps=20, tol=1e-7):
    """Forward difference quotients on a geometric schedule of step lengths.

    Uses the DAG evaluator only, so it shares no code with the tape
    derivative.  Returns the first estimate that agrees with its predecessor
    to ``tol``; ``converged`` is False when the schedule runs out.
    """
    x = np.asarray(q.x)
    s = np.asarray(q.s)
    alphas = alpha0 * ratio ** np.arange(steps)
    P = x[None, :] + alphas[:, None] * s[None, :]
    if not np.all(expr.contains(P)):
        raise FeasibilityError(f"x + alpha0*s leaves the domain (x={q.x}, s={q.s}, alpha0={alpha0})")
    f0 = evaluate(expr, x)
    est = (evaluate_many(expr, P) - f0) / alphas
    if q.normalized:
        est = est / np.linalg.norm(s)
    for k in range(1, steps):
        if abs(est[k] - est[k - 1]) <= tol:
            return FDResult(float(est[k]), True, float(alphas[k]), est)
    return FDResult(float(est[-1]), False, float(alphas[-1]), est)


__all__ = ["DirectionalQuery", "DirectionSampler", "StationarityVerdict", "Verdict",
           "KinkProximityWarning", "dini_directional", "dini_batch", "one_sided", "gf",
           "gf_batch", "is_delta_stationary", "is_delta_stationary_near", "fd_oracle",
           "feasible", "FDResult", "GfBatch", "Expr"]
