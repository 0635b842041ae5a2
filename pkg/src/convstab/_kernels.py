"""Tape interpreter: the hot loop behind every batch evaluation.

A canonical program is a flat SSA tape of analytic instructions plus ``ABS``
instructions marking stage boundaries.  One forward sweep over N points
computes, per point,

* the value f(x),
* a one-sided tangent along a direction s (Dini mode) or the branch tangent
  along s (branch mode),
* the gradient of the active analytic branch,
* the stage values z_j and a flag telling whether the kink rule fired.

Two interchangeable backends implement the sweep: a numba ``@njit`` loop
over points and a pure-numpy loop over instructions.  The numba path is used
when numba imports and ``CONVSTAB_DISABLE_NUMBA`` is unset or "0"; tapes
containing ``G1`` (needs the sine integral) always run on numpy.
"""
import math
import os

import numpy as np

from .primitives import reciprocal_trig, special_value_and_derivative

CONST, VAR, ADD, MUL, NEG, SCALE, POWI, SIN, COS, EXP, RECIP, H1, H2, G1, G2, ABS = range(16)

OPNAMES = ("CONST", "VAR", "ADD", "MUL", "NEG", "SCALE", "POWI", "SIN", "COS",
           "EXP", "RECIP", "H1", "H2", "G1", "G2", "ABS")

SPECIAL_OPS = {"sin_of_reciprocal": H1, "cauchy_envelope": H2,
               "integral_g1": G1, "integral_g2": G2}
_SPECIAL_BY_OP = {v: k for k, v in SPECIAL_OPS.items()}

_CHUNK = 16384


def _numba_requested():
    flag = os.environ.get("CONVSTAB_DISABLE_NUMBA", "0").strip().lower()
    return flag in ("", "0", "false", "no")


try:  # pragma: no cover - exercised indirectly
    if not _numba_requested():
        raise ImportError("numba disabled by CONVSTAB_DISABLE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def active_backend():
    return "numba" if HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numpy backend
# --------------------------------------------------------------------------

def _unary(o, u):
    """Value and derivative of an analytic unary instruction."""
    if o == SIN:
        return np.sin(u), np.cos(u)
    if o == COS:
        return np.cos(u), -np.sin(u)
    if o == EXP:
        e = np.exp(u)
        return e, e
    if o == RECIP:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = 1.0 / u
        return r, -r * r
    return special_value_and_derivative(_SPECIAL_BY_OP[o], u)


def _sweep_numpy(op, a, b, p, X, S, signs, use_signs, radius, zeta):
    N, n = X.shape
    L = op.shape[0]
    m1 = int(np.count_nonzero(op == ABS))
    V = np.empty((L, N))
    D = np.empty((L, N))
    Gr = np.empty((L, N, n))
    zst = np.zeros((N, m1))
    kink = np.zeros((N, m1), dtype=bool)
    for i in range(L):
        o = op[i]
        if o == CONST:
            V[i] = p[i]
            D[i] = 0.0
            Gr[i] = 0.0
        elif o == VAR:
            c = b[i]
            V[i] = X[:, c]
            D[i] = S[:, c]
            Gr[i] = 0.0
            Gr[i, :, c] = 1.0
        elif o == ADD:
            V[i] = V[a[i]] + V[b[i]]
            D[i] = D[a[i]] + D[b[i]]
            Gr[i] = Gr[a[i]] + Gr[b[i]]
        elif o == MUL:
            va, vb = V[a[i]], V[b[i]]
            V[i] = va * vb
            D[i] = D[a[i]] * vb + va * D[b[i]]
            Gr[i] = Gr[a[i]] * vb[:, None] + va[:, None] * Gr[b[i]]
        elif o == NEG:
            V[i] = -V[a[i]]
            D[i] = -D[a[i]]
            Gr[i] = -Gr[a[i]]
        elif o == SCALE:
            V[i] = p[i] * V[a[i]]
            D[i] = p[i] * D[a[i]]
            Gr[i] = p[i] * Gr[a[i]]
        elif o == POWI:
            k = int(b[i])
            u = V[a[i]]
            with np.errstate(divide="ignore", invalid="ignore"):
                V[i] = u ** float(k)
                dv = k * u ** float(k - 1) if k != 0 else np.zeros_like(u)
            D[i] = dv * D[a[i]]
            Gr[i] = dv[:, None] * Gr[a[i]]
        elif o == ABS:
            j = b[i]
            z = V[a[i]]
            zst[:, j] = z
            if use_signs:
                sg = signs[:, j]
                V[i] = sg * z
                D[i] = sg * D[a[i]]
                Gr[i] = sg[:, None] * Gr[a[i]]
            else:
                sg = np.where(z >= 0.0, 1.0, -1.0)
                band = zeta + radius * np.sqrt(np.sum(Gr[a[i]] ** 2, axis=1))
                at_kink = np.abs(z) <= band
                kink[:, j] = at_kink
                V[i] = np.abs(z)
                D[i] = np.where(at_kink, np.abs(D[a[i]]), sg * D[a[i]])
                Gr[i] = sg[:, None] * Gr[a[i]]
        else:
            val, der = _unary(o, V[a[i]])
            V[i] = val
            D[i] = der * D[a[i]]
            Gr[i] = der[:, None] * Gr[a[i]]
    return V[L - 1].copy(), D[L - 1].copy(), Gr[L - 1].copy(), zst, kink


# --------------------------------------------------------------------------
# numba backend
# --------------------------------------------------------------------------

if HAVE_NUMBA:
    _EPS8 = 8.0 * np.finfo(float).eps

    @njit(cache=True, fastmath=False)
    def _recip_trig_nb(u):
        w = 1.0 / u
        k = np.rint(w / np.pi)
        r = w - k * np.pi
        if abs(r) <= _EPS8 * abs(w) and abs(w) < 1e15:
            if k % 2.0 == 0.0:
                return 0.0, 1.0, w
            return 0.0, -1.0, w
        return math.sin(w), math.cos(w), w

    @njit(cache=True)
    def _unary_nb(o, u):
        if o == SIN:
            return math.sin(u), math.cos(u)
        if o == COS:
            return math.cos(u), -math.sin(u)
        if o == EXP:
            e = math.exp(u)
            return e, e
        if o == RECIP:
            if u == 0.0:
                return math.inf, -math.inf
            r = 1.0 / u
            return r, -r * r
        if u == 0.0:
            return 0.0, 0.0
        sn, cs, w = _recip_trig_nb(u)
        if o == H1:
            return u * u * sn, 2.0 * u * sn - cs
        if o == H2:
            e = math.exp(-abs(w))
            sgn = 1.0 if u > 0.0 else -1.0
            return e * sn, e * (sgn * sn - cs) * w * w
        # G2
        sgn = 1.0 if u > 0.0 else -1.0
        e = math.exp(-abs(w))
        return e * ((sgn * sn + cs) / 2.0 - sgn), e * w * w * (sn - 1.0)

    @njit(cache=True)
    def _sweep_nb(op, a, b, p, X, S, signs, use_signs, radius, zeta):
        N, n = X.shape
        L = op.shape[0]
        m1 = 0
        for i in range(L):
            if op[i] == ABS:
                m1 += 1
        vals = np.empty(N)
        dvals = np.empty(N)
        grads = np.empty((N, n))
        zst = np.zeros((N, m1))
        kink = np.zeros((N, m1), dtype=np.bool_)
        V = np.empty(L)
        D = np.empty(L)
        G = np.empty((L, n))
        for q in range(N):
            for i in range(L):
                o = op[i]
                if o == CONST:
                    V[i] = p[i]
                    D[i] = 0.0
                    for c in range(n):
                        G[i, c] = 0.0
                elif o == VAR:
                    c0 = b[i]
                    V[i] = X[q, c0]
                    D[i] = S[q, c0]
                    for c in range(n):
                        G[i, c] = 0.0
                    G[i, c0] = 1.0
                elif o == ADD:
                    ia = a[i]
                    ib = b[i]
                    V[i] = V[ia] + V[ib]
                    D[i] = D[ia] + D[ib]
                    for c in range(n):
                        G[i, c] = G[ia, c] + G[ib, c]
                elif o == MUL:
                    ia = a[i]
                    ib = b[i]
                    va = V[ia]
                    vb = V[ib]
                    V[i] = va * vb
                    D[i] = D[ia] * vb + va * D[ib]
                    for c in range(n):
                        G[i, c] = G[ia, c] * vb + va * G[ib, c]
                elif o == NEG:
                    ia = a[i]
                    V[i] = -V[ia]
                    D[i] = -D[ia]
                    for c in range(n):
                        G[i, c] = -G[ia, c]
                elif o == SCALE:
                    ia = a[i]
                    V[i] = p[i] * V[ia]
                    D[i] = p[i] * D[ia]
                    for c in range(n):
                        G[i, c] = p[i] * G[ia, c]
                elif o == POWI:
                    ia = a[i]
                    k = b[i]
                    u = V[ia]
                    if k == 0:
                        V[i] = 1.0
                        dv = 0.0
                    elif u == 0.0 and k < 0:
                        V[i] = math.inf
                        dv = math.inf
                    else:
                        V[i] = u ** k
                        dv = k * u ** (k - 1)
                    D[i] = dv * D[ia]
                    for c in range(n):
                        G[i, c] = dv * G[ia, c]
                elif o == ABS:
                    ia = a[i]
                    j = b[i]
                    z = V[ia]
                    zst[q, j] = z
                    if use_signs:
                        sg = signs[q, j]
                        V[i] = sg * z
                        D[i] = sg * D[ia]
                        for c in range(n):
                            G[i, c] = sg * G[ia, c]
                    else:
                        sg = 1.0 if z >= 0.0 else -1.0
                        gn = 0.0
                        for c in range(n):
                            gn += G[ia, c] * G[ia, c]
                        band = zeta + radius * math.sqrt(gn)
                        V[i] = abs(z)
                        if abs(z) <= band:
                            kink[q, j] = True
                            D[i] = abs(D[ia])
                        else:
                            D[i] = sg * D[ia]
                        for c in range(n):
                            G[i, c] = sg * G[ia, c]
                else:
                    ia = a[i]
                    val, der = _unary_nb(o, V[ia])
                    V[i] = val
                    D[i] = der * D[ia]
                    for c in range(n):
                        G[i, c] = der * G[ia, c]
            vals[q] = V[L - 1]
            dvals[q] = D[L - 1]
            for c in range(n):
                grads[q, c] = G[L - 1, c]
        return vals, dvals, grads, zst, kink


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def sweep(tape, X, S=None, signs=None, radius=0.0, zeta=0.0, backend=None):
    """Run the tape over points ``X`` (N, n).

    ``S`` (N, n) are tangent directions (zeros if omitted).  With ``signs``
    (N, m-1) the sweep evaluates the branch f^s; otherwise it runs in Dini
    mode, where a stage is on its kink when |z| <= zeta + radius * |grad z|.

    Returns ``(value, tangent, gradient, stage_values, kink_mask)``.
    """
    op, a, b, p = tape
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    N, n = X.shape
    S = np.zeros_like(X) if S is None else np.ascontiguousarray(
        np.broadcast_to(S, X.shape), dtype=float)
    m1 = int(np.count_nonzero(op == ABS))
    use_signs = signs is not None
    sg = (np.ascontiguousarray(np.broadcast_to(signs, (N, m1)), dtype=float)
          if use_signs else np.zeros((N, m1)))
    if backend is None:
        backend = "numba" if HAVE_NUMBA and not np.any(op == G1) else "numpy"
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but unavailable")
        if np.any(op == G1):
            raise RuntimeError("numba backend cannot evaluate integral_g1")
        return _sweep_nb(op, a, b, p, X, S, sg, use_signs, float(radius), float(zeta))
    if N <= _CHUNK:
        return _sweep_numpy(op, a, b, p, X, S, sg, use_signs, float(radius), float(zeta))
    parts = [
        _sweep_numpy(op, a, b, p, X[i:i + _CHUNK], S[i:i + _CHUNK], sg[i:i + _CHUNK],
                     use_signs, float(radius), float(zeta))
        for i in range(0, N, _CHUNK)
    ]
    return tuple(np.concatenate([pt[k] for pt in parts], axis=0) for k in range(5))


__all__ = ["sweep", "active_backend", "HAVE_NUMBA", "reciprocal_trig"]
