"""Named special primitives used by the counterexample functions.

Each primitive is C^1 (or C^infinity) on the real line but not analytic at 0.
Values and first derivatives are exact closed forms:

* ``sin_of_reciprocal``  u^2 sin(1/u)
* ``cauchy_envelope``    exp(-1/|u|) sin(1/u)
* ``integral_g1``        int_0^u 2w sin(1/w) dw
  = u^2 sin(1/u) + u cos(1/u) + Si(1/u) - pi/2 for u > 0, odd extension
* ``integral_g2``        int_0^u w^-2 exp(-1/|w|) (sin(1/w) - 1) dw
  = exp(-a) ((sin a + cos a)/2 - sign(u)) with a = 1/|u|

All four vanish together with their derivative at u = 0.

``sin(1/u)`` is snapped to an exact zero when 1/u is within a few ulps of a
multiple of pi, so the floating-point image of a zero 1/(k pi) is an exact
zero of the primitive (and therefore an exact kink of any enclosing min/max).
"""
import numpy as np
from scipy.special import sici

SPECIAL_NAMES = ("sin_of_reciprocal", "cauchy_envelope", "integral_g1", "integral_g2")

_SNAP_ULPS = 8.0 * np.finfo(float).eps
_SNAP_LIMIT = 1e15


def reciprocal_trig(u):
    """Return (sin(1/u), cos(1/u), 1/u) for nonzero ``u`` with zero snapping."""
    u = np.asarray(u, dtype=float)
    w = 1.0 / u
    k = np.rint(w / np.pi)
    r = w - k * np.pi
    snap = (np.abs(r) <= _SNAP_ULPS * np.abs(w)) & (np.abs(w) < _SNAP_LIMIT)
    sn = np.where(snap, 0.0, np.sin(w))
    parity = np.where(np.mod(k, 2.0) == 0.0, 1.0, -1.0)
    cs = np.where(snap, parity, np.cos(w))
    return sn, cs, w


def _safe(u):
    u = np.asarray(u, dtype=float)
    nz = u != 0.0
    return nz, np.where(nz, u, 1.0)


def special_value_and_derivative(name, u):
    """Vectorised value and derivative of a named special primitive."""
    u = np.asarray(u, dtype=float)
    nz, us = _safe(u)
    sn, cs, w = reciprocal_trig(us)
    if name == "sin_of_reciprocal":
        val = us * us * sn
        der = 2.0 * us * sn - cs
    elif name == "cauchy_envelope":
        e = np.exp(-np.abs(w))
        val = e * sn
        der = e * (np.sign(us) * sn - cs) * w * w
    elif name == "integral_g1":
        a = np.abs(w)
        si, _ = sici(a)
        mag = us * us * sn * np.sign(us) + np.abs(us) * cs + si - np.pi / 2
        val = np.sign(us) * mag
        der = 2.0 * us * sn
    elif name == "integral_g2":
        a = np.abs(w)
        e = np.exp(-a)
        sa = np.sign(us) * sn  # sin(a)
        val = e * ((sa + cs) / 2.0 - np.sign(us))
        der = e * w * w * (sn - 1.0)
    else:
        raise KeyError(f"unknown special primitive {name!r}")
    return np.where(nz, val, 0.0), np.where(nz, der, 0.0)
