from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Regular tensor grid over a sub-box.

    ``zeta`` is the kink band used when classifying stage signs on the grid:
    a stage counts as sitting on its kink when its first-order distance to
    the zero set, |z| / |grad z|, is at most ``zeta``.
    """

    lower: tuple
    upper: tuple
    steps: tuple
    zeta: float = 0.0

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        st = np.atleast_1d(self.steps)
        if st.size == 1 and len(lo) > 1:
            st = np.repeat(st, len(lo))
        st = tuple(int(v) for v in st)
        if not (len(lo) == len(hi) == len(st)):
            raise ValueError("lower, upper and steps must have the same length")
        if any(s < 2 for s in st):
            raise ValueError("a grid needs at least 2 steps per axis")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("grid box has upper < lower")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "steps", st)

    @classmethod
    def from_step(cls, lower, upper, h, zeta=0.0):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        steps = np.maximum(np.rint((upper - lower) / h).astype(int) + 1, 2)
        return cls(tuple(lower), tuple(upper), tuple(steps), zeta)

    @classmethod
    def centered(cls, center, half_width, h, box=None, zeta=0.0):
        """Grid with spacing ``h`` that contains ``center`` as a node.

        Clipped to ``box`` = (lower, upper) when given.
        """
        c = np.atleast_1d(np.asarray(center, dtype=float))
        k = max(int(np.floor(half_width / h + 1e-9)), 1)
        lo = c - k * h
        hi = c + k * h
        steps = np.full(c.shape, 2 * k + 1)
        if box is not None:
            blo, bhi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in box)
            cut_lo = np.ceil((blo - lo) / h - 1e-9).clip(min=0).astype(int)
            cut_hi = np.ceil((hi - bhi) / h - 1e-9).clip(min=0).astype(int)
            lo = lo + cut_lo * h
            hi = hi - cut_hi * h
            steps = steps - cut_lo - cut_hi
        return cls(tuple(lo), tuple(hi), tuple(steps), zeta)

    @property
    def ndim(self):
        return len(self.lower)

    @property
    def spacing(self):
        lo, hi, st = (np.asarray(v, dtype=float) for v in (self.lower, self.upper, self.steps))
        return (hi - lo) / (st - 1)

    @property
    def size(self):
        return int(np.prod(self.steps))

    def axes(self):
        return [np.linspace(l, h, s) for l, h, s in zip(self.lower, self.upper, self.steps)]

    def points(self):
        """All grid nodes, shape (size, ndim), in C (row-major) index order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def refined(self, factor=2):
        steps = tuple((s - 1) * factor + 1 for s in self.steps)
        return GridSpec(self.lower, self.upper, steps, self.zeta)
