"""Functions built from analytic primitives, abs, max and min.

Expressions are assembled with :class:`Term` objects (operator overloading
plus the helper constructors below), frozen into an :class:`Expr` DAG over a
box domain, and lowered by :func:`to_canonical` into a staged program

    z_i = f_i(x, |z_1|, ..., |z_{i-1}|),   f(x) = z_m,

where every f_i is free of abs/max/min.  max{a, b} is rewritten as
(|a - b| + a + b) / 2 and min{a, b} as -max{-a, -b}.

Example::

    >>> from convstab.expr import var, maximum, Expr, evaluate
    >>> x = var(0)
    >>> f = Expr.build(maximum(x ** 2, 0.25), [(-1, 1)])
    >>> float(evaluate(f, [0.0]))
    0.25
"""
from dataclasses import dataclass, field
from functools import cached_property
import numbers

import numpy as np

from . import _kernels as K
from .errors import DomainError, EvaluationError
from .grid import GridSpec
from .primitives import SPECIAL_NAMES, special_value_and_derivative

ANALYTIC_OPS = ("const", "var", "affine", "add", "mul", "neg", "scale", "pow",
                "sin", "cos", "exp", "recip")
NONSMOOTH_OPS = ("abs", "max", "min")


# --------------------------------------------------------------------------
# term builder
# --------------------------------------------------------------------------

class Term:
    """Node of an expression tree under construction."""

    __slots__ = ("op", "args", "param")

    def __init__(self, op, args=(), param=None):
        self.op = op
        self.args = tuple(args)
        self.param = param

    def __add__(self, other):
        return Term("add", (self, as_term(other)))

    def __radd__(self, other):
        return Term("add", (as_term(other), self))

    def __sub__(self, other):
        return Term("add", (self, -as_term(other)))

    def __rsub__(self, other):
        return Term("add", (as_term(other), -self))

    def __mul__(self, other):
        if isinstance(other, numbers.Real):
            return Term("scale", (self,), float(other))
        return Term("mul", (self, as_term(other)))

    def __rmul__(self, other):
        if isinstance(other, numbers.Real):
            return Term("scale", (self,), float(other))
        return Term("mul", (as_term(other), self))

    def __truediv__(self, other):
        if isinstance(other, numbers.Real):
            return Term("scale", (self,), 1.0 / float(other))
        return Term("mul", (self, recip(as_term(other))))

    def __neg__(self):
        return Term("neg", (self,))

    def __pow__(self, k):
        if int(k) != k:
            raise TypeError("only integer powers are supported")
        return Term("pow", (self,), int(k))

    def __abs__(self):
        return Term("abs", (self,))

    def __repr__(self):
        if self.op == "var":
            return f"x{self.param}"
        if self.op == "const":
            return repr(self.param)
        inner = " ".join(repr(a) for a in self.args)
        extra = "" if self.param is None else f" {self.param!r}"
        return f"({self.op}{extra} {inner})"


def as_term(v):
    if isinstance(v, Term):
        return v
    if isinstance(v, numbers.Real):
        return Term("const", (), float(v))
    raise TypeError(f"cannot use {type(v).__name__} in an expression")


def const(c):
    return Term("const", (), float(c))


def var(i):
    return Term("var", (), int(i))


def affine(w, b=0.0):
    return Term("affine", (), (tuple(float(v) for v in w), float(b)))


def sin(t):
    return Term("sin", (as_term(t),))


def cos(t):
    return Term("cos", (as_term(t),))


def exp(t):
    return Term("exp", (as_term(t),))


def recip(t):
    return Term("recip", (as_term(t),))


def power(t, k):
    return as_term(t) ** k


def absolute(t):
    return Term("abs", (as_term(t),))


def maximum(*ts):
    if len(ts) < 2:
        raise ValueError("max needs at least two arguments")
    return Term("max", tuple(as_term(t) for t in ts))


def minimum(*ts):
    if len(ts) < 2:
        raise ValueError("min needs at least two arguments")
    return Term("min", tuple(as_term(t) for t in ts))


def special(name, t):
    if name not in SPECIAL_NAMES:
        raise KeyError(f"unknown special primitive {name!r}; choose from {SPECIAL_NAMES}")
    return Term("special", (as_term(t),), name)


def total(*ts):
    return Term("add", tuple(as_term(t) for t in ts)) if len(ts) > 1 else as_term(ts[0])


def product(*ts):
    return Term("mul", tuple(as_term(t) for t in ts)) if len(ts) > 1 else as_term(ts[0])


# --------------------------------------------------------------------------
# frozen DAG
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    op: str
    args: tuple = ()
    param: object = None


@dataclass(frozen=True, eq=False)
class Expr:
    """Immutable DAG; children always precede parents, output is the last node."""

    nodes: tuple
    n: int
    lower: tuple
    upper: tuple
    analytic: bool = True
    source: str = field(default="", compare=False)

    @classmethod
    def build(cls, term, box, n=None, source=""):
        box = [tuple(map(float, b)) for b in box]
        lower = tuple(b[0] for b in box)
        upper = tuple(b[1] for b in box)
        nodes = []
        memo = {}
        analytic = True
        max_var = -1

        # iterative post-order so deep expressions do not hit the recursion limit
        stack = [(term, False)]
        while stack:
            t, ready = stack.pop()
            if id(t) in memo:
                continue
            if not ready:
                stack.append((t, True))
                for c in reversed(t.args):
                    if id(c) not in memo:
                        stack.append((c, False))
                continue
            if t.op == "var":
                max_var = max(max_var, t.param)
            elif t.op == "affine":
                max_var = max(max_var, len(t.param[0]) - 1)
            elif t.op == "special":
                analytic = False
            memo[id(t)] = len(nodes)
            nodes.append(Node(t.op, tuple(memo[id(c)] for c in t.args), t.param))
        n = len(box) if n is None else n
        if max_var >= n:
            raise ValueError(f"expression uses x{max_var} but the domain has dimension {n}")
        if len(box) != n:
            raise ValueError("box dimension does not match n")
        return cls(tuple(nodes), n, lower, upper, analytic, source or repr(term))

    @property
    def box(self):
        return np.array(self.lower), np.array(self.upper)

    @cached_property
    def program(self):
        return to_canonical(self)

    def contains(self, X, tol=0.0):
        X = np.atleast_2d(X)
        lo, hi = self.box
        return np.all((X >= lo - tol) & (X <= hi + tol), axis=1)

    def clamp(self, x):
        lo, hi = self.box
        return np.clip(x, lo, hi)

    def __repr__(self):
        return f"Expr(n={self.n}, nodes={len(self.nodes)}, analytic={self.analytic}, {self.source})"


def _as_points(expr, x):
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if X.shape[0] == expr.n else X.reshape(-1, 1)
    if X.shape[1] != expr.n:
        raise DomainError(f"points have dimension {X.shape[1]}, expected {expr.n}")
    return X


def check_domain(expr, X):
    ok = expr.contains(X)
    if not np.all(ok):
        bad = X[np.argmin(ok)]
        raise DomainError(f"point {bad.tolist()} lies outside the domain "
                          f"{list(zip(expr.lower, expr.upper))}")


def _eval_nodes(expr, X):
    vals = []
    for idx, nd in enumerate(expr.nodes):
        op = nd.op
        args = [vals[i] for i in nd.args]
        if op == "const":
            v = np.full(X.shape[0], nd.param)
        elif op == "var":
            v = X[:, nd.param].copy()
        elif op == "affine":
            w, b = nd.param
            v = X[:, :len(w)] @ np.asarray(w) + b
        elif op == "add":
            v = np.sum(args, axis=0)
        elif op == "mul":
            v = np.prod(args, axis=0)
        elif op == "neg":
            v = -args[0]
        elif op == "scale":
            v = nd.param * args[0]
        elif op == "pow":
            k = nd.param
            if k < 0 and np.any(args[0] == 0.0):
                raise EvaluationError(f"node {idx} (pow {k}): zero base with negative exponent", idx)
            v = args[0] ** float(k)
        elif op == "sin":
            v = np.sin(args[0])
        elif op == "cos":
            v = np.cos(args[0])
        elif op == "exp":
            v = np.exp(args[0])
        elif op == "recip":
            if np.any(args[0] == 0.0):
                raise EvaluationError(f"node {idx} (recip): division by zero", idx)
            v = 1.0 / args[0]
        elif op == "special":
            v, _ = special_value_and_derivative(nd.param, args[0])
        elif op == "abs":
            v = np.abs(args[0])
        elif op == "max":
            v = np.max(args, axis=0)
        elif op == "min":
            v = np.min(args, axis=0)
        else:  # pragma: no cover
            raise ValueError(f"unknown op {op}")
        if not np.all(np.isfinite(v)):
            raise EvaluationError(f"node {idx} ({op}) produced a non-finite value", idx)
        vals.append(v)
    return vals


def evaluate_many(expr, X, check=True):
    """Evaluate directly on the DAG at every row of ``X``."""
    X = _as_points(expr, X)
    if check:
        check_domain(expr, X)
    return _eval_nodes(expr, X)[-1]


def evaluate(expr, x):
    """f(x) at a single point, computed on the DAG (not the canonical tape)."""
    X = _as_points(expr, x)
    if X.shape[0] != 1:
        raise DomainError("evaluate takes a single point; use evaluate_many")
    return float(evaluate_many(expr, X)[0])


# --------------------------------------------------------------------------
# canonical program
# --------------------------------------------------------------------------

class _TapeWriter:
    def __init__(self):
        self.op, self.a, self.b, self.p = [], [], [], []
        self.stage_outputs = []
        self.abs_slots = []

    def emit(self, op, a=0, b=0, p=0.0):
        self.op.append(op)
        self.a.append(a)
        self.b.append(b)
        self.p.append(p)
        return len(self.op) - 1

    def absolute(self, slot):
        j = len(self.stage_outputs)
        self.stage_outputs.append(slot)
        s = self.emit(K.ABS, slot, j)
        self.abs_slots.append(s)
        return s

    def add(self, x, y):
        return self.emit(K.ADD, x, y)

    def neg(self, x):
        return self.emit(K.NEG, x)

    def scale(self, c, x):
        return self.emit(K.SCALE, x, 0, c)

    def max2(self, x, y):
        u = self.absolute(self.add(x, self.neg(y)))
        return self.scale(0.5, self.add(self.add(u, x), y))


@dataclass(frozen=True, eq=False)
class CanonicalProgram:
    """Staged abs-normal form of an :class:`Expr`.

    ``tape`` holds (op, a, b, p) int/float arrays.  Stage j (0-based) ends at
    the instruction ``stage_outputs[j]``; its value z_j enters later stages
    only through an ``ABS`` instruction.  The final stage output is the last
    instruction.
    """

    tape: tuple
    n: int
    lower: tuple
    upper: tuple
    analytic: bool
    stage_outputs: tuple
    abs_slots: tuple

    @property
    def m(self):
        return len(self.stage_outputs) + 1

    def stages(self):
        """Instruction index ranges of f_1..f_m (ABS loads start a new stage)."""
        bounds = [0, *[s for s in self.abs_slots], len(self.tape[0])]
        return [range(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]

    def describe(self):
        op, a, b, p = self.tape
        lines = []
        for i in range(len(op)):
            name = K.OPNAMES[op[i]]
            if op[i] == K.CONST:
                arg = f"{p[i]!r}"
            elif op[i] == K.VAR:
                arg = f"x{b[i]}"
            elif op[i] == K.ABS:
                arg = f"|z{b[i] + 1}| (slot {a[i]})"
            elif op[i] in (K.ADD, K.MUL):
                arg = f"{a[i]} {b[i]}"
            elif op[i] == K.SCALE:
                arg = f"{p[i]!r} * {a[i]}"
            elif op[i] == K.POWI:
                arg = f"{a[i]} ** {b[i]}"
            else:
                arg = f"{a[i]}"
            lines.append(f"{i:4d} {name:6s} {arg}")
        return "\n".join(lines)

    def run(self, X, **kw):
        return K.sweep(self.tape, X, **kw)

    def value(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.run(X)[0]

    def stage_values(self, X):
        """z_1..z_{m-1} at each row of X, shape (N, m-1)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.run(X)[3]


def to_canonical(expr):
    """Lower ``expr`` to a :class:`CanonicalProgram` (pairwise max rewriting)."""
    w = _TapeWriter()
    slot = []
    for nd in expr.nodes:
        op = nd.op
        args = [slot[i] for i in nd.args]
        if op == "const":
            s = w.emit(K.CONST, p=nd.param)
        elif op == "var":
            s = w.emit(K.VAR, b=nd.param)
        elif op == "affine":
            wts, bias = nd.param
            s = w.emit(K.CONST, p=bias)
            for i, wi in enumerate(wts):
                if wi != 0.0:
                    s = w.add(s, w.scale(wi, w.emit(K.VAR, b=i)))
        elif op == "add":
            s = args[0]
            for t in args[1:]:
                s = w.add(s, t)
        elif op == "mul":
            s = args[0]
            for t in args[1:]:
                s = w.emit(K.MUL, s, t)
        elif op == "neg":
            s = w.neg(args[0])
        elif op == "scale":
            s = w.scale(nd.param, args[0])
        elif op == "pow":
            s = w.emit(K.POWI, args[0], nd.param)
        elif op in ("sin", "cos", "exp", "recip"):
            s = w.emit({"sin": K.SIN, "cos": K.COS, "exp": K.EXP, "recip": K.RECIP}[op], args[0])
        elif op == "special":
            s = w.emit(K.SPECIAL_OPS[nd.param], args[0])
        elif op == "abs":
            s = w.absolute(args[0])
        elif op == "max":
            s = args[0]
            for t in args[1:]:
                s = w.max2(s, t)
        elif op == "min":
            s = args[0]
            for t in args[1:]:
                s = w.neg(w.max2(w.neg(s), w.neg(t)))
        else:  # pragma: no cover
            raise ValueError(f"unknown op {op}")
        slot.append(s)
    if slot[-1] != len(w.op) - 1:  # output must be the final instruction
        w.scale(1.0, slot[-1])
    tape = (np.asarray(w.op, dtype=np.int64), np.asarray(w.a, dtype=np.int64),
            np.asarray(w.b, dtype=np.int64), np.asarray(w.p, dtype=float))
    return CanonicalProgram(tape, expr.n, expr.lower, expr.upper, expr.analytic,
                            tuple(w.stage_outputs), tuple(w.abs_slots))


# --------------------------------------------------------------------------
# sign vectors, branches, regions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SignVector:
    s: tuple
    zeta: float
    ambiguous: tuple
    z: tuple = ()

    def __len__(self):
        return len(self.s)

    def completions(self):
        """Every full +-1 pattern agreeing with the nonzero entries."""
        zeros = [i for i, v in enumerate(self.s) if v == 0]
        out = []
        for bits in range(2 ** len(zeros)):
            s = list(self.s)
            for k, i in enumerate(zeros):
                s[i] = 1 if (bits >> k) & 1 else -1
            out.append(tuple(s))
        return out


def _program(obj):
    return obj.program if isinstance(obj, Expr) else obj


def sign_vector(prog, x, zeta=0.0):
    """sign(z_i(x)) for the m-1 abs stages; |z_i| <= zeta gives 0, flagged."""
    prog = _program(prog)
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    z = prog.stage_values(np.asarray(x, dtype=float).reshape(1, -1))[0]
    amb = np.abs(z) <= zeta
    s = np.where(amb, 0, np.sign(z)).astype(int)
    return SignVector(tuple(int(v) for v in s), float(zeta),
                      tuple(bool(v) for v in amb), tuple(float(v) for v in z))


def eval_branch(prog, s, x):
    """Value and gradient of the analytic branch f^s at x."""
    prog = _program(prog)
    s = np.asarray(s.s if isinstance(s, SignVector) else s, dtype=float)
    if s.shape != (prog.m - 1,):
        raise ValueError(f"sign pattern must have length {prog.m - 1}")
    X = np.asarray(x, dtype=float).reshape(1, -1)
    v, _, g, _, _ = prog.run(X, signs=s[None, :])
    return float(v[0]), g[0].copy()


def classify(prog, X, zeta=0.0):
    """Stage signs at many points, 0 where the first-order kink band hits."""
    prog = _program(prog)
    _, _, _, z, kink = prog.run(np.atleast_2d(X), radius=zeta)
    s = np.sign(z).astype(int)
    s[kink] = 0
    return s


@dataclass
class RegionMap:
    witnesses: dict
    counts: dict
    labels: np.ndarray
    resolution: np.ndarray

    def full_patterns(self):
        return {k: v for k, v in self.witnesses.items() if 0 not in k}


def discover_regions(prog, grid):
    prog = _program(prog)
    if not isinstance(grid, GridSpec) or grid.size == 0:
        raise ValueError("discover_regions needs a non-empty GridSpec")
    X = grid.points()
    labels = classify(prog, X, grid.zeta)
    witnesses, counts = {}, {}
    for row, lab in zip(X, map(tuple, labels)):
        if lab not in witnesses:
            witnesses[lab] = row.copy()
            counts[lab] = 0
        counts[lab] += 1
    return RegionMap(witnesses, counts, labels, grid.spacing)
