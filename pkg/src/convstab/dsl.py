"""S-expression front end.

Grammar::

    expr  := NUMBER | xI | '(' head expr* ')'
    head  := + | * | neg | scale | abs | max | min | sin | cos | exp
             | pow | recip | special

``(scale c e)`` and ``(pow e k)`` take a numeric literal; ``(special NAME e)``
names one of the special primitives.  ``;`` starts a comment that runs to
the end of the line.
"""
import re

from . import expr as E
from .errors import ParseError

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>;[^\n]*)
  | (?P<open>\()
  | (?P<close>\))
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?(?![\w.]))
  | (?P<symbol>[^\s()";]+)
""", re.VERBOSE)

_VAR = re.compile(r"x(\d+)$")


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col


def tokenize(src):
    pos, line, col = 0, 1, 1
    out = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            out.append(_Tok(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    out.append(_Tok("eof", "", line, col))
    return out


_UNARY = {"neg": lambda t: -t, "abs": E.absolute, "sin": E.sin, "cos": E.cos,
          "exp": E.exp, "recip": E.recip}


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def number(self, what):
        t = self.next()
        if t.kind != "number":
            raise ParseError(f"expected a numeric literal for {what}, got {t.text or 'end of input'!r}",
                             t.line, t.col)
        return float(t.text)

    def expr(self):
        t = self.next()
        if t.kind == "number":
            return E.const(float(t.text))
        if t.kind == "symbol":
            m = _VAR.match(t.text)
            if not m:
                raise ParseError(f"unknown atom {t.text!r}", t.line, t.col)
            return E.var(int(m.group(1)))
        if t.kind == "close":
            raise ParseError("unexpected ')'", t.line, t.col)
        if t.kind == "eof":
            raise ParseError("unexpected end of input", t.line, t.col)
        head = self.next()
        if head.kind != "symbol":
            raise ParseError("expected an operator after '('", head.line, head.col)
        h = head.text
        if h == "scale":
            c = self.number("scale")
            args = [c, self.expr()]
        elif h == "pow":
            base = self.expr()
            k = self.number("pow")
            if k != int(k):
                raise ParseError("pow exponent must be an integer", head.line, head.col)
            args = [base, int(k)]
        elif h == "special":
            name = self.next()
            if name.kind != "symbol" or name.text not in E.SPECIAL_NAMES:
                raise ParseError(f"unknown special {name.text!r}", name.line, name.col)
            args = [name.text, self.expr()]
        else:
            args = []
            while self.peek().kind not in ("close", "eof"):
                args.append(self.expr())
        close = self.next()
        if close.kind != "close":
            raise ParseError(f"missing ')' for '({h}'", t.line, t.col)
        return self.build(h, args, head)

    def build(self, h, args, tok):
        def need(k):
            if len(args) < k:
                raise ParseError(f"'{h}' needs at least {k} argument(s)", tok.line, tok.col)

        if h == "+":
            need(1)
            return E.total(*args)
        if h == "*":
            need(1)
            return E.product(*args)
        if h in ("max", "min"):
            need(1)
            if len(args) == 1:
                return args[0]
            return (E.maximum if h == "max" else E.minimum)(*args)
        if h in _UNARY:
            if len(args) != 1:
                raise ParseError(f"'{h}' takes exactly one argument", tok.line, tok.col)
            return _UNARY[h](args[0])
        if h == "scale":
            return args[0] * args[1]
        if h == "pow":
            return E.power(args[0], args[1])
        if h == "special":
            return E.special(args[0], args[1])
        raise ParseError(f"unknown operator {h!r}", tok.line, tok.col)


def parse_term(src):
    p = _Parser(tokenize(src))
    t = p.expr()
    rest = p.peek()
    if rest.kind != "eof":
        raise ParseError(f"trailing input {rest.text!r}", rest.line, rest.col)
    return t


def _max_var(term):
    seen, stack, hi = set(), [term], -1
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        if t.op == "var":
            hi = max(hi, t.param)
        stack.extend(t.args)
    return hi


def parse(src, box=None):
    """Parse DSL text into an :class:`~convstab.expr.Expr`.

    Without ``box`` the domain defaults to [-1, 1]^n with n inferred from the
    largest variable index.
    """
    term = parse_term(src)
    n = max(_max_var(term) + 1, 1)
    if box is None:
        box = [(-1.0, 1.0)] * n
    return E.Expr.build(term, box, source=" ".join(src.split()))
