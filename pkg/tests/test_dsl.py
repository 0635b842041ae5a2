import numpy as np
import pytest

from convstab import expr as E
from convstab.dsl import parse
from convstab.errors import ParseError


def test_parse_max_of_square_and_abs():
    f = parse("(max (pow x0 2) (abs x1))")
    assert f.n == 2
    assert E.evaluate(f, [0.5, -0.2]) == 0.25
    assert E.evaluate(f, [0.1, -0.2]) == 0.2


def test_all_forms_and_comments():
    src = """
    ; every head once
    (+ (* x0 2) (neg x0) (scale 3 x0) (min x0 1 2)
       (sin x0) (cos x0) (exp x0) (recip (+ x0 3))
       (special sin_of_reciprocal x0))  ; trailing
    """
    f = parse(src)
    t = 0.4
    want = 2 * t - t + 3 * t + min(t, 1, 2) + np.sin(t) + np.cos(t) + np.exp(t) + 1 / (t + 3) \
        + t * t * np.sin(1 / t)
    assert E.evaluate(f, t) == pytest.approx(want, rel=1e-14)
    assert not f.analytic


def test_whitespace_insensitive():
    a = parse("(max x0 (neg x0))")
    b = parse("(max\n\tx0\n   (neg   x0 ))")
    assert E.evaluate(a, 0.3) == E.evaluate(b, 0.3) == 0.3


def test_box_argument():
    f = parse("(abs x0)", [(-5.0, 5.0)])
    assert E.evaluate(f, 4.0) == 4.0


@pytest.mark.parametrize("src,line,col", [
    ("(max x0", 1, 1),
    ("(foo x0)", 1, 2),
    ("(abs x0 x1)", 1, 2),
    ("\n  (pow x0 y)", 2, 11),
    ("(special nope x0)", 1, 10),
    ("x0 )", 1, 4),
    ("(abs #)", 1, 6),
])
def test_errors_report_position(src, line, col):
    with pytest.raises(ParseError) as ei:
        parse(src)
    assert (ei.value.line, ei.value.col) == (line, col)
