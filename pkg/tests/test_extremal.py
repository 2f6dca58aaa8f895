from fractions import Fraction as Fr

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import instance
from mabuchi.errors import DimensionMismatch, NotCentral
from mabuchi.extremal import futaki, orthogonality_residuals, theta_mean, toric_covectors
from mabuchi.geom import box
from mabuchi.criterion import analyze
from mabuchi.rootsys import named

fr = st.fractions(Fr(1, 4), 3, max_denominator=6)


def _R(x):
    return sp.Rational(Fr(x).numerator, Fr(x).denominator)


def _oracle(name, rect):
    """X, c_X, C_X by iterated sympy integrals over the chamber rectangle."""
    d = named(name)
    ys = sp.symbols("y0:2")
    pi = sp.Integer(1)
    for a in d.positive_roots:
        pi *= sum(_R(c) * y for c, y in zip(d.covector(a), ys)) ** 2

    def I(f):
        return sp.integrate(f * pi, (ys[0], _R(rect[0][0]), _R(rect[0][1])), (ys[1], _R(rect[1][0]), _R(rect[1][1])))

    V = I(1)
    b = [I(y) / V for y in ys]
    S = [[_R(c) for c in s] for s in toric_covectors(d)]
    lin = [sum(c * y for c, y in zip(s, ys)) for s in S]
    a = sp.Matrix(len(S), len(S), lambda k, l: I(lin[k] * lin[l]) / V - lin[k].subs(dict(zip(ys, b))) * lin[l].subs(dict(zip(ys, b))))
    rhs = sp.Matrix([l.subs(dict(zip(ys, b))) for l in lin])
    X = a.solve(rhs)
    theta = sum(X[k] * (lin[k] - rhs[k]) for k in range(len(S)))
    corners = [(x, y) for x in rect[0] for y in rect[1]]
    w = [1 - theta.subs({ys[0]: _R(x), ys[1]: _R(y)}) for x, y in corners]
    return [Fr(int(v.p), int(v.q)) for v in X], min(w), max(w)


def _check(inst, X, c, C):
    e = inst.extremal
    assert list(e.X) == X
    assert e.c_X == Fr(int(c.p), int(c.q)) and e.C_X == Fr(int(C.p), int(C.q))


@settings(max_examples=10, deadline=None)
@given(l1=fr, h1=fr, l2=fr, h2=fr)
def test_toric_square_matches_oracle(l1, h1, l2, h2):
    inst = instance("T2", (-l1, -l2), (h1, h2))
    X, c, C = _oracle("T2", [(-2 * l1, 2 * h1), (-2 * l2, 2 * h2)])
    _check(inst, X, c, C)


@settings(max_examples=6, deadline=None)
@given(a=fr, l=fr, h=fr)
def test_a1xt1_matches_oracle(a, l, h):
    inst = instance("A1xT1", (-a, -l), (a, h))
    X, c, C = _oracle("A1xT1", [(0, 2 * a), (-2 * l, 2 * h)])
    _check(inst, X, c, C)


def test_skew_interval_values():
    e = instance("T1", (Fr(-1, 2),), (Fr(3, 4),)).extremal
    assert e.X == (Fr(12, 25),)
    assert (e.c_X, e.C_X) == (Fr(2, 5), Fr(8, 5))


@pytest.mark.parametrize("name,lo,hi", [("A1", (-3,), (3,)), ("B2", (-4, -4), (4, 4)), ("A1xA1", (-3, -2), (3, 2))])
def test_semisimple_has_trivial_field(name, lo, hi):
    e = instance(name, lo, hi).extremal
    assert e.X == () and e.c_X == 1 and e.C_X == 1


@settings(max_examples=15, deadline=None)
@given(l1=fr, h1=fr, l2=fr, h2=fr)
def test_orthogonality_exact(l1, h1, l2, h2):
    for name, hi1 in (("T2", h1), ("A1xT1", l1)):
        inst = instance(name, (-l1, -l2), (hi1, h2))
        assert all(r == 0 for r in orthogonality_residuals(inst.datum, inst.table, inst.extremal))
        assert theta_mean(inst.table, inst.extremal) == 0


def test_symmetric_toric_field_vanishes():
    e = instance("T2", (-1, -1), (1, 1)).extremal
    assert e.X == (0, 0) and e.c_X == 1


def test_float_mode_agrees():
    ex = instance("T1", (Fr(-1, 2),), (Fr(3, 4),)).extremal
    fl = analyze(named("T1"), box([-0.5], [0.75])).extremal
    assert float(fl.X[0]) == pytest.approx(float(ex.X[0]), rel=1e-12)
    assert not fl.exact


def test_futaki():
    inst = instance("T1", (Fr(-1, 2),), (Fr(3, 4),))
    assert futaki(inst.datum, inst.table, (1,)) == Fr(-5, 8)
    sym = instance("A1xT1", (-2, -1), (2, 1))
    assert futaki(sym.datum, sym.table, (0, 1)) == 0
    with pytest.raises(NotCentral):
        futaki(sym.datum, sym.table, (1, 0))
    with pytest.raises(DimensionMismatch):
        futaki(inst.datum, inst.table, (1, 0))


@settings(max_examples=15, deadline=None)
@given(l=fr, h=fr, y=st.fractions(-3, 3, max_denominator=5))
def test_futaki_linear_and_sign(l, h, y):
    inst = instance("T1", (-l,), (h,))
    f = futaki(inst.datum, inst.table, (y,))
    assert f == y * futaki(inst.datum, inst.table, (1,))
    # barycenter of 2P is h - l
    assert futaki(inst.datum, inst.table, (1,)) == -inst.table.V * (h - l)
