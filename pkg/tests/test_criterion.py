from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import a1, instance
from mabuchi.criterion import Verdict, analyze, check_existence, necessity_probe, sample_chamber_rays
from mabuchi.errors import RayOutsideChamber
from mabuchi.geom import box
from mabuchi.rootsys import ConeKind, named


def _a1_oracle(t):
    # 2P_+ = [0, t] with weight 4y^2: barycenter 3t/4, and 4 rho = 4
    s = Fr(3, 4) * t - 4
    return Verdict.EXISTS if s > 0 else Verdict.NOT_EXISTS if s < 0 else Verdict.INCONCLUSIVE


@settings(max_examples=40, deadline=None)
@given(t=st.fractions(Fr(1, 2), 12, max_denominator=9))
def test_a1_verdict_closed_form(t):
    c = a1(t).certificate
    assert c.b_X == (Fr(3, 4) * t,)
    assert c.verdict is _a1_oracle(t)


@pytest.mark.parametrize(
    "t,verdict,note",
    [(6, Verdict.EXISTS, None), (4, Verdict.NOT_EXISTS, None), (5, Verdict.NOT_EXISTS, None),
     (Fr(16, 3), Verdict.INCONCLUSIVE, "boundary")],
)
def test_a1_examples(t, verdict, note):
    c = a1(t).certificate
    assert (c.verdict, c.annotation) == (verdict, note)


def test_b2_examples():
    c = instance("B2", (-4, -4), (4, 4)).certificate
    assert c.b_X == (Fr(80, 11), Fr(175, 44))
    assert c.verdict is Verdict.EXISTS and c.cone.kind is ConeKind.INTERIOR
    assert instance("B2", (-3, -3), (3, 3)).certificate.verdict is Verdict.NOT_EXISTS


def test_toric_verdicts():
    sq = instance("T2", (-1, -1), (1, 1)).certificate
    assert sq.verdict is Verdict.EXISTS and sq.b_X == (0, 0)
    sk = instance("T1", (Fr(-1, 2),), (Fr(3, 4),)).certificate
    # b_X is always zero on the toric part, so only c_X matters
    assert sk.b_X == (0,) and sk.verdict is Verdict.EXISTS


def test_negative_c_gives_not_exists():
    c = instance("T2", (-1, Fr(-1, 2)), (Fr(3, 2), 1)).certificate
    assert c.c_X < 0 and c.verdict is Verdict.NOT_EXISTS


def test_float_mode_tolerance():
    near = 16 / 3 + 1e-12
    c = check_existence(named("A1"), box([-near / 2], [near / 2]))
    assert not c.exact and c.verdict is Verdict.INCONCLUSIVE
    c = check_existence(named("A1"), box([-3.0], [3.0]))
    assert c.verdict is Verdict.EXISTS


@settings(max_examples=20, deadline=None)
@given(t=st.fractions(Fr(1, 2), 12, max_denominator=7), lam=st.sampled_from([Fr(1, 2), 2, 3]))
def test_b_x_scales_linearly(t, lam):
    # weighted barycenter is homogeneous of degree one in P
    assert a1(lam * t).certificate.b_X == (lam * a1(t).certificate.b_X[0],)


@pytest.mark.parametrize("name,lo,hi", [("A1", (-3,), (3,)), ("A1", (-2,), (2,)), ("B2", (-4, -4), (4, 4)), ("B2", (-3, -3), (3, 3)),
                                        ("A1xA1", (-3, -2), (3, 2))])
def test_probe_consistent(name, lo, hi):
    inst = instance(name, lo, hi)
    r = necessity_probe(inst.certificate, inst.datum, count=64, seed=1)
    assert r.consistent, r.note
    assert len(r.pairings) == 64
    if inst.certificate.verdict is Verdict.EXISTS:
        assert min(r.pairings) > 0


def test_probe_rejects_bad_rays():
    inst = instance("A1", (-3,), (3,))
    with pytest.raises(RayOutsideChamber):
        necessity_probe(inst.certificate, inst.datum, rays=[(-1,)])
    with pytest.raises(RayOutsideChamber):
        necessity_probe(inst.certificate, inst.datum, rays=[(1, 0)])


def test_chamber_rays_are_deterministic_and_inside():
    d = named("B2")
    a = sample_chamber_rays(d, 20, 3)
    assert a == sample_chamber_rays(d, 20, 3)
    for xi in a:
        assert all(sum(float(c) * x for c, x in zip(al, xi)) > 0 for al in d.positive_roots)


def test_instance_fields_consistent():
    inst = analyze(named("A1"), box([-3], [3]))
    c = inst.certificate
    assert c.shift == tuple(b - 4 * r for b, r in zip(c.b_X, inst.datum.rho))
    assert c.to_dict()["verdict"] == "Exists"
