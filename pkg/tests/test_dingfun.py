import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import a1, disc, instance, random_potential
from mabuchi.dingfun import (
    D_and_grad,
    ConvexPotential,
    LegendreView,
    discretize,
    energy_pair,
    eval_D,
    eval_F,
    eval_F_full,
    eval_L,
    hessian,
    lambda_estimate,
    normalize,
)
from mabuchi.errors import MismatchedInstances, NonDecaying, RankTooHigh

H = Fr(1, 2)


def _quad_F(u, alpha):
    """-log int_{a_+} e^{-psi} sinh^2(alpha x) dx + u(4 rho), by adaptive quadrature."""
    y = u.disc.mesh.nodes[:, 0]
    v = u.values
    order = np.argsort(y)
    ys, vs = y[order], v[order]
    psi = lambda x: np.max(x * ys - vs)  # noqa: E731
    if alpha is None:
        lo = -np.inf
        brk = (vs[1:] - vs[:-1]) / (ys[1:] - ys[:-1])
    else:
        lo = 0.0
        brk = (vs[1:] - vs[:-1]) / (ys[1:] - ys[:-1])
        brk = brk[brk > 0]
    pts = np.concatenate([[brk.min() - 1 if lo == -np.inf else lo], brk, [brk.max() + 1]])
    if alpha is None:
        f = lambda x: np.exp(-psi(x))  # noqa: E731
    else:
        # sinh^2(a x) e^{-psi} written without overflow
        f = lambda x: np.exp(-psi(x) + 2 * alpha * x) * (-np.expm1(-2 * alpha * x) / 2) ** 2  # noqa: E731
    Z = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-13)[0] for a, b in zip(pts[:-1], pts[1:]) if b > a)
    if lo == -np.inf:
        Z += integrate.quad(f, -np.inf, pts[0], epsabs=0, epsrel=1e-13)[0]
    Z += integrate.quad(f, pts[-1], np.inf, epsabs=0, epsrel=1e-13)[0]
    four_rho = float(u.disc.four_rho[0])
    return -math.log(Z) + float(np.interp(four_rho, ys, vs))


def test_F_toric_matches_quadrature():
    d = disc("T1", (-1,), (1,))
    u = d.potential(lambda y: 0.5 * y[:, 0] ** 2)
    assert eval_F(u) == pytest.approx(_quad_F(u, None), abs=1e-10)
    # continuum value: Huber conjugate on the line
    cont = -math.log(math.sqrt(2 * math.pi) * math.erf(math.sqrt(2)) + math.exp(-2))
    assert eval_F(u) == pytest.approx(cont, abs=2e-4)
    assert cont == pytest.approx(-0.92739, abs=1e-5)


@pytest.mark.parametrize("t", [6, 8])
def test_F_a1_matches_quadrature(t, rng):
    d = disc("A1", (-Fr(t) / 2,), (Fr(t) / 2,))
    for _ in range(3):
        u = random_potential(d, rng)
        assert eval_F(u) == pytest.approx(_quad_F(u, float(d.walls[0, 0])), abs=1e-9)


def test_F_toric_square_converges():
    cont = -2 * math.log(math.sqrt(2 * math.pi) * math.erf(math.sqrt(2)) + math.exp(-2))
    errs = []
    for level in (4, 8, 16):
        d = disc("T2", (-1, -1), (1, 1), level)
        errs.append(abs(eval_F(d.potential(lambda y: 0.5 * np.sum(y * y, axis=1))) - cont))
    # second order in the mesh size
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


@pytest.mark.parametrize("case", [("T1", (-1,), (1,)), ("A1", (-3,), (3,)), ("T2", (-1, -1), (1, 1)), ("B2", (-4, -4), (4, 4))])
def test_functional_invariances(case, rng):
    d = disc(*case, 6) if len(case[1]) == 2 else disc(*case)
    for _ in range(3):
        u = random_potential(d, rng)
        c = rng.normal() * 3
        assert eval_F(u + c) == pytest.approx(eval_F(u), abs=1e-12)
        assert eval_D(normalize(u)) == pytest.approx(eval_D(u), abs=1e-9)
        nu = normalize(u)
        assert nu.at(np.zeros(d.rank)) == pytest.approx(0, abs=1e-12)


def test_masses_and_tail(rng):
    d = disc("B2", (-4, -4), (4, 4), 6)
    u = random_potential(d, rng)
    fr = eval_F_full(u)
    assert fr.masses.sum() == pytest.approx(1, abs=1e-12)
    assert np.all(fr.masses >= 0)
    assert fr.tail <= d.fcfg.tail_tol and fr.delta > 0


@pytest.mark.parametrize("case", [("A1", (-3,), (3,)), ("T2", (-1, -1), (1, 1)), ("B2", (-4, -4), (4, 4))])
def test_gradient_and_hessian_match_finite_differences(case, rng):
    d = disc(*case, 4) if len(case[1]) == 2 else disc(*case, 12)
    u = random_potential(d, rng)
    _, _, fr = D_and_grad(d, u.values)
    R = fr.R
    D0, g, _ = D_and_grad(d, u.values, R=R)
    Hm = hessian(d, u.values, R)
    assert np.allclose(Hm, Hm.T, atol=1e-12)
    eps = 1e-6
    for k in rng.choice(d.mesh.size, size=min(6, d.mesh.size), replace=False):
        e = np.zeros(d.mesh.size)
        e[k] = eps
        Dp, gp, _ = D_and_grad(d, u.values + e, R=R)
        Dm, gm, _ = D_and_grad(d, u.values - e, R=R)
        assert (Dp - Dm) / (2 * eps) == pytest.approx(g[k], abs=1e-7)
        assert np.allclose((gp - gm) / (2 * eps), Hm[:, k], atol=1e-6)


def test_D_midpoint_convex(rng):
    for case in (("A1", (-3,), (3,)), ("T2", (-1, -1), (1, 1))):
        d = disc(*case, 6) if len(case[1]) == 2 else disc(*case)
        for _ in range(5):
            u, v = random_potential(d, rng), random_potential(d, rng)
            assert eval_D(0.5 * u + 0.5 * v) <= 0.5 * eval_D(u) + 0.5 * eval_D(v) + 1e-10


def test_L_linear(rng):
    d = disc("A1", (-3,), (3,))
    u, v = random_potential(d, rng), random_potential(d, rng)
    assert eval_L(2.0 * u + v) == pytest.approx(2 * eval_L(u) + eval_L(v), abs=1e-10)
    assert eval_L(d.potential(np.ones(d.mesh.size))) == pytest.approx(0, abs=1e-12)


def test_legendre_view(rng):
    d = disc("A1", (-3,), (3,))
    u = random_potential(d, rng)
    assert u.is_mesh_convex()
    view = LegendreView(u)
    for y in (0.5, 2.0, 5.5):
        assert view.conjugate([y]) == pytest.approx(u.at([y]), abs=1e-8)
    assert not d.potential(-d.mesh.nodes[:, 0] ** 2).is_mesh_convex()


def test_errors():
    d = disc("A1", (-2,), (2,))
    with pytest.raises(NonDecaying):
        eval_F(d.potential(lambda y: 0.5 * y[:, 0] ** 2))
    d2 = disc("A1", (-3,), (3,))
    with pytest.raises(MismatchedInstances):
        d.zero() + d2.zero()
    assert discretize(a1(6), level=8).mesh.size == 9
    assert discretize(a1(6)).mesh.size == 151
    with pytest.raises(RankTooHigh):
        discretize(instance("A1xA1xA1", (-3, -3, -3), (3, 3, 3)))


def _energy_checks(d, rng, count, chain):
    n = d.manifold_dim
    cX, CX = float(d.inst.extremal.c_X), float(d.inst.extremal.C_X)
    for _ in range(count):
        u0, u1 = random_potential(d, rng), random_potential(d, rng)
        e = energy_pair(u0, u1)
        s = 1e-9 * (1 + abs(e.I) + abs(e.I_X))
        assert 0 <= e.I_X + s
        assert e.I_X <= (n + 2) * (e.I_X - e.J_X) + s
        assert (n + 2) * (e.I_X - e.J_X) <= (n + 1) * e.I_X + s
        assert e.I / (n + 1) <= e.I - e.J + s <= n * e.I / (n + 1) + 2 * s
        if chain:
            assert cX / (n + 1) * e.I <= e.I_X - e.J_X + s
            assert e.I_X - e.J_X <= CX * n / (n + 1) * e.I + s
        e8 = energy_pair(u0, u1, steps=8)
        assert e8.J_X == pytest.approx(e.J_X, abs=1e-10)


@pytest.mark.parametrize("case,chain", [(("A1", (-3,), (3,)), True), (("T2", (-1, -1), (1, 1)), True),
                                        (("T1", (-H,), (Fr(3, 4),)), True), (("T2", (-1, -1), (Fr(6, 5), 1)), True),
                                        (("B2", (-4, -4), (4, 4)), True)])
def test_energy_inequalities(case, chain, rng):
    d = disc(*case, 6) if len(case[1]) == 2 else disc(*case)
    assert d.inst.extremal.c_X > 0
    _energy_checks(d, rng, 8, chain)


def test_lambda_signs():
    good = lambda_estimate(disc("A1", (-3,), (3,)), count=500, seed=0)
    assert good.lambda_min > 0
    bad = lambda_estimate(disc("A1", (-Fr(5, 2),), (Fr(5, 2),)), count=500, seed=0)
    assert bad.lambda_min <= 0
    assert eval_L(bad.witness) <= 0


@pytest.mark.parametrize("case", [("A1", (-3,), (3,)), ("T2", (-1, -1), (1, 1)), ("B2", (-4, -4), (4, 4))])
def test_scaling_inequality(case, rng):
    # substituting x -> (1+c) x and bounding the Jacobian factor gives
    # F(u/(1+c)) <= F(u) + n log(1+c)
    d = disc(*case, 6) if len(case[1]) == 2 else disc(*case)
    n = d.manifold_dim
    for _ in range(5):
        u = random_potential(d, rng)
        for c in (0.1, 1.0, 10.0):
            assert eval_F(u) >= eval_F(u * (1 / (1 + c))) - n * math.log(1 + c) - 1e-9


def test_gaussian_scaling_rate():
    # u = y^2/2 on a long toric interval: F(u/(1+c)) - F(u) -> log(1+c)/2, strictly inside the bound
    d = disc("T1", (-6,), (6,))
    u = d.potential(lambda y: 0.5 * y[:, 0] ** 2)
    for c in (0.1, 1.0):
        assert eval_F(u * (1 / (1 + c))) - eval_F(u) == pytest.approx(0.5 * math.log(1 + c), abs=1e-3)
