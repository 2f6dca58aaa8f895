from fractions import Fraction as Fr

import numpy as np
import pytest

from conftest import disc, random_direction, random_potential
from mabuchi.criterion import Verdict
from mabuchi.dingfun import eval_D
from mabuchi.masolver import (
    SolverConfig,
    Status,
    directional_derivative,
    finite_difference,
    pushforward_residual,
    solve,
    stationarity_residual,
)

CASES = [
    ("T1", (-1,), (1,), None),
    ("T1", (-Fr(1, 2),), (Fr(3, 4),), None),
    ("A1", (-3,), (3,), None),
    ("A1", (-Fr(11, 4),), (Fr(11, 4),), None),
    ("A1", (-Fr(5, 2),), (Fr(5, 2),), None),
    ("A1", (-2,), (2,), None),
    ("T2", (-1, -1), (1, 1), 6),
    ("B2", (-4, -4), (4, 4), 6),
    ("B2", (-3, -3), (3, 3), 6),
]


def _solve(case):
    return solve(disc(*case))


@pytest.mark.parametrize("case", CASES, ids=lambda c: f"{c[0]}{c[2]}")
def test_converged_iff_exists(case):
    d = disc(*case)
    s = _solve(case)
    exists = d.inst.certificate.verdict is Verdict.EXISTS
    assert (s.status is Status.CONVERGED) == exists, s.reason
    if not exists:
        assert s.status is Status.DIVERGED


def test_toric_interval_solution():
    s = _solve(CASES[0])
    assert s.stationarity < 1e-8
    assert s.pushforward < 1e-3
    u = s.potential
    y = u.disc.mesh.nodes[:, 0]
    # symmetric polytope: the normalised minimiser is even
    assert np.allclose(u.values, np.interp(-y, y[np.argsort(y)], u.values[np.argsort(y)]), atol=1e-8)
    hist = np.array([h[1] for h in s.history])
    assert np.all(np.diff(hist) <= 1e-12 * np.maximum(1, np.abs(hist[1:])))
    assert s.history_csv().splitlines()[0].startswith("iter")


def test_minimiser_beats_perturbations(rng):
    s = _solve(CASES[2])
    u = s.potential
    d = u.disc
    base = pushforward_residual(u)
    for _ in range(5):
        p = u + 0.05 * random_potential(d, rng)
        assert eval_D(p) > s.D
        assert pushforward_residual(p) > base


@pytest.mark.parametrize("case", [CASES[2], CASES[6]], ids=["A1", "T2"])
def test_directional_derivative_matches_fd(case, rng):
    d = disc(*case)
    for _ in range(10):
        u = random_potential(d, rng)
        v = random_direction(d, rng)
        a = directional_derivative(u, v)
        f = finite_difference(u, v)
        assert abs(a - f) <= 1e-6 * max(abs(a), 1e-3)


def test_stationarity_zero_only_at_minimiser(rng):
    s = _solve(CASES[2])
    assert stationarity_residual(s.potential) < 1e-8
    assert stationarity_residual(random_potential(s.potential.disc, rng)) > 1e-3


def test_max_iter():
    s = solve(disc(*CASES[2]), SolverConfig(max_iter=2))
    assert s.status is Status.MAX_ITER
    assert len(s.history) <= 3
