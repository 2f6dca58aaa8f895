import functools
import warnings
from fractions import Fraction as Fr
from pathlib import Path

import numpy as np
import pytest

from mabuchi.criterion import analyze
from mabuchi.errors import FanoWarning
from mabuchi.geom import box
from mabuchi.rootsys import named

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


@functools.lru_cache(maxsize=None)
def instance(name: str, lo: tuple, hi: tuple):
    """Analysed instance for datum ``name`` and the box P = [lo, hi]."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FanoWarning)
        return analyze(named(name), box(list(lo), list(hi)))


def a1(t):
    """A1 with 2P_+ = [0, t]."""
    h = Fr(t) / 2
    return instance("A1", (-h,), (h,))


@functools.lru_cache(maxsize=None)
def disc(name: str, lo: tuple, hi: tuple, level=None):
    from mabuchi.dingfun import discretize

    return discretize(instance(name, lo, hi), level=level)


def random_potential(d, rng, pieces: int = 3):
    """W-invariant convex function sampled at the mesh nodes."""
    y = d.mesh.nodes
    v = rng.uniform(0.05, 1.0) * np.sum(y * y, axis=1)
    for _ in range(pieces):
        l = rng.normal(size=y.shape[1])
        c = rng.normal()
        v = v + rng.uniform(0.0, 1.0) * np.max([(y @ w.T) @ l + c for w in d.weyl], axis=0)
    return d.potential(v)


def random_direction(d, rng):
    """Difference of two random potentials, scaled to sup-norm one."""
    v = random_potential(d, rng).values - random_potential(d, rng).values
    return v / np.abs(v).max()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
