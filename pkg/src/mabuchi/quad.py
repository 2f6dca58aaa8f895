"""Polynomial densities on the chamber slice: exact simplex integration and a
Monte-Carlo cross-check.

Exact integration pulls a polynomial back to barycentric coordinates of each
simplex and uses the Dirichlet moment formula

    int_S lam^a dy = r! vol(S) prod(a_i!) / (r + |a|)!

which is exact over Fractions and perfectly stable in floating point for the
degrees met here (<= 2|Phi+| + 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial, sqrt
from typing import Iterable, Sequence

import numpy as np

from . import _linalg as la
from .errors import DegenerateRegion, InputError
from .geom import ConvexRegion, simplex_volume
from .rootsys import RootDatum


class DensityPoly:
    """Sparse polynomial ``{exponent tuple: coefficient}`` in ``nvars`` variables."""

    __slots__ = ("terms", "nvars")

    def __init__(self, terms: dict, nvars: int):
        self.terms = {e: c for e, c in terms.items() if c != 0}
        self.nvars = nvars

    # construction ----------------------------------------------------------

    @classmethod
    def constant(cls, c, nvars: int) -> "DensityPoly":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def affine(cls, slope: Sequence, const=0) -> "DensityPoly":
        n = len(slope)
        t = {(0,) * n: const}
        for i, s in enumerate(slope):
            e = [0] * n
            e[i] = 1
            t[tuple(e)] = s
        return cls(t, n)

    # algebra ---------------------------------------------------------------

    def __add__(self, other: "DensityPoly") -> "DensityPoly":
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0) + c
        return DensityPoly(t, self.nvars)

    def __sub__(self, other: "DensityPoly") -> "DensityPoly":
        return self + other.scale(-1)

    def __mul__(self, other: "DensityPoly") -> "DensityPoly":
        t: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return DensityPoly(t, self.nvars)

    def scale(self, k) -> "DensityPoly":
        return DensityPoly({e: k * c for e, c in self.terms.items()}, self.nvars)

    def __pow__(self, k: int) -> "DensityPoly":
        out = DensityPoly.constant(1, self.nvars)
        for _ in range(k):
            out = out * self
        return out

    # inspection ------------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    @property
    def exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.terms.values())

    def __call__(self, y: Sequence):
        s = 0
        for e, c in self.terms.items():
            m = c
            for yi, k in zip(y, e):
                if k:
                    m = m * yi**k
            s += m
        return s

    def arrays(self):
        """(exponents int array, float coefficients) for vectorised evaluation."""
        if not self.terms:
            return np.zeros((1, self.nvars), dtype=np.int64), np.zeros(1)
        es = np.array(list(self.terms.keys()), dtype=np.int64).reshape(-1, self.nvars)
        cs = np.array([float(c) for c in self.terms.values()])
        return es, cs

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        from ._kernels import poly_eval

        es, cs = self.arrays()
        return poly_eval(np.ascontiguousarray(pts, dtype=np.float64), es, cs)

    def __repr__(self) -> str:
        return f"DensityPoly({len(self.terms)} terms, degree {self.degree})"


def expand_pi(datum: RootDatum) -> DensityPoly:
    """prod over positive roots of <alpha, y>^2, fully expanded."""
    r = datum.rank
    one = Fraction(1) if datum.exact else 1.0
    p = DensityPoly.constant(one, r)
    for alpha in datum.positive_roots:
        lin = DensityPoly.affine(datum.covector(alpha))
        p = p * lin * lin
    return p


# ---------------------------------------------------------------------------
# exact simplex integration


def _simplices(region) -> tuple:
    if isinstance(region, ConvexRegion):
        return region.simplices
    return tuple(region)


def pullback(poly: DensityPoly, simplex: Sequence[Sequence]) -> DensityPoly:
    """Substitute y = sum_i lam_i v_i; result lives in r+1 barycentric variables."""
    r = poly.nvars
    m = len(simplex)
    forms = []
    for j in range(r):
        t = {}
        for i, v in enumerate(simplex):
            e = [0] * m
            e[i] = 1
            t[tuple(e)] = v[j]
        forms.append(DensityPoly(t, m))
    one = DensityPoly.constant(1, m)
    powers = [[one] for _ in range(r)]
    out = DensityPoly({}, m)
    for e, c in poly.terms.items():
        term = one.scale(c)
        for j, k in enumerate(e):
            while len(powers[j]) <= k:
                powers[j].append(powers[j][-1] * forms[j])
            if k:
                term = term * powers[j][k]
        out = out + term
    return out


def _dirichlet(a: Sequence[int], exact: bool):
    num = 1
    for ai in a:
        num *= factorial(ai)
    d = len(a) - 1
    den = factorial(d + sum(a))
    return Fraction(num, den) if exact else num / den


def integrate_barycentric(lpoly: DensityPoly, simplex: Sequence[Sequence], exact: bool):
    r = len(simplex) - 1
    scale = simplex_volume(simplex) * factorial(r)
    s = 0
    for a, c in lpoly.terms.items():
        s += c * _dirichlet(a, exact)
    return s * scale


def integrate(poly: DensityPoly, region) -> "Fraction | float":
    """Exact integral of ``poly`` over a triangulated region (sum over simplices)."""
    total = 0
    for s in _simplices(region):
        exact = poly.exact and la.is_exact(s)
        total += integrate_barycentric(pullback(poly, s), s, exact)
    return total


@dataclass(frozen=True)
class MomentTable:
    V: object
    first: tuple       # int y_i pi dy
    b: tuple           # first / V
    M2: tuple          # int y_i y_j pi dy
    exact: bool

    @property
    def covariance(self) -> tuple:
        r = len(self.b)
        return tuple(
            tuple(self.M2[i][j] / self.V - self.b[i] * self.b[j] for j in range(r)) for i in range(r)
        )


def moments(region, poly: DensityPoly, tol: float = 1e-14) -> MomentTable:
    """V, first moments, barycenter b and second moments of ``poly dy``."""
    simp = _simplices(region)
    r = poly.nvars
    exact = poly.exact and all(la.is_exact(s) for s in simp)
    zero = Fraction(0) if exact else 0.0
    V = zero
    first = [zero] * r
    M2 = [[zero] * r for _ in range(r)]
    for s in simp:
        lp = pullback(poly, s)
        m = len(s)
        lin = []
        for j in range(r):
            t = {}
            for i, v in enumerate(s):
                e = [0] * m
                e[i] = 1
                t[tuple(e)] = v[j]
            lin.append(DensityPoly(t, m))
        V += integrate_barycentric(lp, s, exact)
        ly = [lp * lin[j] for j in range(r)]
        for i in range(r):
            first[i] += integrate_barycentric(ly[i], s, exact)
            for j in range(i, r):
                M2[i][j] += integrate_barycentric(ly[i] * lin[j], s, exact)
    for i in range(r):
        for j in range(i):
            M2[i][j] = M2[j][i]
    if (V == 0) if exact else (abs(V) <= tol):
        raise DegenerateRegion("total mass vanishes")
    b = tuple(f / V for f in first)
    return MomentTable(V=V, first=tuple(first), b=b, M2=tuple(tuple(row) for row in M2), exact=exact)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCResult:
    estimate: float
    stderr: float
    samples: int
    accepted: int


def _halfspace_arrays(region: ConvexRegion):
    A = np.array([[float(x) for x in n] for n, _ in region.halfspaces])
    c = np.array([float(c) for _, c in region.halfspaces])
    return A, c


def _sample_chunks(region: ConvexRegion, seed: int, samples: int, chunk: int = 1 << 16):
    """Yield (points, inside mask) batches of uniform samples in the bounding box."""
    from ._kernels import inside_mask

    lo, hi = (np.array(v) for v in region.bbox())
    A, c = _halfspace_arrays(region)
    rng = np.random.default_rng(seed)
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        pts = lo + (hi - lo) * rng.random((k, len(lo)))
        yield pts, inside_mask(pts, A, c)
        done += k


def _check_samples(samples: int) -> None:
    if samples < 1000:
        raise InputError("need at least 1000 samples")


def mc_integrate(poly: DensityPoly, region: ConvexRegion, seed: int, samples: int) -> MCResult:
    """Rejection estimate of int poly dy; deterministic in ``seed``."""
    _check_samples(samples)
    lo, hi = region.bbox()
    box_vol = float(np.prod(np.array(hi) - np.array(lo)))
    if box_vol <= 0:
        raise DegenerateRegion("bounding box has zero volume")
    s1 = s2 = 0.0
    acc = 0
    for pts, mask in _sample_chunks(region, seed, samples):
        f = np.zeros(len(pts))
        if mask.any():
            f[mask] = poly.eval_many(pts[mask])
        s1 += f.sum()
        s2 += (f * f).sum()
        acc += int(mask.sum())
    if acc == 0:
        raise DegenerateRegion("no samples landed inside the region")
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    return MCResult(box_vol * mean, box_vol * sqrt(var / (samples - 1)), samples, acc)


@dataclass(frozen=True)
class MCMoments:
    V: float
    V_stderr: float
    b: tuple
    b_stderr: tuple


def mc_moments(
    poly: DensityPoly, region: ConvexRegion, seed: int, samples: int, weight: DensityPoly | None = None
) -> MCMoments:
    """Monte-Carlo mass and barycenter of ``poly * weight`` with delta-method errors."""
    _check_samples(samples)
    lo, hi = region.bbox()
    box_vol = float(np.prod(np.array(hi) - np.array(lo)))
    r = poly.nvars
    fs, gs = [], []
    for pts, mask in _sample_chunks(region, seed, samples):
        f = np.zeros(len(pts))
        if mask.any():
            f[mask] = poly.eval_many(pts[mask])
            if weight is not None:
                f[mask] *= weight.eval_many(pts[mask])
        fs.append(f)
        gs.append(f[:, None] * pts)
    f = np.concatenate(fs)
    g = np.concatenate(gs)
    n = len(f)
    if not f.any():
        raise DegenerateRegion("no mass sampled")
    fm = f.mean()
    gm = g.mean(axis=0)
    V = box_vol * fm
    V_err = box_vol * f.std(ddof=1) / sqrt(n)
    b = gm / fm
    # ratio estimator: var(b_i) ~ var(g_i - b_i f) / (n fm^2)
    resid = g - b[None, :] * f[:, None]
    b_err = resid.std(axis=0, ddof=1) / (sqrt(n) * abs(fm))
    return MCMoments(V=float(V), V_stderr=float(V_err), b=tuple(b.tolist()), b_stderr=tuple(b_err.tolist()))


def as_float(x) -> float:
    return float(x)


def as_floats(xs: Iterable) -> tuple:
    return tuple(float(x) for x in xs)


# ---------------------------------------------------------------------------
# floating simplex rule for vectorised mesh work


def simplex_rule(r: int, degree: int):
    """Collapsed Gauss-Jacobi rule on the unit simplex, exact to ``degree``.

    Returns (barycentric points (q, r+1), weights (q,)) with weights summing
    to 1/r!.
    """
    from scipy.special import roots_jacobi, roots_legendre

    n = degree // 2 + 1
    if r == 1:
        t, w = roots_legendre(n)
        x = (t + 1) / 2
        return np.stack([1 - x, x], axis=1), w / 2
    if r == 2:
        ta, wa = roots_jacobi(n, 1.0, 0.0)
        tb, wb = roots_legendre(n)
        a = (ta + 1) / 2
        b = (tb + 1) / 2
        A, B = np.meshgrid(a, b, indexing="ij")
        WA, WB = np.meshgrid(wa / 4, wb / 2, indexing="ij")
        x1 = A.ravel()
        x2 = (B * (1 - A)).ravel()
        return np.stack([1 - x1 - x2, x1, x2], axis=1), (WA * WB).ravel()
    raise ValueError("simplex_rule supports r = 1, 2")
