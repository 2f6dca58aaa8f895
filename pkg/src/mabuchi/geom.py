"""W-invariant moment polytopes: vertices, chamber slice, triangulation.

Desk-scale only: vertices are enumerated by solving every r-subset of the
defining inequalities, which is exact over the rationals and fine for a few
dozen facets in rank <= 4.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Sequence

from . import _linalg as la
from .errors import FanoWarning, InputError, LowerDimensional, NotWInvariant, Unbounded
from .rootsys import RootDatum, _reflection_matrix

FLOAT_TOL = 1e-9


@dataclass(frozen=True)
class ConvexRegion:
    """Bounded full-dimensional polytope ``{y : n_k . y <= c_k}`` with a triangulation."""

    halfspaces: tuple   # ((normal...), offset)
    vertices: tuple
    simplices: tuple    # each a tuple of r+1 vertex tuples
    exact: bool

    @property
    def dim(self) -> int:
        return len(self.vertices[0])

    @property
    def volume(self):
        return sum(simplex_volume(s) for s in self.simplices)

    def contains(self, y, tol=0.0, strict=False) -> bool:
        for n, c in self.halfspaces:
            s = la.dot(n, y) - c
            if strict:
                if s >= -tol:
                    return False
            elif s > tol:
                return False
        return True

    def bbox(self):
        lo = [min(float(v[i]) for v in self.vertices) for i in range(self.dim)]
        hi = [max(float(v[i]) for v in self.vertices) for i in range(self.dim)]
        return lo, hi

    def scaled(self, lam) -> "ConvexRegion":
        lam = Fraction(lam) if self.exact else float(lam)
        return ConvexRegion(
            halfspaces=tuple((n, c * lam) for n, c in self.halfspaces),
            vertices=tuple(tuple(lam * x for x in v) for v in self.vertices),
            simplices=tuple(tuple(tuple(lam * x for x in v) for v in s) for s in self.simplices),
            exact=self.exact,
        )


@dataclass(frozen=True)
class MomentPolytope:
    halfspaces: tuple      # of P
    vertices: tuple        # of P
    dilate: ConvexRegion   # 2P
    chamber: ConvexRegion  # 2P_+ = 2P cut by the positive Weyl chamber
    fano_flag: bool        # 4 rho strictly inside 2P_+
    exact: bool

    @property
    def rank(self) -> int:
        return len(self.vertices[0])

    @property
    def chamber_slice(self) -> ConvexRegion:
        return self.chamber

    @property
    def triangulation(self) -> tuple:
        return self.chamber.simplices


# ---------------------------------------------------------------------------
# helpers


def simplex_volume(s: Sequence[Sequence]):
    v0 = s[0]
    r = len(v0)
    if r == 0:
        return 1
    m = [[v[i] - v0[i] for i in range(r)] for v in s[1:]]
    return abs(la.det(m)) / factorial(r)


def affine_dim(points, tol=FLOAT_TOL) -> int:
    pts = list(points)
    if not pts:
        return -1
    p0 = pts[0]
    diffs = [[a - b for a, b in zip(p, p0)] for p in pts[1:]]
    return la.rank(diffs, tol) if diffs else 0


def _slack(h, y):
    n, c = h
    return la.dot(n, y) - c


def _is_tight(h, y, exact, tol):
    s = _slack(h, y)
    return s == 0 if exact else abs(s) <= tol


def _feasible(halfspaces, y, exact, tol):
    if exact:
        return all(_slack(h, y) <= 0 for h in halfspaces)
    return all(_slack(h, y) <= tol for h in halfspaces)


def _dedupe(points, exact, tol):
    out = []
    for p in points:
        if exact:
            if p not in out:
                out.append(p)
        elif not any(max(abs(a - b) for a, b in zip(p, q)) <= tol for q in out):
            out.append(p)
    return out


def check_bounded(halfspaces, r: int, exact: bool, tol=FLOAT_TOL) -> None:
    """Raise :class:`Unbounded` if the recession cone is not {0}."""
    normals = [n for n, _ in halfspaces]
    if la.rank(normals, tol) < r:
        raise Unbounded("inequality normals do not span the space")
    for sub in itertools.combinations(range(len(normals)), r - 1):
        rows = [normals[i] for i in sub]
        ns = la.nullspace(rows, r, exact, tol)
        if len(ns) != 1:
            continue
        d = ns[0]
        for sign in (1, -1):
            dd = tuple(sign * x for x in d)
            vals = [la.dot(n, dd) for n in normals]
            if all((v <= 0) if exact else (v <= tol) for v in vals):
                raise Unbounded(f"recession direction {tuple(map(str, dd))}")


def enumerate_vertices(halfspaces, r: int, exact: bool, tol=FLOAT_TOL) -> list:
    verts = []
    for sub in itertools.combinations(halfspaces, r):
        a = [n for n, _ in sub]
        b = [c for _, c in sub]
        try:
            y = la.solve(a, b, tol)
        except ZeroDivisionError:
            continue
        if _feasible(halfspaces, y, exact, tol * 10):
            verts.append(tuple(y))
    verts = _dedupe(verts, exact, tol * 10)
    return sorted(verts, key=lambda v: tuple(float(x) for x in v))


def triangulate(vertices, halfspaces, exact: bool, apex="lexmin", tol=FLOAT_TOL) -> list:
    """Pulling triangulation of conv(vertices).

    ``apex`` is ``"lexmin"``, ``"lexmax"`` or an explicit point of the polytope
    (e.g. the origin), which is coned over every facet not containing it.
    Lower faces are always pulled from their lexicographically smallest vertex.
    """
    verts = list(vertices)
    dim = affine_dim(verts, tol)
    tight = [
        frozenset(i for i, v in enumerate(verts) if _is_tight(h, v, exact, tol)) for h in halfspaces
    ]
    key = lambda i: tuple(float(x) for x in verts[i])  # noqa: E731

    def rec(idx: frozenset, d: int, pick: str):
        if d == 0:
            return [(min(idx, key=key),)]
        a = min(idx, key=key) if pick == "lexmin" else max(idx, key=key)
        facets = set()
        for t in tight:
            f = idx & t
            if a in f or len(f) < d:
                continue
            if affine_dim([verts[i] for i in f], tol) == d - 1:
                facets.add(frozenset(f))
        out = []
        for f in sorted(facets, key=lambda s: sorted(s)):
            for s in rec(f, d - 1, "lexmin"):
                out.append((a,) + s)
        return out

    all_idx = frozenset(range(len(verts)))
    if isinstance(apex, str):
        simp = rec(all_idx, dim, apex)
        return [tuple(verts[i] for i in s) for s in simp]
    # explicit apex point
    p = tuple(apex)
    out = []
    facets = set()
    for h, t in zip(halfspaces, tight):
        if _is_tight(h, p, exact, tol):
            continue
        if affine_dim([verts[i] for i in t], tol) == dim - 1:
            facets.add(t)
    for f in sorted(facets, key=lambda s: sorted(s)):
        for s in rec(f, dim - 1, "lexmin"):
            out.append((p,) + tuple(verts[i] for i in s))
    return out


def make_region(halfspaces, r: int, exact: bool, apex="lexmin", tol=FLOAT_TOL) -> ConvexRegion:
    halfspaces = [(la.vec(n, exact), la.to_scalar(c, exact)) for n, c in halfspaces]
    check_bounded(halfspaces, r, exact, tol)
    verts = enumerate_vertices(halfspaces, r, exact, tol)
    if not verts or affine_dim(verts, tol) < r:
        raise LowerDimensional("polytope is empty or not full-dimensional")
    simp = triangulate(verts, halfspaces, exact, apex, tol)
    return ConvexRegion(tuple(halfspaces), tuple(verts), tuple(simp), exact)


def retriangulate(region: ConvexRegion, apex) -> ConvexRegion:
    simp = triangulate(region.vertices, region.halfspaces, region.exact, apex)
    return ConvexRegion(region.halfspaces, region.vertices, tuple(simp), region.exact)


# ---------------------------------------------------------------------------


def _parse_halfspaces(halfspaces, r, exact):
    out = []
    for h in halfspaces:
        if isinstance(h, dict):
            n, c = h["normal"], h["offset"]
        else:
            n, c = h
        if len(n) != r:
            raise InputError(f"halfspace normal {n} has dimension {len(n)}, expected {r}")
        out.append((la.vec(n, exact), la.to_scalar(c, exact)))
    if not out:
        raise InputError("need at least one halfspace")
    return out


def check_w_invariance(vertices, datum: RootDatum, exact: bool, tol=FLOAT_TOL) -> None:
    vs = set(vertices) if exact else None
    for alpha in datum.simple_roots:
        s = _reflection_matrix(alpha, datum.gram)
        for v in vertices:
            img = la.matvec(s, v)
            if exact:
                ok = img in vs
            else:
                ok = any(max(abs(float(a) - float(b)) for a, b in zip(img, q)) <= tol for q in vertices)
            if not ok:
                raise NotWInvariant(
                    f"reflection in {tuple(map(str, alpha))} maps vertex {tuple(map(str, v))} outside the vertex set",
                    element=s,
                    vertex=v,
                )


def build_polytope(halfspaces, datum: RootDatum, *, apex="lexmin", exact: bool | None = None) -> MomentPolytope:
    """Validate P and derive 2P and the chamber slice 2P_+.

    Emits :class:`FanoWarning` when 4 rho is not interior to 2P_+.
    """
    r = datum.rank
    if exact is None:
        raw = [list(h["normal"]) + [h["offset"]] if isinstance(h, dict) else list(h[0]) + [h[1]] for h in halfspaces]
        exact = datum.exact and la.is_exact(raw)
    hs = _parse_halfspaces(halfspaces, r, exact)
    check_bounded(hs, r, exact)
    verts = enumerate_vertices(hs, r, exact)
    if not verts or affine_dim(verts) < r:
        raise LowerDimensional("polytope is empty or not full-dimensional")
    check_w_invariance(verts, datum, exact)

    two = Fraction(2) if exact else 2.0
    hs2 = [(n, two * c) for n, c in hs]
    dil = make_region(hs2, r, exact, apex)

    walls = []
    for alpha in datum.simple_roots:
        cov = la.matvec(datum.gram, alpha)
        walls.append((tuple(-x for x in cov), 0 * two))
    cham = make_region(hs2 + walls, r, exact, apex)

    four_rho = tuple(4 * x for x in datum.rho)
    fano = cham.contains(four_rho, tol=0 if exact else FLOAT_TOL, strict=True)
    if not fano:
        warnings.warn(
            f"4*rho = {tuple(map(str, four_rho))} is not an interior point of 2P_+",
            FanoWarning,
            stacklevel=2,
        )
    return MomentPolytope(
        halfspaces=tuple(hs),
        vertices=tuple(verts),
        dilate=dil,
        chamber=cham,
        fano_flag=fano,
        exact=exact,
    )


def box(lo, hi):
    """Halfspaces of an axis-aligned box (convenience for fixtures)."""
    r = len(lo)
    hs = []
    for i in range(r):
        e = [0] * r
        e[i] = 1
        hs.append((tuple(e), hi[i]))
        e = [0] * r
        e[i] = -1
        hs.append((tuple(e), -lo[i]))
    return hs
