"""Root data, Weyl groups and the positive-root cone.

A :class:`RootDatum` lives on ``a*`` = R^r with a user supplied scalar product
``gram``.  Simple roots are coordinate vectors in ``a*``; ``<a, b>`` always
means ``a^T gram b``.  Everything is exact (``Fraction``) when the inputs are
rational and float otherwise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

from . import _linalg as la
from .errors import (
    DependentRoots,
    DimensionMismatch,
    InputError,
    NonCrystallographic,
    NonPositiveGram,
    WeylOverflow,
)

DEFAULT_WEYL_CAP = 10_000
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class RootDatum:
    rank: int
    gram: tuple
    simple_roots: tuple
    positive_roots: tuple
    weyl_elements: tuple
    rho: tuple
    toric_basis: tuple
    exact: bool
    name: str = field(default="", compare=False)

    @property
    def manifold_dim(self) -> int:
        return self.rank + 2 * len(self.positive_roots)

    @property
    def toric_rank(self) -> int:
        return len(self.toric_basis)

    @property
    def semisimple_rank(self) -> int:
        return len(self.simple_roots)

    @property
    def weyl_order(self) -> int:
        return len(self.weyl_elements)

    def pair(self, a: Sequence, b: Sequence):
        """Scalar product ``<a, b>`` on a*."""
        return la.dot(a, la.matvec(self.gram, b))

    def covector(self, a: Sequence) -> tuple:
        """Coordinate covector ``gram @ a``, so that ``<a, y> = covector(a) . y``."""
        return la.matvec(self.gram, a)

    def reflect(self, alpha: Sequence, v: Sequence) -> tuple:
        c = 2 * self.pair(alpha, v) / self.pair(alpha, alpha)
        return tuple(x - c * a for x, a in zip(v, alpha))

    def zero(self):
        return Fraction(0) if self.exact else 0.0


# ---------------------------------------------------------------------------
# construction


def _reflection_matrix(alpha, gram) -> tuple:
    r = len(alpha)
    ga = la.matvec(gram, alpha)
    aa = la.dot(alpha, ga)
    exact = la.is_exact(alpha, gram)
    eye = la.identity(r, exact)
    return tuple(
        tuple(eye[i][j] - 2 * alpha[i] * ga[j] / aa for j in range(r)) for i in range(r)
    )


def _key(v, exact):
    if exact:
        return tuple(v)
    return tuple(round(float(x), 9) + 0.0 for x in v)


def _check_gram(gram, r, exact):
    if len(gram) != r or any(len(row) != r for row in gram):
        raise DimensionMismatch(f"gram must be {r}x{r}")
    for i in range(r):
        for j in range(r):
            if gram[i][j] != gram[j][i]:
                if exact or abs(gram[i][j] - gram[j][i]) > 1e-12:
                    raise NonPositiveGram("gram is not symmetric")
    piv = la.ldl_pivots(gram)
    if any((p <= 0 if exact else p <= 1e-14) for p in piv):
        raise NonPositiveGram("gram is not positive definite")


def from_simple_roots(
    gram,
    simple_roots,
    *,
    rank: int | None = None,
    exact: bool | None = None,
    weyl_cap: int = DEFAULT_WEYL_CAP,
    name: str = "",
) -> RootDatum:
    """Build a root datum from a scalar product and simple roots.

    Positive roots come from closing the simple roots under simple
    reflections; the Weyl group from closing the simple reflections under
    composition.
    """
    if exact is None:
        exact = la.is_exact(gram, simple_roots)
    if rank is None:
        rank = len(gram)
    gram = la.mat(gram, exact)
    simple = tuple(la.vec(a, exact) for a in simple_roots)
    r = rank
    _check_gram(gram, r, exact)
    for a in simple:
        if len(a) != r:
            raise DimensionMismatch(f"simple root {a} has dimension {len(a)}, expected {r}")
    if simple and la.rank(simple, 1e-12) < len(simple):
        raise DependentRoots("simple roots are linearly dependent")

    def pair(a, b):
        return la.dot(a, la.matvec(gram, b))

    for i, ai in enumerate(simple):
        for j, aj in enumerate(simple):
            if i == j:
                continue
            c = 2 * pair(ai, aj) / pair(aj, aj)
            if exact:
                ok = c.denominator == 1 and c <= 0
            else:
                ok = abs(c - round(c)) < 1e-9 and c < 1e-9
            if not ok:
                raise NonCrystallographic(
                    f"Cartan integer 2<a{i},a{j}>/<a{j},a{j}> = {c} is not a nonpositive integer"
                )

    refl = [_reflection_matrix(a, gram) for a in simple]

    # positive roots: orbit of the simple roots under simple reflections,
    # discarding the single sign flip s_a(a) = -a
    roots = {_key(a, exact): a for a in simple}
    frontier = list(simple)
    max_roots = weyl_cap * max(1, len(simple))
    while frontier:
        new = []
        for beta in frontier:
            for a, s in zip(simple, refl):
                img = la.matvec(s, beta)
                if _key(img, exact) == _key(tuple(-x for x in a), exact):
                    continue
                k = _key(img, exact)
                if k not in roots:
                    roots[k] = img
                    new.append(img)
                    if len(roots) > max_roots:
                        raise WeylOverflow("root closure does not terminate (infinite type?)")
        frontier = new
    positive = tuple(sorted(roots.values(), key=lambda v: [float(x) for x in v]))

    # Weyl group: BFS over words in simple reflections
    eye = la.identity(r, exact)
    elems = {_key([x for row in eye for x in row], exact): eye}
    frontier = [eye]
    while frontier:
        new = []
        for w in frontier:
            for s in refl:
                ws = la.matmul(s, w)
                k = _key([x for row in ws for x in row], exact)
                if k not in elems:
                    elems[k] = ws
                    new.append(ws)
                    if len(elems) > weyl_cap:
                        raise WeylOverflow(f"|W| exceeds cap {weyl_cap}")
        frontier = new
    weyl = tuple(elems.values())

    zero = Fraction(0) if exact else 0.0
    rho = tuple(sum((b[i] for b in positive), zero) / 2 for i in range(r))

    # a*_t: gram-orthogonal complement of the simple roots
    constraints = [la.matvec(gram, a) for a in simple]
    toric = tuple(la.nullspace(constraints, r, exact))

    return RootDatum(
        rank=r,
        gram=gram,
        simple_roots=simple,
        positive_roots=positive,
        weyl_elements=weyl,
        rho=rho,
        toric_basis=toric,
        exact=exact,
        name=name,
    )


# ---------------------------------------------------------------------------
# named types

def _cartan_matrix(letter: str, n: int) -> list:
    """Cartan matrix A_ij = 2<a_i,a_j>/<a_j,a_j> (Bourbaki numbering)."""
    a = [[0] * n for _ in range(n)]
    for i in range(n):
        a[i][i] = 2
    for i in range(n - 1):
        a[i][i + 1] = a[i + 1][i] = -1
    if letter == "A":
        pass
    elif letter == "B":
        if n >= 2:
            a[n - 2][n - 1] = -2  # a_{n-1} long, a_n short
    elif letter == "C":
        if n >= 2:
            a[n - 1][n - 2] = -2
    elif letter == "D":
        if n < 4:
            raise InputError("D_n needs n >= 4")
        a[n - 2][n - 1] = a[n - 1][n - 2] = 0
        a[n - 3][n - 1] = a[n - 1][n - 3] = -1
    elif letter == "G":
        if n != 2:
            raise InputError("only G2 exists")
        a[0][1], a[1][0] = -1, -3  # a_1 short, a_2 long
    elif letter == "F":
        if n != 4:
            raise InputError("only F4 exists")
        a[1][2] = -2
    elif letter == "E":
        if n not in (6, 7, 8):
            raise InputError("E_n needs n in 6, 7, 8")
        a = [[0] * n for _ in range(n)]
        for i in range(n):
            a[i][i] = 2
        edges = [(0, 2), (2, 3), (3, 4), (1, 3)] + [(k, k + 1) for k in range(4, n - 1)]
        for i, j in edges:
            a[i][j] = a[j][i] = -1
    else:
        raise InputError(f"unknown Cartan type {letter}{n}")
    return a


def _block(letter: str, n: int):
    """Rational realisation of one simple factor: (gram, simple_roots)."""
    F = Fraction
    if letter == "A" and n == 1:
        return [[F(1)]], [[F(2)]]
    if letter == "B":
        roots = []
        for i in range(n - 1):
            v = [F(0)] * n
            v[i], v[i + 1] = F(1), F(-1)
            roots.append(v)
        v = [F(0)] * n
        v[n - 1] = F(1)
        roots.append(v)
        return [[F(int(i == j)) for j in range(n)] for i in range(n)], roots
    if letter == "C":
        roots = []
        for i in range(n - 1):
            v = [F(0)] * n
            v[i], v[i + 1] = F(1), F(-1)
            roots.append(v)
        v = [F(0)] * n
        v[n - 1] = F(2)
        roots.append(v)
        return [[F(int(i == j)) for j in range(n)] for i in range(n)], roots
    # simple-root coordinates with the symmetrised Cartan matrix as scalar product
    a = _cartan_matrix(letter, n)
    # d_j = <a_j,a_j>/2, so <a_i,a_j> = A_ij d_j; propagate along the connected Dynkin graph
    d = [None] * n
    d[0] = F(1)
    stack = [0]
    while stack:
        j = stack.pop()
        for i in range(n):
            if i != j and a[i][j] != 0 and d[i] is None:
                d[i] = F(a[i][j]) * d[j] / a[j][i]
                stack.append(i)
    scale = 1 / min(d)
    d = [x * scale for x in d]
    gram = [[a[i][j] * d[j] for j in range(n)] for i in range(n)]
    roots = [[F(int(i == j)) for j in range(n)] for i in range(n)]
    return gram, roots


_NAME_RE = re.compile(r"^([ABCDEFGT])(\d+)$")


def named(name: str, *, weyl_cap: int = DEFAULT_WEYL_CAP) -> RootDatum:
    """Root datum of a named type, e.g. ``"A1"``, ``"B2"``, ``"G2"``, ``"T2"``,
    or a product such as ``"A1xT1"``.

    ``T<k>`` is a k-dimensional torus (no roots).  Products are block diagonal.
    """
    blocks = []
    for part in name.replace("*", "x").split("x"):
        m = _NAME_RE.match(part.strip())
        if not m:
            raise InputError(f"cannot parse root type {part!r}")
        letter, n = m.group(1), int(m.group(2))
        if n < 1:
            raise InputError(f"bad rank in {part!r}")
        if letter == "T":
            blocks.append(([[Fraction(int(i == j)) for j in range(n)] for i in range(n)], []))
        else:
            blocks.append(_block(letter, n))
    r = sum(len(g) for g, _ in blocks)
    gram = [[Fraction(0)] * r for _ in range(r)]
    roots = []
    off = 0
    for g, rs in blocks:
        k = len(g)
        for i in range(k):
            for j in range(k):
                gram[off + i][off + j] = g[i][j]
        for a in rs:
            v = [Fraction(0)] * r
            v[off : off + k] = a
            roots.append(v)
        off += k
    return from_simple_roots(gram, roots, rank=r, exact=True, weyl_cap=weyl_cap, name=name)


def build_root_datum(spec, *, weyl_cap: int = DEFAULT_WEYL_CAP, exact: bool | None = None) -> RootDatum:
    """Build a datum from a type name or a mapping ``{gram, simple_roots[, rank]}``."""
    if isinstance(spec, str):
        return named(spec, weyl_cap=weyl_cap)
    if "type" in spec:
        return named(spec["type"], weyl_cap=spec.get("weyl_cap", weyl_cap))
    simple = spec.get("simple_roots", [])
    rank = spec.get("rank")
    gram = spec.get("gram")
    if gram is None:
        if rank is None:
            if not simple:
                raise InputError("need rank, gram or simple roots")
            rank = len(simple[0])
        gram = [[int(i == j) for j in range(rank)] for i in range(rank)]
    return from_simple_roots(gram, simple, rank=rank, exact=exact, weyl_cap=weyl_cap)


# ---------------------------------------------------------------------------
# cone classification


class ConeKind(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class ConePosition:
    kind: ConeKind
    coeffs: tuple          # coefficients on the simple roots
    residual: tuple        # toric part w of v
    residual_norm: float   # sqrt(<w, w>)

    @property
    def min_coeff(self):
        return min(self.coeffs) if self.coeffs else None


def decompose(v: Sequence, datum: RootDatum):
    """Split ``v = sum c_i alpha_i + w`` with ``w`` gram-orthogonal to the roots."""
    if len(v) != datum.rank:
        raise DimensionMismatch(f"vector has dimension {len(v)}, datum rank is {datum.rank}")
    v = la.vec(v, datum.exact and la.is_exact(tuple(v)))
    simple = datum.simple_roots
    if not simple:
        return (), tuple(v)
    g = [[datum.pair(a, b) for b in simple] for a in simple]
    rhs = [datum.pair(a, v) for a in simple]
    c = la.solve(g, rhs)
    w = tuple(x - sum(ci * a[i] for ci, a in zip(c, simple)) for i, x in enumerate(v))
    return tuple(c), w


def cone_position(v: Sequence, datum: RootDatum, tol=None) -> ConePosition:
    """Classify ``v`` against Xi, the relative interior of the cone over Phi_+.

    ``tol=None`` means exact zero for rational input and 1e-9 otherwise.  With
    no roots, Xi = {0}.
    """
    c, w = decompose(v, datum)
    exact = la.is_exact(c, w)
    if tol is None:
        tol = 0 if exact else DEFAULT_TOL
    ww = datum.pair(w, w)
    wnorm = float(ww) ** 0.5
    small_w = ww <= tol * tol if exact else wnorm <= tol
    if small_w and all(ci > tol for ci in c):
        kind = ConeKind.INTERIOR
    elif small_w and all(ci >= -tol for ci in c) and any(abs(ci) <= tol for ci in c):
        kind = ConeKind.BOUNDARY
    else:
        kind = ConeKind.OUTSIDE
    return ConePosition(kind, tuple(c), tuple(w), wnorm)


def toric_coordinates(y: Sequence, datum: RootDatum) -> tuple:
    """Coordinates ``<t_k, y>`` of ``y`` against the toric basis."""
    return tuple(datum.pair(t, y) for t in datum.toric_basis)


def coweights(datum: RootDatum):
    """Fundamental coweights in ``a``: x with ``alpha_i . x = delta_ij`` and no toric part.

    The semisimple part of ``a`` is spanned by the vectors ``G alpha`` (they
    annihilate the toric functionals), so x = G A^T (A G A^T)^{-1} e_i.  The
    closed chamber of ``a`` is the nonnegative span of these plus the toric
    directions.
    """
    simple = datum.simple_roots
    if not simple:
        return []
    ga = [datum.covector(a) for a in simple]
    inv = la.inverse([[la.dot(a, g) for g in ga] for a in simple])
    out = []
    for i in range(len(simple)):
        out.append(tuple(sum(inv[k][i] * ga[k][j] for k in range(len(simple))) for j in range(datum.rank)))
    return out


def toric_directions(datum: RootDatum):
    """Basis of the toric part of ``a`` (vectors killed by every root)."""
    return [datum.covector(t) for t in datum.toric_basis]
