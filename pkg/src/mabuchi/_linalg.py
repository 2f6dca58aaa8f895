"""Small dense linear algebra over exact rationals or floats.

Matrices are lists of rows.  Entries may be :class:`fractions.Fraction`
(exact, pivot test ``x != 0``) or ``float`` (partial pivoting, pivot test
``abs(x) > tol``).  Sizes here never exceed a dozen rows, so clarity wins over
speed.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Scalar = "Fraction | float"


def is_exact(*items) -> bool:
    """True when every scalar reachable in ``items`` is an int or Fraction."""
    stack = list(items)
    while stack:
        x = stack.pop()
        if isinstance(x, (list, tuple)):
            stack.extend(x)
        elif not isinstance(x, (int, Fraction)) or isinstance(x, bool):
            return False
    return True


def to_scalar(x, exact: bool):
    if exact:
        if isinstance(x, float):
            return Fraction(x)
        return Fraction(x)
    return float(x)


def vec(xs, exact: bool) -> tuple:
    return tuple(to_scalar(x, exact) for x in xs)


def mat(rows, exact: bool) -> tuple:
    return tuple(vec(r, exact) for r in rows)


def dot(a: Sequence, b: Sequence):
    if len(a) != len(b):
        raise ValueError("dimension mismatch")
    s = 0
    for x, y in zip(a, b):
        s += x * y
    return s


def matvec(m: Sequence[Sequence], v: Sequence) -> tuple:
    return tuple(dot(row, v) for row in m)


def matmul(a, b) -> tuple:
    bt = list(zip(*b))
    return tuple(tuple(dot(row, col) for col in bt) for row in a)


def transpose(a) -> tuple:
    return tuple(tuple(c) for c in zip(*a))


def identity(n: int, exact: bool) -> tuple:
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    return tuple(tuple(one if i == j else zero for j in range(n)) for i in range(n))


def _nonzero(x, tol) -> bool:
    if isinstance(x, Fraction):
        return x != 0
    return abs(x) > tol


def rref(a, tol: float = 1e-12):
    """Reduced row echelon form; returns (rows, pivot_columns)."""
    m = [list(r) for r in a]
    if not m:
        return m, []
    nrows, ncols = len(m), len(m[0])
    pivots = []
    row = 0
    for col in range(ncols):
        if row >= nrows:
            break
        best = None
        for i in range(row, nrows):
            if _nonzero(m[i][col], tol):
                if best is None:
                    best = i
                    if isinstance(m[i][col], Fraction):
                        break
                elif abs(m[i][col]) > abs(m[best][col]):
                    best = i
        if best is None:
            continue
        m[row], m[best] = m[best], m[row]
        p = m[row][col]
        m[row] = [x / p for x in m[row]]
        for i in range(nrows):
            if i != row and _nonzero(m[i][col], 0.0):
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[row])]
        pivots.append(col)
        row += 1
    return m, pivots


def rank(a, tol: float = 1e-12) -> int:
    if not a:
        return 0
    return len(rref(a, tol)[1])


def nullspace(a, ncols: int, exact: bool, tol: float = 1e-12) -> list:
    """Basis of {x : a x = 0}; ``ncols`` is needed when ``a`` has no rows."""
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
    if not a:
        return [tuple(one if i == j else zero for i in range(ncols)) for j in range(ncols)]
    r, piv = rref(a, tol)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        x = [zero] * ncols
        x[f] = one
        for i, pc in enumerate(piv):
            x[pc] = -r[i][f]
        basis.append(tuple(x))
    return basis


def solve(a, b, tol: float = 1e-12) -> tuple:
    """Solve the square system ``a x = b``; raises ZeroDivisionError if singular."""
    n = len(a)
    aug = [list(row) + [bi] for row, bi in zip(a, b)]
    r, piv = rref(aug, tol)
    if piv[:n] != list(range(n)) or len(piv) > n:
        raise ZeroDivisionError("singular system")
    return tuple(r[i][n] for i in range(n))


def inverse(a, tol: float = 1e-12) -> tuple:
    n = len(a)
    exact = is_exact(a)
    aug = [list(row) + list(e) for row, e in zip(a, identity(n, exact))]
    r, piv = rref(aug, tol)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return tuple(tuple(r[i][n:]) for i in range(n))


def det(a):
    n = len(a)
    if n == 0:
        return 1
    m = [list(r) for r in a]
    d = 1
    for c in range(n):
        p = max(range(c, n), key=lambda i: abs(m[i][c]))
        if m[p][c] == 0:
            return 0 * m[0][0]
        if p != c:
            m[c], m[p] = m[p], m[c]
            d = -d
        d = d * m[c][c]
        for i in range(c + 1, n):
            f = m[i][c] / m[c][c]
            if f != 0:
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return d


def ldl_pivots(a) -> list:
    """Pivots of the symmetric LDL^T factorisation (no pivoting).

    All pivots positive  <=>  ``a`` is positive definite.
    """
    n = len(a)
    m = [list(r) for r in a]
    piv = []
    for k in range(n):
        p = m[k][k]
        piv.append(p)
        if p == 0:
            return piv
        for i in range(k + 1, n):
            f = m[i][k] / p
            for j in range(k + 1, n):
                m[i][j] = m[i][j] - f * m[k][j]
    return piv
