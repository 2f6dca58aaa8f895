"""Extremal vector field on the toric directions and its affine potential.

Toric coordinates: for a toric basis vector ``t_k`` (in a*), the functional
``y -> <t_k, y> = s_k . y`` with ``s_k = G t_k``.  The field X has coefficients
X^k in this basis and potential

    theta_X(y) = sum_k X^k <t_k, y - b>

chosen so that 1 - theta_X is orthogonal to every toric linear function
under pi dy on the chamber slice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import _linalg as la
from .errors import DimensionMismatch, NotCentral, SingularMomentMatrix
from .geom import MomentPolytope
from .quad import MomentTable
from .rootsys import RootDatum

PD_REL_TOL = 1e-12


@dataclass(frozen=True)
class ExtremalData:
    X: tuple            # coefficients on datum.toric_basis
    slope: tuple        # theta_X(y) = slope . y + const
    const: object
    c_X: object
    C_X: object
    a_matrix: tuple
    rhs: tuple          # toric coordinates of b
    exact: bool

    def theta(self, y: Sequence):
        return la.dot(self.slope, y) + self.const

    def weight(self, y: Sequence):
        """1 - theta_X(y)."""
        return 1 - self.theta(y)


def toric_covectors(datum: RootDatum) -> list:
    return [datum.covector(t) for t in datum.toric_basis]


def _check_pd(a, exact: bool) -> None:
    if not a:
        return
    piv = la.ldl_pivots(a)
    if exact:
        ok = len(piv) == len(a) and all(p > 0 for p in piv)
    else:
        trace = sum(a[i][i] for i in range(len(a)))
        ok = len(piv) == len(a) and all(p > PD_REL_TOL * abs(trace) for p in piv)
    if not ok:
        raise SingularMomentMatrix(f"moment matrix is not positive definite (pivots {[float(p) for p in piv]})")


def solve_extremal(datum: RootDatum, table: MomentTable, polytope: MomentPolytope) -> ExtremalData:
    r = datum.rank
    exact = table.exact and datum.exact
    zero = la.to_scalar(0, exact)
    one = la.to_scalar(1, exact)
    S = toric_covectors(datum)
    b = table.b
    V = table.V
    bt = tuple(la.dot(s, b) for s in S)
    a = tuple(
        tuple(la.dot(sk, la.matvec(table.M2, sl)) / V - la.dot(sk, b) * la.dot(sl, b) for sl in S) for sk in S
    )
    if S:
        _check_pd(a, exact)
        X = la.solve(a, bt)
    else:
        X = ()
    slope = tuple(sum((X[k] * S[k][j] for k in range(len(S))), zero) for j in range(r))
    const = -la.dot(slope, b) if S else zero
    vals = [one - (la.dot(slope, v) + const) for v in polytope.dilate.vertices]
    return ExtremalData(
        X=tuple(X),
        slope=slope,
        const=const,
        c_X=min(vals),
        C_X=max(vals),
        a_matrix=a,
        rhs=bt,
        exact=exact,
    )


def orthogonality_residuals(datum: RootDatum, table: MomentTable, ext: ExtremalData) -> tuple:
    """int <t_k, y> (1 - theta_X) pi dy for each toric basis vector (zero by construction)."""
    out = []
    for s in toric_covectors(datum):
        out.append((1 - ext.const) * la.dot(s, table.first) - la.dot(s, la.matvec(table.M2, ext.slope)))
    return tuple(out)


def theta_mean(table: MomentTable, ext: ExtremalData):
    """(1/V) int theta_X pi dy (zero by construction)."""
    return la.dot(ext.slope, table.b) + ext.const


def futaki(datum: RootDatum, table: MomentTable, Y: Sequence, tol: float = 1e-9):
    """Fut(Y) = -V <Y, b> for a central direction Y."""
    exact = datum.exact and table.exact and la.is_exact(tuple(Y))
    Y = la.vec(Y, exact)
    if len(Y) != datum.rank:
        raise DimensionMismatch(f"Y has dimension {len(Y)}, datum rank is {datum.rank}")
    scale = max([abs(float(x)) for x in Y] + [1.0])
    for alpha in datum.positive_roots:
        p = datum.pair(alpha, Y)
        if (p != 0) if exact else (abs(p) > tol * scale):
            raise NotCentral(f"Y pairs to {p} with root {tuple(map(str, alpha))}")
    return -table.V * datum.pair(Y, table.b)
