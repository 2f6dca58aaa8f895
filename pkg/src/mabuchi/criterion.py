"""Weighted barycenter b_X and the existence certificate.

The verdict is three-valued.  A margin within ``tol`` of zero (exactly zero
in rational mode) gives Inconclusive, annotated ``boundary`` for the shift
and ``c_X=0`` for the extremal margin, unless another margin already rules
existence out.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _linalg as la
from .errors import FanoWarning, RayOutsideChamber
from .extremal import ExtremalData, solve_extremal
from .geom import MomentPolytope, build_polytope
from .quad import DensityPoly, MomentTable, expand_pi, moments
from .rootsys import ConeKind, ConePosition, RootDatum, coweights, cone_position, toric_directions

DEFAULT_TOL = 1e-9


class Verdict(str, enum.Enum):
    EXISTS = "Exists"
    NOT_EXISTS = "NotExists"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Certificate:
    b_X: tuple
    shift: tuple
    cone: ConePosition
    c_X: object
    C_X: object
    verdict: Verdict
    annotation: str | None
    margins: dict
    fano_flag: bool
    exact: bool
    tol: float

    def to_dict(self) -> dict:
        fmt = _fmt
        return {
            "verdict": self.verdict.value,
            "annotation": self.annotation,
            "exact": self.exact,
            "tol": self.tol,
            "b_X": [fmt(x) for x in self.b_X],
            "shift": [fmt(x) for x in self.shift],
            "cone": {
                "kind": self.cone.kind.value,
                "coeffs": [fmt(x) for x in self.cone.coeffs],
                "residual": [fmt(x) for x in self.cone.residual],
            },
            "c_X": fmt(self.c_X),
            "C_X": fmt(self.C_X),
            "margins": {k: (None if v is None else fmt(v)) for k, v in self.margins.items()},
            "fano_flag": self.fano_flag,
        }


def _fmt(x):
    if isinstance(x, (int,)) or hasattr(x, "denominator") and not isinstance(x, float):
        return str(x)
    return float(x)


@dataclass(frozen=True)
class Instance:
    """Everything computed on the way to a certificate."""

    datum: RootDatum
    polytope: MomentPolytope
    pi: DensityPoly
    table: MomentTable
    extremal: ExtremalData
    certificate: Certificate = field(repr=False)


def weighted_barycenter(table: MomentTable, ext: ExtremalData) -> tuple:
    """(1/V) int y (1 - theta_X(y)) pi dy, from the moment table."""
    m2s = la.matvec(table.M2, ext.slope)
    return tuple(((1 - ext.const) * f - m) / table.V for f, m in zip(table.first, m2s))


def _verdict(c_X, pos: ConePosition, exact: bool, tol: float):
    c = c_X if exact else float(c_X)
    t = 0 if exact else tol
    if c < -t or pos.kind is ConeKind.OUTSIDE:
        return Verdict.NOT_EXISTS, None
    notes = []
    if pos.kind is ConeKind.BOUNDARY:
        notes.append("boundary")
    if c <= t:
        notes.append("c_X=0")
    if notes:
        return Verdict.INCONCLUSIVE, ",".join(notes)
    return Verdict.EXISTS, None


def analyze(datum: RootDatum, polytope, tol: float | None = None) -> Instance:
    """Full pipeline: moments, extremal field, b_X, cone test."""
    if not isinstance(polytope, MomentPolytope):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FanoWarning)
            polytope = build_polytope(polytope, datum)
    pi = expand_pi(datum)
    if not polytope.exact:
        pi = DensityPoly({e: float(c) for e, c in pi.terms.items()}, pi.nvars)
    table = moments(polytope.chamber, pi)
    ext = solve_extremal(datum, table, polytope)
    exact = ext.exact and polytope.exact
    if tol is None:
        tol = 0 if exact else DEFAULT_TOL
    bX = weighted_barycenter(table, ext)
    four_rho = tuple(4 * x for x in datum.rho)
    shift = tuple(a - b for a, b in zip(bX, four_rho))
    pos = cone_position(shift, datum, tol if not exact else 0)
    verdict, note = _verdict(ext.c_X, pos, exact, tol)
    cert = Certificate(
        b_X=bX,
        shift=shift,
        cone=pos,
        c_X=ext.c_X,
        C_X=ext.C_X,
        verdict=verdict,
        annotation=note,
        margins={
            "min_coeff": pos.min_coeff,
            "toric_residual": pos.residual_norm,
            "c_X": ext.c_X,
        },
        fano_flag=polytope.fano_flag,
        exact=exact,
        tol=float(tol),
    )
    return Instance(datum, polytope, pi, table, ext, cert)


def check_existence(datum: RootDatum, polytope, tol: float | None = None) -> Certificate:
    return analyze(datum, polytope, tol).certificate


# ---------------------------------------------------------------------------
# necessity probe


@dataclass(frozen=True)
class ProbeResult:
    rays: tuple
    pairings: tuple
    consistent: bool
    note: str


def _ss_norm(xi, datum: RootDatum) -> float:
    """Euclidean norm of the semisimple part of ``xi`` (toric directions removed)."""
    x = np.array([float(v) for v in xi])
    T = np.array([[float(v) for v in t] for t in toric_directions(datum)]).reshape(-1, datum.rank)
    if len(T):
        q, _ = np.linalg.qr(T.T)
        x = x - q @ (q.T @ x)
    return float(np.linalg.norm(x))


def sample_chamber_rays(datum: RootDatum, count: int, seed: int) -> list:
    """Random rays in the open chamber with unit semisimple part."""
    rng = np.random.default_rng(seed)
    cw = np.array([[float(v) for v in w] for w in coweights(datum)]).reshape(-1, datum.rank)
    rays = []
    for _ in range(count):
        if len(cw):
            c = rng.exponential(size=len(cw)) + 1e-3
            x = c @ cw
            x = x / _ss_norm(x, datum)
        else:
            x = rng.normal(size=datum.rank)
            x = x / np.linalg.norm(x)
        rays.append(tuple(x.tolist()))
    return rays


def necessity_probe(
    cert: Certificate,
    datum: RootDatum,
    rays: Sequence | None = None,
    count: int = 0,
    seed: int = 0,
    tol: float | None = None,
) -> ProbeResult:
    """Pairings <xi, b_X - 4 rho> over chamber rays xi.

    Rays must satisfy alpha(xi) > 0 for every positive root.  Consistency:
    Exists requires every pairing positive; an exact NotExists outside the
    closed cone must be witnessed by a non-positive pairing on some extreme
    ray of the chamber (the coweights), which are always appended.
    """
    tol = cert.tol if tol is None else tol
    rays = [tuple(r) for r in (rays or [])]
    for xi in rays:
        if len(xi) != datum.rank:
            raise RayOutsideChamber(f"ray {xi} has wrong dimension")
        for alpha in datum.positive_roots:
            if float(la.dot(alpha, xi)) <= 0:
                raise RayOutsideChamber(f"ray {xi} fails alpha(xi) > 0 for alpha={tuple(map(str, alpha))}")
    if count:
        rays += sample_chamber_rays(datum, count, seed)
    extreme = [tuple(float(v) for v in w) for w in coweights(datum)]
    shift = [float(x) for x in cert.shift]
    pair = lambda xi: float(np.dot(np.array(xi, dtype=float), shift))  # noqa: E731
    pairings = tuple(pair(xi) for xi in rays)
    ext_pairs = [pair(xi) for xi in extreme]
    kind = cert.cone.kind
    if not datum.positive_roots:
        zero = all(abs(p) <= max(tol, 1e-12) for p in pairings)
        ok = zero if kind is ConeKind.INTERIOR else (not pairings or not zero)
        return ProbeResult(tuple(rays), pairings, ok, "boundary-consistent" if zero else "toric shift nonzero")
    if kind is ConeKind.INTERIOR:
        ok = all(p > 0 for p in pairings) and all(p > 0 for p in ext_pairs)
        note = "all pairings positive" if ok else "non-positive pairing for an interior shift"
    elif kind is ConeKind.OUTSIDE:
        ok = any(p < -tol for p in pairings + tuple(ext_pairs)) or cert.cone.residual_norm > tol
        note = "witnessed by a negative pairing" if ok else "no ray witnesses the outside shift"
    else:
        ok = all(p >= -max(tol, 1e-12) for p in pairings + tuple(ext_pairs))
        note = "boundary-consistent"
    return ProbeResult(tuple(rays), pairings, ok, note)
