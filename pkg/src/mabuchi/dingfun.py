"""Reduced Ding-type functionals on discrete convex potentials (rank <= 2).

A potential is a vector of values on the nodes of a simplicial mesh of the
chamber slice 2P_+; W-invariance is built in because the chamber slice is a
fundamental domain.  Two views of the same data are used:

* the P1 interpolant on the mesh, which enters every y-space integral (it is
  linear in the node values, so L is linear and the solver objective convex);
* the Legendre dual psi(x) = max_j (x . y_j - u_j), which enters F.  For node
  values whose interpolant is convex the two views are exact conjugates.

On the chamber a_+ only chamber nodes can attain the max, so F integrates
over the power cells of the chamber nodes alone.  With
psi~ = psi - 4rho . x,

    int_{a_+} e^{-psi} prod sinh^2(alpha) dx
        = int_{a_+} e^{-psi~} prod ((1 - e^{-2 alpha})/2)^2 dx,

and the right side is a finite sum of exponentials of affine functions on
every cell, integrated in closed form.  The domain is truncated to a box
[-R, R]^r whose radius is picked from the decay rate of psi~.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _cells
from . import _linalg as la
from .criterion import Instance
from .errors import (
    EmptyFamily,
    FourRhoOutside,
    InputError,
    MismatchedInstances,
    NonDecaying,
    OriginOutside,
    RankTooHigh,
    TailTooLarge,
)
from .geom import retriangulate
from .quad import DensityPoly, simplex_rule
from .rootsys import coweights

BARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# mesh


@dataclass(eq=False)
class Mesh:
    nodes: np.ndarray          # (m, r)
    simplices: np.ndarray      # (k, r+1)
    exact_nodes: tuple | None = None

    def __post_init__(self):
        v = self.nodes[self.simplices]                      # (k, r+1, r)
        self._edges = v[:, 1:, :] - v[:, :1, :]             # (k, r, r)
        self._inv = np.linalg.inv(self._edges)              # rows: edges
        self.volumes = np.abs(np.linalg.det(self._edges)) / float(np.prod(np.arange(1, self.rank + 1)))

    @property
    def rank(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def barycentric(self, y) -> np.ndarray:
        """(k, r+1) barycentric coordinates of ``y`` in every simplex."""
        y = np.asarray(y, dtype=float)
        v0 = self.nodes[self.simplices[:, 0]]
        t = np.einsum("kd,kdj->kj", y[None, :] - v0, self._inv)
        return np.concatenate([1 - t.sum(axis=1, keepdims=True), t], axis=1)

    def containing(self, y, tol=BARY_TOL) -> np.ndarray:
        lam = self.barycentric(y)
        return np.nonzero((lam >= -tol).all(axis=1))[0]

    def interpolation_weights(self, y) -> np.ndarray:
        """Dense (m,) weights w with u(y) = w . values for the P1 interpolant."""
        ks = self.containing(y)
        if len(ks) == 0:
            raise FourRhoOutside(f"point {tuple(np.round(y, 12))} lies outside the mesh")
        k = ks[0]
        lam = np.clip(self.barycentric(y)[k], 0.0, None)
        lam = lam / lam.sum()
        w = np.zeros(self.size)
        np.add.at(w, self.simplices[k], lam)
        return w

    def gradients(self, values: np.ndarray) -> np.ndarray:
        """(k, r) gradient of the interpolant on each simplex."""
        vs = values[self.simplices]
        du = vs[:, 1:] - vs[:, :1]
        return np.linalg.solve(self._edges, du[..., None])[..., 0]


def _refine(simplex, level: int, r: int):
    """Lattice points and sub-simplices of the level-``level`` red refinement."""
    v = [tuple(p) for p in simplex]

    def point(k):
        # k = barycentric lattice coordinates on v1..vr
        return tuple(
            v[0][d] + sum(Fraction(k[i], level) * (v[i + 1][d] - v[0][d]) for i in range(r)) for d in range(len(v[0]))
        )

    subs = []
    if r == 1:
        for i in range(level):
            subs.append((point((i,)), point((i + 1,))))
    elif r == 2:
        for i in range(level):
            for j in range(level - i):
                subs.append((point((i, j)), point((i + 1, j)), point((i, j + 1))))
                if i + j < level - 1:
                    subs.append((point((i + 1, j)), point((i + 1, j + 1)), point((i, j + 1))))
    else:
        raise RankTooHigh("meshes are implemented for rank <= 2")
    return subs


def build_mesh(inst: Instance, level: int) -> Mesh:
    """Mesh of the chamber slice: cone from O when O lies in it, then refine."""
    poly = inst.polytope
    r = poly.rank
    if r > 2:
        raise RankTooHigh(f"rank {r} > 2")
    if level < 1:
        raise InputError("mesh level must be >= 1")
    cham = poly.chamber
    O = tuple(Fraction(0) if poly.exact else 0.0 for _ in range(r))
    if cham.contains(O, tol=0 if poly.exact else 1e-12):
        cham = retriangulate(cham, O)
    keymap: dict = {}
    nodes = []
    simp = []
    for s in cham.simplices:
        s = tuple(tuple(Fraction(x) for x in p) for p in s)
        for sub in _refine(s, level, r):
            idx = []
            for p in sub:
                if p not in keymap:
                    keymap[p] = len(nodes)
                    nodes.append(p)
                idx.append(keymap[p])
            simp.append(idx)
    arr = np.array([[float(x) for x in p] for p in nodes])
    return Mesh(arr, np.array(simp, dtype=np.int64), tuple(nodes))


def mesh_from_points(points: np.ndarray) -> Mesh:
    """Mesh over scattered points (sorted in rank 1, Delaunay in rank 2)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    r = pts.shape[1]
    if r == 1:
        order = np.argsort(pts[:, 0])
        simp = np.stack([order[:-1], order[1:]], axis=1)
        return Mesh(pts, simp)
    if r == 2:
        from scipy.spatial import Delaunay

        tri = Delaunay(pts)
        keep = []
        for s in tri.simplices:
            e = pts[s[1:]] - pts[s[0]]
            if abs(np.linalg.det(e)) > 1e-14:
                keep.append(s)
        return Mesh(pts, np.array(keep, dtype=np.int64))
    raise RankTooHigh(f"rank {r} > 2")


# ---------------------------------------------------------------------------
# discretised instance


@dataclass(frozen=True)
class FConfig:
    R: float | None = None         # truncation radius; None picks it from the decay rate
    tail_tol: float = 1e-12        # relative bound on the discarded tail


@dataclass(eq=False)
class Discretization:
    """An instance together with a mesh and all mesh integrals."""

    inst: Instance
    mesh: Mesh
    hat_w: np.ndarray          # (1/V) int hat_j pi (1 - theta) dy
    hat_pi: np.ndarray         # int hat_j pi dy
    cell_pi: np.ndarray        # int_T pi dy per mesh simplex
    cell_pi_x: np.ndarray      # int_T pi (1 - theta) dy per mesh simplex
    four_rho: np.ndarray
    rho_w: np.ndarray          # interpolation weights at 4 rho
    walls: np.ndarray          # simple roots as x-space normals
    weyl: list                 # float Weyl matrices (acting on y)
    b_terms: tuple             # (betas (t, r), coeffs (t,)) of prod ((1 - e^{-2 alpha})/2)^2
    V: float
    level: int = 0             # refinement of each coarse simplex
    fcfg: FConfig = field(default_factory=FConfig)

    @property
    def datum(self):
        return self.inst.datum

    @property
    def rank(self) -> int:
        return self.mesh.rank

    @property
    def manifold_dim(self) -> int:
        return self.inst.datum.manifold_dim

    def potential(self, f: Callable | np.ndarray) -> "ConvexPotential":
        vals = f(self.mesh.nodes) if callable(f) else np.asarray(f, dtype=float)
        return ConvexPotential(self, np.asarray(vals, dtype=float).copy())

    def zero(self) -> "ConvexPotential":
        return ConvexPotential(self, np.zeros(self.mesh.size))

    def diameter(self) -> float:
        vs = np.array([[float(x) for x in v] for v in self.inst.polytope.dilate.vertices])
        return float(max(np.linalg.norm(a - b) for a in vs for b in vs))


def _exp_terms(datum) -> tuple:
    """Expand prod_alpha ((1 - e^{-2 alpha.x})/2)^2 as sum c_t e^{-beta_t . x}."""
    r = datum.rank
    terms = {tuple(Fraction(0) for _ in range(r)): Fraction(1)}
    for alpha in datum.positive_roots:
        new: dict = {}
        for beta, c in terms.items():
            for k, ck in ((0, Fraction(1, 4)), (1, Fraction(-1, 2)), (2, Fraction(1, 4))):
                b2 = tuple(bi + 2 * k * Fraction(ai) for bi, ai in zip(beta, alpha))
                new[b2] = new.get(b2, 0) + c * ck
        terms = {b: c for b, c in new.items() if c != 0}
    betas = np.array([[float(x) for x in b] for b in terms], dtype=float).reshape(-1, r)
    coeffs = np.array([float(c) for c in terms.values()])
    return betas, coeffs


def discretize(inst: Instance, level: int | None = None, fcfg: FConfig | None = None) -> Discretization:
    """Mesh the chamber slice and precompute every mesh integral.

    ``level`` is the refinement of each coarse simplex; the default aims at a
    node spacing near 0.04 in rank 1 and uses level 10 in rank 2.
    """
    poly = inst.polytope
    r = poly.rank
    if r > 2:
        raise RankTooHigh(f"rank {r} > 2")
    if level is None:
        if r == 1:
            lo, hi = (float(min(v[0] for v in poly.dilate.vertices)), float(max(v[0] for v in poly.dilate.vertices)))
            level = max(8, int(np.ceil((hi - lo) / 2 / 0.04)))
        else:
            level = 10
    mesh = build_mesh(inst, level)
    ext = inst.extremal
    pi = inst.pi
    pi_f = DensityPoly({e: float(c) for e, c in pi.terms.items()}, pi.nvars)
    slope = np.array([float(s) for s in ext.slope])
    const = float(ext.const)
    qb, qw = simplex_rule(r, pi.degree + 2)
    v = mesh.nodes[mesh.simplices]                               # (k, r+1, r)
    pts = np.einsum("qi,kid->kqd", qb, v)                        # (k, q, r)
    k, q = pts.shape[:2]
    pv = pi_f.eval_many(pts.reshape(-1, r)).reshape(k, q)
    wx = 1.0 - (pts @ slope + const)
    scale = mesh.volumes * float(np.prod(np.arange(1, r + 1)))   # r! vol
    cell_pi = scale * (pv @ qw)
    cell_pi_x = scale * ((pv * wx) @ qw)
    loc_pi = scale[:, None] * np.einsum("kq,q,qi->ki", pv, qw, qb)
    loc_x = scale[:, None] * np.einsum("kq,q,qi->ki", pv * wx, qw, qb)
    m = mesh.size
    hat_pi = np.zeros(m)
    hat_x = np.zeros(m)
    np.add.at(hat_pi, mesh.simplices, loc_pi)
    np.add.at(hat_x, mesh.simplices, loc_x)
    V = float(inst.table.V)
    datum = inst.datum
    four_rho = np.array([4 * float(x) for x in datum.rho])
    if not poly.dilate.contains(tuple(4 * x for x in datum.rho)):
        raise FourRhoOutside("4 rho lies outside 2P")
    rho_w = mesh.interpolation_weights(four_rho)
    walls = np.array([[float(x) for x in a] for a in datum.simple_roots]).reshape(-1, r)
    weyl = [np.array([[float(x) for x in row] for row in w]) for w in datum.weyl_elements]
    return Discretization(
        inst=inst,
        mesh=mesh,
        hat_w=hat_x / V,
        hat_pi=hat_pi,
        cell_pi=cell_pi,
        cell_pi_x=cell_pi_x,
        four_rho=four_rho,
        rho_w=rho_w,
        walls=walls,
        weyl=weyl,
        b_terms=_exp_terms(datum),
        V=V,
        level=level,
        fcfg=fcfg or FConfig(),
    )


# ---------------------------------------------------------------------------
# potentials


@dataclass(eq=False)
class ConvexPotential:
    disc: Discretization
    values: np.ndarray

    def __add__(self, other) -> "ConvexPotential":
        if isinstance(other, ConvexPotential):
            _same(self, other)
            return ConvexPotential(self.disc, self.values + other.values)
        return ConvexPotential(self.disc, self.values + float(other))

    def __mul__(self, k: float) -> "ConvexPotential":
        return ConvexPotential(self.disc, self.values * float(k))

    __rmul__ = __mul__

    def __sub__(self, other) -> "ConvexPotential":
        return self + (other * -1.0 if isinstance(other, ConvexPotential) else -float(other))

    def at(self, y) -> float:
        return float(self.disc.mesh.interpolation_weights(np.asarray(y, dtype=float)) @ self.values)

    def subgradient_at(self, y) -> np.ndarray:
        """Average of the gradients of all mesh simplices touching ``y``."""
        mesh = self.disc.mesh
        ks = mesh.containing(np.asarray(y, dtype=float))
        if len(ks) == 0:
            raise OriginOutside(f"point {tuple(y)} lies outside the mesh")
        return mesh.gradients(self.values)[ks].mean(axis=0)

    def expanded(self):
        """Support points and values over all of 2P (W-orbits of the nodes)."""
        pts = []
        vals = []
        seen = set()
        for w in self.disc.weyl:
            img = self.disc.mesh.nodes @ w.T
            for p, val in zip(img, self.values):
                key = tuple(np.round(p, 10))
                if key in seen:
                    continue
                seen.add(key)
                pts.append(p)
                vals.append(val)
        return np.array(pts), np.array(vals)

    def is_mesh_convex(self, tol: float = 1e-9) -> bool:
        """True when the P1 interpolant, extended by W, is convex (checked at all nodes)."""
        view = LegendreView(self)
        pts, vals = self.expanded()
        conj = np.array([view.conjugate(p) for p in pts])
        return bool(np.all(np.abs(conj - vals) <= tol * (1 + np.abs(vals))))


def _same(a: ConvexPotential, b: ConvexPotential) -> None:
    if a.disc is not b.disc:
        raise MismatchedInstances("potentials live on different discretisations")


def w_average(disc: Discretization, g: np.ndarray) -> np.ndarray:
    """Average of the linear functional y -> g . y over W (projects onto the toric part)."""
    return np.mean([w.T @ g for w in disc.weyl], axis=0)


def normalize(u: ConvexPotential) -> ConvexPotential:
    """u - <g, y> - u(O) with g the W-averaged subgradient at the origin."""
    disc = u.disc
    O = np.zeros(disc.rank)
    if len(disc.mesh.containing(O)) == 0:
        raise OriginOutside("the origin is not in the chamber slice")
    g = w_average(disc, u.subgradient_at(O))
    u0 = u.at(O)
    return ConvexPotential(disc, u.values - disc.mesh.nodes @ g - u0)


# ---------------------------------------------------------------------------
# Legendre view


class LegendreView:
    """psi(x) = max over W-expanded support points of x . y - u."""

    def __init__(self, u: ConvexPotential):
        self.u = u
        self.points, self.vals = u.expanded()
        self.four_rho = u.disc.four_rho

    def psi(self, x) -> np.ndarray:
        from ._kernels import max_affine

        x = np.atleast_2d(np.asarray(x, dtype=float))
        return max_affine(x, self.points, self.vals)[0]

    def psi_tilde(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.psi(x) - x @ self.four_rho

    def argmax_point(self, x) -> np.ndarray:
        from ._kernels import max_affine

        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.points[max_affine(x, self.points, self.vals)[1]]

    @property
    def delta(self) -> float:
        disc = self.u.disc
        return _cells.decay_rate(disc.mesh.nodes - disc.four_rho, disc.walls)

    def conjugate(self, y) -> float:
        """sup_x (x . y - psi(x)) by linear programming; equals the convex hull value."""
        y = np.asarray(y, dtype=float)
        r = len(y)
        # variables (x, t): maximise x.y - t  s.t.  x.p_k - t <= u_k
        c = np.concatenate([-y, [1.0]])
        A = np.hstack([self.points, -np.ones((len(self.points), 1))])
        res = linprog(c, A_ub=A, b_ub=self.vals, bounds=[(None, None)] * (r + 1), method="highs")
        if res.status == 3:
            return np.inf
        return float(-res.fun)

    def inf_psi_tilde(self) -> float:
        """inf of psi~ over a_+, i.e. minus the hull value at 4 rho."""
        return -self.conjugate(self.four_rho)


# ---------------------------------------------------------------------------
# functionals


def eval_L(u: ConvexPotential) -> float:
    """(1/V) int u pi (1 - theta_X) dy - u(4 rho), with u the mesh interpolant."""
    d = u.disc
    return float(u.values @ d.hat_w - u.values @ d.rho_w)


def linear_part(u: ConvexPotential) -> float:
    """(1/V) int u pi (1 - theta_X) dy."""
    return float(u.values @ u.disc.hat_w)


@dataclass(frozen=True)
class FResult:
    F: float
    log_Z: float           # log int_{a_+} e^{-psi} J dx
    masses: np.ndarray     # cell masses m_j / Z (a probability vector)
    R: float
    delta: float
    tail: float            # bound on discarded tail relative to Z
    shift: float           # min of psi~ over the truncated chamber


def _cell_masses(disc: Discretization, vals: np.ndarray, R: float, adjacency: bool = False):
    """Shifted cell masses int_{C_j} e^{-(psi~ - s)} B dx and the shift s.

    With ``adjacency`` also returns the symmetric matrix of facet integrals of
    the same density divided by |y_j - y_k|, which drives the Hessian.
    """
    a = disc.mesh.nodes - disc.four_rho
    betas, coeffs = disc.b_terms
    m = len(a)
    A = np.zeros((m, m)) if adjacency else None
    if disc.rank == 1:
        lo, hi = _cells.domain_interval(R, disc.walls)
        L, U, ok = _cells.cells_1d(a, vals, lo, hi)
        j = np.nonzero(ok)[0]
        if len(j) == 0:
            raise TailTooLarge("no power cell meets the truncated chamber")
        aj = a[j, 0]
        uj = vals[j]
        ends = np.concatenate([L[j] * aj - uj, U[j] * aj - uj])
        s = float(ends.min())
        mass = np.zeros(m)
        for bt, ct in zip(betas[:, 0], coeffs):
            slope = -(aj + bt)
            const = uj + s
            mass[j] += ct * _cells.exp_integral_intervals(L[j], U[j], slope, const)
        if adjacency:
            order = j[np.argsort(L[j])]
            for p, q in zip(order[:-1], order[1:]):
                xb = U[p]
                f = sum(ct * np.exp(-(a[p, 0] + bt) * xb + vals[p] + s) for bt, ct in zip(betas[:, 0], coeffs))
                A[p, q] = A[q, p] = f / abs(a[p, 0] - a[q, 0])
        return (mass, s, A) if adjacency else (mass, s)
    dom = _cells.domain_polygon(R, disc.walls)
    cells = _cells.cells_2d(a, vals, dom)
    tri, owner = _cells.fan_triangles(cells)
    if len(tri) == 0:
        raise TailTooLarge("no power cell meets the truncated chamber")
    verts = tri.reshape(-1, 2)
    own3 = np.repeat(owner, 3)
    s = float(np.min(np.einsum("nd,nd->n", verts, a[own3]) - vals[own3]))
    mass = np.zeros(m)
    for bt, ct in zip(betas, coeffs):
        slope = -(a[owner] + bt)
        const = vals[owner] + s
        np.add.at(mass, owner, ct * _cells.exp_integral_triangles(tri, slope, const))
    if adjacency:
        for jj, P, lab in cells:
            Q = np.roll(P, -1, axis=0)
            sel = lab >= 0
            if not sel.any():
                continue
            p0, p1, ks = P[sel], Q[sel], lab[sel]
            length = np.linalg.norm(p1 - p0, axis=1)
            f = np.zeros(len(ks))
            for bt, ct in zip(betas, coeffs):
                sl = -(a[jj] + bt)
                f += ct * _cells.dd1(p0 @ sl + vals[jj] + s, p1 @ sl + vals[jj] + s)
            w = length * f / np.linalg.norm(a[ks] - a[jj], axis=1)
            np.add.at(A[jj], ks, w / 2)
            np.add.at(A[:, jj], ks, w / 2)
    return (mass, s, A) if adjacency else (mass, s)


def _log_tail_rel(disc, vals, s, R, delta, Z):
    """log of the bound on the discarded tail relative to Z."""
    nrays = 1 if (disc.rank == 1 and len(disc.walls)) else 2
    log_pref = -len(disc.datum.positive_roots) * np.log(4.0) + float(vals.max()) + s
    with np.errstate(divide="ignore"):
        return log_pref + np.log(_cells.tail_bound(R, delta, disc.rank, nrays)) - np.log(Z)


def eval_F_full(u: ConvexPotential, cfg: FConfig | None = None, R: float | None = None) -> FResult:
    """F(u) = -log int_{a_+} e^{-psi} J dx + u(4 rho), with diagnostics.

    ``R`` (if given) overrides the configured or automatic truncation radius.
    """
    disc = u.disc
    cfg = cfg or disc.fcfg
    vals = u.values
    delta = _cells.decay_rate(disc.mesh.nodes - disc.four_rho, disc.walls)
    if not delta > 1e-12:
        raise NonDecaying(f"psi~ does not grow along some chamber direction (rate {delta:.3g})")
    fixed = R if R is not None else cfg.R
    if fixed is not None:
        mass, s = _cell_masses(disc, vals, fixed)
        Z = mass.sum()
        tail = float(np.exp(min(_log_tail_rel(disc, vals, s, fixed, delta, Z), 700.0)))
        if tail > cfg.tail_tol and R is None:
            raise TailTooLarge(f"tail bound {tail:.3g} exceeds {cfg.tail_tol:.3g} at R={fixed}")
        Rused = fixed
    else:
        Rused = max(2.0, 10.0 / delta)
        log_tol = np.log(cfg.tail_tol)
        for _ in range(60):
            mass, s = _cell_masses(disc, vals, Rused)
            Z = mass.sum()
            if not (np.isfinite(Z) and Z > 0):
                raise TailTooLarge(f"non-finite partition function at R={Rused:.4g}")
            lt = _log_tail_rel(disc, vals, s, Rused, delta, Z)
            if lt <= log_tol:
                break
            # tail ~ e^{-delta R}: jump to the predicted radius with a margin
            Rused = Rused + (lt - log_tol) / delta * 1.1 + 1.0 / delta
            if not np.isfinite(Rused) or Rused > 1e8:
                raise TailTooLarge("truncation radius out of range")
        else:  # pragma: no cover - the radius update always terminates
            raise TailTooLarge("could not choose a truncation radius")
        tail = float(np.exp(lt))
    log_Z = np.log(Z) - s
    F = -log_Z + float(vals @ disc.rho_w)
    return FResult(F=float(F), log_Z=float(log_Z), masses=mass / Z, R=float(Rused), delta=delta, tail=float(tail), shift=s)


def eval_F(u: ConvexPotential, cfg: FConfig | None = None) -> float:
    return eval_F_full(u, cfg).F


def eval_D(u: ConvexPotential, cfg: FConfig | None = None) -> float:
    """L + F (the additive constant of the full functional is dropped)."""
    return eval_L(u) + eval_F(u, cfg)


def D_and_grad(disc: Discretization, vals: np.ndarray, R: float | None = None, cfg: FConfig | None = None):
    """Objective and exact gradient in the node values.

    grad D = hat_w - (cell masses / Z): the u(4 rho) terms of L and F cancel.
    """
    u = ConvexPotential(disc, vals)
    fr = eval_F_full(u, cfg, R=R)
    D = float(vals @ disc.hat_w - vals @ disc.rho_w) + fr.F
    return D, disc.hat_w - fr.masses, fr


def hessian(disc: Discretization, vals: np.ndarray, R: float) -> np.ndarray:
    """Exact Hessian of L + F in the node values at truncation radius R.

    With p = masses / Z and A the facet matrix of the cell decomposition,
    d p_j / d u_k = p_j delta_jk - p_j p_k - (Lap A)_jk / Z, so the Hessian
    of -log Z is Lap(A)/Z - diag(p) + p p^T.
    """
    mass, _, A = _cell_masses(disc, vals, R, adjacency=True)
    Z = mass.sum()
    p = mass / Z
    lap = np.diag(A.sum(axis=1)) - A
    return lap / Z - np.diag(p) + np.outer(p, p)


# ---------------------------------------------------------------------------
# I / J energies


@dataclass(frozen=True)
class Energies:
    I: float
    J: float
    I_X: float
    J_X: float


def _psi_at(vals: np.ndarray, u: ConvexPotential, x: np.ndarray) -> np.ndarray:
    from ._kernels import max_affine

    pts, v = ConvexPotential(u.disc, vals).expanded()
    return max_affine(x, pts, v)[0]


def energy_pair(u0: ConvexPotential, u1: ConvexPotential, steps: int | None = None) -> Energies:
    """I, J, I_X, J_X for phi = psi_1 - psi_0 (both normalised by V).

    The pushforward of pi dy under the inverse gradient map is the Monge-Ampere
    measure, so every x-space integral becomes a y-space sum over mesh
    simplices, on which the gradient of each interpolant is constant.  Along the
    geodesic u_s = (1-s) u_0 + s u_1 the s-integrand of the energy term is
    -int (u_1 - u_0) pi dy for every s; ``steps`` Gauss nodes in s reproduce it.
    """
    _same(u0, u1)
    disc = u0.disc
    mesh = disc.mesh
    x0 = mesh.gradients(u0.values)
    x1 = mesh.gradients(u1.values)
    phi0 = _psi_at(u1.values, u1, x0) - _psi_at(u0.values, u0, x0)
    phi1 = _psi_at(u1.values, u1, x1) - _psi_at(u0.values, u0, x1)
    du = u1.values - u0.values
    if steps is None:
        e_pi = float(du @ disc.hat_pi)
        e_x = float(du @ disc.hat_w) * disc.V
    else:
        if steps < 8:
            raise InputError("steps must be >= 8")
        s_nodes, s_w = np.polynomial.legendre.leggauss(steps)
        s_nodes = (s_nodes + 1) / 2
        s_w = s_w / 2
        e_pi = e_x = 0.0
        for s, w in zip(s_nodes, s_w):
            # phi_dot_s(grad u_s(y)) = -(u_1 - u_0)(y); the mesh interpolant of du is exact here
            e_pi += w * float(du @ disc.hat_pi)
            e_x += w * float(du @ disc.hat_w) * disc.V
    V = disc.V
    I = float(phi0 @ disc.cell_pi - phi1 @ disc.cell_pi) / V
    I_X = float(phi0 @ disc.cell_pi_x - phi1 @ disc.cell_pi_x) / V
    J = (float(phi0 @ disc.cell_pi) + e_pi) / V
    J_X = (float(phi0 @ disc.cell_pi_x) + e_x) / V
    return Energies(I=I, J=J, I_X=I_X, J_X=J_X)


# ---------------------------------------------------------------------------
# properness constant


@dataclass(frozen=True)
class LambdaEstimate:
    lambda_min: float
    witness: ConvexPotential
    witness_kind: str
    ratios: np.ndarray


def chamber_directions(disc: Discretization, count: int, rng) -> np.ndarray:
    """Random unit vectors of the closed chamber of a."""
    r = disc.rank
    cw = np.array([[float(x) for x in w] for w in coweights(disc.datum)]).reshape(-1, r)
    tor = np.array([[float(x) for x in t] for t in _toric_dirs(disc)]).reshape(-1, r)
    out = []
    for _ in range(count):
        x = np.zeros(r)
        if len(cw):
            x += rng.exponential(size=len(cw)) @ cw
        if len(tor):
            x += rng.normal(size=len(tor)) @ tor
        n = np.linalg.norm(x)
        out.append(x / n if n > 0 else x)
    return np.array(out)


def _toric_dirs(disc):
    from .rootsys import toric_directions

    return toric_directions(disc.datum)


def hinge_family(disc: Discretization, count: int, seed: int):
    """Normalised hinges max(0, xi.y - c) and random PL cones max_k (xi_k.y + c_k)."""
    rng = np.random.default_rng(seed)
    y = disc.mesh.nodes
    n_h = (count + 1) // 2
    xs = chamber_directions(disc, count + n_h * 0, rng)
    fam = []
    for i in range(count):
        if i < n_h:
            xi = xs[i]
            proj = y @ xi
            c = rng.uniform(proj.min(), proj.max())
            fam.append(("hinge", np.maximum(0.0, proj - c)))
        else:
            k = int(rng.integers(2, 5))
            xis = chamber_directions(disc, k, rng) * rng.uniform(0.2, 2.0, size=(k, 1))
            cs = rng.normal(size=k)
            fam.append(("cone", np.max(y @ xis.T + cs[None, :], axis=1)))
    return fam


def lambda_estimate(disc: Discretization, count: int = 500, seed: int = 0, family=None) -> LambdaEstimate:
    """min over a sampled family of L(u^) / int u^ pi (1 - theta_X) dy.

    The right-hand integral carries no 1/V, while L does; the ratio is
    reported in exactly this normalisation.
    """
    fam = family if family is not None else hinge_family(disc, count, seed)
    best = None
    ratios = []
    for kind, vals in fam:
        u = normalize(ConvexPotential(disc, np.asarray(vals, dtype=float)))
        den = linear_part(u) * disc.V
        if not den > 1e-12:
            continue
        q = eval_L(u) / den
        ratios.append(q)
        if best is None or q < best[0]:
            best = (q, u, kind)
    if best is None:
        raise EmptyFamily("no admissible potential in the family")
    return LambdaEstimate(lambda_min=float(best[0]), witness=best[1], witness_kind=best[2], ratios=np.array(ratios))
