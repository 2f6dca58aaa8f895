"""Direct minimisation of L + F over node values (rank <= 2) by damped Newton.

The objective is convex in the node-value vector (L is linear; F is minus the
log of an integral of e^{-max of affine functions}, which is log-concave by
Prekopa); its gradient and Hessian are exact: hat weights minus normalised power-cell
masses.  Stationarity therefore says that grad psi pushes e^{-psi} J dx / Z
onto (1 - theta_X) pi dy / V node by node, which is the weak reduced
Monge-Ampere equation on the mesh.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .dingfun import (
    ConvexPotential,
    D_and_grad,
    Discretization,
    FConfig,
    eval_D,
    eval_F_full,
    hessian,
    normalize,
)
from .errors import InputError, NonDecaying, NumericError, RankTooHigh

log = logging.getLogger(__name__)


# gradient level accepted as converged once the objective no longer changes in floating point
STALL_GTOL = 1e-6
# iterations without a 10% gradient improvement before the mass floor is dropped
ESCAPE_AFTER = 20


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class SolverConfig:
    resolution: int | None = None      # mesh refinement level (None: discretize default)
    max_iter: int = 3000
    gtol: float = 1e-10                # sup-norm of the gradient at convergence
    divergence_factor: float = 50.0    # threshold = factor * diam(2P)
    window: int = 100                  # iterations over which D must still decrease
    window_decrease: float = 1e-6
    fcfg: FConfig = field(default_factory=FConfig)

    def __post_init__(self):
        if self.resolution is not None and self.resolution < 3:
            raise InputError("resolution must be >= 3")
        if self.gtol <= 0 or self.window_decrease <= 0:
            raise InputError("tolerances must be positive")


@dataclass(frozen=True)
class Solution:
    potential: ConvexPotential | None
    D: float
    history: tuple            # (iter, D, grad sup-norm, sup-norm of normalised iterate)
    stationarity: float
    pushforward: float
    status: Status
    reason: str

    def history_csv(self) -> str:
        lines = ["iter,D,residual,sup_norm"]
        for it, d, g, s in self.history:
            lines.append(f"{it},{d:.17g},{g:.17g},{s:.17g}")
        return "\n".join(lines) + "\n"


def _safe_eval(disc, x, fcfg):
    try:
        D, g, fr = D_and_grad(disc, x, cfg=fcfg)
    except (NumericError, FloatingPointError):
        return np.inf, None, None
    if not np.isfinite(D) or not np.all(np.isfinite(g)):
        return np.inf, None, None
    return D, g, fr


def solve(disc: Discretization, config: SolverConfig | None = None, x0: np.ndarray | None = None) -> Solution:
    """Damped Newton on the exact objective with the exact Hessian.

    Steps are halved until the Armijo condition holds and every cell with
    positive target weight keeps at least half of the smallest initial mass
    or target weight, which keeps the Hessian nondegenerate on the iterates.
    The floor is dropped once the gradient stagnates, so that iterates of an
    objective without a minimiser can escape and trigger the divergence test.
    """
    cfg = config or SolverConfig()
    if disc.rank > 2:
        raise RankTooHigh("the solver supports rank <= 2")
    y = disc.mesh.nodes
    x = 0.5 * np.sum(y * y, axis=1) if x0 is None else np.asarray(x0, dtype=float).copy()
    try:
        eval_F_full(ConvexPotential(disc, x), cfg.fcfg)
    except NonDecaying as exc:
        # psi~ has a flat chamber direction for every potential on this polytope,
        # so the integral diverges and L + F is unbounded below
        return Solution(None, -np.inf, (), np.nan, np.nan, Status.DIVERGED, f"objective unbounded: {exc}")

    threshold = cfg.divergence_factor * disc.diameter()
    m = len(x)
    D, g, fr = _safe_eval(disc, x, cfg.fcfg)
    if g is None:
        raise InputError("the objective is not finite at the starting potential")
    target = disc.hat_w > 0
    eps0 = 0.5 * min(float(fr.masses[target].min()), float(disc.hat_w[target].min()))
    hist: list = []
    stall = 0
    best, since, escape = np.inf, 0, False
    status, reason = Status.MAX_ITER, "iteration limit"
    for it in range(1, cfg.max_iter + 1):
        gn = float(np.max(np.abs(g)))
        sup = float(np.max(np.abs(normalize(ConvexPotential(disc, x)).values)))
        hist.append((it, D, gn, sup))
        if gn < 0.9 * best:
            best, since = gn, 0
        else:
            since += 1
        if since >= ESCAPE_AFTER:
            # the gradient is not shrinking while D decreases: there may be no
            # minimiser, so let cells empty and the iterate escape
            escape = True
        if gn <= cfg.gtol:
            status, reason = Status.CONVERGED, "gradient below tolerance"
            break
        if sup > threshold:
            k = max(0, len(hist) - 1 - cfg.window)
            if hist[k][1] - D > cfg.window_decrease:
                status = Status.DIVERGED
                reason = f"normalised iterate exceeds {threshold:.4g} while the objective keeps decreasing"
                break
        H = hessian(disc, x, fr.R)
        # constants are a null direction of the objective; pin them and add a small ridge
        scale = float(np.trace(H)) / m
        H = H + np.full((m, m), scale / m) + 1e-12 * scale * np.eye(m)
        d = -np.linalg.solve(H, g)
        d -= d.mean()
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -float(g @ g)
        tau = 1.0
        for _ in range(60):
            xn = x + tau * d
            Dn, gn_vec, frn = _safe_eval(disc, xn, cfg.fcfg)
            if gn_vec is not None and Dn <= D + 1e-4 * tau * slope:
                if escape or frn.masses[target].min() >= eps0:
                    break
            tau /= 2
        else:
            status, reason = Status.MAX_ITER, "line search failed"
            break
        stall = stall + 1 if D - Dn <= 1e-15 * max(1.0, abs(D)) else 0
        x, D, g, fr = xn, Dn, gn_vec, frn
        if stall >= 3:
            gn = float(np.max(np.abs(g)))
            if gn <= STALL_GTOL:
                status, reason = Status.CONVERGED, f"objective flat at rounding level, |grad| = {gn:.2e}"
            else:
                reason = f"stalled at |grad| = {gn:.2e}"
            break
    u = normalize(ConvexPotential(disc, x))
    Dv = eval_D(u, cfg.fcfg)
    ok = status is not Status.DIVERGED
    return Solution(
        potential=u,
        D=Dv,
        history=tuple(hist),
        stationarity=stationarity_residual(u) if ok else np.nan,
        pushforward=pushforward_residual(u) if ok else np.nan,
        status=status,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# residuals


def gradient(u: ConvexPotential, R: float | None = None) -> np.ndarray:
    return D_and_grad(u.disc, u.values, R=R)[1]


def directional_derivative(u: ConvexPotential, v: np.ndarray) -> float:
    """Analytic first variation: (1/V) int v pi (1-theta) - int v(grad psi) e^{-psi} J / Z."""
    return float(np.asarray(v) @ gradient(u))


def finite_difference(u: ConvexPotential, v: np.ndarray, eps: float = 1e-5) -> float:
    """Central difference of L + F along v, with the truncation radius frozen."""
    disc = u.disc
    R = eval_F_full(u).R
    v = np.asarray(v, dtype=float)
    dp = D_and_grad(disc, u.values + eps * v, R=R)[0]
    dm = D_and_grad(disc, u.values - eps * v, R=R)[0]
    return (dp - dm) / (2 * eps)


def stationarity_residual(u: ConvexPotential, count: int = 32, seed: int = 0) -> float:
    """max over random directions v (sup-norm 1) of |first variation along v|."""
    rng = np.random.default_rng(seed)
    g = gradient(u)
    V = rng.uniform(-1.0, 1.0, size=(count, len(g)))
    V /= np.max(np.abs(V), axis=1, keepdims=True)
    return float(np.max(np.abs(V @ g)))


def monomial_exponents(r: int):
    """Exponents of all monomials of degree <= 2 in r variables."""
    out = [(0,) * r]
    for i in range(r):
        e = [0] * r
        e[i] = 1
        out.append(tuple(e))
    for i in range(r):
        for j in range(i, r):
            e = [0] * r
            e[i] += 1
            e[j] += 1
            out.append(tuple(e))
    return out


def pushforward_residual(u: ConvexPotential) -> float:
    """max_g |int g(grad psi) e^{-psi} J dx / Z - (1/V) int g (1-theta) pi dy|.

    g runs over W-symmetrised monomials of degree <= 2; the right side is
    evaluated exactly from the moment table.
    """
    disc = u.disc
    masses = eval_F_full(u).masses
    y = disc.mesh.nodes
    tab = disc.inst.table
    ext = disc.inst.extremal
    slope = np.array([float(s) for s in ext.slope])
    const = float(ext.const)
    V = float(tab.V)
    first = np.array([float(x) for x in tab.first])
    M2 = np.array([[float(x) for x in row] for row in tab.M2])
    third = _third_moments(disc)
    r = disc.rank
    worst = 0.0
    for e in monomial_exponents(r):
        # W-symmetrise: average of g(w y) over W; the chamber integral of each
        # symmetrised monomial is a combination of the degree <= 2 moments
        left = 0.0
        right = 0.0
        for w in disc.weyl:
            wy = y @ w.T
            left += masses @ np.prod(wy ** np.array(e), axis=1)
            right += _moment_of(e, w, V, first, M2, third, slope, const)
        left /= len(disc.weyl)
        right /= len(disc.weyl) * V
        worst = max(worst, abs(left - right))
    return float(worst)


def _third_moments(disc: Discretization) -> np.ndarray:
    """int y_i y_j y_k pi dy over the chamber slice (needed for the theta term)."""
    from .quad import DensityPoly, integrate

    r = disc.rank
    pi = disc.inst.pi
    T = np.zeros((r, r, r))
    for i in range(r):
        for j in range(r):
            for k in range(r):
                e = [0] * r
                e[i] += 1
                e[j] += 1
                e[k] += 1
                mono = DensityPoly({tuple(e): 1}, r)
                T[i, j, k] = float(integrate(pi * mono, disc.inst.polytope.chamber))
    return T


def _moment_of(e, w, V, first, M2, third, slope, const):
    """int g(w y) (1 - slope.y - const) pi dy for the monomial g = y^e."""
    r = len(e)
    deg = sum(e)
    if deg == 0:
        return V * (1 - const) - slope @ first
    # g(w y) as a polynomial in y: product of rows of w
    rows = []
    for i, k in enumerate(e):
        rows += [w[i]] * k
    if deg == 1:
        a = rows[0]
        return (1 - const) * (a @ first) - a @ M2 @ slope
    a, b = rows
    quad_part = a @ M2 @ b
    cubic = np.einsum("i,j,k,ijk->", a, b, slope, third)
    return (1 - const) * quad_part - cubic
