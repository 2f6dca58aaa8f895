"""Power cells of a max-of-affine function and exact exponential integrals on them.

For nodes ``a_j`` (slopes) and offsets ``u_j`` the function

    f(x) = max_j (x . a_j - u_j)

is affine on each cell ``C_j = {x : x.(a_j - a_k) >= u_j - u_k for all k}``.
Cells are clipped to a convex domain (box intersected with a cone), then
split into intervals (rank 1) or triangles (rank 2).  Exponentials of affine
functions are integrated over simplices in closed form through divided
differences of exp.
"""

from __future__ import annotations

from math import factorial

import numpy as np
from scipy.spatial import ConvexHull, QhullError

# ---------------------------------------------------------------------------
# divided differences of exp


def dd1(z0, z1):
    """exp[z0, z1] for arrays, stable for close nodes."""
    hi = np.maximum(z0, z1)
    d = np.abs(z1 - z0)
    small = d < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        big = -np.expm1(-d) / d
    ser = 1 - d / 2 + d * d / 6
    return np.exp(hi) * np.where(small, ser, big)


def _dd2_series(z0, z1, z2, terms=18):
    c = (z0 + z1 + z2) / 3
    a, b, e = z0 - c, z1 - c, z2 - c
    # complete homogeneous polynomials h_k(a, b, e) by the standard recurrence
    h1 = np.ones_like(a)
    h2 = np.ones_like(a)
    h3 = np.ones_like(a)
    total = h3 / 2.0
    p1 = h1
    p2 = h2
    p3 = h3
    for k in range(1, terms):
        p1 = p1 * a
        p2 = p1 + b * p2
        p3 = p2 + e * p3
        total = total + p3 / factorial(k + 2)
    return np.exp(c) * total


def dd2(z0, z1, z2):
    """exp[z0, z1, z2] for arrays."""
    z = np.sort(np.stack([z0, z1, z2]), axis=0)
    lo, mid, hi = z
    spread = hi - lo
    close = spread < 0.5
    out = np.empty_like(lo)
    if close.any():
        out[close] = _dd2_series(lo[close], mid[close], hi[close])
    far = ~close
    if far.any():
        l, m, h = lo[far], mid[far], hi[far]
        out[far] = (dd1(m, h) - dd1(l, m)) / (h - l)
    return out


def exp_integral_intervals(lo, hi, slope, const):
    """int_lo^hi exp(slope x + const) dx, elementwise."""
    return (hi - lo) * dd1(slope * lo + const, slope * hi + const)


def exp_integral_triangles(tri, slope, const):
    """Integral of exp(slope . x + const) over triangles ``tri`` (n, 3, 2)."""
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    z = np.einsum("nkd,nd->nk", tri, slope) + const[:, None]
    return 2 * area * dd2(z[:, 0], z[:, 1], z[:, 2])


# ---------------------------------------------------------------------------
# domains


def domain_interval(R: float, walls: np.ndarray):
    """[lo, hi] of {|x| <= R, w . x >= 0 for w in walls} in one dimension."""
    lo, hi = -R, R
    for w in walls:
        if w[0] > 0:
            lo = max(lo, 0.0)
        elif w[0] < 0:
            hi = min(hi, 0.0)
    return lo, hi


def clip_polygon(P: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Intersect convex polygon P (k, 2), counter-clockwise, with a . x <= b."""
    if len(P) == 0:
        return P
    s = P @ a - b
    inside = s <= 0
    if inside.all():
        return P
    if not inside.any():
        return P[:0]
    out = []
    n = len(P)
    for i in range(n):
        j = (i + 1) % n
        if inside[i]:
            out.append(P[i])
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(P[i] + t * (P[j] - P[i]))
    return np.array(out) if out else P[:0]


def domain_polygon(R: float, walls: np.ndarray) -> np.ndarray:
    P = np.array([[-R, -R], [R, -R], [R, R], [-R, R]], dtype=float)
    for w in walls:
        P = clip_polygon(P, -np.asarray(w, dtype=float), 0.0)
    return P


def polygon_area(P: np.ndarray) -> float:
    if len(P) < 3:
        return 0.0
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------------------
# cells


def cells_1d(a: np.ndarray, u: np.ndarray, lo: float, hi: float):
    """Intervals [L_j, U_j] on which node j attains the max (first index wins ties)."""
    a = a.ravel()
    m = len(a)
    da = a[:, None] - a[None, :]
    du = u[:, None] - u[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = du / da
    low = np.where(da > 0, q, -np.inf).max(axis=1)
    up = np.where(da < 0, q, np.inf).min(axis=1)
    same = da == 0
    idx = np.arange(m)
    dead = (same & ((du < 0) | ((du == 0) & (idx[None, :] < idx[:, None])))).any(axis=1)
    L = np.maximum(low, lo)
    U = np.minimum(up, hi)
    ok = (~dead) & (U > L)
    return np.where(ok, L, 0.0), np.where(ok, U, 0.0), ok


def _neighbours(a: np.ndarray, u: np.ndarray):
    """Adjacency of the regular subdivision induced by lifting a_j to height u_j."""
    m = len(a)
    if m < 4:
        return None
    top = np.array([[*a.mean(axis=0), u.max() + 1.0 + np.ptp(u) + np.ptp(a)]])
    pts = np.vstack([np.column_stack([a, u]), top])
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return None
    nb = [set() for _ in range(m)]
    for simplex, eq in zip(hull.simplices, hull.equations):
        if eq[2] >= 0:
            continue
        for i in simplex:
            for k in simplex:
                if i != k and i < m and k < m:
                    nb[i].add(k)
    return nb


def clip_labeled(P: np.ndarray, lab: np.ndarray, a: np.ndarray, b: float, k: int):
    """Like :func:`clip_polygon`, tracking which constraint carries each edge.

    ``lab[i]`` labels the edge from P[i] to P[i+1]; the new edge gets label k.
    """
    if len(P) == 0:
        return P, lab
    s = P @ a - b
    inside = s <= 0
    if inside.all():
        return P, lab
    if not inside.any():
        return P[:0], lab[:0]
    pts, labs = [], []
    n = len(P)
    for i in range(n):
        j = (i + 1) % n
        if inside[i]:
            pts.append(P[i])
            labs.append(lab[i])
            if not inside[j]:
                t = s[i] / (s[i] - s[j])
                pts.append(P[i] + t * (P[j] - P[i]))
                labs.append(k)
        elif inside[j]:
            t = s[i] / (s[i] - s[j])
            pts.append(P[i] + t * (P[j] - P[i]))
            labs.append(lab[i])
    return np.array(pts), np.array(labs, dtype=np.int64)


def cells_2d(a: np.ndarray, u: np.ndarray, domain: np.ndarray, check: bool = True):
    """Clip ``domain`` to each power cell.

    Returns a list of (j, polygon, edge labels); label k >= 0 marks an edge
    shared with cell k, -1 an edge of the domain.
    """
    m = len(a)
    nb = _neighbours(a, u)
    area = polygon_area(domain)
    dlab = -np.ones(len(domain), dtype=np.int64)

    def build(neigh):
        out = []
        for j in range(m):
            P, lab = domain, dlab
            ks = neigh[j] if neigh is not None else range(m)
            for k in ks:
                if k == j:
                    continue
                # x.(a_k - a_j) <= u_k - u_j
                P, lab = clip_labeled(P, lab, a[k] - a[j], u[k] - u[j], k)
                if len(P) == 0:
                    break
            if len(P) >= 3 and polygon_area(P) > 0:
                out.append((j, P, lab))
        return out

    cells = build(nb)
    if check and nb is not None:
        tot = sum(polygon_area(P) for _, P, _ in cells)
        if abs(tot - area) > 1e-9 * max(area, 1.0):
            cells = build(None)
    return cells


def fan_triangles(cells):
    """Split convex cell polygons into triangles; returns (tri (n,3,2), owner (n,))."""
    tris = []
    owner = []
    for j, P, _ in cells:
        for i in range(1, len(P) - 1):
            tris.append((P[0], P[i], P[i + 1]))
            owner.append(j)
    if not tris:
        return np.zeros((0, 3, 2)), np.zeros(0, dtype=np.int64)
    return np.array(tris), np.array(owner, dtype=np.int64)


# ---------------------------------------------------------------------------
# decay rate


def decay_rate(a: np.ndarray, walls: np.ndarray) -> float:
    """min over unit directions xi with w . xi >= 0 (w in walls) of max_j xi . a_j."""
    r = a.shape[1]
    walls = [np.asarray(w, dtype=float) for w in walls]
    if r == 1:
        dirs = [d for d in (1.0, -1.0) if all(w[0] * d >= 0 for w in walls)]
        return min(float(np.max(d * a[:, 0])) for d in dirs)
    if r != 2:
        raise ValueError("decay_rate supports rank <= 2")
    try:
        q = a[ConvexHull(a).vertices]
    except QhullError:
        q = a
    ang = lambda v: float(np.arctan2(v[1], v[0]))  # noqa: E731
    perp = lambda w: np.array([-w[1], w[0]])  # noqa: E731
    if len(walls) >= 2:
        w1, w2 = walls[:2]
        r1 = perp(w1) if np.dot(w2, perp(w1)) > 0 else -perp(w1)
        r2 = perp(w2) if np.dot(w1, perp(w2)) > 0 else -perp(w2)
        t0 = ang(r1)
        width = (ang(r2) - t0) % (2 * np.pi)
        if width > np.pi:
            t0, width = ang(r2), 2 * np.pi - width
    elif len(walls) == 1:
        t0, width = ang(walls[0]) - np.pi / 2, np.pi
    else:
        t0, width = 0.0, 2 * np.pi
    cand = [t0, t0 + width]
    for i in range(len(q)):
        cand.append(ang(-q[i]))
        for k in range(i + 1, len(q)):
            d = q[i] - q[k]
            th = ang(perp(d))
            cand += [th, th + np.pi]
    best = np.inf
    for th in cand:
        rel = (th - t0) % (2 * np.pi)
        if width < 2 * np.pi and rel > width + 1e-12 and rel < 2 * np.pi - 1e-12:
            continue
        xi = np.array([np.cos(th), np.sin(th)])
        best = min(best, float(np.max(q @ xi)))
    return best


def tail_bound(R: float, delta: float, r: int, nrays: int) -> float:
    """int over {|x| > R} of exp(-delta |x|), restricted to a cone in rank 1."""
    if r == 1:
        return nrays * np.exp(-delta * R) / delta
    return 2 * np.pi * np.exp(-delta * R) * (R / delta + 1 / delta**2)
