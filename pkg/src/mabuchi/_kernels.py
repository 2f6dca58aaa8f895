"""Hot loops with a numba path and a pure-numpy path.

``MABUCHI_NUMBA=0`` selects the numpy path (also used automatically when numba
is missing).  ``MABUCHI_THREADS`` caps numba's thread pool.  Both paths return
bit-identical results for ``inside_mask`` and ``max_affine``; ``poly_eval``
agrees to rounding (summation order differs).
"""

from __future__ import annotations

import os

import numpy as np

_WANT_NUMBA = os.environ.get("MABUCHI_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT_NUMBA:
        raise ImportError
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if numba.config.THREADING_LAYER == "default":
        try:
            from numba.np.ufunc import omppool  # noqa: F401

            numba.config.THREADING_LAYER = "omp"
        except ImportError:
            numba.config.THREADING_LAYER = "workqueue"
    _threads = os.environ.get("MABUCHI_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
except ImportError:  # pragma: no cover - exercised with MABUCHI_NUMBA=0
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations


def poly_eval_np(pts, es, cs):
    out = np.zeros(len(pts))
    for e, c in zip(es, cs):
        out += c * np.prod(pts ** e[None, :], axis=1)
    return out


def inside_mask_np(pts, A, c, tol=1e-12):
    return np.all(pts @ A.T <= c[None, :] + tol, axis=1)


def max_affine_np(pts, Y, u):
    vals = pts @ Y.T - u[None, :]
    idx = np.argmax(vals, axis=1)
    return vals[np.arange(len(pts)), idx], idx


# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _poly_eval_nb(pts, es, cs):
        n, r = pts.shape
        m = es.shape[0]
        out = np.zeros(n)
        for i in prange(n):
            s = 0.0
            for k in range(m):
                t = cs[k]
                for j in range(r):
                    p = es[k, j]
                    if p:
                        t *= pts[i, j] ** p
                s += t
            out[i] = s
        return out

    @njit(cache=True, parallel=True)
    def _inside_mask_nb(pts, A, c, tol):
        n, r = pts.shape
        h = A.shape[0]
        out = np.ones(n, dtype=np.bool_)
        for i in prange(n):
            for k in range(h):
                s = 0.0
                for j in range(r):
                    s += pts[i, j] * A[k, j]
                if s > c[k] + tol:
                    out[i] = False
                    break
        return out

    @njit(cache=True, parallel=True)
    def _max_affine_nb(pts, Y, u):
        n, r = pts.shape
        m = Y.shape[0]
        vals = np.empty(n)
        idx = np.empty(n, dtype=np.int64)
        for i in prange(n):
            best = -np.inf
            bi = 0
            for k in range(m):
                s = 0.0
                for j in range(r):
                    s += pts[i, j] * Y[k, j]
                s -= u[k]
                if s > best:  # first maximiser wins, as np.argmax
                    best = s
                    bi = k
            vals[i] = best
            idx[i] = bi
        return vals, idx


def poly_eval(pts, es, cs):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if HAVE_NUMBA:
        return _poly_eval_nb(pts, np.ascontiguousarray(es, dtype=np.int64), np.ascontiguousarray(cs, dtype=np.float64))
    return poly_eval_np(pts, es, cs)


def inside_mask(pts, A, c, tol=1e-12):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if HAVE_NUMBA:
        return _inside_mask_nb(pts, np.ascontiguousarray(A, dtype=np.float64), np.ascontiguousarray(c, dtype=np.float64), tol)
    return inside_mask_np(pts, A, c, tol)


def max_affine(pts, Y, u):
    """Value and first argmax of ``max_k (pts . Y_k - u_k)`` row by row."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if HAVE_NUMBA:
        return _max_affine_nb(pts, np.ascontiguousarray(Y, dtype=np.float64), np.ascontiguousarray(u, dtype=np.float64))
    return max_affine_np(pts, Y, u)
