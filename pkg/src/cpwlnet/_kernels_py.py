"""Numpy implementations of the breakpoint-propagation kernels.

Used when the compiled ``_kernels`` extension is unavailable.  Both versions
must produce identical output.
"""

import numpy as np


def refine_crossings(xs, P, tol):
    """Insert the zero crossings of every column of ``P`` between consecutive ``xs``.

    ``P`` holds pre-activation values at ``xs``; each column is linear between
    consecutive rows.  A crossing closer than ``tol`` to a segment endpoint or to
    the preceding crossing in the same segment is dropped.  The returned values
    are the linear interpolants of ``P`` at the refined points, with the crossing
    column set to exactly 0.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    p0, p1 = P[:-1], P[1:]
    seg, col = np.nonzero(p0 * p1 < 0.0)
    if seg.size == 0:
        return xs.copy(), P.copy()
    a = P[seg, col]
    b = P[seg + 1, col]
    t = a / (a - b)
    xl = xs[seg]
    xr = xs[seg + 1]
    xc = xl + t * (xr - xl)
    order = np.lexsort((xc, seg))
    seg, col, t, xc, xl, xr = seg[order], col[order], t[order], xc[order], xl[order], xr[order]
    keep = (xc - xl > tol) & (xr - xc > tol)
    same = np.zeros(seg.size, dtype=bool)
    same[1:] = seg[1:] == seg[:-1]
    prev_close = np.zeros(seg.size, dtype=bool)
    prev_close[1:] = xc[1:] - xc[:-1] <= tol
    keep &= ~(same & prev_close)
    seg, col, t, xc = seg[keep], col[keep], t[keep], xc[keep]
    vals = P[seg] + t[:, None] * (P[seg + 1] - P[seg])
    vals[np.arange(seg.size), col] = 0.0
    # new rows go right after their segment's left endpoint, in crossing order
    n = xs.size
    pos = np.arange(n) + np.searchsorted(seg, np.arange(n), side="left")
    new_pos = seg + 1 + np.arange(seg.size)
    out_x = np.empty(n + seg.size)
    out_p = np.empty((n + seg.size, P.shape[1]))
    out_x[pos] = xs
    out_p[pos] = P
    out_x[new_pos] = xc
    out_p[new_pos] = vals
    return out_x, out_p


def prune_collinear(xs, V, rtol):
    """Remove interior rows where every column has equal left and right slopes."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    V = np.ascontiguousarray(V, dtype=np.float64)
    n = xs.size
    if n <= 2:
        return xs.copy(), V.copy()
    span = xs[-1] - xs[0]
    atol = rtol * (np.max(np.abs(V)) / span if span > 0 else 0.0)
    dx = np.diff(xs)
    s = np.diff(V, axis=0) / dx[:, None]
    sl, sr = s[:-1], s[1:]
    flat = np.all(np.abs(sl - sr) <= rtol * (np.abs(sl) + np.abs(sr)) + atol, axis=1)
    keep = np.ones(n, dtype=bool)
    keep[1:-1] = ~flat
    return xs[keep], V[keep]
