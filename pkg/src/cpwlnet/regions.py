"""Exact conversion of univariate ReLU networks to CPwL form.

Breakpoints are propagated layer by layer: every hidden neuron's pre-activation
is linear between the current breakpoints, so its zero crossings are found by
solving each linear piece.  Float networks run on the compiled kernel when it
is importable (set ``CPWLNET_PURE=1`` to force the numpy fallback); exact
networks use Fraction arithmetic.
"""

from __future__ import annotations

import os
from fractions import Fraction

import numpy as np

from . import _kernels_py
from .cpwl import MERGE_RTOL, CpwlFunction, Grid, as_array
from .network import ReluNetwork

PRUNE_RTOL = 1e-10

try:
    if os.environ.get("CPWLNET_PURE"):
        raise ImportError("pure mode requested")
    from . import _kernels as _native
except ImportError:
    _native = None

kernels = _native if _native is not None else _kernels_py
BACKEND = "compiled" if _native is not None else "numpy"


def _refine_exact(xs, P):
    out_x, out_p = [], []
    n = len(xs)
    for i in range(n - 1):
        out_x.append(xs[i])
        out_p.append(list(P[i]))
        found = {}
        for j, (a, b) in enumerate(zip(P[i], P[i + 1])):
            if a * b < 0:
                t = a / (a - b)
                found.setdefault(t, j)
        for t in sorted(found):
            row = [p + t * (q - p) for p, q in zip(P[i], P[i + 1])]
            row[found[t]] = Fraction(0)
            out_x.append(xs[i] + t * (xs[i + 1] - xs[i]))
            out_p.append(row)
    out_x.append(xs[-1])
    out_p.append(list(P[-1]))
    return out_x, out_p


def _prune_exact(xs, V):
    keep = [0]
    for i in range(1, len(xs) - 1):
        dl = xs[i] - xs[i - 1]
        dr = xs[i + 1] - xs[i]
        if any((V[i][j] - V[i - 1][j]) * dr != (V[i + 1][j] - V[i][j]) * dl for j in range(len(V[i]))):
            keep.append(i)
    keep.append(len(xs) - 1)
    return [xs[i] for i in keep], [V[i] for i in keep]


def prune_collinear(xs, V, rtol: float = PRUNE_RTOL):
    """Drop interior breakpoints at which every channel is collinear with its neighbours."""
    if np.asarray(xs).dtype == object:
        px, pv = _prune_exact(list(xs), [list(r) for r in V])
        return as_array(px, exact=True), as_array(pv, exact=True)
    return kernels.prune_collinear(xs, V, rtol)


def refine_crossings(xs, P, tol):
    return kernels.refine_crossings(xs, P, tol)


def _to_cpwl_float(net: ReluNetwork, lo: float, hi: float, engine) -> CpwlFunction:
    tol = MERGE_RTOL * (hi - lo)
    xs = np.array([lo, hi], dtype=np.float64)
    V = xs[:, None].copy()
    last = len(net.layers) - 1
    for i, l in enumerate(net.layers):
        P = V @ l.weights.T + l.biases
        if i < last:
            xs, P = engine.refine_crossings(xs, P, tol)
            V = np.maximum(P, 0.0)
            xs, V = engine.prune_collinear(xs, V, PRUNE_RTOL)
        else:
            V = P
    xs, V = engine.prune_collinear(xs, V, PRUNE_RTOL)
    return CpwlFunction(Grid(xs), V[:, 0])


def _to_cpwl_exact(net: ReluNetwork, lo, hi) -> CpwlFunction:
    lo, hi = Fraction(lo), Fraction(hi)
    xs = [lo, hi]
    V = [[lo], [hi]]
    last = len(net.layers) - 1
    for i, l in enumerate(net.layers):
        W = [[Fraction(w) for w in row] for row in l.weights]
        b = [Fraction(v) for v in l.biases]
        P = [[sum((w * v for w, v in zip(row, vr)), Fraction(0)) + bj for row, bj in zip(W, b)] for vr in V]
        if i < last:
            xs, P = _refine_exact(xs, P)
            V = [[p if p > 0 else Fraction(0) for p in row] for row in P]
            xs, V = _prune_exact(xs, V)
        else:
            V = P
    xs, V = _prune_exact(xs, V)
    return CpwlFunction(Grid(as_array(xs, exact=True)), as_array([r[0] for r in V], exact=True))


def to_cpwl(net: ReluNetwork, lo=0.0, hi=1.0, exact: bool | None = None, engine=None) -> CpwlFunction:
    """The CPwL function computed by a 1-input, 1-output network on ``[lo, hi]``.

    ``exact`` defaults to whether the network stores Fraction weights.  ``engine``
    selects a kernel module for float mode (defaults to the import-time choice).
    """
    if net.input_dim != 1 or net.output_dim != 1:
        raise NotImplementedError("to_cpwl supports input_dim = output_dim = 1 only")
    if not lo < hi:
        raise ValueError("need lo < hi")
    if exact is None:
        exact = net.exact
    if exact:
        return _to_cpwl_exact(net, lo, hi)
    if net.exact:
        net = net.to_float()
    return _to_cpwl_float(net, float(lo), float(hi), engine or kernels)
