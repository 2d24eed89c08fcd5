"""Continuous piecewise-linear functions on an interval.

A :class:`CpwlFunction` is a :class:`Grid` of breakpoints plus the function
values at those breakpoints.  Values may be ``float64`` or, in exact mode,
``fractions.Fraction`` objects stored in an object array.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

MERGE_RTOL = 1e-12
DEFAULT_SAMPLES = 10_001


class DomainError(ValueError):
    """Raised when a point lies outside the domain of a function."""


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def as_array(values, exact: bool = False) -> np.ndarray:
    """Convert ``values`` to a float64 array, or an object array of Fractions."""
    if exact:
        flat = [v if isinstance(v, Fraction) else Fraction(v) for v in np.ravel(np.asarray(values, dtype=object))]
        out = np.empty(len(flat), dtype=object)
        out[:] = flat
        return out.reshape(np.shape(values))
    return np.asarray(values, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing breakpoints ``x_0 < x_1 < ... < x_P``."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = self.nodes
        if not isinstance(nodes, np.ndarray) or (nodes.dtype != object and nodes.dtype != np.float64):
            nodes = as_array(nodes)
            object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise ValueError("a grid needs at least two nodes")
        if not _is_exact(nodes) and not np.all(np.isfinite(nodes)):
            raise ValueError("grid nodes must be finite")
        if not all(a < b for a, b in zip(nodes[:-1], nodes[1:])):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.flags.writeable = False

    @classmethod
    def uniform(cls, n_segments: int, lo=0.0, hi=1.0, exact: bool = False) -> "Grid":
        if n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if exact:
            lo, hi = Fraction(lo), Fraction(hi)
            return cls(as_array([lo + (hi - lo) * Fraction(i, n_segments) for i in range(n_segments + 1)], exact=True))
        nodes = np.linspace(lo, hi, n_segments + 1)
        return cls(nodes)

    @property
    def lo(self):
        return self.nodes[0]

    @property
    def hi(self):
        return self.nodes[-1]

    @property
    def segment_count(self) -> int:
        return len(self.nodes) - 1

    @property
    def exact(self) -> bool:
        return _is_exact(self.nodes)

    def max_segment_length(self):
        return max(np.diff(self.nodes))

    def __len__(self):
        return len(self.nodes)


def merge_close(nodes, values, tol):
    """Drop nodes closer than ``tol`` to the previously kept node (left value wins)."""
    keep_x = [nodes[0]]
    keep_y = [values[0]]
    for x, y in zip(nodes[1:], values[1:]):
        if x - keep_x[-1] > tol:
            keep_x.append(x)
            keep_y.append(y)
    if len(keep_x) >= 2 and keep_x[-1] != nodes[-1]:
        # keep the exact right endpoint so the domain is preserved
        keep_x[-1] = nodes[-1]
    return keep_x, keep_y


class CpwlFunction:
    """A continuous function that is linear between consecutive grid nodes."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid | Sequence, values):
        if not isinstance(grid, Grid):
            exact = any(isinstance(v, Fraction) for v in list(np.ravel(values)) + list(np.ravel(grid)))
            grid = Grid(as_array(grid, exact=exact))
        vals = as_array(values, exact=grid.exact)
        if vals.shape != grid.nodes.shape:
            raise ValueError(f"expected {len(grid.nodes)} values, got {vals.shape}")
        if not grid.exact and not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals

    @classmethod
    def from_points(cls, nodes, values, exact: bool = False, merge: bool = True) -> "CpwlFunction":
        """Build from possibly near-duplicate breakpoints, merging ones closer than the tolerance."""
        nodes = as_array(nodes, exact=exact)
        values = as_array(values, exact=exact)
        if merge and len(nodes) >= 2:
            tol = 0 if exact else MERGE_RTOL * (nodes[-1] - nodes[0])
            nodes, values = merge_close(list(nodes), list(values), tol)
        return cls(Grid(as_array(nodes, exact=exact)), as_array(values, exact=exact))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def lo(self):
        return self.grid.lo

    @property
    def hi(self):
        return self.grid.hi

    @property
    def exact(self) -> bool:
        return self.grid.exact

    @property
    def segment_count(self) -> int:
        return self.grid.segment_count

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.nodes)

    def __call__(self, x):
        return eval_cpwl(self, x)

    def __repr__(self):
        return f"CpwlFunction(segments={self.segment_count}, lo={self.lo}, hi={self.hi})"

    def to_float(self) -> "CpwlFunction":
        if not self.exact:
            return self
        return CpwlFunction(Grid(self.nodes.astype(np.float64)), self.values.astype(np.float64))

    def to_exact(self) -> "CpwlFunction":
        if self.exact:
            return self
        return CpwlFunction(Grid(as_array(self.nodes, exact=True)), as_array(self.values, exact=True))

    def shifted(self, c) -> "CpwlFunction":
        return CpwlFunction(self.grid, self.values + c)

    def pruned(self, rtol: float = 1e-10) -> "CpwlFunction":
        """Drop interior nodes where left and right slopes agree."""
        from .regions import prune_collinear

        xs, vals = prune_collinear(self.nodes, self.values[:, None], rtol)
        return CpwlFunction(Grid(xs), vals[:, 0])


def eval_cpwl(f: CpwlFunction, x):
    """Evaluate ``f`` at a scalar or array ``x``; nodes return stored values exactly."""
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=object if f.exact else np.float64))
    nodes, vals = f.nodes, f.values
    if np.any(xa < nodes[0]) or np.any(xa > nodes[-1]):
        raise DomainError(f"x outside [{nodes[0]}, {nodes[-1]}]")
    if f.exact:
        import bisect

        out = []
        nl = list(nodes)
        for xi in xa:
            i = min(max(bisect.bisect_right(nl, xi) - 1, 0), len(nl) - 2)
            x0, x1 = nl[i], nl[i + 1]
            out.append(vals[i] + (vals[i + 1] - vals[i]) * (xi - x0) / (x1 - x0))
        res = as_array(out, exact=True)
    else:
        i = np.clip(np.searchsorted(nodes, xa, side="right") - 1, 0, len(nodes) - 2)
        x0, x1 = nodes[i], nodes[i + 1]
        t = (xa - x0) / (x1 - x0)
        res = vals[i] + (vals[i + 1] - vals[i]) * t
        res = np.where(xa == x1, vals[i + 1], res)
    return res[0] if scalar else res


def nodal_basis(g: Grid, i: int, x):
    """Hat function of node ``i``: 1 at ``x_i``, 0 at the neighbouring nodes and beyond."""
    n = g.segment_count
    if not 0 <= i <= n:
        raise IndexError(f"node index {i} outside 0..{n}")
    nodes = g.nodes
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(xa)
    if i > 0:
        a, b = nodes[i - 1], nodes[i]
        m = (xa >= a) & (xa <= b)
        out[m] = (xa[m] - a) / (b - a)
    if i < n:
        b, c = nodes[i], nodes[i + 1]
        m = (xa >= b) & (xa <= c)
        out[m] = (xa[m] - c) / (b - c)
    return float(out[0]) if scalar else out


def interpolate(f: Callable, g: Grid) -> CpwlFunction:
    """Nodal interpolant of ``f`` on ``g``."""
    values = [f(x) for x in g.nodes]
    return CpwlFunction(g, as_array(values, exact=g.exact))


def union_nodes(a: np.ndarray, b: np.ndarray, tol) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        merged = sorted(set(a.tolist()) | set(b.tolist()))
        return as_array(merged, exact=True)
    merged = np.union1d(a, b)
    keep = np.concatenate(([True], np.diff(merged) > tol))
    return merged[keep]


def _check_same_domain(f: CpwlFunction, g: CpwlFunction):
    scale = max(abs(float(f.hi - f.lo)), 1.0)
    if abs(float(f.lo - g.lo)) > MERGE_RTOL * scale or abs(float(f.hi - g.hi)) > MERGE_RTOL * scale:
        raise DomainError(f"domain mismatch: [{f.lo}, {f.hi}] vs [{g.lo}, {g.hi}]")


def sup_distance(f: CpwlFunction, g: CpwlFunction):
    """Exact sup-norm distance between two CPwL functions on the same domain.

    The difference is CPwL on the merged node set, so its extrema sit on those nodes.
    """
    _check_same_domain(f, g)
    if f.exact and g.exact:
        xs = union_nodes(f.nodes, g.nodes, 0)
        return max(abs(a - b) for a, b in zip(eval_cpwl(f, xs), eval_cpwl(g, xs)))
    f, g = f.to_float(), g.to_float()
    tol = MERGE_RTOL * (f.hi - f.lo)
    xs = union_nodes(f.nodes, g.nodes, tol)
    xs = np.clip(xs, max(f.lo, g.lo), min(f.hi, g.hi))
    return float(np.max(np.abs(eval_cpwl(f, xs) - eval_cpwl(g, xs))))


def sample_table(f: Callable, lo=0.0, hi=1.0, n: int = DEFAULT_SAMPLES):
    """Dense uniform evaluation table ``(xs, ys)`` of an oracle."""
    xs = np.linspace(lo, hi, n)
    try:
        ys = np.asarray(f(xs), dtype=np.float64)
        if ys.shape != xs.shape:
            raise ValueError
    except (TypeError, ValueError):
        ys = np.array([f(x) for x in xs], dtype=np.float64)
    return xs, ys


def _range_extrema(ys: np.ndarray, starts: np.ndarray, stops: np.ndarray):
    """Max and min of ``ys[starts[i]:stops[i]+1]`` for every i, via a sparse table."""
    n = len(ys)
    levels_max = [ys]
    levels_min = [ys]
    k = 1
    while 2 * k <= n:
        pm, pn = levels_max[-1], levels_min[-1]
        levels_max.append(np.maximum(pm[:-k], pm[k:]))
        levels_min.append(np.minimum(pn[:-k], pn[k:]))
        k *= 2
    length = stops - starts + 1
    lev = np.floor(np.log2(length)).astype(int)
    hi = np.empty(len(starts))
    lo = np.empty(len(starts))
    for L in np.unique(lev):
        m = lev == L
        span = 1 << L
        s, e = starts[m], stops[m] - span + 1
        hi[m] = np.maximum(levels_max[L][s], levels_max[L][e])
        lo[m] = np.minimum(levels_min[L][s], levels_min[L][e])
    return hi, lo


def modulus_estimate(samples, r: float) -> float:
    """Lower estimate of the modulus of continuity from a sorted sample table.

    ``samples`` is ``(xs, ys)``; the estimate is the largest oscillation of ``ys``
    over windows ``[x, x + r]`` anchored at sample points.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    xs, ys = (np.asarray(a, dtype=np.float64) for a in samples)
    if len(xs) < 2:
        return 0.0
    # slack absorbs linspace roundoff when r is a multiple of the spacing
    slack = 1e-9 * (xs[-1] - xs[0]) / len(xs)
    starts = np.arange(len(xs))
    stops = np.searchsorted(xs, xs + r + slack, side="right") - 1
    hi, lo = _range_extrema(ys, starts, stops)
    return float(np.max(hi - lo))


@dataclass(frozen=True)
class InterpErrorReport:
    error: float
    bound: float
    ok: bool


def check_interp_error(f: Callable, g: Grid, samples: int = DEFAULT_SAMPLES, tol: float = 1e-12) -> InterpErrorReport:
    """Measured sup error of the nodal interpolant against ``2 * modulus(max segment)``."""
    g = Grid(g.nodes.astype(np.float64)) if g.exact else g
    interp = interpolate(f, g)
    xs, ys = sample_table(f, g.lo, g.hi, samples)
    mids = 0.5 * (g.nodes[:-1] + g.nodes[1:])
    ym = np.array([f(x) for x in mids], dtype=np.float64)
    err = max(np.max(np.abs(ys - eval_cpwl(interp, xs))), np.max(np.abs(ym - eval_cpwl(interp, mids))))
    bound = 2.0 * modulus_estimate((xs, ys), float(g.max_segment_length()))
    return InterpErrorReport(float(err), bound, bool(err <= bound + tol))


def to_json(f: CpwlFunction) -> dict:
    from .io import encode_number

    return {
        "lo": encode_number(f.lo),
        "hi": encode_number(f.hi),
        "nodes": [encode_number(x) for x in f.nodes],
        "values": [encode_number(v) for v in f.values],
    }


def from_json(obj: dict, exact: bool | None = None) -> CpwlFunction:
    from .io import SchemaError, decode_number

    for key in ("lo", "hi", "nodes", "values"):
        if key not in obj:
            raise SchemaError(f"missing field '{key}'")
    nodes, values = obj["nodes"], obj["values"]
    if not isinstance(nodes, list) or not isinstance(values, list):
        raise SchemaError("'nodes' and 'values' must be arrays")
    if len(nodes) != len(values):
        raise SchemaError("'nodes' and 'values' must have equal length")
    if exact is None:
        exact = any(isinstance(v, str) for v in nodes + values)
    try:
        xs = as_array([decode_number(v, exact) for v in nodes], exact=exact)
        ys = as_array([decode_number(v, exact) for v in values], exact=exact)
        f = CpwlFunction(Grid(xs), ys)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field 'nodes': {exc}") from exc
    if decode_number(obj["lo"], exact) != f.lo or decode_number(obj["hi"], exact) != f.hi:
        raise SchemaError("field 'lo'/'hi' disagrees with first/last node")
    return f
