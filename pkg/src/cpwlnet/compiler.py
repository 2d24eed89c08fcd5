"""Exact compilation of CPwL targets on [0, 1] into ReLU networks.

``compile_two_layer`` produces hidden widths ``(3N + 1, 3(M - 2))`` for a target
with ``N * M`` segments.  Values are shifted so the smallest is 1; then for every
offset ``k`` inside a block one group of second-layer neurons reproduces the
nodal-basis part of the target at the offset-``k`` nodes:

* offsets 0, 1 and M-1: a single neuron ``relu(phi)``;
* offsets 2..M-2: ``relu(phi_plus) - relu(phi_plus - phi_minus) + relu(-phi_minus)``.

``deepen`` trades the wide second layer for depth, and ``compile_deep`` chains
both to fit ``N^2 L`` segments into ``L + 1`` hidden layers of width ``6N + 4``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cpwl import CpwlFunction, Grid, as_array, eval_cpwl, sup_distance
from .network import AffineLayer, ReluNetwork, pad_depth
from .regions import to_cpwl
from .shallow import (
    BlockSubgrid,
    SigmaNFunction,
    build_phi_minus,
    build_phi_plus,
    build_phi_zero,
    build_subgrid,
    sigma_interpolant,
)


class CapacityError(ValueError):
    """The target has more segments than the requested architecture can hold."""


@dataclass(frozen=True, eq=False)
class OffsetGroup:
    """Second-layer neurons responsible for the offset-``k`` nodes."""

    offset: int
    profiles: tuple[SigmaNFunction, ...]
    coeffs: tuple[int, ...]


@dataclass(eq=False)
class CompilePlan:
    block_count: int
    block_size: int
    shift: object
    target: CpwlFunction
    subgrid: BlockSubgrid
    groups: list[OffsetGroup] = field(default_factory=list)

    @property
    def shifted_values(self) -> np.ndarray:
        return self.target.values + self.shift


def _check_unit_domain(f: CpwlFunction):
    if f.lo != 0 or f.hi != 1:
        raise ValueError(f"target must live on [0, 1], got [{f.lo}, {f.hi}]")


def plan_two_layer(target: CpwlFunction, N: int, M: int) -> CompilePlan:
    """Build every second-layer profile for a target with exactly ``N * M`` segments."""
    _check_unit_domain(target)
    if target.segment_count != N * M:
        raise ValueError(f"target has {target.segment_count} segments, expected N*M = {N * M}")
    sub = build_subgrid(target.grid, N, M)
    vmin = min(target.values)
    shift = 1 - vmin
    v = target.values + shift
    nodes_at = lambda off: v[[j * M + off for j in range(N)]]  # noqa: E731
    groups = [
        OffsetGroup(0, (build_phi_zero(sub, v[[j * M for j in range(N + 1)]]),), (1,)),
        OffsetGroup(1, (build_phi_plus(sub, 1, nodes_at(1)),), (1,)),
    ]
    for k in range(2, M - 1):
        plus = build_phi_plus(sub, k, nodes_at(k))
        minus = build_phi_minus(sub, k, nodes_at(k))
        groups.append(OffsetGroup(k, (plus, plus - minus, -minus), (1, -1, 1)))
    groups.append(OffsetGroup(M - 1, (build_phi_minus(sub, M - 1, nodes_at(M - 1)),), (1,)))
    return CompilePlan(N, M, shift, target, sub, groups)


def _first_layer(sub: BlockSubgrid) -> AffineLayer:
    anchors = sub.anchors
    return AffineLayer(as_array(np.ones((len(anchors), 1)), exact=sub.exact), -anchors)


def _second_layer(profiles) -> AffineLayer:
    return AffineLayer(np.vstack([p.weights for p in profiles]), np.array([p.bias for p in profiles], dtype=profiles[0].weights.dtype))


def render_plan(plan: CompilePlan, groups=None) -> ReluNetwork:
    """Network for the given groups (all by default); output bias removes the shift."""
    groups = plan.groups if groups is None else groups
    exact = plan.subgrid.exact
    profiles = [p for g in groups for p in g.profiles]
    coeffs = [c for g in groups for c in g.coeffs]
    bias = -plan.shift if groups is plan.groups else 0 * plan.shift
    out = AffineLayer(as_array([coeffs], exact=exact), as_array([bias], exact=exact))
    return ReluNetwork([_first_layer(plan.subgrid), _second_layer(profiles), out])


def compile_two_layer(target: CpwlFunction, N: int, M: int) -> ReluNetwork:
    """Two-hidden-layer network equal to ``target`` on [0, 1].

    Requires ``M >= 3``; for ``M = 3`` only the three edge neurons exist.
    """
    return render_plan(plan_two_layer(target, N, M))


@dataclass
class DecompositionReport:
    violations: list[tuple[int, int, object, object]]
    group_distances: dict[int, float]
    total_distance: float

    @property
    def ok(self) -> bool:
        return not self.violations


def expected_group_function(plan: CompilePlan, k: int) -> CpwlFunction:
    """``sum_j v(x_{jM+k}) b_{jM+k}`` on the parent grid (``v`` = shifted values)."""
    M = plan.block_size
    v = plan.shifted_values
    vals = 0 * v
    idx = range(0, len(v), M) if k == 0 else range(k, len(v) - 1, M)
    for i in idx:
        vals[i] = v[i]
    return CpwlFunction(plan.target.grid, vals)


def check_nodes(plan: CompilePlan, k: int):
    """The node families fixing a group function on every block: offsets 0, 1, k-1, k, k+1, M-1."""
    M, N = plan.block_size, plan.block_count
    offs = sorted({o for o in (0, 1, k - 1, k, k + 1, M - 1) if 0 <= o < M})
    return sorted({j * M + o for j in range(N) for o in offs} | {N * M})


def verify_varphi_decomposition(plan: CompilePlan, tol: float = 1e-9) -> DecompositionReport:
    """Check each offset group against its nodal-basis combination at the checked node families."""
    exact = plan.subgrid.exact
    nodes = plan.target.nodes
    scale = 1 + float(max(abs(v) for v in plan.shifted_values))
    violations = []
    distances = {}
    total = None
    for g in plan.groups:
        got = to_cpwl(render_plan(plan, [g]), exact=exact)
        want = expected_group_function(plan, g.offset)
        idx = check_nodes(plan, g.offset)
        xs = nodes[idx]
        gv, wv = eval_cpwl(got, xs), eval_cpwl(want, xs)
        for i, a, b in zip(idx, gv, wv):
            if (a != b) if exact else abs(float(a - b)) > tol * scale:
                violations.append((g.offset, int(i), a, b))
        distances[g.offset] = float(sup_distance(got, want))
    full = to_cpwl(render_plan(plan), exact=exact)
    total = float(sup_distance(full, plan.target))
    return DecompositionReport(violations, distances, total)


def _accumulator_shift(net: ReluNetwork, stops):
    """Offset keeping every running output sum positive on [0, 1].

    The running sum after stage s is the two-layer net with output weights
    outside the first ``stops[s]`` neurons zeroed; each is CPwL, so its minimum
    is the smallest node value of its breakpoint form.  The result is twice the
    worst deficit plus one, a margin far above float error in the sums.
    """
    l1, l2, l3 = net.layers
    lowest = 0 * l3.biases[0]
    for stop in stops[:-1]:
        w = l3.weights.copy()
        w[0, stop:] = 0
        partial = ReluNetwork([l1, l2, AffineLayer(w, 0 * l3.biases)])
        lowest = min(lowest, min(to_cpwl(partial).values))
    return 2 * (-lowest) + 1


def deepen(net: ReluNetwork, L: int) -> ReluNetwork:
    """Equivalent network on [0, 1] with ``L + 1`` hidden layers of width at most ``2W + 1``.

    ``net`` has hidden widths ``(W, K)`` with ``K <= W * L``.  The K second-layer
    neurons are split into L chunks.  Stage s computes chunk s from the
    first-layer features, which are carried forward unchanged (they are
    nonnegative); one accumulator channel carries the running output sum
    shifted by a bound ``B`` so the ReLU never clips it.
    """
    if net.input_dim != 1 or net.output_dim != 1:
        raise ValueError("deepen supports 1-input, 1-output networks")
    if net.hidden_depth != 2:
        raise ValueError(f"deepen expects two hidden layers, got {net.hidden_depth}")
    if L < 1:
        raise ValueError("L must be >= 1")
    l1, l2, l3 = net.layers
    W, K = l1.out_width, l2.out_width
    if K > W * L:
        raise CapacityError(f"second layer width {K} exceeds W*L = {W * L}")
    if L == 1:
        return net
    exact = net.exact
    cast = lambda a: as_array(a, exact=exact)  # noqa: E731
    A, a = cast(l1.weights), cast(l1.biases)
    Bm, beta = cast(l2.weights), cast(l2.biases)
    c, c0 = cast(l3.weights[0]), cast(l3.biases)[0]

    sizes = [K // L + (1 if s < K % L else 0) for s in range(L)]
    shift = _accumulator_shift(net, np.cumsum(sizes))

    bounds = np.cumsum([0] + sizes)
    chunks = [slice(bounds[s], bounds[s + 1]) for s in range(L)]
    zeros = lambda *shape: cast(np.zeros(shape))  # noqa: E731
    eye_W = cast(np.eye(W))

    layers = [AffineLayer(A, a)]
    # layer for stage s (1-based) reads [h1, chunk_{s-1}, acc_{s-1}] and writes [h1?, chunk_s, acc_s]
    prev_chunk = 0
    prev_acc = False
    for s in range(1, L + 1):
        ch = chunks[s - 1]
        k_s = ch.stop - ch.start
        carry_h1 = s < L
        has_acc = s >= 2
        in_w = W + prev_chunk + (1 if prev_acc else 0)
        rows_w, rows_b = [], []
        if carry_h1:
            rows_w.append(np.hstack([eye_W, zeros(W, in_w - W)]))
            rows_b.append(zeros(W))
        rows_w.append(np.hstack([Bm[ch], zeros(k_s, in_w - W)]))
        rows_b.append(beta[ch])
        if has_acc:
            acc_row = zeros(1, in_w)
            pc = chunks[s - 2]
            acc_row[0, W:W + prev_chunk] = c[pc]
            if prev_acc:
                acc_row[0, -1] = 1
                acc_b = zeros(1)
            else:
                acc_b = cast([shift])
            rows_w.append(acc_row)
            rows_b.append(acc_b)
        layers.append(AffineLayer(np.vstack(rows_w), np.concatenate(rows_b)))
        prev_chunk, prev_acc = k_s, has_acc
    # output: acc + c_L . chunk_L + c0 - shift
    in_w = prev_chunk + (1 if prev_acc else 0)
    out_w = zeros(1, in_w)
    out_w[0, :prev_chunk] = c[chunks[-1]]
    out_b = c0
    if prev_acc:
        out_w[0, -1] = 1
        out_b = c0 - shift
    layers.append(AffineLayer(out_w, cast([out_b])))
    return ReluNetwork(layers)


def pad_grid(target: CpwlFunction, n_segments: int) -> CpwlFunction:
    """Insert collinear nodes until ``target`` has exactly ``n_segments`` segments.

    Extra nodes go to the segments whose sub-pieces would otherwise be longest,
    and are spaced uniformly inside each segment.
    """
    P = target.segment_count
    if n_segments < P:
        raise CapacityError(f"target has {P} segments, more than {n_segments}")
    if n_segments == P:
        return target
    exact = target.exact
    nodes, vals = target.nodes, target.values
    lengths = [float(b - a) for a, b in zip(nodes[:-1], nodes[1:])]
    counts = [1] * P
    heap = [(-ln, i) for i, ln in enumerate(lengths)]
    heapq.heapify(heap)
    for _ in range(n_segments - P):
        _, i = heapq.heappop(heap)
        counts[i] += 1
        heapq.heappush(heap, (-lengths[i] / counts[i], i))
    new_x, new_v = [nodes[0]], [vals[0]]
    for i in range(P):
        x0, x1, y0, y1, m = nodes[i], nodes[i + 1], vals[i], vals[i + 1], counts[i]
        for q in range(1, m):
            t = Fraction(q, m) if exact else q / m
            new_x.append(x0 + t * (x1 - x0))
            new_v.append(y0 + t * (y1 - y0))
        new_x.append(x1)
        new_v.append(y1)
    return CpwlFunction(Grid(as_array(new_x, exact=exact)), as_array(new_v, exact=exact))


def capacity(N: int, L: int) -> int:
    return N * N * L


def compile_deep(target: CpwlFunction, N: int, L: int) -> ReluNetwork:
    """``L + 1`` hidden layers of width at most ``6N + 4`` equal to a target with ``<= N^2 L`` segments."""
    _check_unit_domain(target)
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    need = capacity(N, L)
    if target.segment_count > need:
        raise CapacityError(
            f"target has {target.segment_count} segments; N^2*L = {N}^2*{L} = {need} is too small"
        )
    padded = pad_grid(target, need)
    M = N * L
    if M >= 3:
        return deepen(compile_two_layer(padded, N, M), L)
    # tiny capacities: one hidden layer on all nodes, then pass the output through
    shallow = sigma_interpolant(padded.nodes, padded.values).render()
    return pad_depth(shallow, L + 1)


def two_layer_widths(N: int, M: int) -> tuple[int, int]:
    return 3 * N + 1, max(3, 3 * (M - 2))


def deep_width_bound(N: int) -> int:
    return 6 * N + 4


def min_blocks_for(P: int, L: int) -> int:
    return max(1, math.ceil(math.sqrt(P / L)))
