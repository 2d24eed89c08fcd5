"""One-hidden-layer profiles anchored on a block subgrid.

A grid with ``N * M`` segments splits into ``N`` blocks of ``M`` segments.  The
anchor set holds the block boundaries ``x_{jM}`` and their neighbours
``x_{jM-1}``, ``x_{jM+1}``; that is ``3N + 1`` points.  Functions of the form
``b + sum_j w_j relu(x - anchor_j)`` are linear between consecutive anchors, so
inside each block they are linear on the whole interior span
``[x_{(j-1)M+1}, x_{jM-1}]``.  The profiles built here pin two interior nodes
of every block and extend the line through them to the interior anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpwl import Grid, as_array
from .network import AffineLayer, ReluNetwork


@dataclass(frozen=True, eq=False)
class SigmaNFunction:
    """``bias + sum_j weights[j] * relu(x - anchors[j])``."""

    anchors: np.ndarray
    weights: np.ndarray
    bias: object

    def __post_init__(self):
        if len(self.anchors) != len(self.weights):
            raise ValueError("one weight per anchor")
        if not all(a < b for a, b in zip(self.anchors[:-1], self.anchors[1:])):
            raise ValueError("anchors must be strictly increasing")

    @property
    def exact(self) -> bool:
        return self.anchors.dtype == object

    def __call__(self, x):
        x = np.asarray(x, dtype=object if self.exact else np.float64)
        d = x[..., None] - self.anchors
        r = np.where(d > 0, d, 0 * d)
        return r @ self.weights + self.bias

    def __add__(self, other: "SigmaNFunction") -> "SigmaNFunction":
        return self.combine(other, 1, 1)

    def __sub__(self, other: "SigmaNFunction") -> "SigmaNFunction":
        return self.combine(other, 1, -1)

    def __neg__(self) -> "SigmaNFunction":
        return SigmaNFunction(self.anchors, -self.weights, -self.bias)

    def combine(self, other: "SigmaNFunction", alpha, beta) -> "SigmaNFunction":
        """``alpha * self + beta * other`` on a shared anchor set."""
        if len(self.anchors) != len(other.anchors) or any(self.anchors != other.anchors):
            raise ValueError("profiles live on different anchor sets")
        return SigmaNFunction(
            self.anchors, alpha * self.weights + beta * other.weights, alpha * self.bias + beta * other.bias
        )

    def render(self) -> ReluNetwork:
        """Width ``len(anchors)`` network: unit input weights, biases ``-anchors``."""
        n = len(self.anchors)
        one = as_array(np.ones((n, 1)), exact=self.exact)
        first = AffineLayer(one, -self.anchors)
        out = AffineLayer(as_array(self.weights[None, :], exact=self.exact), as_array([self.bias], exact=self.exact))
        return ReluNetwork([first, out])


@dataclass(frozen=True, eq=False)
class BlockSubgrid:
    parent: Grid
    block_count: int
    block_size: int
    indices: tuple[int, ...]

    @property
    def anchors(self) -> np.ndarray:
        return self.parent.nodes[list(self.indices)]

    @property
    def exact(self) -> bool:
        return self.parent.exact

    def node(self, block: int, offset: int):
        """Parent node at ``offset`` inside 0-based ``block``."""
        return self.parent.nodes[block * self.block_size + offset]


def build_subgrid(g: Grid, N: int, M: int) -> BlockSubgrid:
    if N < 1:
        raise ValueError("block count must be >= 1")
    if M < 3:
        raise ValueError(f"block size must be >= 3 for distinct anchors, got {M}")
    if g.segment_count != N * M:
        raise ValueError(f"grid has {g.segment_count} segments, expected N*M = {N * M}")
    idx = sorted({k for j in range(N + 1) for k in (j * M - 1, j * M, j * M + 1) if 0 <= k <= N * M})
    return BlockSubgrid(g, N, M, tuple(idx))


def sigma_interpolant(anchors, targets) -> SigmaNFunction:
    """The member of the anchored class taking ``targets`` at ``anchors``.

    Weights are successive slope differences.  Left of the first anchor the
    form is constant; right of the last anchor the final weight cancels the last
    slope so it is constant there as well.
    """
    anchors = np.asarray(anchors)
    exact = anchors.dtype == object
    targets = as_array(targets, exact=exact)
    if len(targets) != len(anchors):
        raise ValueError(f"expected {len(anchors)} targets, got {len(targets)}")
    slopes = np.diff(targets) / np.diff(anchors)
    w = np.empty(len(anchors), dtype=object if exact else np.float64)
    w[0] = slopes[0]
    w[1:-1] = np.diff(slopes)
    w[-1] = -slopes[-1]
    return SigmaNFunction(anchors, w, targets[0])


def build_interpolant_1layer(sub: BlockSubgrid, targets) -> SigmaNFunction:
    return sigma_interpolant(sub.anchors, targets)


def _positive(values, n, what):
    if len(values) != n:
        raise ValueError(f"{what}: expected {n} block values, got {len(values)}")
    if any(v <= 0 for v in values):
        raise ValueError(f"{what}: block values must be positive")


def _from_block_data(sub: BlockSubgrid, boundary, left, right) -> SigmaNFunction:
    """Assemble anchor targets from boundary values (N+1) and the two interior anchors of each block."""
    N, M = sub.block_count, sub.block_size
    vals = {}
    for j in range(N + 1):
        vals[j * M] = boundary[j]
    for j in range(N):
        vals[j * M + 1] = left[j]
        vals[(j + 1) * M - 1] = right[j]
    return sigma_interpolant(sub.anchors, [vals[i] for i in sub.indices])


def _zeros(sub, n):
    return as_array(np.zeros(n), exact=sub.exact)


def _line(y, x_pin, x_zero, x):
    """Line with value ``y`` at ``x_pin`` and 0 at ``x_zero``, evaluated at ``x``."""
    out = y * (x - x_zero) / (x_pin - x_zero)
    out = np.where(x == x_pin, y, out)
    return np.where(x == x_zero, 0 * out, out)


def _block_nodes(sub, offset):
    N, M = sub.block_count, sub.block_size
    return sub.parent.nodes[[j * M + offset for j in range(N)]]


def build_phi_zero(sub: BlockSubgrid, boundary_values) -> SigmaNFunction:
    """Nodal combination of the block-boundary hats; zero at the interior anchors."""
    N = sub.block_count
    _positive(boundary_values, N + 1, "ZERO")
    z = _zeros(sub, N)
    return _from_block_data(sub, as_array(boundary_values, exact=sub.exact), z, z)


def build_phi_minus(sub: BlockSubgrid, k: int, block_values) -> SigmaNFunction:
    """Zero at block boundaries and at offset ``k-1``; ``block_values[j]`` at offset ``k``."""
    N, M = sub.block_count, sub.block_size
    if not 2 <= k <= M - 1:
        raise ValueError(f"offset k={k} outside 2..{M - 1}")
    _positive(block_values, N, "phi_minus")
    y = as_array(block_values, exact=sub.exact)
    xz, xp = _block_nodes(sub, k - 1), _block_nodes(sub, k)
    left = _line(y, xp, xz, _block_nodes(sub, 1))
    right = _line(y, xp, xz, _block_nodes(sub, M - 1))
    return _from_block_data(sub, _zeros(sub, N + 1), left, right)


def build_phi_plus(sub: BlockSubgrid, k: int, block_values) -> SigmaNFunction:
    """Zero at block boundaries and at offset ``k+1``; ``block_values[j]`` at offset ``k``."""
    N, M = sub.block_count, sub.block_size
    if not 1 <= k <= M - 2:
        raise ValueError(f"offset k={k} outside 1..{M - 2}")
    _positive(block_values, N, "phi_plus")
    y = as_array(block_values, exact=sub.exact)
    xp, xz = _block_nodes(sub, k), _block_nodes(sub, k + 1)
    left = _line(y, xp, xz, _block_nodes(sub, 1))
    right = _line(y, xp, xz, _block_nodes(sub, M - 1))
    return _from_block_data(sub, _zeros(sub, N + 1), left, right)


ZERO, ONE, LAST = "ZERO", "ONE", "LAST"


def build_phi_edge(sub: BlockSubgrid, kind: str, block_values) -> SigmaNFunction:
    """Edge profiles: ``ZERO`` (boundaries), ``ONE`` (offset 1), ``LAST`` (offset M-1)."""
    if kind == ZERO:
        return build_phi_zero(sub, block_values)
    if kind == ONE:
        return build_phi_plus(sub, 1, block_values)
    if kind == LAST:
        return build_phi_minus(sub, sub.block_size - 1, block_values)
    raise ValueError(f"unknown edge kind {kind!r}")
