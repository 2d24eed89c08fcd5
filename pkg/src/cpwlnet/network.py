"""Dense ReLU networks: evaluation, serial/parallel composition, parameter counts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cpwl import as_array


@dataclass(frozen=True, eq=False)
class AffineLayer:
    """``x -> weights @ x + biases``; weights are ``(out_width, in_width)``."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w, b = self.weights, self.biases
        exact = w.dtype == object or b.dtype == object
        w = as_array(w, exact=exact)
        b = as_array(b, exact=exact)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ValueError(f"inconsistent layer shapes {w.shape} / {b.shape}")
        if not exact and not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer entries must be finite")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object


def layer(weights, biases, exact: bool = False) -> AffineLayer:
    return AffineLayer(as_array(weights, exact=exact), as_array(biases, exact=exact))


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_widths: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("all widths must be >= 1")


class ReluNetwork:
    """Affine layers with ReLU after every layer except the last."""

    __slots__ = ("layers",)

    def __init__(self, layers: Sequence[AffineLayer]):
        layers = tuple(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for a, b in zip(layers[:-1], layers[1:]):
            if a.out_width != b.in_width:
                raise ValueError(f"layer widths do not chain: {a.out_width} -> {b.in_width}")
        self.layers = layers

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_width

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_width

    @property
    def hidden_depth(self) -> int:
        return len(self.layers) - 1

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(l.out_width for l in self.layers[:-1])

    @property
    def exact(self) -> bool:
        return any(l.exact for l in self.layers)

    @property
    def architecture(self) -> Architecture:
        return Architecture(self.input_dim, self.hidden_widths, self.output_dim)

    @property
    def max_width(self) -> int:
        return max(self.hidden_widths, default=0)

    def __call__(self, x):
        return eval_net(self, x)

    def __repr__(self):
        return f"ReluNetwork({self.input_dim} -> {list(self.hidden_widths)} -> {self.output_dim})"

    def to_float(self) -> "ReluNetwork":
        return ReluNetwork([AffineLayer(l.weights.astype(np.float64), l.biases.astype(np.float64)) for l in self.layers])


def relu(x):
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.where(x > 0, x, 0 * x)
    return np.maximum(x, 0.0)


def forward(net: ReluNetwork, X: np.ndarray) -> np.ndarray:
    """Batched forward pass; ``X`` is ``(n, input_dim)``."""
    h = X
    last = len(net.layers) - 1
    for i, l in enumerate(net.layers):
        h = h @ l.weights.T + l.biases
        if i < last:
            h = relu(h)
    return h


def eval_net(net: ReluNetwork, x):
    """Evaluate on one input vector or a batch of rows.

    For ``input_dim == 1`` a scalar or 1-D array of scalars is accepted and the
    output is squeezed the same way.
    """
    exact = net.exact
    xa = np.asarray(x, dtype=object if exact else np.float64)
    d = net.input_dim
    if d == 1 and xa.ndim <= 1:
        out = forward(net, xa.reshape(-1, 1))
        if net.output_dim == 1:
            out = out[:, 0]
        return out[0] if xa.ndim == 0 else out
    if xa.ndim == 1:
        if xa.shape[0] != d:
            raise ValueError(f"expected input of length {d}, got {xa.shape[0]}")
        out = forward(net, xa[None, :])[0]
        return out
    if xa.ndim != 2 or xa.shape[1] != d:
        raise ValueError(f"expected inputs of shape (n, {d}), got {xa.shape}")
    return forward(net, xa)


def affine_net(weights, biases, exact: bool = False) -> ReluNetwork:
    """A network with no hidden layer."""
    return ReluNetwork([layer(weights, biases, exact)])


def _cast_like(a: np.ndarray, exact: bool) -> np.ndarray:
    return as_array(a, exact=exact) if exact and a.dtype != object else a


def compose_serial(outer: ReluNetwork, inner: ReluNetwork) -> ReluNetwork:
    """``outer o inner``: inner's output map and outer's first map fuse into one layer."""
    if inner.output_dim != outer.input_dim:
        raise ValueError(f"cannot compose: inner outputs {inner.output_dim}, outer expects {outer.input_dim}")
    exact = outer.exact or inner.exact
    last, first = inner.layers[-1], outer.layers[0]
    wl, bl = _cast_like(last.weights, exact), _cast_like(last.biases, exact)
    wf, bf = _cast_like(first.weights, exact), _cast_like(first.biases, exact)
    fused = AffineLayer(wf @ wl, wf @ bl + bf)
    layers = list(inner.layers[:-1]) + [fused] + list(outer.layers[1:])
    if exact:
        layers = [AffineLayer(_cast_like(l.weights, True), _cast_like(l.biases, True)) for l in layers]
    return ReluNetwork(layers)


def _zeros(shape, exact):
    return as_array(np.zeros(shape), exact=exact) if exact else np.zeros(shape)


def _eye(n, exact):
    return as_array(np.eye(n), exact=exact) if exact else np.eye(n)


def pad_depth(net: ReluNetwork, depth: int) -> ReluNetwork:
    """Equivalent network with ``depth`` hidden layers.

    The output ``t`` is carried through the extra layers as the channel pair
    ``relu(t), relu(-t)`` and recombined as their difference.
    """
    extra = depth - net.hidden_depth
    if extra < 0:
        raise ValueError("cannot reduce depth")
    if extra == 0:
        return net
    exact = net.exact
    last = net.layers[-1]
    m = last.out_width
    split = AffineLayer(np.vstack([last.weights, -last.weights]), np.concatenate([last.biases, -last.biases]))
    carry = [AffineLayer(_eye(2 * m, exact), _zeros(2 * m, exact)) for _ in range(extra - 1)]
    eye = _eye(m, exact)
    join = AffineLayer(np.hstack([eye, -eye]), _zeros(m, exact))
    return ReluNetwork(list(net.layers[:-1]) + [split] + carry + [join])


def _block_diag(blocks, exact):
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = _zeros((rows, cols), exact)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def stack_parallel(nets: Sequence[ReluNetwork], input_maps: Sequence[np.ndarray] | None = None) -> ReluNetwork:
    """Run ``nets`` side by side and concatenate their outputs.

    ``input_maps[i]`` is a ``(nets[i].input_dim, D)`` matrix feeding net i from the
    shared D-dimensional input; by default all nets read the same input.
    Shallower nets are padded to the common depth.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("need at least one network")
    exact = any(n.exact for n in nets)
    if input_maps is None:
        d = nets[0].input_dim
        if any(n.input_dim != d for n in nets):
            raise ValueError("networks disagree on input_dim")
        input_maps = [_eye(d, exact)] * len(nets)
    input_maps = [_cast_like(np.asarray(m, dtype=object if exact else np.float64), exact) for m in input_maps]
    D = input_maps[0].shape[1]
    for n, m in zip(nets, input_maps):
        if m.shape != (n.input_dim, D):
            raise ValueError("input map shape mismatch")
    depth = max(n.hidden_depth for n in nets)
    nets = [pad_depth(n, depth) for n in nets]
    layers = []
    for li in range(depth + 1):
        ls = [n.layers[li] for n in nets]
        if li == 0:
            w = np.vstack([_cast_like(l.weights, exact) @ m for l, m in zip(ls, input_maps)])
        else:
            w = _block_diag([_cast_like(l.weights, exact) for l in ls], exact)
        b = np.concatenate([_cast_like(l.biases, exact) for l in ls])
        layers.append(AffineLayer(w, b))
    return ReluNetwork(layers)


def sum_parallel(nets: Sequence[ReluNetwork], coeffs: Sequence) -> ReluNetwork:
    """Network computing ``sum_i coeffs[i] * nets[i]``; hidden widths add."""
    nets = list(nets)
    if not nets:
        raise ValueError("need at least one network")
    if len(coeffs) != len(nets):
        raise ValueError("one coefficient per network")
    m = nets[0].output_dim
    if any(n.output_dim != m for n in nets):
        raise ValueError("networks disagree on output_dim")
    exact = any(n.exact for n in nets)
    stacked = stack_parallel(nets)
    eye = _eye(m, exact)
    comb = np.hstack([c * eye for c in coeffs])
    return compose_serial(affine_net(comb, _zeros(m, exact), exact), stacked)


def param_count(net: ReluNetwork) -> int:
    """All weights and biases, output map included."""
    return sum((l.in_width + 1) * l.out_width for l in net.layers)


def shatter_count(arch: Architecture | ReluNetwork) -> int:
    """``sum_i (N_{i-1} + 1) N_i + N_L`` with ``N_0 = 1``; 0 for no hidden layer."""
    if isinstance(arch, ReluNetwork):
        arch = arch.architecture
    widths = list(arch.hidden_widths)
    if not widths:
        return 0
    total = 0
    prev = 1
    for w in widths:
        total += (prev + 1) * w
        prev = w
    return total + widths[-1]


def to_json(net: ReluNetwork) -> dict:
    from .io import encode_number

    return {
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "layers": [
            {
                "weights": [[encode_number(v) for v in row] for row in l.weights],
                "biases": [encode_number(v) for v in l.biases],
            }
            for l in net.layers
        ],
    }


def from_json(obj: dict, exact: bool | None = None) -> ReluNetwork:
    from .io import SchemaError, decode_number

    for key in ("input_dim", "output_dim", "layers"):
        if key not in obj:
            raise SchemaError(f"missing field '{key}'")
    raw = obj["layers"]
    if not isinstance(raw, list) or not raw:
        raise SchemaError("field 'layers' must be a non-empty array")
    if exact is None:
        exact = any(
            isinstance(v, str) for l in raw for v in list(l.get("biases", [])) + [x for r in l.get("weights", []) for x in r]
        )
    layers = []
    for i, l in enumerate(raw):
        if not isinstance(l, dict) or "weights" not in l or "biases" not in l:
            raise SchemaError(f"field 'layers[{i}]' needs 'weights' and 'biases'")
        try:
            w = as_array([[decode_number(v, exact) for v in row] for row in l["weights"]], exact=exact)
            b = as_array([decode_number(v, exact) for v in l["biases"]], exact=exact)
            layers.append(AffineLayer(w, b))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"field 'layers[{i}]': {exc}") from exc
    try:
        net = ReluNetwork(layers)
    except ValueError as exc:
        raise SchemaError(f"field 'layers': {exc}") from exc
    if net.input_dim != obj["input_dim"] or net.output_dim != obj["output_dim"]:
        raise SchemaError("field 'input_dim'/'output_dim' disagrees with layer shapes")
    return net
