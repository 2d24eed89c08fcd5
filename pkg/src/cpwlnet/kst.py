"""Kolmogorov-superposition approximators built from compiled CPwL networks.

The target is ``f(x) = sum_{k=0}^{2d} g(sum_i lambda_i phi_k(x_i))``.  Each inner
``phi_k`` is interpolated on a uniform grid with ``N^2 L`` segments and each copy
of the outer ``g`` on a uniform grid of ``[0, d]`` with ``(2d+1)^2 N^2 L``
segments; both interpolants are compiled exactly with :func:`compile_deep`.
The true Kolmogorov inner functions are not constructed here: surrogates with
the same monotonicity and Lipschitz properties stand in for them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .compiler import compile_deep
from .cpwl import CpwlFunction, Grid, eval_cpwl, modulus_estimate, sample_table
from .network import ReluNetwork, affine_net, compose_serial, forward, stack_parallel

LOG10_2 = math.log10(2.0)


class KstValidationError(ValueError):
    """A KST problem violates one of its structural invariants."""


def default_lambdas(d: int) -> np.ndarray:
    """``(1 + frac(i * sqrt 2)) / 2`` for ``i = 1..d``."""
    r2 = math.sqrt(2.0)
    return np.array([(1.0 + (i * r2) % 1.0) / 2.0 for i in range(1, d + 1)])


def make_inner_surrogate(seed: int, k: int, n_breaks: int = 24, slope_range=(0.85, 1.0)) -> CpwlFunction:
    """Strictly increasing CPwL stand-in for an inner function.

    Breakpoints are uniform random, slopes are drawn from
    ``slope_range * log10(2)``; the result maps [0, 1] onto [0, s] with
    ``s <= log10(2)``.  Deterministic in ``(seed, k)``.
    """
    rng = np.random.default_rng([seed, k])
    while True:
        inner = np.sort(rng.uniform(0.0, 1.0, n_breaks))
        if np.all(np.diff(inner) > 1e-6) and inner[0] > 1e-6 and inner[-1] < 1 - 1e-6:
            break
    nodes = np.concatenate([[0.0], inner, [1.0]])
    slopes = rng.uniform(*slope_range, n_breaks + 1) * LOG10_2
    values = np.concatenate([[0.0], np.cumsum(slopes * np.diff(nodes))])
    return CpwlFunction(Grid(nodes), values)


def alternating_outer(d: int, kinks, start_slope: float = 1.0) -> CpwlFunction:
    """Lipschitz-1 zigzag on [0, d] with slope +-1 switching at ``kinks``."""
    nodes = np.concatenate([[0.0], np.asarray(kinks, dtype=np.float64), [float(d)]])
    slopes = start_slope * (-1.0) ** np.arange(len(nodes) - 1)
    values = np.concatenate([[0.0], np.cumsum(slopes * np.diff(nodes))])
    return CpwlFunction(Grid(nodes), values)


def demo_kinks(lo: float, hi: float, spacing: float = 0.021, jitter: float = 0.004) -> np.ndarray:
    """Irregular kink positions in ``[lo, hi]``, at least ``spacing - jitter`` apart."""
    r2 = math.sqrt(2.0)
    out = []
    m = 0
    while lo + spacing * m + jitter < hi:
        out.append(lo + spacing * m + jitter * ((m * r2) % 1.0))
        m += 1
    return np.array(out)


# builtin outer functions: name -> (factory(params, d) -> callable, lipschitz(params))
def _builtin(name: str, params: dict, d: int):
    if name == "abs":
        c = float(params.get("center", d / 2))
        return (lambda t: np.abs(np.asarray(t) - c)), 1.0
    if name == "linear":
        a, b = float(params.get("slope", 1.0)), float(params.get("intercept", 0.0))
        return (lambda t: a * np.asarray(t) + b), abs(a)
    if name == "zero":
        return (lambda t: 0.0 * np.asarray(t)), 0.0
    if name == "zigzag":
        if "kinks" not in params:
            raise KstValidationError("zigzag outer needs 'kinks'")
        g = alternating_outer(d, params["kinks"])
        return (lambda t: eval_cpwl(g, t)), 1.0
    raise KstValidationError(f"unknown builtin outer '{name}'")


@dataclass(eq=False)
class KstProblem:
    d: int
    lambdas: np.ndarray
    inners: list[CpwlFunction]
    outer: Callable
    lipschitz: float | None = None
    outer_modulus: Callable | None = None
    modulus_estimated: bool = False
    outer_spec: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        d = self.d
        if d < 2:
            raise KstValidationError("dimension d must be >= 2")
        if self.lambdas.shape != (d,) or np.any(self.lambdas <= 0) or np.any(self.lambdas > 1):
            raise KstValidationError("lambdas: need d values in (0, 1]")
        if len(self.inners) != 2 * d + 1:
            raise KstValidationError(f"inners: need 2d+1 = {2 * d + 1} functions, got {len(self.inners)}")
        for k, phi in enumerate(self.inners):
            if phi.lo != 0 or phi.hi != 1:
                raise KstValidationError(f"inner {k}: domain must be [0, 1]")
            if not np.all(np.diff(phi.values) > 0):
                raise KstValidationError(f"inner {k}: not strictly increasing")
            if phi.values[0] < 0 or phi.values[-1] > 1:
                raise KstValidationError(f"inner {k}: values must lie in [0, 1]")
            if np.max(phi.slopes()) > LOG10_2 + 1e-12:
                raise KstValidationError(f"inner {k}: Lipschitz constant exceeds log10(2)")
        top = max(float(phi.values[-1]) for phi in self.inners)
        if float(np.sum(self.lambdas)) * top > d:
            raise KstValidationError("inner sums can leave [0, d]")

    def with_empirical_modulus(self, samples: int = 10_001) -> "KstProblem":
        """Copy whose outer modulus is estimated from a dense sample table."""
        table = sample_table(self.outer, 0.0, float(self.d), samples)
        return KstProblem(
            self.d, self.lambdas, self.inners, self.outer, None,
            lambda r: modulus_estimate(table, r), True, self.outer_spec,
        )


def make_problem(d: int, outer_spec: dict, seed: int = 0, lambdas=None, inners=None) -> KstProblem:
    """Problem from an outer description (``{"kind": "builtin"|"cpwl", ...}``) and surrogate inners."""
    inners = inners if inners is not None else [make_inner_surrogate(seed, k) for k in range(2 * d + 1)]
    lambdas = default_lambdas(d) if lambdas is None else lambdas
    kind = outer_spec.get("kind")
    if kind == "builtin":
        fn, lip = _builtin(outer_spec.get("name", ""), outer_spec.get("params", {}), d)
    elif kind == "cpwl":
        from .cpwl import from_json

        g = outer_spec["function"] if isinstance(outer_spec["function"], CpwlFunction) else from_json(outer_spec["function"])
        if g.lo != 0 or g.hi != d:
            raise KstValidationError(f"outer: CPwL domain must be [0, {d}]")
        fn, lip = (lambda t: eval_cpwl(g, t)), float(np.max(np.abs(g.slopes())))
    else:
        raise KstValidationError(f"outer: unknown kind {kind!r}")
    return KstProblem(d, lambdas, inners, fn, lip, outer_spec=outer_spec)


DEMO_SLOPES_WIDE = (0.9, 1.0)
DEMO_SLOPES_NARROW = (0.5, 0.55)


def demo_problem(seed: int = 0, d: int = 2) -> KstProblem:
    """Surrogate inners with a Lipschitz-1 zigzag outer.

    Inner 0 climbs faster than the others, and every outer kink lies in the part
    of ``[0, d]`` reached only by inner sum 0.  The sup error is then set by one
    branch crossing the kinks, which a tensor sample grid resolves well.
    """
    lambdas = default_lambdas(d)
    inners = [
        make_inner_surrogate(seed, k, slope_range=DEMO_SLOPES_WIDE if k == 0 else DEMO_SLOPES_NARROW)
        for k in range(2 * d + 1)
    ]
    reach = [float(np.sum(lambdas)) * float(phi.values[-1]) for phi in inners]
    kinks = demo_kinks(max(reach[1:]) + 0.01, reach[0] - 0.01)
    spec = {"kind": "builtin", "name": "zigzag", "params": {"kinks": kinks.tolist()}}
    return make_problem(d, spec, seed, lambdas=lambdas, inners=inners)


def _as_batch(p: KstProblem, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != p.d:
        raise ValueError(f"expected points of dimension {p.d}")
    if np.any(X < 0) or np.any(X > 1):
        raise ValueError("points must lie in [0, 1]^d")
    return X, single


def inner_sums(p: KstProblem, X: np.ndarray, inners=None) -> np.ndarray:
    """``(n, 2d+1)`` array of ``sum_i lambda_i phi_k(x_i)``."""
    inners = p.inners if inners is None else inners
    cols = []
    for phi in inners:
        cols.append(sum(lam * eval_cpwl(phi, X[:, i]) for i, lam in enumerate(p.lambdas)))
    return np.stack(cols, axis=1)


def eval_kst_target(p: KstProblem, x):
    X, single = _as_batch(p, x)
    t = inner_sums(p, X)
    out = np.sum(np.asarray(p.outer(t.ravel()), dtype=np.float64).reshape(t.shape), axis=1)
    return float(out[0]) if single else out


@dataclass(eq=False)
class KstBuild:
    net: ReluNetwork
    inner_nets: list[ReluNetwork]
    outer_net: ReluNetwork
    junction: ReluNetwork
    inner_stage_widths: tuple[int, ...]
    outer_stage_widths: tuple[int, ...]
    N: int
    L: int

    @property
    def width_inner(self) -> int:
        return max(self.inner_stage_widths)

    @property
    def width_outer(self) -> int:
        return max(self.outer_stage_widths)

    @property
    def depth(self) -> int:
        return self.net.hidden_depth


def inner_grid(N: int, L: int) -> Grid:
    return Grid.uniform(N * N * L)


def outer_segments(d: int, N: int, L: int) -> int:
    return (2 * d + 1) ** 2 * N * N * L


def build_kst_net(p: KstProblem, N: int, L: int) -> KstBuild:
    """Compose compiled inner and outer interpolants into one ``d``-input network."""
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    d, K = p.d, 2 * p.d + 1
    t1 = inner_grid(N, L)
    inner_nets = []
    for phi in p.inners:
        interp = CpwlFunction(t1, eval_cpwl(phi, t1.nodes))
        inner_nets.append(compile_deep(interp, N, L))
    n2 = outer_segments(d, N, L)
    s = Grid.uniform(n2)
    # outer interpolant on [0, d], reparametrised to [0, 1]
    g_vals = np.asarray(p.outer(d * s.nodes), dtype=np.float64)
    outer_net = compile_deep(CpwlFunction(s, g_vals), (2 * d + 1) * N, L)

    eye_d = np.eye(d)
    inner_stack = stack_parallel(
        [inner_nets[k] for k in range(K) for _ in range(d)],
        [eye_d[i:i + 1] for _ in range(K) for i in range(d)],
    )
    J = np.zeros((K, K * d))
    for k in range(K):
        J[k, k * d:(k + 1) * d] = p.lambdas / d
    junction = compose_serial(affine_net(J, np.zeros(K)), inner_stack)
    eye_k = np.eye(K)
    outer_stack = stack_parallel([outer_net] * K, [eye_k[k:k + 1] for k in range(K)])
    net = compose_serial(affine_net(np.ones((1, K)), np.zeros(1)), compose_serial(outer_stack, junction))
    return KstBuild(net, inner_nets, outer_net, junction, inner_stack.hidden_widths, outer_stack.hidden_widths, N, L)


def junction_values(build: KstBuild, X: np.ndarray, d: int) -> np.ndarray:
    """Inner sums ``t_k`` as computed inside the network (rescaled back to [0, d])."""
    return d * forward(build.junction, np.asarray(X, dtype=np.float64))


def kst_error_bound(p: KstProblem, N: int, L: int) -> float:
    """``(6d + 3) * modulus_g(C_d / (N^2 L))`` with ``C_d = d log10 2``."""
    r = p.d * LOG10_2 / (N * N * L)
    if p.lipschitz is not None:
        return (6 * p.d + 3) * p.lipschitz * r
    if p.outer_modulus is not None:
        return (6 * p.d + 3) * float(p.outer_modulus(r))
    raise ValueError("error bound needs a Lipschitz constant or a modulus for the outer function")


def tensor_grid(d: int, samples_per_axis: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, samples_per_axis)
    return np.array(list(itertools.product(axis, repeat=d)))


def default_samples(d: int) -> int:
    return 101 if d <= 3 else max(5, int(round(101 ** (3 / d))))


def measure_error(p: KstProblem, net: ReluNetwork, samples_per_axis: int | None = None, chunk: int = 4096) -> float:
    """Max ``|f - net|`` over a uniform tensor grid of ``[0, 1]^d``."""
    if net.input_dim != p.d:
        raise ValueError(f"network takes {net.input_dim} inputs, problem has d = {p.d}")
    X = tensor_grid(p.d, samples_per_axis or default_samples(p.d))
    worst = 0.0
    for start in range(0, len(X), chunk):
        xb = X[start:start + chunk]
        diff = np.abs(eval_kst_target(p, xb) - forward(net, xb)[:, 0])
        worst = max(worst, float(np.max(diff)))
    return worst


@dataclass(frozen=True)
class KstRateRecord:
    d: int
    N: int
    L: int
    samples: int
    measured_error: float
    bound: float
    width_inner: int
    width_outer: int
    depth: int


# errors below this are float roundoff of an exact reproduction
ZERO_ERROR = 1e-12

CSV_HEADER = ["d", "N", "L", "samples", "measured_error", "bound", "width_inner", "width_outer"]


@dataclass
class RateResult:
    records: list[KstRateRecord]
    slopes_N: dict[int, float]
    slopes_L: dict[int, float]
    degenerate: bool

    def rows(self):
        return [[r.d, r.N, r.L, r.samples, r.measured_error, r.bound, r.width_inner, r.width_outer] for r in self.records]


def loglog_slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def rate_experiment(p: KstProblem, N_list, L_list, samples_per_axis: int | None = None) -> RateResult:
    """Build and measure every ``(N, L)`` cell; fit log-log slopes along each axis."""
    N_list, L_list = list(N_list), list(L_list)
    if not N_list or not L_list:
        raise ValueError("N_list and L_list must be non-empty")
    samples = samples_per_axis or default_samples(p.d)
    records = []
    for N in N_list:
        for L in L_list:
            b = build_kst_net(p, N, L)
            err = measure_error(p, b.net, samples)
            records.append(KstRateRecord(p.d, N, L, samples, err, kst_error_bound(p, N, L), b.width_inner, b.width_outer, b.depth))
    degenerate = all(r.measured_error <= ZERO_ERROR for r in records)
    slopes_N, slopes_L = {}, {}
    if not degenerate:
        for L in L_list:
            rs = [r for r in records if r.L == L]
            if len(rs) >= 2 and all(r.measured_error > ZERO_ERROR for r in rs):
                slopes_N[L] = loglog_slope([r.N for r in rs], [r.measured_error for r in rs])
        for N in N_list:
            rs = [r for r in records if r.N == N]
            if len(rs) >= 2 and all(r.measured_error > ZERO_ERROR for r in rs):
                slopes_L[N] = loglog_slope([r.L for r in rs], [r.measured_error for r in rs])
    return RateResult(records, slopes_N, slopes_L, degenerate)


def problem_to_json(p: KstProblem) -> dict:
    from .cpwl import to_json

    outer = dict(p.outer_spec)
    if isinstance(outer.get("function"), CpwlFunction):
        outer["function"] = to_json(outer["function"])
    out = {
        "d": p.d,
        "lambdas": [float(v) for v in p.lambdas],
        "inners": [to_json(phi) for phi in p.inners],
        "outer": outer,
    }
    if p.lipschitz is not None:
        out["lipschitz"] = p.lipschitz
    return out


def problem_from_json(obj: dict) -> KstProblem:
    from .cpwl import from_json
    from .io import SchemaError

    for key in ("d", "lambdas", "inners", "outer"):
        if key not in obj:
            raise SchemaError(f"missing field '{key}'")
    inners = [from_json(f) for f in obj["inners"]]
    p = make_problem(int(obj["d"]), obj["outer"], lambdas=obj["lambdas"], inners=inners)
    if "lipschitz" in obj and obj["lipschitz"] is not None:
        p.lipschitz = float(obj["lipschitz"])
    return p
