"""Sign-pattern realization on separated point sets, with parameter-count audits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compiler import capacity, compile_deep
from .cpwl import CpwlFunction, Grid
from .network import Architecture, ReluNetwork, eval_net, shatter_count


@dataclass(frozen=True, eq=False)
class SignProblem:
    points: np.ndarray
    signs: np.ndarray
    delta: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        sg = np.asarray(self.signs, dtype=np.int64)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "signs", sg)
        if pts.ndim != 1 or len(pts) == 0:
            raise ValueError("points must be a non-empty 1-d array")
        if len(sg) != len(pts):
            raise ValueError("one sign per point")
        if not np.all(np.isin(sg, (-1, 1))):
            raise ValueError("signs must be +1 or -1")
        if pts[0] < 0 or pts[-1] > 1:
            raise ValueError("points must lie in [0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if len(pts) > 1 and np.min(np.diff(pts)) < self.delta:
            raise ValueError("points must be increasing with gaps >= delta")


def sgn(v):
    """-1 for negative input, +1 otherwise (zero counts as positive)."""
    return np.where(np.asarray(v) >= 0, 1, -1)


def sample_separated_points(n: int, delta: float, rng: np.random.Generator, max_tries: int = 1000) -> np.ndarray:
    """``n`` sorted uniform points of [0, 1] with pairwise gaps ``>= delta``, by rejection."""
    if n < 1:
        raise ValueError("need at least one point")
    if n * delta >= 1:
        raise ValueError(f"n * delta = {n * delta} must be < 1")
    for _ in range(max_tries):
        pts: list[float] = []
        misses = 0
        while len(pts) < n and misses < 50 * n:
            x = rng.uniform()
            if all(abs(x - p) >= delta for p in pts):
                pts.append(x)
            else:
                misses += 1
        if len(pts) == n:
            return np.sort(np.array(pts))
    raise RuntimeError("could not place separated points; lower delta or n")


def build_sign_realizer(sp: SignProblem) -> CpwlFunction:
    """CPwL through ``(x_i, sign_i)``, constant from 0 to ``x_1`` and from ``x_n`` to 1."""
    xs = list(sp.points)
    ys = [float(s) for s in sp.signs]
    if xs[0] > 0:
        xs.insert(0, 0.0)
        ys.insert(0, ys[0])
    if xs[-1] < 1:
        xs.append(1.0)
        ys.append(ys[-1])
    return CpwlFunction(Grid(np.array(xs)), np.array(ys))


@dataclass(frozen=True)
class LowerBoundAudit:
    count: int
    bound: float
    consistent: bool


def lower_bound_audit(arch: Architecture | ReluNetwork, n_points: int) -> LowerBoundAudit:
    if isinstance(arch, ReluNetwork):
        arch = arch.architecture
    if arch.input_dim != 1:
        raise ValueError("audit applies to scalar-input architectures")
    count = shatter_count(arch)
    bound = n_points / 6
    return LowerBoundAudit(count, bound, count >= bound)


@dataclass(frozen=True)
class ShatterTrial:
    trial: int
    n_points: int
    success: bool
    shatter_count: int
    bound: float
    widths: tuple[int, ...]


SHATTER_CSV_HEADER = ["trial", "n_points", "success", "shatter_count", "bound"]


@dataclass
class ShatterReport:
    points: np.ndarray
    trials: list[ShatterTrial]

    @property
    def successes(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def consistent(self) -> bool:
        """Every successful trial clears the lower-bound expression."""
        return all(t.shatter_count >= t.bound for t in self.trials if t.success)

    def rows(self):
        return [[t.trial, t.n_points, int(t.success), t.shatter_count, t.bound] for t in self.trials]


def shatter_experiment(n_points: int, delta: float, pattern_count: int, seed: int, N: int, L: int) -> ShatterReport:
    """Realize ``pattern_count`` random sign patterns on one random separated set.

    Raises :class:`CapacityError` when ``N^2 L`` cannot hold the realizer.
    """
    rng = np.random.default_rng(seed)
    pts = sample_separated_points(n_points, delta, rng)
    trials = []
    for t in range(pattern_count):
        signs = rng.choice([-1, 1], size=n_points)
        sp = SignProblem(pts, signs, delta)
        net = compile_deep(build_sign_realizer(sp), N, L)
        ok = bool(np.all(sgn(eval_net(net, pts)) == signs))
        audit = lower_bound_audit(net, n_points)
        trials.append(ShatterTrial(t, n_points, ok, audit.count, audit.bound, net.hidden_widths))
    return ShatterReport(pts, trials)


def params_for(n_points: int, N: int) -> tuple[int, int]:
    """Smallest depth ``L`` giving capacity ``N^2 L >= n_points + 1`` at block count ``N``."""
    return N, max(1, math.ceil((n_points + 1) / (N * N)))


@dataclass(frozen=True)
class ScalingAudit:
    n_values: tuple[int, ...]
    counts: tuple[int, ...]
    slope: float
    intercept: float
    r_squared: float


def scaling_audit(n_values=(16, 32, 64, 128, 256), N: int = 4) -> ScalingAudit:
    """Shatter counts of ``compile_deep`` architectures at capacity for each ``n``; linear fit."""
    counts = []
    for n in n_values:
        Nb, L = params_for(n, N)
        assert capacity(Nb, L) >= n + 1
        target = CpwlFunction(Grid.uniform(n + 1), np.zeros(n + 2))
        counts.append(shatter_count(compile_deep(target, Nb, L)))
    x = np.asarray(n_values, dtype=np.float64)
    y = np.asarray(counts, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingAudit(tuple(n_values), tuple(counts), float(slope), float(intercept), r2)
