"""Time breakpoint propagation on the compiled kernel against the numpy fallback.

    python benchmarks/bench_to_cpwl.py --repeats 5
"""

import argparse
import time

import numpy as np

from cpwlnet import _kernels_py, regions
from cpwlnet.compiler import compile_deep
from cpwlnet.cpwl import CpwlFunction, Grid
from cpwlnet.network import AffineLayer, ReluNetwork
from cpwlnet.regions import to_cpwl


def random_net(rng, widths):
    dims = [1, *widths, 1]
    return ReluNetwork([AffineLayer(rng.normal(size=(b, a)), rng.normal(size=b)) for a, b in zip(dims[:-1], dims[1:])])


def compiled_net(rng, N, L):
    P = N * N * L
    nodes = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, P - 1)), [1.0]])
    return compile_deep(CpwlFunction(Grid(nodes), rng.uniform(-1, 1, P + 1)), N, L)


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if regions._native is None:
        print("compiled kernel not built; only the numpy engine is available")
    engines = {"numpy": _kernels_py}
    if regions._native is not None:
        engines["compiled"] = regions._native
    rng = np.random.default_rng(args.seed)
    cases = {
        "random 8x[16]": random_net(rng, [16] * 8),
        "random 4x[64]": random_net(rng, [64] * 4),
        "compile_deep N=6 L=4": compiled_net(rng, 6, 4),
        "compile_deep N=12 L=8": compiled_net(rng, 12, 8),
    }
    print(f"{'case':<24}{'segments':>9}" + "".join(f"{name:>12}" for name in engines) + f"{'speedup':>10}")
    for label, net in cases.items():
        segs = to_cpwl(net, engine=_kernels_py).segment_count
        t = {name: best_of(lambda e=eng: to_cpwl(net, engine=e), args.repeats) for name, eng in engines.items()}
        speed = f"{t['numpy'] / t['compiled']:.2f}x" if "compiled" in t else "-"
        print(f"{label:<24}{segs:>9}" + "".join(f"{v * 1e3:>10.2f}ms" for v in t.values()) + f"{speed:>10}")


if __name__ == "__main__":
    main()
