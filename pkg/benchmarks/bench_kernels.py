"""Time each kernel on both backends at production-like sizes.

    python3 benchmarks/bench_kernels.py [--repeat N]

Shapes follow the first conv block of the default network (21^3 grid, 19
input channels, 5^3 kernel, 64 filters) and one voxelized complex.
"""

import argparse
import timeit

import numpy as np

from gridaffinity.kernels import available_backends


def cases(rng):
    xpad = rng.normal(size=(1, 25, 25, 25, 19)).astype(np.float32)
    cols = rng.normal(size=(21 ** 3, 125 * 19)).astype(np.float32)
    act = rng.normal(size=(5, 21, 21, 21, 64)).astype(np.float32)
    pooled = rng.normal(size=(5, 11, 11, 11, 64)).astype(np.float32)
    idx = rng.integers(0, 21, size=(3000, 3)).astype(np.int64)
    feats = rng.normal(size=(3000, 19)).astype(np.float32)
    return {
        "unfold3d (21^3x19, k=5)": lambda k: k.unfold3d(xpad, 5),
        "fold3d (21^3x19, k=5)": lambda k: k.fold3d(cols, np.zeros_like(xpad)),
        "maxpool fwd (5x21^3x64)": lambda k: k.maxpool3d_forward(act),
        "maxpool bwd (5x21^3x64)": (
            lambda k, arg={}: k.maxpool3d_backward(
                pooled, arg.setdefault(k, k.maxpool3d_forward(act)[1]), act.shape)),
        "scatter_add (3000 atoms)": lambda k: k.scatter_add(np.zeros((21, 21, 21, 19), np.float32),
                                                            idx, feats),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing numpy only")
    names = list(backends)
    print(f"{'kernel':28s}" + "".join(f"{n:>12s}" for n in names)
          + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for name in names:
            mod = backends[name]
            fn(mod)  # warm-up
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        row = f"{label:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
