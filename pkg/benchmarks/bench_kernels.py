"""Compare the compiled and numpy kernel backends.

Times the four hot kernels on generator-sized inputs, then a full
convolution forward + backward through each backend.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from emgan import conv, kernels
from emgan.tensor import Tensor, mul, tsum


def kernel_cases(rng):
    xp = rng.standard_normal((50, 12, 44, 44))
    cols = rng.standard_normal((50 * 9, 12 * 42 * 42))
    img = rng.standard_normal((32, 96, 96))
    return {
        "im2col 50x12x44x44 k3": lambda k: k.im2col(xp, (3, 3), (1, 1)),
        "col2im 450x21168": lambda k: k.col2im(cols, np.zeros_like(xp), (3, 3), (1, 1)),
        "maxpool2x2 32x96x96": lambda k: k.maxpool2x2(img),
    }


def conv_case(rng):
    x = Tensor(rng.standard_normal((50, 14, 40, 40)), requires_grad=True)
    w = Tensor(0.05 * rng.standard_normal((50, 50, 3, 3, 3)), requires_grad=True)
    r = Tensor(rng.standard_normal((50, 12, 38, 38)))

    def run():
        x.zero_grad()
        w.zero_grad()
        tsum(mul(conv.conv3d(x, w), r)).backward()

    return run


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    names = kernels.available()
    print(f"backends available: {', '.join(names)} (active: {kernels.BACKEND})")
    impls = {n: kernels.load(n) for n in names}

    print(f"{'case':32s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    rows = [(label, {n: best(lambda f=f, k=k: f(k), args.repeat) for n, k in impls.items()})
            for label, f in kernel_cases(rng).items()]

    saved = kernels.impl
    run = conv_case(rng)
    times = {}
    for n, k in impls.items():
        kernels.impl = k
        times[n] = best(run, args.repeat)
    kernels.impl = saved
    rows.append(("conv3d fwd+bwd 50ch 14x40x40", times))

    for label, t in rows:
        line = f"{label:32s}" + "".join(f"{t[n] * 1e3:10.2f}ms" for n in names)
        if len(names) > 1:
            line += f"{t['python'] / t['cython']:11.2f}x"
        print(line)


if __name__ == "__main__":
    main()
