"""Compare the compiled and numpy activation jet kernels.

Usage: python benchmarks/bench_kernels.py [--points N] [--width W] [--repeat R]

Times one forward and one backward kernel call per family on a batch shaped
like a hidden layer at desk scale, plus one full loss-and-gradient evaluation
per backend. Prints a table of milliseconds and the speedup.
"""

from __future__ import annotations

import argparse
import importlib
import os
import sys
import time

import numpy as np

from wavepinn.activations import FAMILY_IDS


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def kernel_table(points, width, repeat):
    from wavepinn.kernels import get_backend

    backends = {"numpy": get_backend("numpy")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled kernel not built; numpy only", file=sys.stderr)
    rng = np.random.default_rng(0)
    # wave-like layout: value, d/dx, d/dt, (x,x), (t,t)
    nd, pi, pj = 2, np.array([0, 1]), np.array([0, 1])
    Z = rng.normal(size=(1 + nd + 2, points * width))
    Abar = rng.normal(size=Z.shape)
    coef = np.full(5, 1.3132616875182228)
    rows = []
    for fam, fid in FAMILY_IDS.items():
        order = 2 if fam == "softhertanh" else 0
        slots = np.array([] if fid == 0 else [1, 3, 4][: 2 if fid in (3, 5) else 3], dtype=np.intp)
        times = {}
        for name, k in backends.items():
            fwd = lambda k=k: k.jet_forward(fid, order, Z, coef, nd, pi, pj, slots)
            _, D, S = fwd()
            bwd = lambda k=k, D=D, S=S: k.jet_backward(Z, D, S, Abar, nd, pi, pj)
            times[name] = (_time(fwd, repeat), _time(bwd, repeat))
        rows.append((fam, times))
    return rows, list(backends)


def loss_eval_time(activation, repeat):
    out = {}
    for name in ("numpy", "cython"):
        os.environ["WAVEPINN_KERNELS"] = name
        import wavepinn.kernels as kernels

        importlib.reload(kernels)
        if name == "cython" and kernels.BACKEND != "cython":
            continue
        from wavepinn.loss import loss_and_grad
        from wavepinn.network import MlpConfig, init_model
        from wavepinn.pde import make_problem, sample_uniform

        p = make_problem("wave")
        c = sample_uniform(p, 51, 51)
        m = init_model(MlpConfig(2, 1, 4, 64, activation))
        out[name] = _time(lambda: loss_and_grad(m, p, c), repeat)
    os.environ.pop("WAVEPINN_KERNELS", None)
    importlib.reload(importlib.import_module("wavepinn.kernels"))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2601)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rows, names = kernel_table(args.points, args.width, args.repeat)
    print(f"kernel times, best of {args.repeat}, {args.points} points x width {args.width} (ms)")
    head = f"{'family':<15}" + "".join(f"{n + ' fwd':>12}{n + ' bwd':>12}" for n in names)
    if len(names) == 2:
        head += f"{'speedup':>10}"
    print(head)
    for fam, t in rows:
        line = f"{fam:<15}" + "".join(f"{1e3 * t[n][0]:>12.2f}{1e3 * t[n][1]:>12.2f}" for n in names)
        if len(names) == 2:
            line += f"{sum(t['numpy']) / sum(t['cython']):>9.2f}x"
        print(line)

    print("\nwave loss+gradient, 4x64 network, 51x51 grid (ms)")
    for act in ("tanh", "softgabortanh", "softher2tanh"):
        t = loss_eval_time(act, args.repeat)
        print(f"{act:<15}" + "".join(f"{n:>8} {1e3 * v:8.1f}" for n, v in t.items()))


if __name__ == "__main__":
    main()
