"""Benchmark the compiled kernels against the numpy fallback.

Runs the two hot kernels directly and then a full assembly of ``A`` with
the environment switch flipped.  Usage::

    python3 benchmarks/bench_kernels.py [--n 8] [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from koiter_dg import _kernels
from koiter_dg.jets import _mul_table, nterms


def timed(func, *args, repeat=5, warmup=1, **kwargs):
    """Best wall time in ms over ``repeat`` calls after ``warmup`` calls."""
    for _ in range(warmup):
        func(*args, **kwargs)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args, **kwargs)
        best = min(best, time.perf_counter() - t0)
    return 1e3 * best


def bench_weighted_outer(repeat):
    rng = np.random.default_rng(0)
    print("weighted_outer  (3 components, 36 points, 10x10 blocks)")
    for ne in (32, 256, 2048):
        left = rng.normal(size=(3, ne, 36, 10))
        right = rng.normal(size=(3, ne, 36, 10))
        w = rng.uniform(size=(ne, 36))
        t_np = timed(_kernels.weighted_outer, left, right, w, use_numba=False, repeat=repeat)
        t_nb = timed(_kernels.weighted_outer, left, right, w, use_numba=True, repeat=repeat)
        same = np.allclose(_kernels.weighted_outer(left, right, w, use_numba=False),
                           _kernels.weighted_outer(left, right, w, use_numba=True), atol=1e-11)
        print(f"  ne={ne:5d}  numpy {t_np:9.3f} ms  numba {t_nb:9.3f} ms  ({t_np / t_nb:5.1f}x)  agree={same}")


def bench_series_mul(repeat):
    rng = np.random.default_rng(1)
    print("series_mul  (order-4 bivariate jets)")
    order = 4
    n = nterms(order)
    p, q, r = _mul_table(order)
    for m in (64, 4096, 65536):
        a = rng.normal(size=(n, m))
        b = rng.normal(size=(n, m))
        t_np = timed(_kernels.series_mul, a, b, p, q, r, n, use_numba=False, repeat=repeat)
        t_nb = timed(_kernels.series_mul, a, b, p, q, r, n, use_numba=True, repeat=repeat)
        print(f"  m={m:6d}  numpy {t_np:9.3f} ms  numba {t_nb:9.3f} ms  ({t_np / t_nb:5.1f}x)")


ASSEMBLE = """
import time
from koiter_dg.assembly import FormContext, assemble_a
from koiter_dg.fe_space import FESpace
from koiter_dg.geometry import ElasticModuli, HyparChart
from koiter_dg.mesh import square_mesh
ctx = FormContext(FESpace(square_mesh({n}, dict(left="D", right="F", bottom="F", top="F")), HyparChart()), ElasticModuli(), 8)
assemble_a(ctx)
ctx = FormContext(ctx.space, ctx.moduli, 8)
t0 = time.perf_counter()
assemble_a(ctx)
print(1e3 * (time.perf_counter() - t0))
"""


def bench_assembly(n):
    # a fresh interpreter per setting, since the switch is read from the environment
    print(f"assemble_a on the hypar chart, {n}x{n} mesh (second call, warm caches)")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, KOITER_DG_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", ASSEMBLE.format(n=n)], env=env, capture_output=True, text=True, check=True)
        out[flag] = float(res.stdout.strip().splitlines()[-1])
    print(f"  numpy {out['0']:9.1f} ms  numba {out['1']:9.1f} ms  ({out['0'] / out['1']:5.2f}x)")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=8, help="cells per side for the assembly benchmark")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _kernels._HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    bench_weighted_outer(args.repeat)
    bench_series_mul(args.repeat)
    bench_assembly(args.n)


if __name__ == "__main__":
    main()
