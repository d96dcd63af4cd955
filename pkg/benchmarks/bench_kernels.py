"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Times the three hot kernels on the disk operator at several resolutions and
one full eigensolve per backend (in a subprocess, since the backend is fixed
at import).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from kppdomain import geometry, kernels
from kppdomain.operators import assemble


def best(fn, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return min(out)


def kernel_table(repeat):
    backends = [kernels.load_backend("compiled"), kernels.load_backend("python")]
    print(f"{'h':>8} {'cells':>7} {'kernel':>10} {'compiled':>10} {'python':>10} {'speedup':>8}")
    for h in (1 / 32, 1 / 64, 1 / 128):
        op = assemble(geometry.build_disk(1, h))
        ip, ix, dat = op.indptr, op.indices, op.data
        x = np.random.default_rng(0).standard_normal(op.n)
        shift = -1e-8 * op.stencil_diagonal().max()
        rows = {}
        for be in backends:
            lfac = be.ic0_factor(ip, ix, dat, shift)
            rows.setdefault("matvec", []).append(best(lambda: be.csr_matvec(ip, ix, dat, x, 0.0), repeat))
            rows.setdefault("ic0", []).append(best(lambda: be.ic0_factor(ip, ix, dat, shift), repeat))

            def solve():
                y = np.zeros(op.n)
                be.pcg(ip, ix, dat, x, y, shift, *lfac, 1e-10, 20 * op.n)

            rows.setdefault("pcg", []).append(best(solve, repeat))
        for name, (tc, tp) in rows.items():
            print(f"{h:8.5f} {op.n:7d} {name:>10} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}")


def eigensolve_times():
    code = (
        "import time; from kppdomain import geometry as g, eigen as e, kernels;"
        "d = g.build_disk(1, 1/64); t = time.perf_counter(); lam = e.principal_eigenvalue(d);"
        "print(kernels.BACKEND, repr(lam), time.perf_counter() - t)"
    )
    for flag in ("0", "1"):
        env = dict(os.environ, KPPDOMAIN_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, lam, dt = out.stdout.split()
        print(f"eigensolve disk h=1/64 backend={name:9s} lambda={float(lam):.12f} time={float(dt):.3f}s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    kernel_table(args.repeat)
    eigensolve_times()
