"""Time the compiled matvec kernel against the numpy fallback.

    python3 benchmarks/bench_matvec.py --sizes 12 16 20 --repeat 5

Prints one line per (size, backend) with the best wall time per matvec, the
effective memory throughput, and the speedup over the fallback.  Both
backends must agree bitwise; the script exits nonzero if they do not.
"""
import argparse
import sys
import time

import numpy as np

from annni_fidelity._backend import available_backends
from annni_fidelity.hilbert import ChainSpec, Hamiltonian


def best_time(h, v, out, repeat):
    h.matvec(v, out)  # warm up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        h.matvec(v, out)
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[12, 16, 20])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--bx", type=float, default=0.2)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; timing the fallback only", file=sys.stderr)
    rng = np.random.default_rng(0)
    mismatch = False
    print(f"{'N':>3} {'backend':>9} {'ms/matvec':>10} {'GB/s':>7} {'speedup':>8}")
    for n in args.sizes:
        spec = ChainSpec(n, args.alpha, args.bx)
        v = rng.standard_normal(spec.dim)
        results = {}
        for name in reversed(backends):  # python first, so speedups have a base
            h = Hamiltonian(spec, backend=name)
            out = np.empty(spec.dim)
            t = best_time(h, v, out, args.repeat)
            results[name] = (t, out.copy())
            # diag, v and out, 8 bytes each
            gbs = 3 * 8 * spec.dim / t / 1e9
            base = results["python"][0]
            print(f"{n:3d} {name:>9} {1e3 * t:10.3f} {gbs:7.2f} {base / t:8.2f}x")
        if len(results) == 2 and not np.array_equal(results["python"][1], results["compiled"][1]):
            print(f"N={n}: backends disagree", file=sys.stderr)
            mismatch = True
    return 1 if mismatch else 0


if __name__ == "__main__":
    sys.exit(main())
