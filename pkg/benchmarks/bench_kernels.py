"""Compare the compiled and pure-Python element kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--seeds 3]

Times a single Frank-Wolfe element solve and a full alternating-optimisation
run on the default scenario with each available backend.
"""
import argparse
import statistics
import time

import numpy as np

from ramimo import kernels
from ramimo.ao import ao_solve
from ramimo.bench import ScenarioParams, generate_scenario
from ramimo.geometry import SphericalCap, sample_cap
from ramimo.orientation import receive_problem


def _time(fn, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return min(out), statistics.median(out)


def element_case(p):
    sc = generate_scenario(ScenarioParams(directivity_p=p), 0)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    prob = receive_problem(sc, 3, np.tile([0, 0, 1.0], (16, 1)), A @ A.conj().T)
    f0 = sample_cap(SphericalCap(np.pi / 6), rng)
    return prob, f0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    rows = []
    for p in (1.0, 2.0):
        prob, f0 = element_case(p)
        for name, be in backends.items():
            def run():
                for _ in range(50):
                    be.fw_solve(prob.w_los, prob.c_los, prob.w_sc, prob.c_sc, prob.B, prob.p, np.pi / 6, f0,
                                1e-4, 0.5, 100, 1e-12, 1e-10)
            best, med = _time(run, args.repeat)
            rows.append((f"50 element solves, p={p:g}", name, best, med))

    saved = kernels.backend
    try:
        for name, be in backends.items():
            kernels.backend = be
            scenarios = [generate_scenario(ScenarioParams(directivity_p=2.0), s) for s in range(args.seeds)]

            def run():
                for sc in scenarios:
                    ao_solve(sc)
            best, med = _time(run, args.repeat)
            rows.append((f"ao_solve x{args.seeds}, p=2", name, best, med))
    finally:
        kernels.backend = saved

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'backend':<8} {'best ms':>10} {'median ms':>10}")
    for case, name, best, med in rows:
        print(f"{case:<{width}}  {name:<8} {best * 1e3:10.2f} {med * 1e3:10.2f}")
    if len(backends) == 2:
        for case in dict.fromkeys(r[0] for r in rows):
            t = {r[1]: r[2] for r in rows if r[0] == case}
            print(f"speed-up {case}: {t['python'] / t['cython']:.1f}x")


if __name__ == "__main__":
    main()
