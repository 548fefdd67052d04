"""Compare the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 3]

Reports the best wall time per backend and checks that both return the same
result.
"""
import argparse
import pathlib
import time

import numpy as np

from qubo_forge import _kernels
from qubo_forge.graph import Graph, load_graph
from qubo_forge.qubo import build_M_HCP, build_M_TSP
from qubo_forge.solve import AnnealSchedule, exact_ground_state, simulated_anneal

DATA = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"


def _best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def cases():
    burma = load_graph(DATA / "burma14.tsp")
    g1 = load_graph(DATA / "g1.tsp")
    rng = np.random.default_rng(0)
    w = rng.integers(1, 50, size=(5, 5))
    k5 = Graph.from_matrix(np.triu(w, 1) + np.triu(w, 1).T, name="random5")
    sched = AnnealSchedule(restarts=4, seed=1)
    yield (
        "anneal burma14 (196 vars, 4x2000 sweeps)",
        lambda b: simulated_anneal(build_M_TSP(burma, normalize=True), sched, burma, backend=b, threads=1),
        lambda r: (tuple(r.restart_energies), r.cost),
    )
    yield (
        "anneal K6 hcp (36 vars, 4x2000 sweeps)",
        lambda b: simulated_anneal(build_M_HCP(Graph.complete(6)), sched, backend=b, threads=1),
        lambda r: tuple(r.restart_energies),
    )
    yield (
        "exhaustive g1 tsp (16 vars)",
        lambda b: exact_ground_state(build_M_TSP(g1, normalize=True), backend=b),
        lambda r: (round(r.energy, 9), r.count),
    )
    yield (
        "exhaustive random5 tsp (25 vars)",
        lambda b: exact_ground_state(build_M_TSP(k5, normalize=True), backend=b),
        lambda r: (round(r.energy, 9), r.count),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = sorted(_kernels.available_backends())
    if "cython" not in backends:
        print("compiled kernel not built; only the python backend is timed")
    print(f"{'case':<42}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  agree")
    for name, run, key in cases():
        timings, keys = {}, set()
        for b in backends:
            timings[b], result = _best_of(lambda: run(b), args.repeat)
            keys.add(key(result))
        cols = "".join(f"{timings[b]:>11.3f}s" for b in backends)
        speed = f"{timings['python'] / timings['cython']:>9.1f}x" if "cython" in timings else f"{'-':>10}"
        print(f"{name:<42}{cols}{speed}  {'yes' if len(keys) == 1 else 'NO'}")


if __name__ == "__main__":
    main()
