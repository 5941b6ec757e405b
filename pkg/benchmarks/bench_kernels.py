"""Compare the compiled and pure-Python DBM kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the raw closure and tightening kernels on random matrices, then whole
workloads (constraint-heavy algebra on random graphs and lifted inference on
twoheads) under each backend.
"""
import argparse
import random
import sys
import timeit
from array import array
from importlib import resources
from pathlib import Path

from liftex import _kernels as K
from liftex.algebra import l_and, l_or
from liftex.build import build_closed
from liftex.inference import lifted_prob
from liftex.program import load, map_populations, parse_query

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))


def random_matrices(count, n, seed=0):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        d = array("q", [K.INF] * (n * n))
        for i in range(n):
            d[i * n + i] = 0
        for _ in range(2 * n):
            i, j = rng.randrange(n), rng.randrange(n)
            if i != j:
                d[i * n + j] = rng.randint(0, 8)
        out.append(d)
    return out


def kernel_close(mats, n):
    for d in mats:
        K.close(array("q", d), n)


def kernel_tighten(mats, n):
    rng = random.Random(1)
    for d in mats:
        d = array("q", d)
        if not K.close(d, n):
            continue
        for _ in range(4):
            K.tighten(d, n, rng.randrange(n), rng.randrange(n), rng.randint(0, 4))


def algebra_workload():
    from helpers import random_graph
    for seed in range(150):
        r = random.Random(seed)
        a = random_graph(r, ("U", "V"))
        b = random_graph(r, ("U2", "V2"))
        l_and(a, b)
        l_or(a, b)


def twoheads_workload(n=2000):
    text = resources.files("liftex").joinpath("corpus", "twoheads.px").read_text()
    tp = load(text)
    g = build_closed(tp, map_populations(tp, {"coins": n}), parse_query("twoheads"))
    return lambda: lifted_prob(g, tp.switches)


def measure(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = K.available()
    if "cython" not in backends:
        print("compiled kernels not built; only the Python backend is timed")
    mats = {n: random_matrices(300, n) for n in (4, 8, 16)}
    lifted = twoheads_workload()
    cases = [(f"close n={n - 1}", lambda n=n: kernel_close(mats[n], n)) for n in mats]
    cases += [(f"tighten n={n - 1}", lambda n=n: kernel_tighten(mats[n], n)) for n in mats]
    cases += [("algebra x150", algebra_workload), ("twoheads n=2000", lifted)]
    before = K.BACKEND
    rows = []
    try:
        for name, fn in cases:
            times = {}
            for b in backends:
                K.set_backend(b)
                times[b] = measure(fn, args.repeat)
            rows.append((name, times))
    finally:
        K.set_backend(before)
    head = f"{'case':<18}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        head += f"{'speedup':>10}"
    print(head)
    for name, times in rows:
        line = f"{name:<18}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
