"""Time the compiled kernels against the pure-Python mirror.

    python benchmarks/bench_kernels.py [--mh-iterations N] [--repeats R]

Both backends run the same packed chain-simulation data, so the speedup
column compares identical work (their results are checked to match).
"""

import argparse
import timeit

import numpy as np

from clonetree import _kernels_py
from clonetree import likelihood
from clonetree.simulate import chain_spec, simulate

try:
    from clonetree import _kernels
except ImportError:
    _kernels = None


def packed(module, data):
    orig = likelihood.LikelihoodTable
    likelihood.LikelihoodTable = module.LikelihoodTable
    try:
        return likelihood.pack(data)
    finally:
        likelihood.LikelihoodTable = orig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mh-iterations", type=int, default=500)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation` first")

    data, truth = simulate(chain_spec(seed=0))
    z = [k + 1 for k in truth.nodes]
    parent = [-1, 0, 1, 2, 3, 4]
    eta = np.array([[0.1, 0.15, 0.2, 0.15, 0.15, 0.25]])
    phi = np.cumsum(eta[:, ::-1], axis=1)[:, ::-1].copy()

    cases = {
        "total": lambda t: t.total(z, phi),
        "snv_loglik x45": lambda t: [t.snv_loglik(i, phi[:, 1]) for i in range(t.n_snvs)],
        f"mh x{args.mh_iterations}": lambda t: t.mh(z, parent, eta.copy(), 100.0, args.mh_iterations, 1),
    }
    tables = {"python": packed(_kernels_py, data), "cython": packed(_kernels, data)}
    print(f"{'kernel':<16}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}")
    for name, fn in cases.items():
        res = {b: fn(t) for b, t in tables.items()}
        assert res["python"] == res["cython"], f"backends disagree on {name}"
        times = {}
        for b, t in tables.items():
            n = 1 if name.startswith("mh") else 50
            times[b] = min(timeit.repeat(lambda: fn(t), number=n, repeat=args.repeats)) / n
        print(f"{name:<16}{times['python']:>12.2e}{times['cython']:>12.2e}{times['python'] / times['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
