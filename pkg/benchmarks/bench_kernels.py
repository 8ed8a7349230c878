"""Compare the compiled loss kernel against the numpy fallback.

Times risk+gradient evaluation for each loss at realistic label-set sizes
(n=178 with budgets from 0.5% to ~10.8% of the triplet universe) and checks
that both backends agree numerically. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from triplab import _kernels_np
from triplab.losses import _LOSS_CODES, LossSpec, backend_name
from triplab.triplets import LabeledTripletSet, fraction_to_count, sample_triplets
from triplab.signals import generate_signal
from triplab.triplets import AnnotatorModel, LogisticLink, simulate_labels

try:
    from triplab import _kernels
except ImportError:
    _kernels = None


def make_arrays(n: int, count: int, seed: int):
    signal = generate_signal("task-b-like", n, seed=0)
    queries = sample_triplets(n, count, seed=seed)
    labels = simulate_labels(
        AnnotatorModel("bench", LogisticLink(20.0)),
        signal,
        queries,
        np.random.default_rng([seed, 1]),
    )
    I, J, K, W = labels.to_arrays()
    rng = np.random.default_rng(seed)
    Y = rng.normal(scale=0.1, size=(1, n))
    return Y, I, J, K, W


def time_backend(kernel, Y, I, J, K, W, code, param, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernel.risk_grad(Y, I, J, K, W, code, param, True)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=178, help="signal length")
    parser.add_argument(
        "--fractions",
        type=float,
        nargs="+",
        default=[0.005, 0.01, 0.05, 0.1077],
        help="budget fractions of the triplet universe",
    )
    parser.add_argument("--repeats", type=int, default=5, help="best-of timing repeats")
    args = parser.parse_args()

    if _kernels is None:
        raise SystemExit("compiled extension not available; build it first (pip install -e .)")
    print(f"default backend at import: {backend_name()}")
    print(f"{'loss':<12} {'labels':>8} {'cython ms':>10} {'numpy ms':>10} {'speedup':>8} {'max |diff|':>11}")

    for fraction in args.fractions:
        count = fraction_to_count(args.n, fraction)
        Y, I, J, K, W = make_arrays(args.n, count, seed=7)
        for kind, code in _LOSS_CODES.items():
            param = LossSpec(kind).param
            r_c, g_c = _kernels.risk_grad(Y, I, J, K, W, code, param, True)
            r_n, g_n = _kernels_np.risk_grad(Y, I, J, K, W, code, param, True)
            diff = max(abs(r_c - r_n), float(np.max(np.abs(g_c - g_n))))
            t_c = time_backend(_kernels, Y, I, J, K, W, code, param, args.repeats)
            t_n = time_backend(_kernels_np, Y, I, J, K, W, code, param, args.repeats)
            print(
                f"{kind:<12} {count:>8} {t_c * 1e3:>10.2f} {t_n * 1e3:>10.2f} "
                f"{t_n / t_c:>7.1f}x {diff:>11.2e}"
            )


if __name__ == "__main__":
    main()
