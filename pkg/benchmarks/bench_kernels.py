"""Throughput comparison of the two evaluation kernels.

Times the outcome-scan entry point on synthetic problems shaped like the
bundled cases, checks that both backends agree, and reports an end-to-end
equilibrium solve per backend (fresh interpreter each, since the backend
is chosen at import).

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import pathlib
import subprocess
import sys
import time

import numpy as np

from vargame import _kernel_np

try:
    from vargame import _kernel as _kernel_cy
except ImportError:
    _kernel_cy = None

CASE = pathlib.Path(__file__).resolve().parents[1] / "src" / "vargame" / \
    "cases" / "ieee9.json"

SOLVE_SNIPPET = (
    "import time, vargame as vg;"
    "from vargame.game import GameConfig;"
    "from vargame.traversal import solve_cbse;"
    "case = vg.load_case(%r);"
    "cfg = GameConfig(gamma_a=0.75, gamma_d=0.75);"
    "solve_cbse(case, cfg);"          # warm: factorization, enumeration
    "t = time.perf_counter();"
    "solve_cbse(case, cfg);"
    "print(time.perf_counter() - t)"
) % str(CASE)


def _sparse_levels(rng, n_rows, n_loads, max_active):
    """Level rows with few nonzero genes, like budget-capped play."""
    levels = np.zeros((n_rows, n_loads), dtype=np.int64)
    for i in range(n_rows):
        k = int(rng.integers(1, max_active + 1))
        idx = rng.choice(n_loads, size=k, replace=False)
        levels[i, idx] = rng.integers(1, 3, size=k)
    return levels


def make_problem(rng, n_loads, n_actions, n_defenses, max_active):
    x_base = -rng.uniform(0.05, 0.6, size=n_loads)
    atk = -rng.uniform(0.0, 0.35, size=(n_loads, n_loads))
    defs = -rng.uniform(0.0, 0.4, size=(n_defenses, n_loads))
    a_vals = _sparse_levels(rng, n_actions, n_loads, max_active) / 2.0
    clip_lo = float(np.max(np.abs(x_base)))
    return (np.ascontiguousarray(x_base), np.ascontiguousarray(atk),
            np.ascontiguousarray(defs), np.ascontiguousarray(a_vals),
            clip_lo)


def bench_scan(impl, prob, repeats):
    impl.scan(*prob)                  # warm-up outside the timed loop
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        impl.scan(*prob)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_solve(kernel_name):
    env = dict(os.environ, VARGAME_KERNEL=kernel_name)
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET],
                         capture_output=True, text=True, env=env)
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return float(out.stdout.strip())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(7)
    shapes = [
        ("six-load dense grid", make_problem(rng, 6, 729, 81, 6)),
        ("29-load sparse play", make_problem(rng, 29, 465, 36, 4)),
        ("wide fractional support", make_problem(rng, 15, 8, 8, 12)),
    ]
    backends = [("python", _kernel_np)]
    if _kernel_cy is not None:
        backends.append(("cython", _kernel_cy))
    else:
        print("compiled kernel not built; timing the numpy backend only\n")

    hdr = f"{'problem':26} {'backend':8} {'best ms':>9} {'pairs/s':>12}"
    print(hdr)
    print("-" * len(hdr))
    for name, prob in shapes:
        n_pairs = prob[3].shape[0] * prob[2].shape[0]
        results = {}
        for bname, impl in backends:
            dt = bench_scan(impl, prob, args.repeats)
            results[bname] = impl.scan(*prob)
            print(f"{name:26} {bname:8} {dt * 1e3:9.2f} "
                  f"{n_pairs / dt:12.0f}")
        if len(results) == 2:
            diff = np.max(np.abs(results["python"] - results["cython"])
                          / np.abs(results["python"]))
            print(f"{'':26} agreement: max rel diff {diff:.2e}")

    print("\nnine-bus equilibrium solve, (0.75, 0.75), warm process:")
    for bname, _ in backends:
        print(f"  {bname:8} {bench_solve(bname) * 1e3:9.2f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
