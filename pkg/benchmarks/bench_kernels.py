"""Time the compiled stencil kernels against the numpy fallback.

Runs lap/dcent over a range of grid sizes in 2-D and 3-D, reports the
best-of-N wall time per call for each backend plus the speedup, and
cross-checks that the two implementations agree to rounding error.

Usage:  python3 benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeats 30]
"""

import argparse
import time

import numpy as np

from magvisco.kernels import _stencils_np as np_impl

try:
    from magvisco.kernels import _stencils_cy as cy_impl
except ImportError:
    cy_impl = None


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(size, dim):
    rng = np.random.default_rng(7)
    f = rng.standard_normal((size + 1,) * dim)
    hinv = float(size)
    hinv2 = np.full(dim, hinv * hinv)
    return [
        ("lap reflect", lambda impl: impl.lap(f, hinv2, np_impl.L_REFLECT)),
        ("lap pin", lambda impl: impl.lap(f, hinv2, np_impl.L_PIN)),
        ("dcent reflect", lambda impl: impl.dcent(f, 0, hinv, np_impl.D_REFLECT)),
        ("dcent onesided", lambda impl: impl.dcent(f, dim - 1, hinv,
                                                   np_impl.D_ONESIDED)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256",
                    help="comma-separated cells per axis (default 64,128,256)")
    ap.add_argument("--repeats", type=int, default=30,
                    help="timing repeats, best is kept (default 30)")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if cy_impl is None:
        print("compiled extension not available; timing the numpy backend only")
    header = f"{'case':<28}{'numpy':>12}"
    if cy_impl is not None:
        header += f"{'cython':>12}{'speedup':>10}{'max diff':>12}"
    print(header)
    print("-" * len(header))

    worst_diff = 0.0
    for dim in (2, 3):
        for size in sizes:
            if dim == 3 and size > 192:
                continue  # keep the large 3-D arrays out of small machines
            for name, call in _cases(size, dim):
                label = f"{name} {size}^{dim}"
                t_np = _best_of(lambda: call(np_impl), args.repeats)
                row = f"{label:<28}{t_np * 1e3:>10.3f} ms"
                if cy_impl is not None:
                    t_cy = _best_of(lambda: call(cy_impl), args.repeats)
                    diff = float(np.max(np.abs(call(np_impl) - call(cy_impl))))
                    worst_diff = max(worst_diff, diff)
                    row += (f"{t_cy * 1e3:>10.3f} ms{t_np / t_cy:>9.1f}x"
                            f"{diff:>12.1e}")
                print(row)

    if cy_impl is not None:
        print(f"\nbackends agree to {worst_diff:.1e} across all cases")


if __name__ == "__main__":
    main()
