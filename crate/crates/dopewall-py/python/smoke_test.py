"""Smoke test for the compiled extension.

Run after `maturin develop`, or point DOPEWALL_PY_PATH at a directory
holding the built module (dopewall.so).
"""

import math
import os
import sys

if os.environ.get("DOPEWALL_PY_PATH"):
    sys.path.insert(0, os.environ["DOPEWALL_PY_PATH"])

import dopewall  # noqa: E402


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    # Determinants against brute-force enumeration.
    for wall in (False, True):
        km = dopewall.kernel("hahn", 3, wall=wall, n=6, p=2.5, q=4.0 if not wall else None)
        log_z, configs = dopewall.oracle("hahn", 3, wall=wall, n=6, p=2.5, q=4.0 if not wall else None)
        close(sum(p for _, p in configs), 1.0, 1e-12)
        for i in range(len(km)):
            one = sum(p for s, p in configs if i in s)
            close(km.correlation([i]), one, 1e-10)
        two = sum(p for s, p in configs if 0 in s and 2 in s)
        close(km.correlation([0, 2]), two, 1e-10)
        close(km.trace(), 3.0, 1e-10)

    km = dopewall.kernel("uniform", 2, n=4)
    close(km.correlation([0]), 0.7, 1e-12)
    counts = km.count_distribution([0, 1])
    close(sum(counts), 1.0, 1e-12)
    samples = km.sample(100, seed=5)
    assert len(samples) == 100 and all(len(s) == 2 for s in samples)
    assert samples == km.sample(100, seed=5)

    close(dopewall.tracy_widom_cdf(0.0, 40), dopewall.tracy_widom_cdf(0.0, 80), 1e-8)
    assert dopewall.wall_cdf(0.3, 1.5) == 1.0
    close(dopewall.limit_kernel("sine", 0.0, 0.0), 1.0, 1e-15)

    grid, density, l_c, regions = dopewall.hahn_equilibrium(0.5, gridsize=128)
    h = grid[1] - grid[0]
    close(sum(density) * h, 1.0, 1e-6)
    band = [r for r in regions if r[0] == "band"]
    close(band[-1][2], dopewall.hahn_band_edge(1.0, 0.5), max(0.01, 2 * h))
    assert math.isfinite(l_c)

    svg = dopewall.tiling_svg(1, 1)
    assert svg.startswith("<svg") and svg == dopewall.tiling_svg(1, 1)

    for ident, passed, line in dopewall.run_suite("oracle"):
        print(line)
        assert passed, ident

    try:
        dopewall.kernel("uniform", 9, n=4)
    except ValueError:
        pass
    else:
        raise AssertionError("k > N should raise")
    print("smoke test passed")


if __name__ == "__main__":
    main()
