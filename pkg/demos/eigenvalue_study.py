"""Eigenvalues of a two-layer strip, exact and approximate.

A strip made of two materials (fast on the left, slow on the right)
carries a discrete set of decay rates. The exact rates come from a
transcendental matching condition; closed-form approximations exist at
zeroth order (a single effective layer) and first order (one correction
term built from the contrast). This script prints all three side by
side so you can see where the cheap formulas are trustworthy.

Run it directly:

    python3 demos/eigenvalue_study.py
"""

import time

import numpy as np

from heatlayers import spectrum

SIGMA_FAST = 7.0
SIGMA_SLOW = 0.7
WIDTH_FAST = 1.2
WIDTH_SLOW = 1.0
COUNT = 30


def main():
    grid = spectrum.LayerGrid([0.0, WIDTH_FAST, WIDTH_FAST + WIDTH_SLOW],
                              [SIGMA_FAST, SIGMA_SLOW])
    t0 = time.perf_counter()
    exact = spectrum.find_eigenvalues(grid, COUNT)
    elapsed = time.perf_counter() - t0

    n = np.arange(1, COUNT + 1)
    lam0 = spectrum.lambda_approx(SIGMA_FAST, SIGMA_SLOW,
                                  WIDTH_FAST, WIDTH_SLOW, n, order=0)
    lam1 = spectrum.lambda_approx(SIGMA_FAST, SIGMA_SLOW,
                                  WIDTH_FAST, WIDTH_SLOW, n, order=1)

    print(f"two-layer strip: sigma = ({SIGMA_FAST}, {SIGMA_SLOW}), "
          f"widths = ({WIDTH_FAST}, {WIDTH_SLOW})")
    print(f"{COUNT} exact eigenvalues found in {elapsed * 1e3:.1f} ms\n")
    print(f"{'n':>3} {'exact':>12} {'zeroth':>12} {'err%':>7} "
          f"{'first':>12} {'err%':>7}")
    for i in range(COUNT):
        e0 = 100.0 * abs(lam0[i] - exact[i]) / exact[i]
        e1 = 100.0 * abs(lam1[i] - exact[i]) / exact[i]
        print(f"{i + 1:>3} {exact[i]:>12.6f} {lam0[i]:>12.6f} {e0:>7.2f} "
              f"{lam1[i]:>12.6f} {e1:>7.2f}")

    rel1 = np.abs(lam1 - exact) / exact
    print(f"\nworst first-order error over n = 1..{COUNT}: "
          f"{100.0 * rel1.max():.2f}%")
    # the correction never hurts: it beats the zeroth order at every index
    rel0 = np.abs(lam0 - exact) / exact
    assert np.all(rel1 <= rel0)


if __name__ == "__main__":
    main()
