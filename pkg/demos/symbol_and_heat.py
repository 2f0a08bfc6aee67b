"""Levy symbols on the torus and how they act on the heat kernel.

Prints the quadrature symbol of two power-law kernels next to the closed-form
constant, then measures how ``||L h_t||_1`` blows up as ``t -> 0``.

Run::

    python demos/symbol_and_heat.py
"""
import math

import numpy as np

from levydrift import KernelSpec, TorusGrid, compute_symbol, heat_levy_l1_norm
from levydrift.fitting import loglog_slope


def closed_form(n, s):
    return math.pi ** (n / 2) * abs(math.gamma(-s)) / (4**s * math.gamma(n / 2 + s))


def main():
    grid = TorusGrid(2, 128)
    for alpha, case in ((0.25, "B"), (0.5, "D")):
        spec = KernelSpec(case, alpha, alpha, alpha)
        table = compute_symbol(spec, grid)
        print(f"case {case}, alpha = {alpha}")
        for k in (1, 2, 4, 8, 16):
            ratio = table.values[k, 0] / k ** (2 * alpha)
            print(f"  |xi| = {k:2d}   a / |xi|^(2 alpha) = {ratio:.6f}")
        print(f"  closed form constant        = {closed_form(2, alpha):.6f}")

        # the heat kernel exposes the order of the operator: ||L h_t||_1 ~ t^(-alpha)
        taus = np.geomspace(1e-3, 1e-1, 9)
        norms = [heat_levy_l1_norm(table, t, 1.0).value for t in taus]
        slope, _ = loglog_slope(taus, norms)
        print(f"  heat-kernel slope = {slope:+.3f} (expected {-alpha:+.3f})\n")


if __name__ == "__main__":
    main()
