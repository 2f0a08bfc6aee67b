"""Following one molecule through the backward dual equation.

A molecule of radius ``r`` starts concentrated around ``x0``.  Under the dual
flow its centre moves with the averaged drift, it spreads at rate ``K`` and its
L1 norm settles under ``v_n (K T0)^(-gamma)``.  The demo prints the measured
quantities next to their envelopes at a few window boundaries.

Run::

    python demos/molecule_envelopes.py
"""
import numpy as np

from levydrift import KernelSpec, SolverConfig, TorusGrid, compute_symbol
from levydrift.field import make_divfree_velocity, random_stream
from levydrift.molecules import MoleculeParams, build_molecule, check_molecule, choose_K, iterate_molecule


def main(r=0.1, seed=3):
    grid = TorusGrid(2, 256)
    table = compute_symbol(KernelSpec("D", 0.5, 0.5, 0.5), grid)
    v = make_divfree_velocity(random_stream(grid, np.random.default_rng(seed), 4, 1.0))
    params = MoleculeParams.from_gamma(0.25, 0.5, r, (2.0, 4.0))
    psi = build_molecule(params, grid)
    print("initial molecule:", "ok" if check_molecule(psi, params).passed else "FAILS")

    K = choose_K(v.bmo_bound, params.omega, params.gamma)
    dt = min(0.01, 0.9 * grid.h / (2 * v.max_speed()))
    run = iterate_molecule(psi, v, table, params, K, 0.5, SolverConfig(dt=dt, T=0.5))
    print(f"mu = {v.bmo_bound:.3f}, K = {K:.2f}, {run.n_windows} windows of length {run.window:.4f}")
    print("     s     concentration        height              L1")
    for e in run.envelopes[:: max(1, len(run.envelopes) // 8)]:
        cells = "  ".join(f"{m:8.3g}/{b:<8.3g}" for m, b in zip(e.measured, e.bounds))
        print(f"  {e.s:6.3f}  {cells}")
    print(f"final L1 {run.final_l1:.4g} against cap {run.cap:.4g}; violations: {len(run.violations)}")


if __name__ == "__main__":
    main()
