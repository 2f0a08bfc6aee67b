"""Experiment suites run by the command line and the acceptance tests.

Each suite takes an :class:`ExperimentConfig`, writes its artifacts into an
output directory and returns a list of check records.  Every record carries
the name of the result it exercises (``anchor``) and a ``pass`` flag.
Ensemble members draw from independent children of ``SeedSequence(seed)``,
so results do not depend on how members are scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, experiment_items
from .exceptions import ArgumentError, ConfigError
from .field import ScalarField, TorusGrid, random_field
from .fitting import loglog_slope
from .kernel import (Family, compute_symbol, levy_symbol, symbol_bound_margins, validate_bounds)
from .molecules import MoleculeParams, build_molecule, check_molecule, choose_K, iterate_molecule, transfer_check
from .solver import heat_levy_l1_norm, solve_forward
from .verify import besov_regularity_check, commutator_scaling_check, strook_varopoulos_check

__all__ = ["ANCHORS", "run_suite", "SUITE_FUNCTIONS", "member_rngs"]

ANCHORS = {
    "maxprinciple": "maximum principle for Lp norms",
    "positivity": "positivity principle 0 <= theta <= M",
    "symbol": "Levy-Khinchin symbol and its pointwise bounds",
    "besov": "Besov regularity estimate chain",
    "svineq": "Strook-Varopoulos inequality",
    "commutator": "commutator estimate for the cut-off operator",
    "molecule": "small-time molecule evolution, iteration and L1 decay",
    "transfer": "transfer property between forward and dual problems",
    "heatlevy": "operator norm of L applied to the heat kernel",
}


def member_rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _map(fn, items, parallel):
    if parallel and parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _check(suite, name, passed, **values):
    return {"name": name, "anchor": ANCHORS[suite], "pass": bool(passed), **values}


def _unit_range(f: ScalarField, M=1.0):
    v = f.values
    return f.like(M * (v - v.min()) / (v.max() - v.min()))


def _forward_members(cfg, out, parallel, positive):
    grid, table = cfg.grid, compute_symbol(cfg.kernel, cfg.grid)
    size = cfg.param("size", 10, int)
    M = cfg.param("M", 1.0)
    kmax = cfg.param("theta_kmax", 8, int)
    steps = int(math.ceil(cfg.solver.T / cfg.solver.dt - 1e-9))

    def member(arg):
        i, rng = arg
        v = cfg.velocity.build(grid, rng, steps)
        th = random_field(grid, rng, kmax)
        if positive:
            th = _unit_range(th, M)
        traj = solve_forward(th, v, table, cfg.solver, store_every=0)
        io.write_trajectory_csv(out / f"trajectory_{i:03d}.csv", traj)
        d = traj.diagnostics
        l2 = d["l2"]
        rel = lambda s: float((np.max(s) - s[0]) / s[0])  # noqa: E731
        return {
            "member": i,
            "l2_step_increase": float(np.max(np.diff(l2)) / l2[0]),
            "l1_drift": rel(d["l1"]),
            "linf_drift": rel(d["linf"]),
            "min": float(d["min"].min()),
            "max": float(d["max"].max()),
        }

    rows = _map(member, list(enumerate(member_rngs(cfg.seed, size))), parallel)
    keys = list(rows[0])
    io.write_rows_csv(out / "members.csv", keys, ([r[k] for k in keys] for r in rows))
    return rows, M


def suite_maxprinciple(cfg, out, parallel):
    rows, _ = _forward_members(cfg, out, parallel, positive=False)
    w2 = max(r["l2_step_increase"] for r in rows)
    w1 = max(r["l1_drift"] for r in rows)
    wi = max(r["linf_drift"] for r in rows)
    return [
        _check("maxprinciple", "l2_nonincreasing_per_step", w2 <= 1e-8, worst=w2, tolerance=1e-8),
        _check("maxprinciple", "l1_accumulated_drift", w1 <= 1e-4, worst=w1, tolerance=1e-4),
        _check("maxprinciple", "linf_accumulated_drift", wi <= 1e-4, worst=wi, tolerance=1e-4),
    ]


def suite_positivity(cfg, out, parallel):
    rows, M = _forward_members(cfg, out, parallel, positive=True)
    mn = min(r["min"] for r in rows)
    mx = max(r["max"] for r in rows)
    return [
        _check("positivity", "min_above_zero", mn >= -1e-6 * M, min=mn, tolerance=1e-6 * M),
        _check("positivity", "max_below_M", mx <= M * (1 + 1e-6), max=mx, M=M),
    ]


def _reversed_index(grid):
    idx = [(-np.arange(grid.N)) % grid.N] * grid.dim
    return np.ix_(*idx)


def homogeneity_report(spec, table, kmin=1.0, kmax=16.0, refine=4):
    """Spread of ``a/|xi|^(2 alpha)`` on the band and its deviation from a refined quadrature."""
    k = table.grid.kmag
    sel = (k >= kmin) & (k <= kmax)
    ratio = table.values[sel] / k[sel] ** (2 * spec.alpha)
    uniq = np.unique(k[sel])
    oracle = levy_symbol(spec, uniq, radial_nodes=2048 * refine, rmax=64.0 * refine)
    lookup = dict(zip(uniq, oracle))
    ref = np.array([lookup[x] for x in k[sel]])
    dev = float(np.max(np.abs(table.values[sel] / ref - 1)))
    spread = float(ratio.max() / ratio.min() - 1)
    return spread, dev, float(np.mean(ratio))


def suite_symbol(cfg, out, parallel):
    spec, grid = cfg.kernel, cfg.grid
    table = compute_symbol(spec, grid)
    io.write_symbol_csv(out / "symbol.csv", table)
    vals = table.values
    checks = [
        _check("symbol", "zero_at_origin", vals.flat[0] == 0.0, a0=float(vals.flat[0])),
        _check("symbol", "symmetric", bool(np.array_equal(vals, vals[_reversed_index(grid)]))),
        _check("symbol", "nonnegative", bool(np.all(vals >= 0)), min=float(vals.min())),
    ]
    kmax = min(cfg.param("kmax", 16.0), float(grid.kmag.max()))
    kmin = cfg.param("kmin", 1.0)
    margins = symbol_bound_margins(table, spec, kmin, kmax)
    io.write_json(out / "margins.json", {"c_up": margins.c_up, "c_low": margins.c_low,
                                          "points": margins.n_points, "kmin": margins.kmin,
                                          "kmax": margins.kmax, "quadrature": table.meta})
    checks.append(_check("symbol", "fitted_constants_finite",
                         math.isfinite(margins.c_up) and math.isfinite(margins.c_low),
                         c_up=margins.c_up, c_low=margins.c_low))
    radii = np.geomspace(0.05, 20.0, 41)
    rep = validate_bounds(spec, radii)
    checks.append(_check("symbol", "kernel_bounds", rep.passed, c4=rep.c4))
    if spec.family is Family.POWER_LAW:
        spread, dev, mean = homogeneity_report(spec, table, kmin, kmax)
        checks.append(_check("symbol", "homogeneity_1pct", spread <= 0.01 and dev <= 0.01,
                             spread=spread, oracle_deviation=dev, constant=mean))
    return checks


def _positive_field(grid, rng, kmax, floor=0.2):
    f = random_field(grid, rng, kmax)
    v = f.values
    return f.like(v - v.min() + floor * np.ptp(v))


def suite_besov(cfg, out, parallel):
    grid, table = cfg.grid, compute_symbol(cfg.kernel, cfg.grid)
    size = cfg.param("size", 20, int)
    ps = [int(p) for p in cfg.param("p", [2.0, 4.0], list)]
    kmax = cfg.param("field_kmax", 4, int)
    ensembles = []
    records = []
    for e, ss in enumerate(np.random.SeedSequence(cfg.seed).spawn(2)):
        rngs = [np.random.default_rng(s) for s in ss.spawn(size)]

        def member(rng):
            f = _positive_field(grid, rng, kmax)
            return [besov_regularity_check(f, table, cfg.kernel, p) for p in ps]

        reps = _map(member, rngs, parallel)
        ensembles.append(reps)
        for i, rr in enumerate(reps):
            for r in rr:
                records.append({"ensemble": e, "member": i, **r.as_record()})
    io.write_jsonl(out / "besov.jsonl", records)
    checks = []
    for j, p in enumerate(ps):
        consts = []
        ordered = True
        finite = True
        for reps in ensembles:
            rs = [rr[j] for rr in reps]
            c1 = max(r.metadata["C1"] for r in rs)
            c2 = max(r.metadata["C2"] for r in rs)
            consts.append((c1, c2))
            for r in rs:
                mid = r.metadata["mid"]
                finite &= all(math.isfinite(x) for x in (r.lhs, mid, r.rhs))
                ordered &= r.lhs <= c1 * mid * (1 + 1e-12) and mid <= c2 * r.rhs * (1 + 1e-12)
        s1 = max(c[0] for c in consts) / min(c[0] for c in consts)
        s2 = max(c[1] for c in consts) / min(c[1] for c in consts)
        checks.append(_check("besov", f"chain_p{p}", finite and ordered and s1 <= 2 and s2 <= 2,
                             C1=[c[0] for c in consts], C2=[c[1] for c in consts],
                             C1_spread=s1, C2_spread=s2))
    return checks


def suite_svineq(cfg, out, parallel):
    grid, table = cfg.grid, compute_symbol(cfg.kernel, cfg.grid)
    size = cfg.param("size", 50, int)
    sign = cfg.param("sign", "positive", str)
    kmax = cfg.param("field_kmax", 6, int)
    ps = [int(p) for p in cfg.param("p", [2.0, 4.0], list)]

    def member(rng):
        f = random_field(grid, rng, kmax)
        if sign == "positive":
            f = _positive_field(grid, rng, kmax, 0.1)
        elif sign != "signed":
            raise ArgumentError("suite.sign must be 'positive' or 'signed'")
        return [strook_varopoulos_check(f, table, p) for p in ps]

    reps = _map(member, member_rngs(cfg.seed, size), parallel)
    io.write_jsonl(out / "svineq.jsonl", [{"member": i, **r.as_record()} for i, rr in enumerate(reps) for r in rr])
    checks = []
    for j, p in enumerate(ps):
        ratios = [rr[j].metadata["ratio"] for rr in reps]
        nonneg = all(rr[j].metadata["nonnegative"] for rr in reps)
        if p == 2:
            dev = max(abs(x - 1) for x in ratios)
            checks.append(_check("svineq", "p2_ratio_one", dev <= 1e-10 and nonneg, max_deviation=dev, sign=sign))
        else:
            checks.append(_check("svineq", f"p{p}_nonnegative", nonneg, sign=sign))
            checks.append(_check("svineq", f"p{p}_ratio_at_least_one", min(ratios) >= 1 - 1e-6,
                                 min_ratio=min(ratios), max_ratio=max(ratios),
                                 classical_constant=4 * (p - 1) / p**2, sign=sign))
    return checks


def commutator_radii(grid, fractions=(1 / 32, 1 / 16, 1 / 8, 1 / 4)):
    return [grid.Lbox * f for f in fractions]


def suite_commutator(cfg, out, parallel):
    spec = cfg.kernel
    fractions = cfg.param("radii", [1 / 32, 1 / 16, 1 / 8, 1 / 4], list)
    tol = cfg.param("slope_tol", 0.3)
    grids = [cfg.grid, TorusGrid(cfg.grid.dim, 2 * cfg.grid.N, cfg.grid.Lbox)]
    if min(fractions) * cfg.grid.N < 8:
        raise ConfigError("grid.N", f"smallest radius {min(fractions):g} L needs N >= {math.ceil(8 / min(fractions))}")

    def member(grid):
        table = compute_symbol(spec, grid)
        return commutator_scaling_check(table, spec, grid, commutator_radii(grid, fractions))

    reps = _map(member, grids, parallel)
    rows = []
    for g, r in zip(grids, reps):
        for R, ni, n2 in zip(r.metadata["radii"], r.metadata["norm_inf"], r.metadata["norm_2"]):
            rows.append([g.N, R, ni, n2])
    io.write_rows_csv(out / "commutator.csv", ["N", "R", "norm_inf", "norm_2"], rows)
    pred = reps[0].metadata["predicted"]
    s0, s1 = reps[0].slope, reps[1].slope
    return [
        _check("commutator", "slope", abs(s0 - pred) <= tol, slope=s0, predicted=pred, tolerance=tol,
               slope_2=reps[0].metadata["slope_2"]),
        _check("commutator", "refinement_stable", abs(s1 - s0) <= 0.1, slope_fine=s1, slope=s0),
    ]


def _molecule_grid(base: TorusGrid, r):
    N = base.N
    while r < 4 * base.Lbox / N:
        N *= 2
    return TorusGrid(base.dim, N, base.Lbox)


def run_molecule_member(spec, base_grid, recipe, fam, solver, r, x0, rng, out=None, tag=None):
    """Build, check and iterate one molecule; returns a summary dict."""
    grid = _molecule_grid(base_grid, r)
    table = compute_symbol(spec, grid)
    params = MoleculeParams.from_gamma(fam.gamma, fam.omega, r, x0, grid.dim, case=spec.case, delta=spec.delta)
    psi0 = build_molecule(params, grid)
    initial = check_molecule(psi0, params)
    v = recipe.build(grid, rng, 1)
    mu = 0.0 if v is None else float(v.bmo_bound)
    vmax = 0.0 if v is None else v.max_speed()
    K = choose_K(mu, fam.omega, fam.gamma, fam.C_cal)
    dt = solver.dt if vmax == 0 else min(solver.dt, 0.9 * grid.h / (2 * vmax))
    cfg = replace(solver, dt=dt, T=max(solver.T, dt))
    run = iterate_molecule(psi0, v, table, params, K, fam.T0, cfg, fam.eps_win)
    if out is not None:
        io.write_envelope_csv(out / f"envelope_{tag}.csv", run.envelopes)
    worst = np.max([[m / b for m, b in zip(e.measured, e.bounds)] for e in run.envelopes], axis=0)
    return {
        "r": r, "x0": list(params.x0), "N": grid.N, "mu": mu, "vmax": vmax, "K": K,
        "windows": run.n_windows, "violations": len(run.violations),
        "initial_ok": initial.passed, "final_l1": run.final_l1, "cap": run.cap,
        "measured_C": run.measured_C, "worst_ratio": [float(x) for x in worst],
        "saturated": run.concentration_saturated,
    }


def suite_molecule(cfg, out, parallel):
    fam = cfg.molecule
    members = []
    rngs = member_rngs(cfg.seed, len(fam.radii) * fam.centers)
    k = 0
    for r in fam.radii:
        for c in range(fam.centers):
            x0 = tuple(float(x) for x in rngs[k].uniform(0, cfg.grid.Lbox, cfg.grid.dim))
            members.append((k, r, x0, rngs[k]))
            k += 1

    def member(arg):
        i, r, x0, rng = arg
        return run_molecule_member(cfg.kernel, cfg.grid, cfg.velocity, fam, cfg.solver, r, x0, rng, out, f"{i:03d}")

    rows = _map(member, members, parallel)
    io.write_jsonl(out / "molecules.jsonl", rows)
    nviol = sum(r["violations"] for r in rows)
    cap_ok = all(r["final_l1"] <= 1.1 * r["cap"] for r in rows)
    return [
        _check("molecule", "initial_conditions", all(r["initial_ok"] for r in rows)),
        _check("molecule", "envelopes_hold", nviol == 0, violations=nviol, members=len(rows)),
        _check("molecule", "final_l1_cap", cap_ok,
               worst=max(r["final_l1"] / r["cap"] for r in rows), factor=1.1),
    ]


def suite_transfer(cfg, out, parallel):
    grid, table = cfg.grid, compute_symbol(cfg.kernel, cfg.grid)
    size = cfg.param("size", 5, int)
    kmax = cfg.param("field_kmax", 6, int)
    t = cfg.solver.T

    def member(rng):
        v = cfg.velocity.build(grid, rng, 1)
        a = random_field(grid, rng, kmax)
        b = random_field(grid, rng, kmax)
        d1 = transfer_check(a, b, v, table, cfg.solver, t)
        half = replace(cfg.solver, dt=cfg.solver.dt / 2)
        d2 = transfer_check(a, b, v, table, half, t) if v is not None else d1
        return v is None, d1, d2

    res = _map(member, member_rngs(cfg.seed, size), parallel)
    io.write_rows_csv(out / "transfer.csv", ["member", "zero_drift", "defect_dt", "defect_dt_half"],
                      ([i, int(z), d1, d2] for i, (z, d1, d2) in enumerate(res)))
    checks = []
    zero = [d1 for z, d1, _ in res if z]
    moving = [(d1, d2) for z, d1, d2 in res if not z]
    if zero:
        checks.append(_check("transfer", "zero_drift_defect", max(zero) <= 1e-10, worst=max(zero)))
    if moving:
        ratios = [d1 / d2 if d2 > 0 else math.inf for d1, d2 in moving]
        checks.append(_check("transfer", "first_order_refinement", min(ratios) >= 1.8, min_ratio=min(ratios)))
    return checks


def suite_heatlevy(cfg, out, parallel):
    table = compute_symbol(cfg.kernel, cfg.grid)
    lo = cfg.param("tau_min", 1e-3)
    hi = cfg.param("tau_max", 1e-1)
    n = cfg.param("samples", 9, int)
    tol = cfg.param("slope_tol", 0.1)
    eps = cfg.solver.epsilon if cfg.solver.epsilon > 0 else 1.0
    taus = np.geomspace(lo, hi, n) / eps
    reps = [heat_levy_l1_norm(table, t, eps) for t in taus]
    io.write_rows_csv(out / "heatlevy.csv", ["eps_tau", "norm"], ([r.eps_tau, r.value] for r in reps))
    slope, _ = loglog_slope([r.eps_tau for r in reps], [r.value for r in reps])
    pred = reps[0].predicted_exponent
    return [_check("heatlevy", "slope", abs(slope - pred) <= tol, slope=slope, predicted=pred, tolerance=tol)]


SUITE_FUNCTIONS = {
    "maxprinciple": suite_maxprinciple,
    "positivity": suite_positivity,
    "symbol": suite_symbol,
    "besov": suite_besov,
    "svineq": suite_svineq,
    "commutator": suite_commutator,
    "molecule": suite_molecule,
    "transfer": suite_transfer,
    "heatlevy": suite_heatlevy,
}


def run_suite(cfg: ExperimentConfig, out=None, parallel=1):
    """Run ``cfg.suite``; writes artifacts and ``summary.json`` into ``out``.

    Returns ``(status, summary)`` with status 0 when every check passed and 1
    otherwise.
    """
    out = Path(out or cfg.out or f"out_{cfg.suite}")
    out.mkdir(parents=True, exist_ok=True)
    io.write_kv(out / "config.cfg", experiment_items(cfg))
    checks = SUITE_FUNCTIONS[cfg.suite](cfg, out, parallel)
    ok = all(c["pass"] for c in checks)
    summary = {"suite": cfg.suite, "seed": cfg.seed, "anchor": ANCHORS[cfg.suite], "pass": ok, "checks": checks}
    io.write_json(out / "summary.json", summary)
    return (0 if ok else 1), summary

