"""r-molecules, their backward evolution and the deformed-molecule envelopes.

An r-molecule centred at ``x0`` (Hardy index ``sigma``, ``gamma = n(1/sigma - 1)``,
concentration exponent ``omega``) satisfies

    int |psi| |x - x0|^omega  <=  r^(omega - gamma)      (concentration)
    ||psi||_inf               <=  r^-(n + gamma)         (height)
    int psi                   ==  0   when r < 1         (moment)

Under the backward dual equation the molecule is tracked against the
envelopes obtained by replacing ``r`` with ``r + K s`` and the centre with the
solution of ``x'(s) = average of v over B(x(s), r + K s)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import ArgumentError, PreconditionError, ResolutionError
from .field import ScalarField, TorusGrid, VelocityField, ball_volume, holder_seminorm, lp_norm
from .kernel import Case, SymbolTable
from .solver import SolverConfig, solve_backward_dual, solve_forward

__all__ = [
    "MoleculeParams",
    "MoleculeReport",
    "EnvelopeState",
    "MoleculeRun",
    "DualityReport",
    "choose_K",
    "build_molecule",
    "check_molecule",
    "envelope_bounds",
    "evolve_center",
    "ball_average",
    "concentration",
    "envelope_state",
    "track_envelopes",
    "iterate_molecule",
    "transfer_check",
    "holder_by_duality",
]


@dataclass(frozen=True)
class MoleculeParams:
    """Molecule parameters; ``gamma`` is derived from ``sigma`` unless given consistently.

    ``case`` and ``delta`` describe the kernel the molecule will be evolved
    with and only enter the ordering check ``omega < 2 delta`` of case C.
    """

    sigma: float
    omega: float
    r: float
    x0: tuple
    dim: int = 2
    gamma: Optional[float] = None
    case: Case = Case.D
    delta: float = 0.5

    def __post_init__(self):
        n = self.dim
        if n not in (1, 2):
            raise ArgumentError("dim must be 1 or 2")
        if not n / (n + 1) < self.sigma < 1:
            raise ArgumentError(f"sigma must lie in ({n}/{n + 1}, 1)")
        g = n * (1 / self.sigma - 1)
        if self.gamma is not None and abs(self.gamma - g) > 1e-12 * max(1.0, g):
            raise ArgumentError(f"gamma must equal n(1/sigma - 1) = {g!r}")
        object.__setattr__(self, "gamma", g if self.gamma is None else float(self.gamma))
        object.__setattr__(self, "case", Case(self.case))
        if not 0 < self.gamma < self.omega < 1:
            raise ArgumentError("need 0 < gamma < omega < 1")
        if self.case is Case.C and not self.omega < 2 * self.delta:
            raise ArgumentError("case C needs omega < 2 delta")
        if not self.r > 0:
            raise ArgumentError("r must be positive")
        x0 = tuple(float(x) for x in np.broadcast_to(np.asarray(self.x0, dtype=float), (n,)))
        object.__setattr__(self, "x0", x0)

    @classmethod
    def from_gamma(cls, gamma, omega, r, x0, dim=2, **kw):
        """Parameters with ``sigma = n / (n + gamma)``."""
        return cls(sigma=dim / (dim + gamma), omega=omega, r=r, x0=x0, dim=dim, **kw)

    @property
    def small(self):
        return self.r < 1

    def with_center(self, x0):
        return MoleculeParams(self.sigma, self.omega, self.r, tuple(x0), self.dim, None, self.case, self.delta)

    def with_radius(self, r):
        return MoleculeParams(self.sigma, self.omega, r, self.x0, self.dim, None, self.case, self.delta)

    def to_items(self):
        return {
            "sigma": repr(self.sigma),
            "gamma": repr(self.gamma),
            "omega": repr(self.omega),
            "r": repr(self.r),
            "x0": ",".join(repr(x) for x in self.x0),
            "dim": str(self.dim),
            "case": self.case.value,
            "delta": repr(self.delta),
        }

    @classmethod
    def from_items(cls, items):
        kw = dict(items)
        x0 = tuple(float(x) for x in str(kw.pop("x0")).split(","))
        dim = int(kw.pop("dim", len(x0)))
        gamma = kw.pop("gamma", None)
        out = {k: float(v) for k, v in kw.items() if k != "case"}
        if "case" in kw:
            out["case"] = kw["case"]
        if "sigma" not in out:
            out["sigma"] = dim / (dim + float(gamma))
            gamma = None
        return cls(x0=x0, dim=dim, gamma=None if gamma is None else float(gamma), **out)


def choose_K(mu, omega, gamma, C_cal=1.0):
    """Smallest ``K`` with ``C_cal (mu + 1) <= K (omega - gamma)``."""
    if not omega > gamma:
        raise ArgumentError("omega must exceed gamma")
    if mu < 0:
        raise ArgumentError("mu must be >= 0")
    if not C_cal > 0:
        raise ArgumentError("C_cal must be positive")
    return C_cal * (mu + 1) / (omega - gamma)


def envelope_bounds(params: MoleculeParams, K, s):
    """``((r+Ks)^(omega-gamma), (r+Ks)^-(n+gamma), v_n (r+Ks)^-gamma)`` for scalar or array ``s``."""
    n, g = params.dim, params.gamma
    f = params.r + K * np.asarray(s, dtype=float)
    return f ** (params.omega - g), f ** (-(n + g)), ball_volume(n) * f ** (-g)


def concentration(psi: ScalarField, center, omega):
    """``int |psi| |x - center|^omega`` with the torus distance."""
    d = psi.grid.distance_to(center)
    return float(np.sum(np.abs(psi.values) * d**omega) * psi.grid.cell)


def _bump(grid, center, width):
    d2 = np.sum(grid.offsets_to(center) ** 2, axis=0)
    return np.exp(-0.5 * d2 / width**2)


def build_molecule(params: MoleculeParams, grid: TorusGrid, height_fraction=0.9):
    """Smooth dipole r-molecule.

    Two Gaussians of width ``r/4`` with opposite signs sit at ``x0 -+ (r/4) e_1``
    (separation ``r/2``); the negative lobe is rescaled so the grid sum vanishes
    exactly.  The amplitude saturates ``height_fraction`` of the height bound,
    lowered if needed so the concentration bound holds with the same margin.
    For ``r >= 1`` a single positive bump is used and no moment is imposed.
    """
    if grid.dim != params.dim:
        raise ArgumentError("grid and molecule dimensions differ")
    r = params.r
    if not r < grid.Lbox / 8:
        raise PreconditionError(f"r = {r} must be below Lbox/8 = {grid.Lbox / 8:.4g}")
    if r < 4 * grid.h:
        raise ResolutionError(f"r = {r} is not resolved: need r >= 4h = {4 * grid.h:.4g}")
    x0 = np.asarray(params.x0)
    w = r / 4
    if params.small:
        shift = np.zeros(params.dim)
        shift[0] = r / 4
        plus = _bump(grid, x0 - shift, w)
        minus = _bump(grid, x0 + shift, w)
        prof = plus - minus * (plus.sum() / minus.sum())
        prof -= prof.mean()
    else:
        prof = _bump(grid, x0, w)
    prof = prof / np.max(np.abs(prof))
    n, g = params.dim, params.gamma
    amp = height_fraction * r ** (-(n + g))
    conc = concentration(ScalarField(grid, prof), x0, params.omega)
    amp = min(amp, height_fraction * r ** (params.omega - g) / conc)
    return ScalarField(grid, amp * prof)


@dataclass
class MoleculeReport:
    """Measured molecule conditions against their bounds."""

    concentration: float
    height: float
    mean: float
    l1: float
    concentration_bound: float
    height_bound: float
    moment_required: bool
    passes: dict
    l1_constant: float

    @property
    def passed(self):
        return all(self.passes.values())


def check_molecule(f: ScalarField, params: MoleculeParams, rtol=1e-12):
    """Measure the three defining conditions; ``l1_constant = ||f||_1 r^gamma``."""
    n, g, r = params.dim, params.gamma, params.r
    conc = concentration(f, params.x0, params.omega)
    height = lp_norm(f, np.inf)
    mean = f.mean()
    l1 = lp_norm(f, 1)
    cb = r ** (params.omega - g)
    hb = r ** (-(n + g))
    passes = {
        "concentration": conc <= cb * (1 + rtol),
        "height": height <= hb * (1 + rtol),
    }
    if params.small:
        passes["moment"] = abs(mean) <= 1e-12 * max(height, 1e-300) or height == 0
    return MoleculeReport(conc, height, mean, l1, cb, hb, params.small, passes, l1 * r**g)


def ball_average(v, grid: TorusGrid, x, radius):
    """Average of the components of ``v`` over lattice points of ``B(x, radius)``."""
    mask = grid.distance_to(x) <= radius
    count = int(mask.sum())
    if count == 0:
        raise ResolutionError(f"ball of radius {radius:.4g} contains no lattice point")
    comps = v.components if isinstance(v, VelocityField) else v
    return np.array([c[mask].mean() for c in comps])


def _velocity_at(v, i):
    if v is None or isinstance(v, VelocityField):
        return v
    return v[min(i, len(v) - 1)]


def evolve_center(v, r, x0, K, times, grid: Optional[TorusGrid] = None):
    """Explicit Euler path of ``x'(s) = average of v(., s)`` over ``B(x(s), r + K s)``.

    ``v`` is ``None``, a static field or a list aligned with ``times``.  The
    path is returned unwrapped (not reduced modulo ``Lbox``).
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ArgumentError("times must increase from 0")
    x0 = np.asarray(x0, dtype=float)
    path = np.empty((times.size, x0.size))
    path[0] = x0
    for i in range(1, times.size):
        vi = _velocity_at(v, i - 1)
        if vi is None:
            path[i] = path[i - 1]
            continue
        g = vi.grid if grid is None else grid
        avg = ball_average(vi, g, g.wrap(path[i - 1]), r + K * times[i - 1])
        path[i] = path[i - 1] + (times[i] - times[i - 1]) * avg
    return path


@dataclass
class EnvelopeState:
    """Measured triple against the envelope triple at elapsed time ``s``."""

    s: float
    K: float
    measured: tuple
    bounds: tuple
    center: tuple
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations


_NAMES = ("concentration", "height", "l1")


def envelope_state(psi: ScalarField, s, center, params: MoleculeParams, K, rtol=1e-9):
    meas = (
        concentration(psi, center, params.omega),
        lp_norm(psi, np.inf),
        lp_norm(psi, 1),
    )
    bounds = tuple(float(b) for b in envelope_bounds(params, K, s))
    bad = tuple(nm for nm, m, b in zip(_NAMES, meas, bounds) if m > b * (1 + rtol))
    return EnvelopeState(float(s), float(K), meas, bounds, tuple(float(c) for c in center), bad)


def track_envelopes(traj, params: MoleculeParams, K, centers=None):
    """Envelope states for every stored state of a backward trajectory.

    ``centers`` gives the centre at each stored time; by default the centre
    stays at ``x0`` (appropriate for ``v = 0``).
    """
    out = []
    for i, (s, psi) in enumerate(zip(traj.state_times, traj.states)):
        c = params.x0 if centers is None else centers[i]
        out.append(envelope_state(psi, s, psi.grid.wrap(c), params, K))
    return out


@dataclass
class MoleculeRun:
    """Result of :func:`iterate_molecule`."""

    params: MoleculeParams
    K: float
    T0: float
    window: float
    n_windows: int
    envelopes: list
    window_starts: list
    final_l1: float
    cap: float
    measured_C: float
    concentration_saturated: bool = False

    @property
    def violations(self):
        return [e for e in self.envelopes if e.violations]

    @property
    def passed(self):
        return not self.violations and self.final_l1 <= self.cap


def iterate_molecule(psi0: ScalarField, v, table: SymbolTable, params: MoleculeParams, K, T0,
                     cfg: SolverConfig, eps_win=0.5):
    """Backward evolution in windows of length ``eps_win * r`` until ``T0`` is covered.

    Each window restarts :func:`solve_backward_dual` from the current state
    and centre; the envelope radius ``r + K s`` runs continuously in the total
    elapsed time ``s``.  ``v`` is ``None``, a static field, or a list whose
    entry ``m`` is the drift seen at global backward step ``m``.  Violations
    are recorded, not raised.  ``cap = v_n (K T0)^-gamma`` and
    ``measured_C = final ||psi||_1 T0^gamma``.
    """
    if not T0 > 0:
        raise ArgumentError("T0 must be positive")
    if not eps_win > 0:
        raise ArgumentError("eps_win must be positive")
    grid = psi0.grid
    window = eps_win * params.r
    n_windows = int(math.ceil(T0 / window - 1e-9))
    per = max(1, int(math.ceil(window / cfg.dt - 1e-9)))
    dt = window / per
    wcfg = SolverConfig(cfg.epsilon, dt, window, cfg.scheme, cfg.picard_tol, cfg.picard_max_iter,
                        cfg.mollify, cfg.stiffness_cap, cfg.budget_C)
    center = np.asarray(params.x0, dtype=float)
    env = [envelope_state(psi0, 0.0, center, params, K)]
    starts = [0]
    psi = psi0
    s0 = 0.0
    for w in range(n_windows):
        if v is None or isinstance(v, VelocityField):
            vw = v
        else:
            # solve_backward_dual reads lists back to front
            vw = [v[min(w * per + j, len(v) - 1)] for j in range(per)][::-1]
        states = []
        traj = solve_backward_dual(psi, vw, table, wcfg, store_every=0,
                                   callback=lambda step, t, f: states.append((step, t, f)))
        for step, t, f in states[1:]:
            vi = _velocity_at(v, w * per + step - 1)
            if vi is not None:
                avg = ball_average(vi, grid, grid.wrap(center), params.r + K * (s0 + t - dt))
                center = center + dt * avg
            env.append(envelope_state(f, s0 + t, grid.wrap(center), params, K))
        psi = traj.final
        s0 += window
        starts.append(len(env) - 1)
    final_l1 = lp_norm(psi, 1)
    cap = ball_volume(params.dim) * (K * T0) ** (-params.gamma)
    saturated = params.r + K * s0 > grid.Lbox / 2
    return MoleculeRun(params, K, T0, window, n_windows, env, starts, final_l1, cap,
                       final_l1 * T0**params.gamma, saturated)


def transfer_check(theta0: ScalarField, psi0: ScalarField, v, table: SymbolTable, cfg: SolverConfig, t):
    """Relative defect of ``<theta(t), psi0> = <theta0, psi(t)>``."""
    if theta0.grid != psi0.grid:
        raise ArgumentError("fields live on different grids")
    if t == 0:
        return 0.0
    run = SolverConfig(cfg.epsilon, cfg.dt, t, cfg.scheme, cfg.picard_tol, cfg.picard_max_iter,
                       cfg.mollify, cfg.stiffness_cap, cfg.budget_C)
    theta_t = solve_forward(theta0, v, table, run, store_every=0).final
    psi_t = solve_backward_dual(psi0, v, table, run, store_every=0).final
    lhs = theta_t.inner(psi0)
    rhs = theta0.inner(psi_t)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


@dataclass
class DualityReport:
    """Pairings of ``theta`` with a molecule family next to its Holder seminorm."""

    pairings: list
    radii: list
    max_pairing: float
    holder: float
    gamma: float
    ratio: float


def holder_by_duality(theta: ScalarField, params_family: Sequence[MoleculeParams], grid: Optional[TorusGrid] = None):
    """``max |<theta, psi>|`` over built molecules and ``holder_seminorm(theta, gamma)``.

    No proportionality constant is asserted; ``ratio = max_pairing / holder``
    is reported so it can be compared across families and resolutions.
    """
    if not params_family:
        raise ArgumentError("molecule family is empty")
    grid = grid or theta.grid
    gammas = {p.gamma for p in params_family}
    if len(gammas) != 1:
        raise ArgumentError("all molecules must share gamma")
    gamma = gammas.pop()
    pairs, radii = [], []
    for p in params_family:
        psi = build_molecule(p, grid)
        pairs.append(abs(theta.inner(psi)))
        radii.append(p.r)
    hol = holder_seminorm(theta, gamma)
    mx = max(pairs)
    return DualityReport(pairs, radii, mx, hol, gamma, mx / hol if hol > 0 else math.inf)
