"""Numerical diagnostics for the analytic estimates.

Every check returns an :class:`InequalityReport`.  Constants are fitted from
the data rather than taken from the analysis, which leaves them unnamed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import ArgumentError, NumericalError, ResolutionError
from .field import ScalarField, TorusGrid, besov_seminorm, lp_norm, sobolev_seminorm
from .fitting import loglog_slope
from .kernel import Case, KernelSpec, SymbolTable, compute_symbol, radial_profile
from .solver import apply_levy

__all__ = [
    "InequalityReport",
    "strook_varopoulos_check",
    "besov_regularity_check",
    "besov_cross_term",
    "commutator_scaling_check",
    "fractional_identity_check",
    "smooth_cutoff",
    "power_plus_smooth_fit",
]


@dataclass
class InequalityReport:
    """Outcome of one diagnostic.

    ``passed`` requires finite values and ``lhs <= constant * rhs + tolerance``
    plus the check-specific conditions named in each function's docstring.
    """

    name: str
    lhs: float
    rhs: float
    constant: Optional[float] = None
    passed: bool = False
    tolerance: float = 0.0
    slope: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def as_record(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant": self.constant,
            "slope": self.slope,
            "pass": bool(self.passed),
            "metadata": self.metadata,
        }


def _finite(*vals):
    return all(v is not None and math.isfinite(v) for v in vals)


def _ordered(lhs, constant, rhs, tol):
    return lhs <= constant * rhs + tol


def _grid_meta(grid):
    return {"dim": grid.dim, "N": grid.N, "Lbox": grid.Lbox}


def strook_varopoulos_check(f: ScalarField, table: SymbolTable, p=2):
    """Compare ``<L f, |f|^(p-1) sgn f>`` with ``<L |f|^(p/2), |f|^(p/2)>``.

    ``rhs`` is the first pairing, ``lhs`` the second (``lhs_core``); both must
    be ``>= -1e-10 ||f||_p^p``.  ``metadata['ratio']`` is ``rhs / lhs`` (the
    empirical constant) and ``constant = lhs / rhs`` makes the reported
    inequality ``lhs <= constant * rhs`` tight.
    """
    if p != int(p) or int(p) % 2 or p < 2:
        raise ArgumentError("p must be an even integer >= 2")
    p = int(p)
    vals = f.values
    if np.ptp(vals) == 0:
        raise ArgumentError("f must be non-constant")
    cell = f.grid.cell
    Lf = apply_levy(f, table).values
    rhs = float(np.sum(Lf * vals ** (p - 1)) * cell)
    g = np.abs(vals) ** (p // 2)
    Lg = apply_levy(f.like(g), table).values
    lhs = float(np.sum(Lg * g) * cell)
    tol = 1e-10 * lp_norm(f, p) ** p
    ratio = rhs / lhs if lhs != 0 else math.inf
    nonneg = rhs >= -tol and lhs >= -tol
    constant = lhs / rhs if rhs != 0 else math.inf
    ok = _finite(lhs, rhs, ratio) and nonneg and _ordered(lhs, constant, rhs, tol)
    meta = {"p": p, "ratio": ratio, "nonnegative": bool(nonneg), **_grid_meta(f.grid)}
    return InequalityReport("strook_varopoulos", lhs, rhs, constant, ok, tol, None, meta)


def _periodized_kernel(spec: KernelSpec, grid: TorusGrid, images=2):
    """Kernel summed over periodic images at every lattice offset (zero offset set to 0)."""
    offs = grid.offsets_to(np.zeros(grid.dim))
    out = np.zeros(grid.shape)
    rng = range(-images, images + 1)
    shifts = [(a,) for a in rng] if grid.dim == 1 else [(a, b) for a in rng for b in rng]
    for s in shifts:
        d = np.sqrt(sum((offs[j] + s[j] * grid.Lbox) ** 2 for j in range(grid.dim)))
        with np.errstate(divide="ignore"):
            out += np.where(d > 0, radial_profile(spec, np.where(d > 0, d, 1.0)), 0.0)
    return out


def besov_cross_term(f: ScalarField, spec: KernelSpec, p=2, images=2):
    """``-int f_+^(p-1) L f_-`` by direct quadrature on the disjoint supports.

    With ``f_+ f_- = 0`` pointwise, ``L f_-(x) = -int f_-(y) pi(x - y) dy`` on
    the support of ``f_+``; the double sum uses the periodized kernel and is
    evaluated as a circular convolution.
    """
    pos = np.maximum(f.values, 0.0)
    neg = np.maximum(-f.values, 0.0)
    ker = _periodized_kernel(spec, f.grid, images)
    conv = np.real(np.fft.ifftn(np.fft.fftn(neg) * np.fft.fftn(ker)))
    return float(np.sum(pos ** (p - 1) * conv) * f.grid.cell**2)


def besov_regularity_check(f: ScalarField, table: SymbolTable, spec: Optional[KernelSpec] = None, p=2):
    """Three quantities of the Besov regularity chain for ``f >= 0``.

    ``lhs  = |f|^p_{B^{2 alpha/p, p}_p}`` (double-sum seminorm),
    ``mid  = |f^(p/2)|^2_{H^alpha}`` (spectral),
    ``rhs  = ||f^(p/2)||_2^2 + int |f|^(p-2) f L f``.
    Fitted constants ``C1 = lhs/mid`` and ``C2 = mid/rhs`` are stored in
    ``metadata``; ``constant = C1 * C2``.  For signed ``f`` the split form is
    used: each part is checked separately and the cross term
    ``-int f_+^(p-1) L f_-`` (direct quadrature) must be ``>= -1e-10``.
    """
    spec = spec or table.spec
    if spec is None:
        raise ArgumentError("a kernel spec is required")
    if p != int(p) or int(p) % 2 or p < 2:
        raise ArgumentError("p must be an even integer >= 2")
    p = int(p)
    alpha = spec.alpha
    if f.min() < 0:
        plus = besov_regularity_check(f.like(np.maximum(f.values, 0)), table, spec, p)
        minus = besov_regularity_check(f.like(np.maximum(-f.values, 0)), table, spec, p)
        cross = besov_cross_term(f, spec, p)
        cross_spec = -float(np.sum(np.maximum(f.values, 0) ** (p - 1)
                                   * apply_levy(f.like(np.maximum(-f.values, 0)), table).values) * f.grid.cell)
        ok = plus.passed and minus.passed and cross >= -1e-10
        meta = {"split": True, "cross_term": cross, "cross_term_spectral": cross_spec,
                "plus": plus.as_record(), "minus": minus.as_record(), "p": p, **_grid_meta(f.grid)}
        return InequalityReport("besov_chain_split", plus.lhs + minus.lhs, plus.rhs + minus.rhs,
                                None, ok, 1e-10, None, meta)
    g = f.values ** (p // 2)
    gf = f.like(g)
    lhs = besov_seminorm(f, 2 * alpha / p, p) ** p if np.ptp(f.values) > 0 else 0.0
    mid = sobolev_seminorm(gf, alpha) ** 2
    energy = float(np.sum(f.values ** (p - 1) * apply_levy(f, table).values) * f.grid.cell)
    rhs = lp_norm(gf, 2) ** 2 + energy
    c1 = lhs / mid if mid > 0 else 0.0
    c2 = mid / rhs if rhs > 0 else 0.0
    constant = c1 * c2
    tol = 1e-12 * max(lhs, mid, rhs, 1e-300)
    ok = _finite(lhs, mid, rhs, energy) and _ordered(lhs, constant, rhs, tol)
    meta = {"split": False, "mid": mid, "energy": energy, "C1": c1, "C2": c2, "p": p,
            "s": 2 * alpha / p, **_grid_meta(f.grid)}
    return InequalityReport("besov_chain", lhs, rhs, constant, ok, tol, None, meta)


def smooth_cutoff(t):
    """``C^inf`` radial profile: 1 on ``t <= 1/2``, 0 on ``t >= 1``."""
    t = np.asarray(t, dtype=float)

    def psi(u):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a = psi(1.0 - t)
    b = psi(t - 0.5)
    return a / (a + b)


def commutator_scaling_check(table: SymbolTable, spec: Optional[KernelSpec], grid: TorusGrid, radii: Sequence[float],
                             A: Optional[ScalarField] = None, center=None):
    """Log-log slope of ``||[L, phi_R] A||_p / ||A 1_{B_R}||_p`` against ``R``.

    ``phi_R(x) = phi(|x - c| / R)`` with :func:`smooth_cutoff`; ``A`` defaults to
    the constant 1.  Radii must lie in ``[8h, Lbox/4]`` and span at least one
    octave.  The reported ``slope`` is the ``p = inf`` fit (``metadata`` also
    holds the ``p = 2`` fit); the prediction is ``-2 min(beta, delta)``.
    """
    spec = spec or table.spec
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii.size < 2 or radii[-1] / radii[0] < 2 * (1 - 1e-12):
        raise ArgumentError("radius range must span at least one octave")
    lo, hi = 8 * grid.h, grid.Lbox / 4
    if radii[0] < lo * (1 - 1e-12) or radii[-1] > hi * (1 + 1e-12):
        raise ArgumentError(f"radii must lie in [8h, Lbox/4] = [{lo:.4g}, {hi:.4g}]")
    if table.grid != grid:
        raise ArgumentError("table and grid differ")
    A = A if A is not None else ScalarField.constant(grid, 1.0)
    c = np.full(grid.dim, grid.Lbox / 2) if center is None else np.asarray(center, dtype=float)
    dist = grid.distance_to(c)
    LA = apply_levy(A, table).values
    norms = {2: [], np.inf: []}
    for R in radii:
        phi = smooth_cutoff(dist / R)
        comm = apply_levy(A.like(phi * A.values), table).values - phi * LA
        ball = np.where(dist <= R, A.values, 0.0)
        for p in norms:
            norms[p].append(lp_norm(A.like(comm), p) / lp_norm(A.like(ball), p))
    slope_inf, _ = loglog_slope(radii, norms[np.inf])
    slope_2, _ = loglog_slope(radii, norms[2])
    pred = -2 * min(spec.beta, spec.delta) if spec is not None else float("nan")
    lhs = float(max(norms[np.inf]))
    rhs = float(max(R ** pred for R in radii)) if spec is not None else float("nan")
    const = lhs / rhs if rhs and math.isfinite(rhs) else None
    ok = _finite(slope_inf, slope_2, lhs) and all(math.isfinite(x) for x in norms[2])
    meta = {
        "radii": radii.tolist(),
        "norm_inf": [float(x) for x in norms[np.inf]],
        "norm_2": [float(x) for x in norms[2]],
        "slope_2": slope_2,
        "predicted": pred,
        **_grid_meta(grid),
    }
    return InequalityReport("commutator_scaling", lhs, rhs, const, ok, 0.0, slope_inf, meta)


def power_plus_smooth_fit(r, y, bounds=(-2.0, 0.5)):
    """Exponent ``e`` of the model ``y = c r^e + b0 + b2 r^2``.

    Variable projection: for each trial ``e`` the linear coefficients are found
    by least squares (residuals weighted by ``r^-e``) and ``e`` minimizes the
    remaining misfit.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)

    def misfit(e):
        M = np.stack([r**e, np.ones_like(r), r**2], axis=1) / r[:, None] ** e
        coef, *_ = np.linalg.lstsq(M, y / r**e, rcond=None)
        return float(np.sum((M @ coef - y / r**e) ** 2))

    res = minimize_scalar(misfit, bounds=bounds, method="bounded", options={"xatol": 1e-8})
    return float(res.x)


def fractional_identity_check(grid: TorusGrid, omega, table: Optional[SymbolTable] = None, amplitude=1.0):
    """Radial power of ``(-Lap)^(1/2)`` applied to a windowed ``|x - c|^omega``.

    The window ``smooth_cutoff(|x - c| / (Lbox/2))`` is 1 up to ``Lbox/4`` and
    vanishes from ``Lbox/2`` on; the fit uses lattice points with
    ``8h <= |x - c| <= Lbox/8``, a factor-2 margin inside the plateau.  The
    window contributes a smooth radial remainder, so the output is fitted by
    ``c r^e + b0 + b2 r^2`` (:func:`power_plus_smooth_fit`); ``slope`` is ``e``,
    to be compared with ``omega - 1``.  The plain log-log slope of ``|output|``
    is kept in ``metadata['raw_slope']`` when defined.
    """
    if not 0 < omega < 1:
        raise ArgumentError("omega must lie in (0, 1)")
    if table is None:
        table = compute_symbol(KernelSpec(Case.D, 0.5, 0.5, 0.5, dim=grid.dim), grid)
    c = np.full(grid.dim, grid.Lbox / 2)
    d = grid.distance_to(c)
    w = smooth_cutoff(d / (0.5 * grid.Lbox))
    F = ScalarField(grid, amplitude * d**omega * w)
    G = apply_levy(F, table)
    sel = (d >= 8 * grid.h) & (d <= grid.Lbox / 8)
    if len(np.unique(np.round(d[sel] / grid.h, 9))) < 4:
        raise ResolutionError(f"fit region [8h, Lbox/8] holds too few radii at N = {grid.N}; need N >= 128")
    r, vals = d[sel], G.values[sel]
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite output inside the fit region")
    slope = power_plus_smooth_fit(r, vals)
    raw = loglog_slope(r, np.abs(vals))[0] if np.all(vals != 0) else None
    meta = {"omega": omega, "predicted": omega - 1, "raw_slope": raw, "points": int(sel.sum()),
            "output_max": float(np.max(np.abs(G.values))), **_grid_meta(grid)}
    ok = math.isfinite(slope)
    return InequalityReport("fractional_identity", slope, omega - 1, None, ok, 0.0, slope, meta)
