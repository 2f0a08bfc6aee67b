"""Radial Levy kernels, their two-sided bounds and the Levy-Khinchin symbol.

A kernel is stored as a short list of power-law pieces

    pi(y) = sum_j coeff_j |y|^(-n - 2 e_j)   on   lo_j <= |y| < hi_j,

which makes every family radial (hence symmetric) and gives closed forms for
the near-origin Taylor part and the far-field tail of each quadrature.

The symbol is the raw integral ``a(xi) = int (1 - cos(xi . y)) pi(y) dy``; no
dimensional normalization constant is divided out.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j0

from .exceptions import ArgumentError, DomainError, QuadratureError
from .field import TorusGrid

__all__ = [
    "Case",
    "Family",
    "KernelSpec",
    "SymbolTable",
    "BoundReport",
    "SymbolMargins",
    "eval_kernel",
    "radial_profile",
    "validate_bounds",
    "levy_integrability",
    "levy_symbol",
    "compute_symbol",
    "symbol_bound_margins",
    "sphere_area",
    "power_law_symbol_constant",
]


class Case(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class Family(str, Enum):
    POWER_LAW = "PowerLaw"
    PIECEWISE = "PiecewisePower"
    TRUNCATED = "TruncatedPower"


def sphere_area(n):
    """Surface measure of the unit sphere in ``R^n`` (2 for n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def power_law_symbol_constant(n, alpha):
    """``c`` with ``int (1 - cos xi.y) |y|^(-n-2 alpha) dy = c |xi|^(2 alpha)``."""
    return math.pi ** (n / 2) * abs(math.gamma(-alpha)) / (4**alpha * math.gamma(n / 2 + alpha))


_HALF = 0.5


def _case_problems(case, a, b, d):
    probs = []
    if case is Case.A:
        if not (0 < a <= b < _HALF):
            probs.append("case A needs 0 < alpha <= beta < 1/2")
        if not (0 < d < _HALF):
            probs.append("case A needs 0 < delta < 1/2")
    elif case is Case.B:
        if not (a == b == d and 0 < a < _HALF):
            probs.append("case B needs alpha = beta = delta < 1/2")
    elif case is Case.C:
        if not (a == b == _HALF):
            probs.append("case C needs alpha = beta = 1/2")
        if not (0 < d < _HALF):
            probs.append("case C needs 0 < delta < 1/2")
    elif case is Case.D:
        if not (a == b == d == _HALF):
            probs.append("case D needs alpha = beta = delta = 1/2")
    return probs


@dataclass(frozen=True)
class KernelSpec:
    """Levy kernel with case tag, exponents and bound constants.

    Parameters
    ----------
    case : Case
        Exponent regime A-D.
    alpha, beta, delta : float
        Lower-bound exponent near 0, upper-bound exponent near 0, tail exponent.
    c1, c2, c3 : float
        Declared bound constants.
    family : Family
        ``PowerLaw`` is ``scale |y|^(-n-2 alpha)``.  ``PiecewisePower`` averages
        the two inner bounds inside the unit ball and equals ``c3 |y|^(-n-2 delta)``
        outside.  ``TruncatedPower`` is a power law cut at ``cutoff`` with an
        optional vanishing annulus ``gap = (g0, g1)``.
    dim : int
        Spatial dimension, 1 or 2.
    scale : float
        Overall multiplier of the density.
    strict : bool
        When true, case-tag violations raise; otherwise they are only recorded
        in :attr:`problems` (used to build deliberately invalid kernels).
    """

    case: Case
    alpha: float
    beta: float
    delta: float
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    family: Family = Family.POWER_LAW
    dim: int = 2
    scale: float = 1.0
    cutoff: float = math.inf
    gap: Optional[tuple] = None
    strict: bool = True
    problems: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "family", Family(self.family))
        if self.dim not in (1, 2):
            raise ArgumentError(f"dim must be 1 or 2, got {self.dim}")
        for name in ("c1", "c2", "c3", "scale"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        for name in ("alpha", "beta", "delta"):
            val = getattr(self, name)
            if not 0 <= val <= _HALF:
                raise ArgumentError(f"{name} must lie in (0, 1/2], got {val}")
        if self.gap is not None:
            g0, g1 = self.gap
            if not 0 < g0 < g1:
                raise ArgumentError("gap must satisfy 0 < g0 < g1")
            object.__setattr__(self, "gap", (float(g0), float(g1)))
        if not self.cutoff > 0:
            raise ArgumentError("cutoff must be positive")
        probs = _case_problems(self.case, self.alpha, self.beta, self.delta)
        if self.family is Family.POWER_LAW and not (self.alpha == self.beta == self.delta):
            probs.append("PowerLaw needs alpha = beta = delta")
        if probs and self.strict:
            raise ArgumentError("; ".join(probs))
        object.__setattr__(self, "problems", tuple(probs))

    @property
    def pieces(self):
        """Power-law pieces ``(lo, hi, coeff, exponent)``."""
        s = self.scale
        if self.family is Family.POWER_LAW:
            return [(0.0, math.inf, s, self.alpha)]
        if self.family is Family.PIECEWISE:
            return [
                (0.0, 1.0, 0.5 * s * self.c1, self.alpha),
                (0.0, 1.0, 0.5 * s * self.c2, self.beta),
                (1.0, math.inf, s * self.c3, self.delta),
            ]
        out = []
        if self.gap is None:
            out.append((0.0, self.cutoff, s, self.alpha))
        else:
            g0, g1 = self.gap
            out.append((0.0, min(g0, self.cutoff), s, self.alpha))
            if g1 < self.cutoff:
                out.append((g1, self.cutoff, s, self.alpha))
        return out

    @property
    def breakpoints(self):
        pts = set()
        for lo, hi, _, _ in self.pieces:
            for r in (lo, hi):
                if 0 < r < math.inf:
                    pts.add(r)
        return sorted(pts)

    def scaled(self, factor):
        """Kernel ``factor * pi`` with the bound constants scaled alike."""
        # piecewise coefficients already carry c1..c3, so scale stays put there
        scale = self.scale if self.family is Family.PIECEWISE else self.scale * factor
        return replace(
            self,
            scale=scale,
            c1=self.c1 * factor,
            c2=self.c2 * factor,
            c3=self.c3 * factor,
        )

    def to_items(self):
        """Flat string key-value representation."""
        d = asdict(self)
        d.pop("problems")
        d["case"] = self.case.value
        d["family"] = self.family.value
        d["gap"] = "none" if self.gap is None else f"{self.gap[0]!r},{self.gap[1]!r}"
        return {k: (v if isinstance(v, str) else repr(v)) for k, v in d.items()}

    @classmethod
    def from_items(cls, items):
        """Inverse of :meth:`to_items`; unknown keys raise ``ArgumentError``."""
        known = {"case", "alpha", "beta", "delta", "c1", "c2", "c3", "family", "dim",
                 "scale", "cutoff", "gap", "strict"}
        extra = set(items) - known
        if extra:
            raise ArgumentError(f"unknown kernel keys: {sorted(extra)}")
        kw = {}
        for k, v in items.items():
            v = str(v).strip()
            if k in ("case", "family"):
                kw[k] = v
            elif k == "dim":
                kw[k] = int(v)
            elif k == "strict":
                kw[k] = v.lower() in ("1", "true", "yes")
            elif k == "gap":
                kw[k] = None if v.lower() in ("none", "") else tuple(float(x) for x in v.split(","))
            else:
                kw[k] = float(v)
        return cls(**kw)


def radial_profile(spec: KernelSpec, r):
    """Kernel density as a function of ``|y|`` (vectorized, ``r > 0``)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    n = spec.dim
    for lo, hi, c, e in spec.pieces:
        mask = (r >= lo) & (r < hi)
        out = out + np.where(mask, c * np.power(r, -n - 2 * e, where=r > 0, out=np.ones_like(r)), 0.0)
    return out


def eval_kernel(spec: KernelSpec, y):
    """Evaluate ``pi(y)``.

    ``y`` is a scalar (n = 1), a point of shape ``(n,)`` or a stack ``(m, n)``.
    """
    y = np.asarray(y, dtype=float)
    if spec.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        r = np.abs(y)
    else:
        if y.shape[-1] != spec.dim:
            raise ArgumentError(f"point has dimension {y.shape[-1]}, kernel has {spec.dim}")
        r = np.sqrt(np.sum(y**2, axis=-1))
    if np.any(r == 0):
        raise DomainError("kernel is singular at y = 0")
    val = radial_profile(spec, r)
    return float(val) if np.ndim(val) == 0 else val


@dataclass
class BoundReport:
    """Per-radius outcome of :func:`validate_bounds`."""

    radii: np.ndarray
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    lower_ok: np.ndarray
    upper_ok: np.ndarray
    c4: float
    combined: np.ndarray

    @property
    def passed(self):
        return bool(np.all(self.lower_ok) and np.all(self.upper_ok))

    @property
    def failing_radii(self):
        return self.radii[~(self.lower_ok & self.upper_ok)]


def validate_bounds(spec: KernelSpec, radii, rtol=1e-12):
    """Check the inner two-sided and outer one-sided bounds at sample radii.

    Inside the unit ball ``c1 r^(-n-2 alpha) <= pi <= c2 r^(-n-2 beta)``; outside
    ``0 <= pi <= c3 r^(-n-2 delta)``.  ``c4`` is the smallest constant with
    ``pi <= c4 (r^(-n-2 beta) + r^(-n-2 delta))`` on the samples.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if radii.size == 0:
        raise ArgumentError("radius list is empty")
    if np.any(radii <= 0):
        raise ArgumentError("radii must be positive")
    n = spec.dim
    vals = radial_profile(spec, radii)
    inside = radii <= 1
    lower = np.where(inside, spec.c1 * radii ** (-n - 2 * spec.alpha), 0.0)
    upper = np.where(inside, spec.c2 * radii ** (-n - 2 * spec.beta), spec.c3 * radii ** (-n - 2 * spec.delta))
    slack = rtol * np.maximum(np.abs(lower), np.abs(upper))
    lower_ok = vals >= lower - slack
    upper_ok = vals <= upper + slack
    combined = vals / (radii ** (-n - 2 * spec.beta) + radii ** (-n - 2 * spec.delta))
    return BoundReport(radii, vals, lower, upper, lower_ok, upper_ok, float(combined.max()), combined)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _panels(edges, max_len):
    """Gauss-Legendre nodes/weights on consecutive intervals, splitting long ones."""
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((b - a) / max_len))) if max_len else 1
        sub = np.linspace(a, b, m + 1)
        lo, hi = sub[:-1, None], sub[1:, None]
        half = 0.5 * (hi - lo)
        xs.append((0.5 * (hi + lo) + half * _GL_X).ravel())
        ws.append((half * _GL_W).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _radial_edges(spec, r0, rmax, n_panels):
    edges = np.geomspace(r0, rmax, n_panels + 1)
    extra = [b for b in spec.breakpoints + [1.0] if r0 < b < rmax]
    return np.unique(np.concatenate([edges, extra]))


def _piece_moment(lo, hi, c, e, a, b, power):
    """``int_{max(a,lo)}^{min(b,hi)} c r^(power - 1 - 2e) dr`` in closed form."""
    a, b = max(a, lo), min(b, hi)
    if not b > a:
        return 0.0
    q = power - 2 * e
    if q == 0:
        if math.isinf(b):
            return math.inf
        return c * math.log(b / a)
    if math.isinf(b):
        if q > 0:
            return math.inf
        return c * (-(a**q)) / q
    if a == 0:
        if q < 0:
            return math.inf
        return c * b**q / q
    return c * (b**q - a**q) / q


def _tail_mass(spec, R):
    """``int_{r > R} pi(r) r^(n-1) dr`` (radial part, without the sphere area)."""
    return sum(_piece_moment(lo, hi, c, e, R, math.inf, 0) for lo, hi, c, e in spec.pieces)


def levy_integrability(spec: KernelSpec, *, radial_nodes=2048, rmax=64.0, tol=1e-8):
    """``int min(1, |y|^2) pi(y) dy`` by graded radial quadrature.

    Gauss-Legendre panels on a geometric mesh cover ``[r0, rmax]``; the core
    ``[0, r0]`` and the tail ``|y| > rmax`` are integrated in closed form from
    the power-law pieces.  A divergent or non-finite tail raises
    :class:`QuadratureError`.
    """
    n = spec.dim
    r0 = 1e-6
    core = sum(_piece_moment(lo, hi, c, e, 0.0, r0, 2) for lo, hi, c, e in spec.pieces)
    tail = _tail_mass(spec, rmax)
    if not (math.isfinite(core) and math.isfinite(tail)):
        raise QuadratureError(
            f"integral diverges: core={core}, tail beyond R={rmax} is {tail} "
            f"(tail exponents {[p[3] for p in spec.pieces]})"
        )
    x, w = _panels(_radial_edges(spec, r0, rmax, max(8, radial_nodes // 8)), None)
    f = radial_profile(spec, x) * x ** (n - 1) * np.minimum(1.0, x**2)
    body = float(np.sum(w * f))
    # same rule at half the panel count estimates the discretization error
    x2, w2 = _panels(_radial_edges(spec, r0, rmax, max(4, radial_nodes // 16)), None)
    body2 = float(np.sum(w2 * radial_profile(spec, x2) * x2 ** (n - 1) * np.minimum(1.0, x2**2)))
    total = body + core + tail
    if abs(body - body2) > tol * max(total, 1e-300):
        raise QuadratureError(f"radial quadrature unresolved: |I_N - I_N/2| = {abs(body - body2):.3e}")
    return sphere_area(n) * total


@dataclass
class SymbolTable:
    """Symbol ``a(xi)`` on the frequency lattice of ``grid``.

    ``meta`` records the quadrature: radial panel count, truncation radius,
    Taylor core radius, the largest relative oscillatory-tail bound and whether
    the values were computed pointwise or interpolated from a radial table.
    """

    grid: TorusGrid
    values: np.ndarray
    spec: Optional[KernelSpec] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ArgumentError("symbol values do not match the grid")
        self.values = v

    def scaled(self, factor):
        spec = None if self.spec is None else self.spec.scaled(factor)
        return SymbolTable(self.grid, factor * self.values, spec, dict(self.meta))

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.shape), None, {"method": "zero"})


def _symbol_quadrature(spec, k, radial_nodes, rmax):
    """Raw symbol at radial frequencies ``k`` plus the oscillatory-tail bound."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    n = spec.dim
    kmax = float(k.max()) if k.size else 0.0
    out = np.zeros_like(k)
    bound = np.zeros_like(k)
    if kmax == 0:
        return out, bound
    r0 = min(0.05 / kmax, 1e-2)
    edges = _radial_edges(spec, r0, rmax, max(8, radial_nodes // 8))
    x, w = _panels(edges, 2.0 / kmax)
    wf = w * radial_profile(spec, x) * x ** (n - 1)
    # Taylor core: 1 - J(kr) = (kr)^2/(2n) - (kr)^4/(8n(n+2)) + O((kr)^6)
    m2 = sum(_piece_moment(lo, hi, c, e, 0.0, r0, 2) for lo, hi, c, e in spec.pieces)
    m4 = sum(_piece_moment(lo, hi, c, e, 0.0, r0, 4) for lo, hi, c, e in spec.pieces)
    tail = _tail_mass(spec, rmax)
    if not math.isfinite(tail) or not math.isfinite(m2):
        raise QuadratureError(f"symbol integral diverges (tail beyond {rmax}: {tail})")
    f_edge = float(radial_profile(spec, np.array([rmax * (1 - 1e-12)]))[0]) * rmax ** (n - 1)
    for i, kk in enumerate(k):
        if kk == 0:
            continue
        kr = kk * x
        osc = 1.0 - (np.cos(kr) if n == 1 else j0(kr))
        core = kk**2 * m2 / (2 * n) - kk**4 * m4 / (8 * n * (n + 2))
        out[i] = core + float(np.dot(wf, osc)) + tail
        env = 1.0 if n == 1 else min(1.0, math.sqrt(2.0 / (math.pi * kk * rmax)))
        bound[i] = 2.0 * f_edge * env / kk
    s = sphere_area(n)
    return s * out, s * bound


def levy_symbol(spec: KernelSpec, k, *, radial_nodes=2048, rmax=64.0):
    """Raw symbol ``a`` at radial frequencies ``|xi| = k`` (array in, array out)."""
    val, _ = _symbol_quadrature(spec, k, radial_nodes, rmax)
    return val


def compute_symbol(spec: KernelSpec, grid: TorusGrid, *, radial_nodes=2048, rmax=64.0, tol=1e-2,
                   max_exact=4096, table_size=384):
    """Tabulate the symbol on the lattice of ``grid``.

    The radial integral ``s_n int pi(r) r^(n-1) (1 - J(kr)) dr`` (``J = cos`` for
    n = 1, ``J0`` for n = 2) is evaluated on a geometric Gauss-Legendre mesh
    whose panels are additionally capped at length ``2/k_max``.  The core
    ``r < 0.05/k_max`` uses the two-term Taylor expansion and the tail beyond
    ``rmax`` contributes its closed-form mass; the dropped oscillatory tail is
    bounded by ``2 s_n pi(rmax) rmax^(n-1) / k`` (times the Bessel envelope in
    2-D) and must stay below ``tol`` relative to ``a``.

    When the lattice has at most ``max_exact`` distinct radii each one is
    integrated directly; otherwise a log-spaced radial table is interpolated by
    a cubic spline in log-log coordinates.
    """
    if spec.dim != grid.dim:
        raise ArgumentError("kernel and grid dimensions differ")
    m2 = grid.mode_norm2
    uniq, inv = np.unique(m2, return_inverse=True)
    kq = np.sqrt(uniq.astype(float)) * (2 * math.pi / grid.Lbox)
    pos = kq > 0
    if pos.sum() <= max_exact:
        vals, bnd = _symbol_quadrature(spec, kq, radial_nodes, rmax)
        method = "exact"
    else:
        knots = np.geomspace(kq[pos].min(), kq.max(), table_size)
        tv, tb = _symbol_quadrature(spec, knots, radial_nodes, rmax)
        spline = CubicSpline(np.log(knots), np.log(tv))
        vals = np.zeros_like(kq)
        vals[pos] = np.exp(spline(np.log(kq[pos])))
        bnd = np.zeros_like(kq)
        bnd[pos] = np.interp(np.log(kq[pos]), np.log(knots), tb)
        method = "interpolated"
    vals[~pos] = 0.0
    rel = np.max(bnd[pos] / vals[pos]) if pos.any() else 0.0
    if rel > tol:
        raise QuadratureError(f"far-field tail bound {rel:.3e} exceeds tolerance {tol:.1e}; increase rmax")
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise QuadratureError("symbol quadrature produced negative or non-finite values")
    values = vals[inv].reshape(grid.shape)
    meta = {
        "radial_nodes": radial_nodes,
        "rmax": rmax,
        "core_radius": min(0.05 / kq.max(), 1e-2) if kq.max() > 0 else 0.0,
        "tail_bound_rel": float(rel),
        "method": method,
        "distinct_radii": int(uniq.size),
    }
    return SymbolTable(grid, values, spec, meta)


@dataclass
class SymbolMargins:
    """Fitted constants of the two pointwise symbol bounds."""

    c_up: float
    c_low: float
    n_points: int
    kmin: float
    kmax: float


def symbol_bound_margins(table: SymbolTable, spec: Optional[KernelSpec] = None, kmin=0.0, kmax=math.inf):
    """``C_up = max a/(|xi|^(2 beta) + |xi|^(2 delta))`` and ``C_low = max (|xi|^(2 alpha) - a)^+``.

    Only nonzero lattice frequencies with ``kmin <= |xi| <= kmax`` enter.
    """
    spec = spec or table.spec
    if spec is None:
        raise ArgumentError("a kernel spec is required")
    k = table.grid.kmag
    sel = (k > 0) & (k >= kmin) & (k <= kmax)
    if not sel.any():
        raise ArgumentError("no lattice frequencies in the requested band")
    kk, a = k[sel], table.values[sel]
    up = a / (kk ** (2 * spec.beta) + kk ** (2 * spec.delta))
    low = np.maximum(kk ** (2 * spec.alpha) - a, 0.0)
    return SymbolMargins(float(up.max()), float(low.max()), int(sel.sum()), float(kk.min()), float(kk.max()))
