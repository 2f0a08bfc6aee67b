import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.special import gamma as G

from levydrift.exceptions import ArgumentError, DomainError, QuadratureError
from levydrift.field import TorusGrid
from levydrift.kernel import (Case, Family, KernelSpec, compute_symbol, eval_kernel, levy_integrability,
                              levy_symbol, power_law_symbol_constant, symbol_bound_margins, validate_bounds)


def power(alpha, dim=2, case=None):
    case = case or (Case.D if alpha == 0.5 else Case.B)
    return KernelSpec(case, alpha, alpha, alpha, dim=dim)


# -- construction -----------------------------------------------------------

@pytest.mark.parametrize("case,abd", [
    ("A", (0.2, 0.3, 0.1)),
    ("B", (0.3, 0.3, 0.3)),
    ("C", (0.5, 0.5, 0.25)),
    ("D", (0.5, 0.5, 0.5)),
])
def test_valid_case_tags(case, abd):
    KernelSpec(case, *abd, family=Family.PIECEWISE)


@pytest.mark.parametrize("case,abd", [
    ("A", (0.3, 0.2, 0.1)),   # alpha > beta
    ("B", (0.3, 0.3, 0.2)),
    ("C", (0.5, 0.5, 0.5)),
    ("D", (0.5, 0.5, 0.4)),
])
def test_case_tag_violations_raise(case, abd):
    with pytest.raises(ArgumentError):
        KernelSpec(case, *abd, family=Family.PIECEWISE)


def test_non_strict_records_problems():
    spec = KernelSpec("D", 0.5, 0.5, 0.4, family=Family.PIECEWISE, strict=False)
    assert spec.problems


def test_power_law_needs_equal_exponents():
    with pytest.raises(ArgumentError):
        KernelSpec("A", 0.2, 0.3, 0.1)


@pytest.mark.parametrize("name", ["c1", "c2", "c3"])
def test_constants_positive(name):
    with pytest.raises(ArgumentError):
        KernelSpec("D", 0.5, 0.5, 0.5, **{name: 0.0})


def test_items_roundtrip():
    spec = KernelSpec("C", 0.5, 0.5, 0.25, c1=2.0, family=Family.PIECEWISE)
    assert KernelSpec.from_items(spec.to_items()) == spec
    with pytest.raises(ArgumentError):
        KernelSpec.from_items({**spec.to_items(), "bogus": "1"})


# -- eval_kernel ------------------------------------------------------------

def test_eval_unit_radius():
    assert eval_kernel(power(0.5), [1.0, 0.0]) == 1.0


def test_eval_radius_two():
    assert eval_kernel(power(0.5), [0.0, 2.0]) == pytest.approx(0.125, rel=1e-15)


def test_eval_origin_raises():
    with pytest.raises(DomainError):
        eval_kernel(power(0.5), [0.0, 0.0])


def test_piecewise_case_a_bracketed():
    spec = KernelSpec("A", 0.2, 0.3, 0.1, c1=1.5, c2=2.5, c3=0.7, family=Family.PIECEWISE)
    r = 0.5
    v = eval_kernel(spec, [r, 0.0])
    assert spec.c1 * r ** (-2 - 0.4) <= v <= spec.c2 * r ** (-2 - 0.6)
    r = 2.0
    assert eval_kernel(spec, [0.0, r]) <= spec.c3 * r ** (-2 - 0.2)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_kernel_symmetry(x, y):
    assume(math.hypot(x, y) > 1e-6)
    spec = KernelSpec("A", 0.2, 0.3, 0.1, family=Family.PIECEWISE)
    assert eval_kernel(spec, [x, y]) == eval_kernel(spec, [-x, -y])


# -- validate_bounds --------------------------------------------------------

RADII = np.geomspace(0.05, 20, 61)


def test_power_law_bounds_tight_inside():
    spec = power(0.25)
    rep = validate_bounds(spec, RADII)
    assert rep.passed
    inside = RADII <= 1
    np.testing.assert_array_equal(rep.values[inside], rep.lower[inside])


def test_gap_violates_lower_bound():
    spec = KernelSpec("B", 0.25, 0.25, 0.25, family=Family.TRUNCATED, gap=(0.4, 0.6))
    rep = validate_bounds(spec, RADII)
    assert not rep.passed
    bad = rep.failing_radii
    assert bad.size > 0 and bad.min() >= 0.4 and bad.max() < 0.6


def test_case_c_c4_is_ratio_maximum():
    spec = KernelSpec("C", 0.5, 0.5, 0.25, c1=1.0, c2=3.0, c3=2.0, family=Family.PIECEWISE)
    rep = validate_bounds(spec, RADII)
    assert rep.passed
    vals = np.array([eval_kernel(spec, [r, 0.0]) for r in RADII])
    oracle = np.max(vals / (RADII ** (-3.0) + RADII ** (-2.5)))
    assert rep.c4 == pytest.approx(oracle, rel=1e-12)


def test_empty_radii_raises():
    with pytest.raises(ArgumentError):
        validate_bounds(power(0.5), [])


# -- levy_integrability -----------------------------------------------------

def test_integrability_1d_quarter():
    assert levy_integrability(power(0.25, dim=1)) == pytest.approx(16 / 3, rel=1e-8)


def test_integrability_2d_half():
    assert levy_integrability(power(0.5)) == pytest.approx(4 * math.pi, rel=1e-8)


def test_integrability_log_tail_diverges():
    spec = KernelSpec("A", 0.2, 0.3, 0.0, family=Family.PIECEWISE, strict=False)
    with pytest.raises(QuadratureError):
        levy_integrability(spec)


# -- symbol -----------------------------------------------------------------

def test_symbol_zero_at_origin():
    t = compute_symbol(KernelSpec("A", 0.2, 0.3, 0.1, family=Family.PIECEWISE), TorusGrid(2, 16))
    assert t.values[0, 0] == 0.0


def test_symbol_1d_half_is_pi_abs_xi():
    k = np.arange(1.0, 17.0)
    a = levy_symbol(power(0.5, dim=1), k)
    np.testing.assert_allclose(a, math.pi * k, rtol=1e-3)


@pytest.mark.parametrize("alpha", [0.25, 0.5])
def test_symbol_closed_form_constant(alpha):
    # direct Gamma-function formula, independent of the library helper
    oracle = math.pi * abs(G(-alpha)) / (4**alpha * G(1 + alpha))
    k = np.array([1.0, 3.0, 9.0])
    np.testing.assert_allclose(levy_symbol(power(alpha), k) / k ** (2 * alpha), oracle, rtol=1e-4)
    assert power_law_symbol_constant(2, alpha) == pytest.approx(oracle, rel=1e-12)


def test_symbol_half_2d_is_two_pi():
    assert power_law_symbol_constant(2, 0.5) == pytest.approx(2 * math.pi, rel=1e-14)


def test_symbol_doubling_ratio():
    spec = power(0.5)
    a1, a2 = levy_symbol(spec, np.array([3.0, 6.0]))
    assert a2 / a1 == pytest.approx(2.0, rel=1e-4)


@pytest.mark.parametrize("alpha", [0.25, 0.5])
def test_homogeneity_against_refined_quadrature(alpha):
    grid = TorusGrid(2, 64)
    spec = power(alpha)
    t = compute_symbol(spec, grid)
    k = grid.kmag
    sel = (k >= 1) & (k <= 16)
    ratio = t.values[sel] / k[sel] ** (2 * alpha)
    assert ratio.max() / ratio.min() - 1 < 0.01
    uk = np.unique(k[sel])[::7]
    ref = levy_symbol(spec, uk, radial_nodes=8192, rmax=256.0)
    got = levy_symbol(spec, uk)
    np.testing.assert_allclose(got, ref, rtol=0.01)


def test_symbol_table_invariants():
    grid = TorusGrid(2, 32)
    t = compute_symbol(KernelSpec("C", 0.5, 0.5, 0.25, family=Family.PIECEWISE), grid)
    v = t.values
    assert np.all(v >= 0)
    assert np.isrealobj(v)
    rev = (-np.arange(32)) % 32
    np.testing.assert_array_equal(v, v[np.ix_(rev, rev)])


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 10.0))
def test_symbol_linear_in_kernel(c):
    grid = TorusGrid(2, 16)
    spec = KernelSpec("A", 0.2, 0.3, 0.1, family=Family.PIECEWISE)
    a = compute_symbol(spec, grid).values
    b = compute_symbol(spec.scaled(c), grid).values
    np.testing.assert_allclose(b, c * a, rtol=1e-12, atol=1e-300)


# -- margins ----------------------------------------------------------------

def test_margins_finite_case_b():
    t = compute_symbol(power(0.25), TorusGrid(2, 64))
    m = symbol_bound_margins(t, kmin=1, kmax=16)
    assert math.isfinite(m.c_up) and math.isfinite(m.c_low)
    assert m.kmin >= 1 and m.kmax <= 16


def test_margins_exclude_origin():
    t = compute_symbol(power(0.5), TorusGrid(2, 16))
    m = symbol_bound_margins(t)
    assert m.kmin > 0 and math.isfinite(m.c_up)


def test_margins_double_with_kernel():
    grid = TorusGrid(2, 32)
    spec = power(0.5)
    m1 = symbol_bound_margins(compute_symbol(spec, grid), spec, 1, 16)
    m2 = symbol_bound_margins(compute_symbol(spec.scaled(2.0), grid), spec, 1, 16)
    assert m2.c_up == 2 * m1.c_up


@pytest.mark.parametrize("family", list(Family))
def test_scaled_kernel_is_multiple(family):
    kw = {"gap": (0.4, 0.6)} if family is Family.TRUNCATED else {}
    spec = KernelSpec("B", 0.25, 0.25, 0.25, family=family, **kw)
    y = np.array([[0.3, 0.1], [2.0, 1.0]])
    np.testing.assert_allclose(eval_kernel(spec.scaled(3.0), y), 3 * eval_kernel(spec, y), rtol=1e-15)
    assert validate_bounds(spec.scaled(3.0), RADII).lower_ok[RADII < 0.4].all()
