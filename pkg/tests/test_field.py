import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levydrift.exceptions import ArgumentError, NumericalError, PreconditionError
from levydrift.field import (ScalarField, TorusGrid, VelocityField, besov_seminorm, besov_sobolev_constant,
                             bmo_norm_estimate, holder_seminorm, lp_norm, make_divfree_velocity, random_field,
                             random_stream, sobolev_seminorm, spectral_divergence, truncate_clamp)

G32 = TorusGrid(2, 32)
seeds = st.integers(0, 2**32 - 1)


def rfield(seed, grid=G32, kmax=4):
    return random_field(grid, np.random.default_rng(seed), kmax)


# -- grid and field basics -------------------------------------------------

def test_grid_geometry():
    g = TorusGrid(2, 16, 4.0)
    assert g.h == 0.25 and g.volume == 16.0 and g.shape == (16, 16)
    assert g.kvec.shape == (2, 16, 16)


def test_nonfinite_values_rejected():
    with pytest.raises(NumericalError):
        ScalarField(G32, np.full(G32.shape, np.nan))


def test_values_read_only():
    f = ScalarField.constant(G32, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_spectral_roundtrip(seed):
    f = rfield(seed)
    back = np.fft.ifftn(f.spectrum()).real
    assert np.max(np.abs(back - f.values)) <= 1e-12 * np.max(np.abs(f.values))


# -- lp_norm ----------------------------------------------------------------

@pytest.mark.parametrize("p", [1, 2, 3.5, np.inf])
def test_lp_constant(p):
    g = TorusGrid(2, 16, 3.0)
    c = 1.7
    expect = c if p == np.inf else c * g.volume ** (1 / p)
    assert lp_norm(ScalarField.constant(g, c), p) == pytest.approx(expect, rel=1e-14)


def test_lp_bump_holder():
    f = ScalarField.from_function(G32, lambda x, y: np.exp(-((x - 3) ** 2 + (y - 3) ** 2)))
    assert lp_norm(f, 1) <= lp_norm(f, np.inf) * G32.volume


@pytest.mark.parametrize("p", [1, 2, 4])
def test_lp_refined_grid_oracle(p):
    rng = lambda: np.random.default_rng(5)  # noqa: E731
    coarse = random_field(TorusGrid(2, 64), rng(), 4)
    fine = random_field(TorusGrid(2, 128), rng(), 4)
    # direct Riemann sum on the doubled grid as oracle
    oracle = (np.sum(np.abs(fine.values) ** p) * fine.grid.cell) ** (1 / p)
    assert lp_norm(coarse, p) == pytest.approx(oracle, rel=5e-3)


@settings(max_examples=25, deadline=None)
@given(seeds, seeds, st.sampled_from([1.0, 2.0, 3.0, np.inf]))
def test_lp_triangle_and_monotone(s1, s2, p):
    f, g = rfield(s1), rfield(s2)
    assert lp_norm(f + g, p) <= (lp_norm(f, p) + lp_norm(g, p)) * (1 + 1e-12)
    bigger = f.like(np.abs(f.values) + np.abs(g.values))
    assert lp_norm(f, p) <= lp_norm(bigger, p) * (1 + 1e-12)


# -- holder -------------------------------------------------------------------

def test_holder_constant_zero():
    assert holder_seminorm(ScalarField.constant(G32, 2.0), 0.5) == 0.0


def test_holder_cosine_slope_limit():
    L = 5.0
    g = TorusGrid(1, 64, L)
    f = ScalarField.from_function(g, lambda x: np.cos(2 * np.pi * x / L))
    gam = 0.999
    # brute-force oracle over all pairs with the periodic distance
    x = g.axis
    d = np.abs(x[:, None] - x[None, :])
    d = np.minimum(d, L - d)
    diff = np.abs(f.values[:, None] - f.values[None, :])
    off = d > 0
    oracle = np.max(diff[off] / d[off] ** gam)
    assert holder_seminorm(f, gam) == pytest.approx(oracle, rel=1e-12)
    assert oracle == pytest.approx(2 * np.pi / L, rel=0.01)


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(0.1, 0.9))
def test_holder_homogeneous(seed, gam):
    f = rfield(seed, TorusGrid(2, 16))
    assert holder_seminorm(f * 2.0, gam) == pytest.approx(2 * holder_seminorm(f, gam), rel=1e-12)


def test_holder_gamma_range():
    with pytest.raises(ArgumentError):
        holder_seminorm(rfield(0), 1.0)


# -- besov / sobolev ------------------------------------------------------------

def test_besov_constant_zero():
    assert besov_seminorm(ScalarField.constant(G32, 3.0), 0.5, 2) == 0.0


@pytest.mark.parametrize("k", [(1, 0), (2, 3), (5, 1)])
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_besov_comparable_to_sobolev_single_mode(k, s):
    f = ScalarField.from_function(G32, lambda x, y: np.cos(k[0] * x + k[1] * y))
    ratio = besov_seminorm(f, s, 2) / (besov_sobolev_constant(2, s) * sobolev_seminorm(f, s))
    assert 0.5 <= ratio <= 2


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_besov_homogeneous(seed, c):
    f = rfield(seed, TorusGrid(2, 16))
    assert besov_seminorm(f * c, 0.4, 3) == pytest.approx(abs(c) * besov_seminorm(f, 0.4, 3), rel=1e-10)


def test_besov_sobolev_ratio_stable_across_fields():
    rng = np.random.default_rng(11)
    ratios = [besov_seminorm(f, 0.5, 2) / sobolev_seminorm(f, 0.5)
              for f in (random_field(G32, rng, 6) for _ in range(8))]
    assert max(ratios) / min(ratios) <= 2


def test_sobolev_constant_zero():
    assert sobolev_seminorm(ScalarField.constant(G32, 1.0), 0.5) == 0.0


@pytest.mark.parametrize("s", [0.3, 1.0, 1.5])
def test_sobolev_single_mode(s):
    k = (3, 4)
    f = ScalarField.from_function(G32, lambda x, y: np.cos(k[0] * x + k[1] * y))
    assert sobolev_seminorm(f, s) == pytest.approx(5.0**s * lp_norm(f, 2), rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_sobolev_parseval(seed):
    f = rfield(seed)
    f = f - f.mean()
    assert sobolev_seminorm(f, 0.0) == pytest.approx(lp_norm(f, 2), rel=1e-10)


# -- bmo and clamp ----------------------------------------------------------------

def test_bmo_constant():
    assert bmo_norm_estimate(ScalarField.constant(G32, -2.5)) == pytest.approx(2.5, rel=1e-12)


def test_bmo_single_mode_below_sup():
    f = ScalarField.from_function(G32, lambda x, y: np.sin(2 * x))
    assert bmo_norm_estimate(f) <= lp_norm(f, np.inf)


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(0.05, 1.0))
def test_bmo_of_clamp(seed, k):
    f = rfield(seed)
    assert bmo_norm_estimate(truncate_clamp(f, k)) <= bmo_norm_estimate(f) + k


def test_bmo_needs_large_box():
    with pytest.raises(ArgumentError):
        bmo_norm_estimate(ScalarField.constant(TorusGrid(2, 16, 1.5), 1.0))


def test_clamp_inactive():
    f = rfield(3)
    k = lp_norm(f, np.inf)
    np.testing.assert_array_equal(truncate_clamp(f, k).values, f.values)


def test_clamp_saturated():
    f = ScalarField.constant(G32, 3 * 0.4)
    assert np.all(truncate_clamp(f, 0.4).values == 0.4)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(0.01, 1.0), st.floats(1.0, 3.0))
def test_clamp_composition(seed, k, factor):
    f = rfield(seed)
    once = truncate_clamp(f, k)
    np.testing.assert_array_equal(truncate_clamp(once, k * factor).values, once.values)


# -- velocities ------------------------------------------------------------------

def test_constant_stream_zero_velocity():
    v = make_divfree_velocity(ScalarField.constant(G32, 4.0))
    assert v.max_speed() == 0.0


def test_sine_stream():
    v = make_divfree_velocity(ScalarField.from_function(G32, lambda x, y: np.sin(x)))
    x = G32.coords[0]
    np.testing.assert_allclose(v.components[0], 0.0, atol=1e-13)
    np.testing.assert_allclose(v.components[1], np.cos(x), atol=1e-13)
    assert np.max(np.abs(v.divergence())) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(0.1, 5.0))
def test_random_stream_divergence_free(seed, vmax):
    v = make_divfree_velocity(random_stream(G32, np.random.default_rng(seed), 4, vmax))
    assert v.max_speed() == pytest.approx(vmax, rel=1e-12)
    assert np.max(np.abs(spectral_divergence(G32, v.components))) <= 1e-10 * v.max_speed()
    assert v.bmo_bound >= 0


def test_divergent_velocity_rejected():
    x, y = G32.coords
    with pytest.raises(PreconditionError):
        VelocityField(G32, np.stack([np.sin(x), np.zeros_like(y)]))


def test_recorded_bmo_below_measurement_rejected():
    phi = random_stream(G32, np.random.default_rng(0), 4, 1.0)
    with pytest.raises(PreconditionError):
        make_divfree_velocity(phi, bmo_bound=1e-6)


def test_random_field_resolution_independent():
    a = random_field(TorusGrid(2, 16), np.random.default_rng(2), 3)
    b = random_field(TorusGrid(2, 32), np.random.default_rng(2), 3)
    np.testing.assert_allclose(a.values, b.values[::2, ::2], atol=1e-13)
