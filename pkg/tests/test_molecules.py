import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levydrift.exceptions import ArgumentError, PreconditionError, ResolutionError
from levydrift.field import ScalarField, TorusGrid, VelocityField, lp_norm, make_divfree_velocity, random_field, random_stream
from levydrift.kernel import KernelSpec, compute_symbol
from levydrift.molecules import (MoleculeParams, build_molecule, check_molecule, choose_K, envelope_bounds,
                                 evolve_center, holder_by_duality, iterate_molecule, track_envelopes,
                                 transfer_check)
from levydrift.solver import SolverConfig, solve_backward_dual

SPEC_D = KernelSpec("D", 0.5, 0.5, 0.5)
G64 = TorusGrid(2, 64)
TAB64 = compute_symbol(SPEC_D, G64)
G128 = TorusGrid(2, 128)
TAB128 = compute_symbol(SPEC_D, G128)


def params(r=0.3, x0=(3.0, 3.0), gamma=0.25, omega=0.5, **kw):
    return MoleculeParams.from_gamma(gamma, omega, r, x0, **kw)


# -- parameters ------------------------------------------------------------------

def test_gamma_derived_exactly():
    p = MoleculeParams(sigma=0.8, omega=0.7, r=0.2, x0=(1, 1))
    assert p.gamma == 2 * (1 / 0.8 - 1)


def test_inconsistent_gamma_rejected():
    with pytest.raises(ArgumentError):
        MoleculeParams(sigma=0.8, omega=0.7, r=0.2, x0=(1, 1), gamma=0.3)


@pytest.mark.parametrize("gamma,omega", [(0.5, 0.4), (0.25, 1.0)])
def test_ordering_enforced(gamma, omega):
    with pytest.raises(ArgumentError):
        params(gamma=gamma, omega=omega)


def test_case_c_needs_omega_below_two_delta():
    with pytest.raises(ArgumentError):
        params(omega=0.6, case="C", delta=0.25)
    params(omega=0.45, case="C", delta=0.25)


def test_items_roundtrip():
    p = params(r=0.2, x0=(1.5, 2.5))
    assert MoleculeParams.from_items(p.to_items()) == p


# -- choose_K --------------------------------------------------------------------------

def test_choose_K_example():
    assert choose_K(1.0, 0.5, 0.25, 1.0) == 8.0


def test_choose_K_drift_free():
    assert choose_K(0.0, 0.5, 0.25, 3.0) == pytest.approx(3.0 / 0.25)


@given(st.floats(0, 10), st.floats(0.1, 10))
def test_choose_K_linear_in_mu_plus_one(mu, c):
    K1 = choose_K(mu, 0.6, 0.2, c)
    K2 = choose_K(2 * mu + 1, 0.6, 0.2, c)
    assert K2 == pytest.approx(2 * K1, rel=1e-14)


# -- building and checking ----------------------------------------------------------------

def test_height_bound_value():
    p = params(r=0.1)
    f = build_molecule(p, TorusGrid(2, 256))
    assert 0.1 ** -2.25 == pytest.approx(177.827941, rel=1e-8)
    assert lp_norm(f, np.inf) <= 0.1 ** -2.25


@pytest.mark.parametrize("r,N", [(0.1, 256), (0.2, 128), (0.5, 128)])
def test_built_molecule_passes(r, N):
    grid = TorusGrid(2, N)
    p = params(r=r, x0=(1.0, 5.0))
    f = build_molecule(p, grid)
    rep = check_molecule(f, p)
    assert rep.passed and rep.moment_required
    assert abs(f.mean()) <= 1e-12 * lp_norm(f, np.inf)
    assert rep.concentration <= rep.concentration_bound and rep.height <= rep.height_bound
    assert math.isfinite(rep.l1_constant) and rep.l1 <= rep.l1_constant * r**-p.gamma * (1 + 1e-12)


def test_big_molecule_drops_moment():
    grid = TorusGrid(2, 64, 12.0)
    p = params(r=1.2, x0=(6.0, 6.0))
    f = build_molecule(p, grid)
    rep = check_molecule(f, p)
    assert not rep.moment_required and "moment" not in rep.passes
    assert rep.passed and f.mean() > 0


def test_constant_field_fails_moment():
    rep = check_molecule(ScalarField.constant(G64, 0.01), params())
    assert not rep.passes["moment"]


def test_zero_field_passes():
    assert check_molecule(ScalarField.constant(G64, 0.0), params()).passed


def test_unresolved_radius():
    with pytest.raises(ResolutionError):
        build_molecule(params(r=0.1), TorusGrid(2, 32))


def test_radius_too_large_for_box():
    with pytest.raises(PreconditionError):
        build_molecule(params(r=0.9), G64)


# -- envelopes ----------------------------------------------------------------------------

@given(st.floats(0.01, 0.9), st.floats(0.1, 20), st.floats(0, 2), st.floats(1e-3, 1))
def test_envelope_monotone(r, K, s, ds):
    p = params(r=r)
    c0, h0, l0 = envelope_bounds(p, K, s)
    c1, h1, l1 = envelope_bounds(p, K, s + ds)
    assert c1 > c0 and h1 < h0 and l1 < l0


def test_l1_bound_formula():
    p = params(r=0.1)
    assert envelope_bounds(p, 8.0, 0.1125)[2] == pytest.approx(math.pi, rel=1e-14)
    s = 0.05
    assert envelope_bounds(p, 8.0, s)[2] == pytest.approx(math.pi * (0.1 + 8 * s) ** -0.25, rel=1e-14)


def test_initial_state_within_envelopes():
    p = params(r=0.3)
    f = build_molecule(p, G128)
    traj = solve_backward_dual(f, None, TAB128, SolverConfig(dt=0.01, T=0.05))
    env = track_envelopes(traj, p, choose_K(0, 0.5, 0.25))
    assert env[0].s == 0 and env[0].ok
    assert all(e.ok for e in env)


def test_height_nonincreasing_without_drift():
    p = params(r=0.3)
    f = build_molecule(p, G128)
    traj = solve_backward_dual(f, None, TAB128, SolverConfig(epsilon=0.0, dt=0.01, T=0.3))
    h = traj.diagnostics["linf"]
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert np.all(h <= p.r ** -(2 + p.gamma))


def test_backward_mass_conserved():
    p = params(r=0.3)
    f = build_molecule(p, G128)
    v = make_divfree_velocity(random_stream(G128, np.random.default_rng(0), 3, 1.0))
    traj = solve_backward_dual(f, v, TAB128, SolverConfig(epsilon=1e-3, dt=0.02, T=0.3))
    m = traj.diagnostics["mean"]
    assert np.max(np.abs(m)) <= 1e-10 * lp_norm(f, 1)


# -- centres --------------------------------------------------------------------------------

def test_center_fixed_without_drift():
    path = evolve_center(None, 0.2, (1.0, 2.0), 4.0, np.linspace(0, 1, 11))
    np.testing.assert_array_equal(path, np.tile([1.0, 2.0], (11, 1)))


def test_center_constant_drift():
    c = np.array([0.25, -0.5])
    v = VelocityField(G64, np.stack([np.full(G64.shape, c[0]), np.full(G64.shape, c[1])]))
    t = np.linspace(0, 1, 9)
    path = evolve_center(v, 0.3, (1.0, 2.0), 2.0, t)
    np.testing.assert_allclose(path, np.array([1.0, 2.0]) + t[:, None] * c, atol=1e-14)


def test_center_rotation_stays_put():
    x0 = (G64.axis[32], G64.axis[32])
    d = G64.offsets_to(x0)
    r2 = np.sum(d**2, axis=0)
    window = np.exp(-((r2 / 4.0) ** 2))
    v = make_divfree_velocity(ScalarField(G64, 0.5 * r2 * window))
    path = evolve_center(v, 0.3, x0, 2.0, np.linspace(0, 0.5, 26))
    assert np.max(np.linalg.norm(path - np.array(x0), axis=1)) <= 2 * G64.h


# -- iteration ---------------------------------------------------------------------------------

def test_window_count():
    grid = TorusGrid(2, 128, 1.0)
    p = params(r=0.05, x0=(0.5, 0.5))
    run = iterate_molecule(build_molecule(p, grid), None, compute_symbol(SPEC_D, grid, rmax=8.0), p,
                           choose_K(0, 0.5, 0.25), 0.5, SolverConfig(dt=0.0125, T=0.5), eps_win=0.5)
    assert run.n_windows == 20


def test_iteration_without_drift_within_envelopes():
    p = params(r=0.3)
    K = choose_K(0, 0.5, 0.25)
    run = iterate_molecule(build_molecule(p, G128), None, TAB128, p, K, 0.5, SolverConfig(dt=0.01, T=0.5))
    assert not run.violations
    n_final = envelope_bounds(p, K, run.n_windows * run.window)[2]
    assert run.final_l1 <= n_final <= run.cap
    assert run.final_l1 <= run.envelopes[-1].bounds[2]


# -- transfer --------------------------------------------------------------------------------

def _pair(seed, grid=G64):
    rng = np.random.default_rng(seed)
    return random_field(grid, rng, 6), random_field(grid, rng, 6)


def test_transfer_zero_drift():
    a, b = _pair(1)
    assert transfer_check(a, b, None, TAB64, SolverConfig(epsilon=0.01, dt=0.02), 0.4) <= 1e-10


def test_transfer_at_zero_time():
    a, b = _pair(2)
    v = make_divfree_velocity(random_stream(G64, np.random.default_rng(2), 3, 1.0))
    assert transfer_check(a, b, v, TAB64, SolverConfig(dt=0.02), 0.0) == 0.0


@pytest.mark.parametrize("seed", range(2))
def test_transfer_first_order(seed):
    a, b = _pair(seed)
    v = make_divfree_velocity(random_stream(G64, np.random.default_rng(seed), 3, 1.0))
    d1 = transfer_check(a, b, v, TAB64, SolverConfig(dt=0.02), 0.5)
    d2 = transfer_check(a, b, v, TAB64, SolverConfig(dt=0.01), 0.5)
    assert d1 / d2 >= 1.8


# -- duality -------------------------------------------------------------------------------------

FAMILY = [params(r=r, x0=(2.0, 4.0)) for r in (0.2, 0.3, 0.5)]


def test_constant_pairs_to_zero():
    rep = holder_by_duality(ScalarField.constant(TorusGrid(2, 128), 3.0), FAMILY)
    assert rep.max_pairing <= 1e-12


def test_self_pairing():
    grid = TorusGrid(2, 128)
    psi = build_molecule(FAMILY[1], grid)
    rep = holder_by_duality(psi, [FAMILY[1]])
    assert rep.max_pairing == pytest.approx(lp_norm(psi, 2) ** 2, rel=1e-12)
    assert rep.max_pairing > 0


def test_pairings_bounded_by_holder():
    grid = TorusGrid(2, 128)
    theta = ScalarField.from_function(grid, lambda x, y: np.sin(x) * np.cos(2 * y))
    rep = holder_by_duality(theta, FAMILY)
    assert np.isfinite(rep.ratio) and rep.ratio < 10
    fine = holder_by_duality(ScalarField.from_function(TorusGrid(2, 256), lambda x, y: np.sin(x) * np.cos(2 * y)),
                             FAMILY)
    assert 0.5 <= fine.ratio / rep.ratio <= 2
