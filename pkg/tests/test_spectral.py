import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randnls import io, spectral
from randnls.errors import BasisMismatchError, DomainTooSmallError, ResolutionError
from randnls.spectral import SpectralField

from conftest import random_coefficients


# grids


def test_ground_state_grid_has_unit_half_width():
    g = spectral.build_grid(1, 8, 0, margin=1.0)
    assert g.half_width == 1.0
    assert g.points_per_axis == 8
    np.testing.assert_array_equal(g.axis, -g.axis[::-1])


def test_half_width_for_512_modes():
    g = spectral.build_grid(1, 4097, 512, margin=1.2)
    assert g.half_width == pytest.approx(1.2 * math.sqrt(1025), rel=1e-14)
    assert g.half_width == pytest.approx(38.42, abs=5e-3)


@given(st.integers(1, 3), st.integers(2, 300), st.integers(0, 40), st.floats(1.0, 3.0))
def test_grid_weights_and_symmetry(d, points, n_max, margin):
    g = spectral.build_grid(d, points, n_max, margin)
    for w in g.weights:
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(2 * g.half_width, rel=1e-12)
    assert np.max(np.abs(g.axis + g.axis[::-1])) <= 1e-12 * g.half_width


def test_margin_below_one_is_rejected():
    with pytest.raises(DomainTooSmallError):
        spectral.build_grid(1, 64, 4, margin=0.9)


# potentials


def test_potential_bounds_relative_to_japanese_bracket():
    g = spectral.build_grid(1, 2001, 0, half_width=50.0)
    for k in (2, 3, 4, 6.5):
        pot = spectral.PotentialSpec.smoothed_power(k)
        v = pot.on_grid(g)
        assert np.all(v >= 0)
        far = np.abs(g.axis) >= 1
        ratio = v[far] / (1 + g.axis[far] ** 2) ** (k / 2)
        assert ratio.min() > 0.1 and ratio.max() < 10


def test_smoothed_quadratic_shifts_harmonic_spectrum():
    pot = spectral.PotentialSpec.smoothed_power(2)
    grid = spectral.grid_for_potential(pot, 3, spectral.certified_points(3))
    basis = spectral.build_general_basis_1d(pot, 3, grid)
    np.testing.assert_allclose(basis.energies, [2.0, 4.0, 6.0], atol=1e-4)


# harmonic basis


def test_hermite_ground_state_at_origin():
    h = spectral.hermite_functions(1, np.array([0.0]))
    assert h[0, 0] == pytest.approx(np.pi**-0.25, rel=1e-15)
    assert h[0, 0] == pytest.approx(0.7511255, abs=1e-7)


def test_harmonic_energies_1d():
    basis = spectral.build_harmonic_basis(1, 5, spectral.recommended_grid(1, 5))
    np.testing.assert_array_equal(basis.energies, [1, 3, 5, 7, 9])


def test_harmonic_energies_2d_degeneracy():
    basis = spectral.build_harmonic_basis(2, 6, spectral.recommended_grid(2, 6))
    np.testing.assert_array_equal(basis.energies, [2, 4, 4, 6, 6, 6])


def test_harmonic_multi_indices_match_energies(h2):
    np.testing.assert_array_equal(h2.energies, 2 * h2.indices.sum(axis=1) + 2)
    assert np.all(np.diff(h2.energies) >= 0)


@pytest.mark.parametrize("fixture", ["h1", "h1_large", "h2"])
def test_harmonic_gram_is_identity(fixture, request):
    basis = request.getfixturevalue(fixture)
    G = basis.gram()
    assert np.max(np.abs(G - np.eye(basis.N))) <= 1e-8


def test_tensor_gram_matches_dense_quadrature(h2):
    S = h2.samples.reshape(h2.N, -1)
    dense = (S * h2.grid.cell_weights.ravel()) @ S.T
    np.testing.assert_allclose(h2.gram(), dense, atol=1e-13)


def test_underresolved_grid_names_first_bad_mode():
    grid = spectral.build_grid(1, 513, 10, margin=1.0)
    with pytest.raises(ResolutionError) as exc:
        spectral.build_harmonic_basis(1, 40, grid)
    # sqrt(2n - 1) > sqrt(21) first at n = 12
    assert exc.value.mode == 12


# general 1D solver


def test_general_basis_gram_and_monotone(k4):
    assert np.max(np.abs(k4.gram() - np.eye(k4.N))) <= 1e-6
    assert np.all(np.diff(k4.energies) > 0)
    assert k4.info["drift"] < spectral.DRIFT_TOLERANCE


def test_weyl_growth_for_quartic(k4):
    n = np.arange(50, 201)
    slope = np.polyfit(np.log(n), np.log(k4.energies[n - 1]), 1)[0]
    assert slope == pytest.approx(4 / 3, abs=0.05)


def test_general_solver_rejects_too_many_modes():
    pot = spectral.PotentialSpec.smoothed_power(4)
    grid = spectral.grid_for_potential(pot, 10, 33)
    with pytest.raises(ResolutionError):
        spectral.build_general_basis_1d(pot, 10, grid)


def test_general_solver_signs_follow_hermite_pattern():
    pot = spectral.PotentialSpec.smoothed_power(2)
    grid = spectral.grid_for_potential(pot, 6, spectral.certified_points(6))
    basis = spectral.build_general_basis_1d(pot, 6, grid)
    # (1 + x^2) has the Hermite functions as eigenfunctions
    herm = spectral.hermite_functions(6, grid.axis)
    assert np.max(np.abs(basis.factors - herm)) < 1e-3


# project and synthesize


def test_project_unit_mode(h1):
    c = spectral.project(h1.samples[2], h1).coefficients
    e3 = np.zeros(h1.N)
    e3[2] = 1
    np.testing.assert_allclose(c, e3, atol=1e-10)


def test_project_zero(h2):
    assert not np.any(spectral.project(np.zeros(h2.grid.shape), h2).coefficients)


@pytest.mark.parametrize("fixture", ["h1", "h2", "k4"])
def test_round_trip_identity(fixture, request, rng):
    basis = request.getfixturevalue(fixture)
    f = SpectralField(random_coefficients(rng, basis.N), basis)
    back = spectral.project(spectral.synthesize(f), basis)
    assert np.max(np.abs(back.coefficients - f.coefficients)) <= 1e-8


def test_synthesize_unit_and_round_trip(h1):
    np.testing.assert_array_equal(spectral.synthesize(SpectralField.unit(h1, 1)).real, h1.samples[0])
    phi2 = h1.samples[1]
    again = spectral.synthesize(spectral.project(phi2, h1))
    assert np.max(np.abs(again - phi2)) <= 1e-8


@given(st.complex_numbers(max_magnitude=10, allow_nan=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False),
       st.integers(0, 2**32 - 1))
def test_synthesis_is_linear(h1, a, b, seed):
    r = np.random.default_rng(seed)
    f = SpectralField(random_coefficients(r, h1.N), h1)
    g = SpectralField(random_coefficients(r, h1.N), h1)
    lhs = spectral.synthesize(a * f + b * g)
    rhs = a * spectral.synthesize(f) + b * spectral.synthesize(g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_parseval(h2, rng):
    f = SpectralField(random_coefficients(rng, h2.N), h2)
    u = spectral.synthesize(f)
    l2 = math.sqrt(h2.grid.integrate(np.abs(u) ** 2))
    assert l2 == pytest.approx(f.l2_norm(), rel=1e-10)


def test_grid_mismatch_is_rejected(h1):
    with pytest.raises(BasisMismatchError):
        spectral.project(np.zeros(100), h1)


def test_fields_on_different_bases_do_not_mix(h1):
    other = spectral.build_harmonic_basis(1, 64, spectral.recommended_grid(1, 64))
    with pytest.raises(BasisMismatchError):
        SpectralField.zeros(h1) + SpectralField.zeros(other)


def test_scaled_evaluation_matches_recurrence(h1):
    c = np.zeros(h1.N)
    c[5] = 1.0
    got = h1.evaluate_scaled(c, 0.7)
    want = spectral.hermite_functions(6, 0.7 * h1.grid.axis)[5]
    np.testing.assert_allclose(got, want, atol=1e-14)


# persistence


@pytest.mark.parametrize("fixture", ["h2", "k4"])
def test_basis_container_round_trip(fixture, request, tmp_path):
    basis = request.getfixturevalue(fixture)
    io.save_basis(basis, tmp_path / "b.npz")
    back = io.load_basis(tmp_path / "b.npz")
    assert back.basis_id == basis.basis_id
    np.testing.assert_array_equal(back.energies, basis.energies)
    assert back.energies.dtype == np.float64 and back.factors.dtype == np.float64


def test_tampered_container_is_detected(h1, tmp_path):
    arrays, meta = spectral.basis_to_arrays(h1)
    arrays["energies"] = arrays["energies"] + 1e-9
    with pytest.raises(BasisMismatchError):
        spectral.basis_from_arrays(arrays, meta)
