import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randnls import io, norms, propagation, randomization, spectral
from randnls.errors import BasisMismatchError, UsageError
from randnls.propagation import AdmissiblePair, TimeGrid, Trajectory
from randnls.randomization import RandomLaw, Seed
from randnls.spectral import Grid, SpectralField

from conftest import random_coefficients


def gaussian_bump(basis, shift=0.5, amplitude=1.0):
    x = basis.grid.axis
    return amplitude * np.exp(-((x - shift) ** 2) / 2)


# time grids


def test_time_grid_uniform():
    t = TimeGrid(0.3, 37)
    assert np.max(np.abs(np.diff(t.nodes) - t.dt)) <= 1e-14
    assert t.nodes[0] == 0 and t.nodes[-1] == 0.3
    assert t.trapezoid_weights().sum() == pytest.approx(0.3, rel=1e-15)
    with pytest.raises(ValueError):
        TimeGrid(0.3, 7)


def test_trajectory_shape_checked(h1):
    with pytest.raises(BasisMismatchError):
        Trajectory(TimeGrid(1.0, 8), np.zeros((8, h1.N)), h1)


# linear flow


def test_half_period_antiperiodicity(h1, rng):
    f = SpectralField(random_coefficients(rng, h1.N), h1)
    out = propagation.linear_flow(f, math.pi)
    np.testing.assert_allclose(out.coefficients, -f.coefficients, atol=1e-12)


def test_flow_at_zero_is_identity(h2, rng):
    f = SpectralField(random_coefficients(rng, h2.N), h2)
    np.testing.assert_array_equal(propagation.linear_flow(f, 0.0).coefficients, f.coefficients)


@given(st.floats(-50, 50), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_flow_preserves_every_sobolev_norm(h1, t, s, seed):
    f = SpectralField(random_coefficients(np.random.default_rng(seed), h1.N), h1)
    assert norms.hs_norm(propagation.linear_flow(f, t), s) == pytest.approx(norms.hs_norm(f, s), rel=1e-13)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_group_law(h1, t1, t2):
    f = SpectralField(random_coefficients(np.random.default_rng(1), h1.N), h1)
    a = propagation.linear_flow(f, t1 + t2).coefficients
    b = propagation.linear_flow(propagation.linear_flow(f, t1), t2).coefficients
    assert np.max(np.abs(a - b)) <= 1e-11


# admissible pairs and X^s_T


def test_admissible_pairs():
    assert AdmissiblePair(4.0, math.inf, 1).q == math.inf
    assert AdmissiblePair.from_p(4.0, 1).q == math.inf
    assert AdmissiblePair.from_p(8.0, 2).q == pytest.approx(8 / 3)
    for p, q, d in [(4, 4, 1), (2, 3, 3), (3, 2, 1)]:
        with pytest.raises(ValueError):
            AdmissiblePair(p, q, d)
    with pytest.raises(ValueError):
        AdmissiblePair(2.0, math.inf, 2)
    for d in (1, 2, 3, 5):
        for pair in propagation.default_pairs(d):
            assert 2 / pair.p + d * (0 if math.isinf(pair.q) else 1 / pair.q) == pytest.approx(d / 2, abs=1e-12)


def test_xst_of_constant_unit_mode(h1):
    traj = Trajectory.constant(TimeGrid(0.5, 16), SpectralField.unit(h1, 1))
    assert propagation.xst_norm(traj, 0.0, [AdmissiblePair(math.inf, 2.0, 1)]) == pytest.approx(1.0, rel=1e-15)


def test_xst_of_linear_flow_energy_pair(h1, rng):
    f = SpectralField(random_coefficients(rng, h1.N, 1.0), h1)
    traj = propagation.linear_trajectory(f, TimeGrid(0.4, 16))
    pair = [AdmissiblePair(math.inf, 2.0, 1)]
    assert propagation.xst_norm(traj, 0.6, pair) == pytest.approx(norms.hs_norm(f, 0.6), rel=1e-12)


def test_xst_matches_nested_loop_oracle(h1, rng):
    times = TimeGrid(0.25, 10)
    coeffs = random_coefficients(rng, (times.size, h1.N), 1.0)
    traj = Trajectory(times, coeffs, h1)
    s, p, q, order = 0.3, 8.0, 4.0, 0.1
    pair = AdmissiblePair(p, q, 1, order=order)
    got = propagation.xst_norm(traj, s, [pair])

    x_w = h1.grid.axis_weights
    sup = 0.0
    time_sum = 0.0
    for j in range(times.size):
        hs = 0.0
        for n in range(h1.N):
            hs += abs(coeffs[j, n]) ** 2 * (1 + h1.energies[n] ** 2) ** (s / 2)
        sup = max(sup, math.sqrt(hs))
        lq = 0.0
        for i in range(h1.grid.points_per_axis):
            u = 0j
            for n in range(h1.N):
                u += coeffs[j, n] * (1 + h1.energies[n] ** 2) ** (order / 4) * h1.factors[n, i]
            lq += abs(u) ** q * x_w[i]
        w = times.dt / 2 if j in (0, times.M) else times.dt
        time_sum += w * lq ** (p / q)
    want = max(sup, time_sum ** (1 / p))
    assert got == pytest.approx(want, rel=1e-12)


def test_xst_rejects_bad_pairs(h1):
    traj = Trajectory.zeros(TimeGrid(0.1, 8), h1)
    with pytest.raises(ValueError):
        propagation.xst_norm(traj, 0.0, [])
    with pytest.raises(ValueError):
        propagation.xst_norm(traj, 0.0, [AdmissiblePair(math.inf, 2.0, 3)])


# probabilistic Strichartz


def test_strichartz_zero_field(h1):
    g = randomization.draw(RandomLaw.GAUSSIAN, h1.N, Seed(0))
    assert propagation.strichartz_sample(SpectralField.zeros(h1), g, 8, 4, 0.3, 0.5) == 0.0


@pytest.mark.parametrize("n", [1, 5, 20])
def test_strichartz_single_mode(h1, n):
    p, q, sigma, T = 8.0, 4.0, 0.3, 0.5
    g = randomization.draw(RandomLaw.BERNOULLI, h1.N, Seed(n))
    got = propagation.strichartz_sample(SpectralField.unit(h1, n), g, p, q, sigma, T)
    theta = norms.theta_reference(q, 2, 1)
    want = (T ** (1 / p) * norms.sobolev_weight(h1.energies[n - 1], theta + sigma)
            * norms.lq_norm(h1.samples[n - 1], q, h1.grid))
    assert got == pytest.approx(want, rel=1e-12)


def test_strichartz_moments_bounded_across_battery(h1, rng):
    p, q, sigma, T, r = 8.0, 4.0, 0.3, 0.5, 4
    ratios = []
    for decay in (0.5, 1.0, 1.5, 2.0):
        f = SpectralField(random_coefficients(rng, h1.N, decay), h1)
        vals = propagation.strichartz_ensemble(f, RandomLaw.GAUSSIAN, 10_000, Seed(8), p, q, sigma, T)
        bound = (math.sqrt(r) * T ** (1 / p) * norms.hs_norm(f, sigma)) ** r
        ratios.append(np.mean(vals**r) / bound)
    assert max(ratios) <= 1.0
    assert max(ratios) / min(ratios) <= 10.0


def test_ensemble_thread_invariance(h1, rng):
    f = SpectralField(random_coefficients(rng, h1.N, 1.0), h1)
    a = propagation.strichartz_ensemble(f, RandomLaw.GAUSSIAN, 9000, Seed(8), 8, 4, 0.3, 0.5, threads=1)
    b = propagation.strichartz_ensemble(f, RandomLaw.GAUSSIAN, 9000, Seed(8), 8, 4, 0.3, 0.5, threads=2)
    np.testing.assert_array_equal(a, b)


def test_tail_table_edges(h1):
    n = np.arange(1, h1.N + 1)
    f = SpectralField(h1.frequencies ** -0.3 / n, h1)
    vals = propagation.strichartz_ensemble(f, RandomLaw.GAUSSIAN, 10_000, Seed(2), 8, 4, 0.3, 0.5)
    lambdas = np.array([0.0, np.median(vals), vals.max() * 1.01])
    table = propagation.exceedance_table(vals, lambdas, norms.hs_norm(f, 0.3))
    assert table.probability[0] == 1.0
    assert table.probability[-1] == 0.0
    assert table.ci_low[-1] == 0.0 and 0 < table.ci_high[-1] < 1e-3
    assert np.all(np.diff(table.probability) <= 0)
    with pytest.raises(ValueError):
        propagation.exceedance_table(vals, lambdas[::-1], 1.0)


def test_tail_probability_gaussian_shape(h1):
    n = np.arange(1, h1.N + 1)
    f = SpectralField(h1.frequencies ** -0.3 / n, h1)
    table = propagation.tail_probability(f, RandomLaw.GAUSSIAN, None, 8, 4, 0.3, 0.5, 20_000, Seed(3))
    assert table.fit is not None and table.fit.slope < 0
    assert np.all(np.diff(table.probability) <= 0)


# Duhamel map


def test_duhamel_of_zero(h1):
    times = TimeGrid(0.1, 8)
    z = Trajectory.zeros(times, h1)
    assert not np.any(propagation.duhamel_map(z, z, 3, 1).coefficients)


def test_duhamel_starts_at_zero(h1, rng):
    times = TimeGrid(0.1, 8)
    f = SpectralField(random_coefficients(rng, h1.N, 1.0), h1)
    out = propagation.duhamel_map(Trajectory.zeros(times, h1), propagation.linear_trajectory(f, times), 3, -1)
    assert not np.any(out.coefficients[0])
    assert np.any(out.coefficients[1])


def test_duhamel_single_step_scalar_oracle(h1):
    eps, sign = 1e-2, 1
    times = TimeGrid(0.08, 8)
    u_f = propagation.linear_trajectory(SpectralField.unit(h1, 1) * eps, times)
    out = propagation.duhamel_map(Trajectory.zeros(times, h1), u_f, 3, sign)
    t1 = times.nodes[1]
    phi = h1.factors
    w = h1.grid.axis_weights
    for m in (0, 2, 4):
        # F(u_f(t)) = eps^3 e^{-it} phi_1^3, projected on phi_m by a scalar loop
        c = 0.0
        for i in range(phi.shape[1]):
            c += phi[0, i] ** 3 * phi[m, i] * w[i]
        c *= eps**3
        mu = h1.energies[m]
        integrand0 = c
        integrand1 = np.exp(1j * mu * t1) * c * np.exp(-1j * t1)
        want = -1j * sign * np.exp(-1j * mu * t1) * 0.5 * times.dt * (integrand0 + integrand1)
        assert out.coefficients[1, m] == pytest.approx(want, abs=1e-18, rel=1e-12)


def test_duhamel_rejects_even_degree_and_mismatch(h1, h2):
    times = TimeGrid(0.1, 8)
    z = Trajectory.zeros(times, h1)
    with pytest.raises(ValueError):
        propagation.duhamel_map(z, z, 4, 1)
    with pytest.raises(BasisMismatchError):
        propagation.duhamel_map(z, Trajectory.zeros(times, h2), 3, 1)
    with pytest.raises(BasisMismatchError):
        propagation.duhamel_map(z, Trajectory.zeros(TimeGrid(0.2, 8), h1), 3, 1)


# Picard


def test_picard_zero_datum(h1):
    u, rep = propagation.picard_solve(SpectralField.zeros(h1), T=0.1, M_t=16)
    assert rep.converged and rep.iterations == 1
    assert not np.any(u.coefficients)


def test_picard_report_invariants(h1):
    f = spectral.project(gaussian_bump(h1), h1)
    u, rep = propagation.picard_solve(f, None, 3, 1, 0.0, 0.1, 1e-11, 60, 64)
    assert rep.converged and rep.contraction_factor < 1 and rep.residual < rep.tol
    assert rep.correction is not None
    np.testing.assert_allclose(u.coefficients[0], f.coefficients, atol=0)


def test_picard_matches_split_step(h1):
    f0 = gaussian_bump(h1)
    f = spectral.project(f0, h1)
    for sign in (1, -1):
        u, rep = propagation.picard_solve(f, None, 3, sign, 0.0, 0.1, 1e-12, 60, 400)
        ref = propagation.splitstep_solve(f0, h1.grid, h1.potential, 3, sign, 0.1, 2048)
        gap = norms.lq_norm(spectral.synthesize(u.final()) - ref.samples, 2, h1.grid)
        assert gap < 1e-4


def test_picard_divergence_reported(h1):
    f = spectral.project(gaussian_bump(h1, amplitude=6.0), h1)
    u, rep = propagation.picard_solve(f, None, 3, 1, 0.0, 1.0, 1e-10, 60, 64)
    assert u is None
    assert not rep.converged
    assert rep.reason in ("diverged", "non-finite", "max-iter")
    assert rep.correction is None


def test_picard_randomized_datum(h1):
    f = spectral.project(gaussian_bump(h1), h1)
    g = randomization.draw(RandomLaw.BERNOULLI, h1.N, Seed(1))
    u, rep = propagation.picard_solve(f, g, 3, 1, 0.0, 0.05, 1e-10, 60, 32)
    np.testing.assert_allclose(u.coefficients[0], randomization.randomize(f, g).coefficients, atol=0)


def test_picard_argument_checks(h1):
    f = SpectralField.zeros(h1)
    with pytest.raises(ValueError):
        propagation.picard_solve(f, T=1.5)
    with pytest.raises(ValueError):
        propagation.picard_solve(f, tol=0.0)
    with pytest.raises(ValueError):
        propagation.picard_solve(f, r=2)


# split-step oracle


def test_split_step_stationary_state(h1):
    ref = propagation.splitstep_solve(h1.samples[0], h1.grid, h1.potential, sign=0, T=1.0, steps=4096)
    exact = np.exp(-1j) * h1.samples[0]
    assert norms.lq_norm(ref.samples - exact, 2, h1.grid) < 1e-6
    assert ref.mass_drift < 1e-12


def test_split_step_second_order(h1):
    f0 = gaussian_bump(h1)
    fine = propagation.splitstep_solve(f0, h1.grid, h1.potential, 3, 1, 0.1, 4096).samples
    errs = [norms.lq_norm(propagation.splitstep_solve(f0, h1.grid, h1.potential, 3, 1, 0.1, n).samples
                          - fine, 2, h1.grid) for n in (64, 128)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_split_step_rejects_nonuniform_grid(h1):
    x = np.sort(np.concatenate([np.linspace(-5, 0, 40), np.linspace(0.1, 5, 80)]))
    w = np.gradient(x)
    grid = Grid(d=1, axis=x, axis_weights=w, half_width=5.0)
    with pytest.raises(UsageError):
        propagation.splitstep_solve(np.exp(-x**2), grid, h1.potential, steps=64)


# persistence


def test_trajectory_round_trip(h1, tmp_path, rng):
    times = TimeGrid(0.2, 8)
    traj = Trajectory(times, random_coefficients(rng, (times.size, h1.N)), h1)
    io.save_trajectory(tmp_path / "t.npz", traj)
    back = io.load_trajectory(tmp_path / "t.npz", h1)
    np.testing.assert_array_equal(back.coefficients, traj.coefficients)
    assert back.times.same_as(times)
    other = spectral.build_harmonic_basis(1, 64, spectral.recommended_grid(1, 64))
    with pytest.raises(BasisMismatchError):
        io.load_trajectory(tmp_path / "t.npz", other)
