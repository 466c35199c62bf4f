import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randnls import norms, randomization
from randnls.errors import BasisMismatchError
from randnls.randomization import RandomLaw, Seed
from randnls.spectral import SpectralField

from conftest import random_coefficients

M = 100_000


@pytest.mark.parametrize("law", list(RandomLaw))
def test_unit_variance_and_centering(law):
    g = randomization.draw(law, M, Seed(7, 1)).values
    assert abs(g.mean()) <= 4 / math.sqrt(M)
    assert abs(np.mean(np.abs(g) ** 2) - 1) <= 8 / math.sqrt(M)


def test_bernoulli_unit_modulus():
    g = randomization.draw(RandomLaw.BERNOULLI, 1000, Seed(3)).values
    assert np.all(np.abs(g) == 1.0)
    assert set(np.unique(g.real)) == {-1.0, 1.0}


def test_gaussian_is_circular():
    g = randomization.draw(RandomLaw.GAUSSIAN, M, Seed(5)).values
    assert abs(np.mean(g * g)) <= 8 / math.sqrt(M)
    assert abs(np.mean(g.real**2) - 0.5) <= 8 / math.sqrt(M)


@given(st.integers(0, 2**63), st.integers(0, 1000), st.sampled_from(list(RandomLaw)))
def test_same_seed_same_draw(root, stream, law):
    a = randomization.draw(law, 50, Seed(root, stream)).values
    b = randomization.draw(law, 50, Seed(root, stream)).values
    np.testing.assert_array_equal(a, b)


def test_streams_differ():
    a = randomization.draw(RandomLaw.GAUSSIAN, 50, Seed(1, 0)).values
    b = randomization.draw(RandomLaw.GAUSSIAN, 50, Seed(1, 1)).values
    assert not np.array_equal(a, b)


def test_ensemble_independent_of_threads():
    one = randomization.ensemble(RandomLaw.GAUSSIAN, 8, 20_000, Seed(9), threads=1)
    many = randomization.ensemble(RandomLaw.GAUSSIAN, 8, 20_000, Seed(9), threads=4)
    np.testing.assert_array_equal(one, many)
    with ThreadPoolExecutor(3) as pool:
        runs = list(pool.map(lambda _: randomization.ensemble(RandomLaw.GAUSSIAN, 8, 20_000, Seed(9)),
                             range(3)))
    for r in runs:
        np.testing.assert_array_equal(r, one)


def test_law_aliases():
    assert RandomLaw.parse("gaussian") is RandomLaw.GAUSSIAN
    assert RandomLaw.parse("complex-gaussian") is RandomLaw.GAUSSIAN
    assert RandomLaw.parse("bernoulli") is RandomLaw.BERNOULLI
    with pytest.raises(ValueError):
        RandomLaw.parse("cauchy")


def test_bernoulli_randomization_is_isometric(h1, rng):
    f = SpectralField(random_coefficients(rng, h1.N, 0.5), h1)
    for m in range(10):
        g = randomization.draw(RandomLaw.BERNOULLI, h1.N, Seed(2, m))
        fw = randomization.randomize(f, g)
        for s in (-0.5, 0.0, 0.7, 2.0):
            assert norms.hs_norm(fw, s) == norms.hs_norm(f, s)


def test_gaussian_randomization_preserves_mean_square(h1, rng):
    f = SpectralField(random_coefficients(rng, h1.N, 1.0), h1)
    sigma = 0.4
    G = randomization.ensemble(RandomLaw.GAUSSIAN, h1.N, 10_000, Seed(4))
    sq = norms.hs_norms(G * f.coefficients, h1.energies, sigma) ** 2
    target = norms.hs_norm(f, sigma) ** 2
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(sq.mean() - target) <= 3 * se


def test_zero_field_stays_zero(h1):
    g = randomization.draw(RandomLaw.GAUSSIAN, h1.N, Seed(0))
    assert not np.any(randomization.randomize(SpectralField.zeros(h1), g).coefficients)


def test_short_draw_rejected(h1):
    g = randomization.draw(RandomLaw.GAUSSIAN, h1.N - 1, Seed(0))
    with pytest.raises(BasisMismatchError):
        randomization.randomize(SpectralField.zeros(h1), g)


def test_manifest_records_seed():
    g = randomization.draw(RandomLaw.BERNOULLI, 4, Seed(11, 3))
    assert g.manifest() == {"law": "bernoulli", "seed": {"root": 11, "stream": 3}, "N": 4}


# Khinchin


@pytest.mark.parametrize("r", [2, 4, 8])
def test_khinchin_single_term_bernoulli(r):
    est = randomization.khinchin_ratio(np.array([1.0, 0, 0]), RandomLaw.BERNOULLI, r, 10_000, Seed(1))
    assert est.ratio == pytest.approx(1 / math.sqrt(r), rel=1e-12)


def test_khinchin_gaussian_second_moment(rng):
    c = random_coefficients(rng, 16, 0.5)
    est = randomization.khinchin_ratio(c, RandomLaw.GAUSSIAN, 2, 200_000, Seed(2))
    assert est.ratio == pytest.approx(1 / math.sqrt(2), rel=0.01)
    assert est.stderr > 0


def test_khinchin_ratio_decreases_with_moment(rng):
    c = random_coefficients(rng, 12)
    ratios = [randomization.khinchin_ratio(c, RandomLaw.BERNOULLI, r, 20_000, Seed(3)).ratio
              for r in (2, 4, 8)]
    assert ratios[0] > ratios[1] > ratios[2]
    assert max(ratios) <= 3.0


def test_khinchin_rejections():
    with pytest.raises(ValueError):
        randomization.khinchin_ratio(np.ones(3), RandomLaw.BERNOULLI, 1.5, 10_000, Seed(0))
    with pytest.raises(ValueError):
        randomization.khinchin_ratio(np.zeros(3), RandomLaw.BERNOULLI, 2, 10_000, Seed(0))
    with pytest.raises(ValueError):
        randomization.khinchin_ratio(np.ones(3), RandomLaw.BERNOULLI, 2, 100, Seed(0))


def test_khinchin_thread_count_does_not_change_result(rng):
    c = random_coefficients(rng, (3, 6))
    a = randomization.khinchin_ratio(c, RandomLaw.GAUSSIAN, 4, 20_000, Seed(6), threads=1)
    b = randomization.khinchin_ratio(c, RandomLaw.GAUSSIAN, 4, 20_000, Seed(6), threads=3)
    np.testing.assert_array_equal(a.ratio, b.ratio)
    np.testing.assert_array_equal(a.stderr, b.stderr)
