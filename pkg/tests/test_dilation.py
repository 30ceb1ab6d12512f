import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anisohardy import dilation
from anisohardy.errors import EmptyRegime, NotExpansive, SingularMatrix

from conftest import expansive, expansive_matrix


def test_isotropic_ellipsoid_is_the_unit_volume_disc(iso2):
    np.testing.assert_allclose(iso2.ellipsoid_form, np.eye(2), atol=1e-14)
    assert iso2.ellipsoid_scale == pytest.approx(1 / math.pi, rel=1e-13)
    assert iso2.expansion_factor == pytest.approx(2.0, rel=1e-12)
    assert iso2.b == 4.0 and iso2.tau == 1


def test_isotropic_quasi_norm_values(iso2):
    # radius of Delta is 1/sqrt(pi) ~ 0.564, of B_1 twice that
    assert iso2.rho(np.array([0.4, 0.0])) == 0.25
    assert iso2.rho(np.array([0.8, 0.0])) == 1.0
    assert iso2.rho(np.zeros(2)) == 0.0


def test_one_dimensional_interval():
    d = dilation.make_dilation(np.array([[3.0]]))
    # Delta = (-1/2, 1/2), so x^2 < 1/4 and r = 3
    assert d.ellipsoid_scale == pytest.approx(0.25, rel=1e-13)
    assert d.expansion_factor == pytest.approx(3.0, rel=1e-12)
    assert d.rho(np.array([[0.49]]))[0] == 1 / 3
    assert d.rho(np.array([[0.51]]))[0] == 1.0


def test_rejects_nonexpansive_and_singular():
    with pytest.raises(NotExpansive):
        dilation.make_dilation(np.diag([1.0, 2.0]))
    with pytest.raises(NotExpansive):
        dilation.make_dilation(np.array([[0.5, 0.0], [0.0, 8.0]]))
    with pytest.raises(SingularMatrix):
        dilation.make_dilation(np.array([[2.0, 4.0], [1.0, 2.0]]))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 3]))
def test_spectrum_matches_numpy(seed, n):
    A = expansive_matrix(np.random.default_rng(seed), n)
    moduli, b = dilation.spectrum(A)
    np.testing.assert_allclose(moduli, np.sort(np.abs(np.linalg.eigvals(A))), rtol=1e-9)
    assert b == pytest.approx(abs(np.linalg.det(A)), rel=1e-12)


@given(expansive())
def test_unit_volume_and_nesting(A):
    d = dilation.make_dilation(A)
    vol = dilation.unit_ball_volume(2) * d.ellipsoid_scale / math.sqrt(np.linalg.det(d.ellipsoid_form))
    assert vol == pytest.approx(1.0, rel=1e-10)
    assert d.expansion_factor > 1.0
    x = dilation.sample_ball(d, 500, np.random.default_rng(0))
    # Delta in r Delta in A Delta
    assert np.all(d.in_ball(x * d.expansion_factor, 1))
    assert np.all(d.in_ball(x, 0))


@given(expansive(), st.integers(0, 2 ** 16))
def test_homogeneity_is_exact(A, seed):
    d = dilation.make_dilation(A)
    rng = np.random.default_rng(seed)
    x = dilation.sample_ball(d, 100, rng) * np.exp(rng.uniform(-4, 4, (100, 1)))
    base = d.step_index(x)
    for k in range(-4, 5):
        assert np.array_equal(d.step_index(x @ d.power(k).T), base + k)
        np.testing.assert_array_equal(d.rho(x @ d.power(k).T), d.b ** (base + k).astype(float))


@given(expansive(), st.integers(0, 2 ** 16))
def test_quasi_triangle_with_tau(A, seed):
    d = dilation.make_dilation(A)
    rng = np.random.default_rng(seed)
    x = dilation.sample_ball(d, 200, rng) * np.exp(rng.uniform(-3, 3, (200, 1)))
    y = dilation.sample_ball(d, 200, rng) * np.exp(rng.uniform(-3, 3, (200, 1)))
    # rho(x + y) <= b^tau max(rho(x), rho(y)), in shell indices
    lhs = d.step_index(x + y)
    rhs = np.maximum(d.step_index(x), d.step_index(y)) + d.tau
    assert np.all(lhs <= rhs)


def test_shells_are_disjoint_and_cover(diag23):
    rng = np.random.default_rng(3)
    for k in (-2, 0, 3):
        x = dilation.sample_shell(diag23, k, 300, rng)
        assert np.all(diag23.step_index(x) == k)


def test_adjoint_uses_transpose(rot):
    np.testing.assert_array_equal(rot.adjoint.matrix, rot.matrix.T)
    assert rot.adjoint.lambda_minus == rot.lambda_minus


def test_comparability_band_isotropic(iso2):
    rng = np.random.default_rng(1)
    x = dilation.sample_ball(iso2, 5000, rng) * np.exp(rng.uniform(-5, 5, (5000, 1)))
    band = dilation.comparability_band(iso2, x)
    for regime in ("large", "small"):
        c = band[regime]
        assert c["minus_max"] / c["minus_min"] <= 2.01
        assert math.isfinite(c["C_low"]) and math.isfinite(c["C_high"])


def test_comparability_band_needs_both_regimes(iso2):
    x = dilation.sample_ball(iso2, 100, np.random.default_rng(0)) * 0.1
    with pytest.raises(EmptyRegime):
        dilation.comparability_band(iso2, x)


def test_power_cache_matches_matrix_power(diag23):
    np.testing.assert_allclose(diag23.power(3), np.linalg.matrix_power(diag23.matrix, 3))
    np.testing.assert_allclose(diag23.power(-2) @ diag23.power(2), np.eye(2), atol=1e-14)


def test_step_quasi_norm_matches_method(rot):
    x = np.array([[0.3, -1.2], [5.0, 0.1]])
    np.testing.assert_array_equal(dilation.step_quasi_norm(rot, x), rot.rho(x))
