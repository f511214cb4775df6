import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ssos.errors import DimensionError, ParameterError
from ssos.noise import NoiseDistribution, expected_value, gauss_legendre, moment, quadrature_expectation
from ssos.poly import Polynomial
from ssos.problems import P_STAR, c_star


def test_uniform_moments():
    u = NoiseDistribution.uniform(1)
    assert [moment(u, (k,)) for k in range(5)] == [1.0, 0.0, 1 / 3, 0.0, 1 / 5]


def test_normalization_any_law():
    for dist in (NoiseDistribution.uniform(3), NoiseDistribution.gaussian(2, 0.3)):
        assert moment(dist, (0,) * dist.d) == 1.0


def test_gaussian_fourth_moment_against_quadrature():
    sig = 0.5
    g = NoiseDistribution.gaussian(1, sig)
    dens = lambda w: np.exp(-(w**2) / (2 * sig**2)) / np.sqrt(2 * np.pi * sig**2)
    oracle, _ = integrate.quad(lambda w: w**4 * dens(w), -np.inf, np.inf)
    assert moment(g, (4,)) == pytest.approx(oracle, rel=1e-10)
    assert moment(g, (4,)) == pytest.approx(0.1875, abs=1e-15)


@given(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)))
def test_moments_multiply_across_coordinates(alpha):
    for dist in (NoiseDistribution.uniform(3), NoiseDistribution.gaussian(3, [0.5, 1.0, 2.0])):
        prod = np.prod([dist.univariate_moment(k, j) for j, k in enumerate(alpha)])
        assert moment(dist, alpha) == pytest.approx(prod, rel=1e-14)


def test_moment_length_checked():
    with pytest.raises(DimensionError):
        moment(NoiseDistribution.uniform(2), (2,))


def test_point_mass_is_gaussian_zero_sigma():
    g = NoiseDistribution.gaussian(1, 0.0)
    assert moment(g, (2,)) == 0.0
    assert np.all(g.sample(np.random.default_rng(0), 5) == 0.0)


def test_parse_and_label():
    assert NoiseDistribution.parse("uniform").label() == "uniform"
    g = NoiseDistribution.parse("gaussian:0.25", 2)
    assert g.sigma == (0.25, 0.25) and g.label() == "gaussian:0.25"
    with pytest.raises(ParameterError):
        NoiseDistribution.parse("cauchy")


def test_gauss_legendre_small_cases():
    q = gauss_legendre(1)
    assert q.nodes.tolist() == [0.0] and q.weights.tolist() == [2.0]
    with pytest.raises(ParameterError):
        gauss_legendre(0)


@pytest.mark.parametrize("k", range(1, 11))
def test_gauss_legendre_against_numpy_and_exactness(k):
    q = gauss_legendre(k)
    nodes, weights = np.polynomial.legendre.leggauss(k)
    np.testing.assert_allclose(q.nodes, nodes, atol=1e-14)
    np.testing.assert_allclose(q.weights, weights, atol=1e-14)
    assert q.weights.sum() == pytest.approx(2.0, abs=1e-13)
    np.testing.assert_array_equal(q.nodes, -q.nodes[::-1])
    for j in range(2 * k):
        exact = 0.0 if j % 2 else 2.0 / (j + 1)
        assert abs(q.integrate(lambda w: w**j) - exact) <= 1e-12


def test_five_point_rule_examples():
    q = gauss_legendre(5)
    assert abs(q.integrate(lambda w: w**8) - 2 / 9) <= 1e-12
    assert abs(q.integrate(c_star) / 2 - P_STAR) < 1e-3


def test_expected_value_examples():
    _, (w,) = Polynomial.variables(0, 1)
    u = NoiseDistribution.uniform(1)
    assert expected_value(w * w, u) == pytest.approx(1 / 3)
    assert expected_value(Polynomial.constant(5.0, 0, 1), u) == 5.0
    g = NoiseDistribution.gaussian(1, 1.0)
    c = w**4 - w * w
    assert expected_value(c, g) == pytest.approx(2.0)
    samples = np.random.default_rng(7).standard_normal(10**7)
    assert np.mean(samples**4 - samples**2) == pytest.approx(2.0, abs=1e-2)


def test_expected_value_rejects_x_dependence(quad, uniform1):
    with pytest.raises(DimensionError):
        expected_value(quad, uniform1)


def test_expected_value_matches_quadrature(rng):
    _, ws = Polynomial.variables(0, 2)
    u = NoiseDistribution.uniform(2)
    for _ in range(5):
        c = Polynomial.constant(float(rng.normal()), 0, 2)
        for _ in range(4):
            e = rng.integers(0, 5, size=2)
            c = c + ws[0] ** int(e[0]) * ws[1] ** int(e[1]) * float(rng.normal())
        k = (c.degree + 2) // 2
        assert abs(expected_value(c, u) - quadrature_expectation(c, k)) <= 1e-10
