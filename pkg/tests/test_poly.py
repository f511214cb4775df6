import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssos.errors import DimensionError
from ssos.poly import (
    ZERO_TOL,
    Polynomial,
    body_order,
    differentiate,
    evaluate,
    gradient,
    grlex_key,
    max_degree,
    multiply,
    total_degree,
)

N_X, N_W = 2, 1


def polys(max_terms=5, max_exp=2):
    term = st.tuples(
        st.tuples(*[st.integers(0, max_exp)] * (N_X + N_W)),
        st.floats(-3, 3, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
    )
    return st.lists(term, max_size=max_terms).map(lambda ts: Polynomial(N_X, N_W, dict(ts)))


points = st.tuples(*[st.floats(-1.5, 1.5, allow_nan=False)] * (N_X + N_W)).map(np.array)


def close(a, b, rel=1e-12):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def test_multiindex_measures():
    a = (3, 0, 1, 2)
    assert total_degree(a) == 6
    assert body_order(a) == 3
    assert max_degree(a) == 3


def test_grlex_order_degree_first_then_x1_first():
    alphas = [(0, 1), (1, 0), (0, 0), (2, 0), (1, 1), (0, 2)]
    assert sorted(alphas, key=grlex_key) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_square_of_difference_expansion(quad):
    (x,), (w,) = Polynomial.variables(1, 1)
    sq = multiply(x - w, x - w)
    assert sq.terms == {(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0}
    assert quad.terms == {(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0, (2, 2): 1.0}


def test_multiply_identity_and_difference_of_squares():
    (x,), _ = Polynomial.variables(1, 0)
    one = Polynomial.constant(1.0, 1)
    p = x * 3.0 + 2.0
    assert multiply(p, one) == p
    assert multiply(x + 1.0, x - 1.0).terms == {(2,): 1.0, (0,): -1.0}


def test_multiply_dimension_mismatch():
    with pytest.raises(DimensionError):
        multiply(Polynomial.variable(0, 1, 0), Polynomial.variable(0, 1, 1))


def test_derivative_examples(quad):
    (x,), (w,) = Polynomial.variables(1, 1)
    assert differentiate(quad, 0) == x * 2.0 - w * 2.0 + w * w * x * 2.0
    assert differentiate(w**3, 0).is_zero()
    assert differentiate(x**3 * w, 0) == x * x * w * 3.0
    with pytest.raises(DimensionError):
        differentiate(quad, 2)


def test_evaluate_examples(quad):
    assert evaluate(quad, [0.5, 1.0]) == pytest.approx(0.5, abs=1e-15)
    (x,), (w,) = Polynomial.variables(1, 1)
    assert evaluate(x * w + x**2, [0.0, 0.0]) == 0.0
    w0 = 1.0
    assert evaluate(quad, [w0 / (1 + w0**2), w0]) == pytest.approx(w0**4 / (1 + w0**2), abs=1e-15)
    with pytest.raises(DimensionError):
        evaluate(quad, [1.0])


def test_canonicalization_threshold():
    p = Polynomial(1, 0, {(1,): 1.0, (2,): ZERO_TOL / 2})
    assert p.terms == {(1,): 1.0}
    assert p.degree == 1


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), polys())
def test_ring_axioms(p, q, r):
    assert _max_diff(p * q, q * p) < 1e-12
    assert _max_diff((p * q) * r, p * (q * r)) < 1e-9
    assert _max_diff(p * (q + r), p * q + p * r) < 1e-9


def _max_diff(a, b):
    d = a - b
    return max((abs(c) for c in d.terms.values()), default=0.0)


@settings(max_examples=60, deadline=None)
@given(polys(), polys())
def test_add_then_subtract_is_empty(p, q):
    # exact cancellation may leave round-off below the canonicalization threshold only
    assert _max_diff(p + q - q, p) < 1e-12
    assert (p - p).is_zero()


def test_add_subtract_same_polynomial_empties(quad):
    assert (quad + quad - quad - quad).terms == {}


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), points)
def test_evaluation_is_homomorphism(p, q, z):
    assert close(evaluate(p * q, z), evaluate(p, z) * evaluate(q, z))
    assert close(evaluate(p + q, z), evaluate(p, z) + evaluate(q, z))


@settings(max_examples=60, deadline=None)
@given(polys(max_exp=3), points)
def test_gradient_matches_central_differences(p, z):
    h = 1e-5
    for k, dp in enumerate(gradient(p, range(p.nvars))):
        e = np.zeros(p.nvars)
        e[k] = h
        fd = (evaluate(p, z + e) - evaluate(p, z - e)) / (2 * h)
        exact = evaluate(dp, z)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_evaluate_many_matches_pointwise(quad, rng):
    pts = rng.uniform(-1, 1, size=(20, 2))
    np.testing.assert_allclose(quad.evaluate_many(pts), [quad(z) for z in pts], rtol=1e-14)


def test_fix_noise_and_substitute(quad):
    g = quad.fix_noise([0.5])
    assert (g.n_x, g.n_w) == (1, 0)
    assert g([0.3]) == pytest.approx(quad([0.3, 0.5]))
    h = quad.substitute({0: 0.7})
    assert not h.depends_on_x()
    assert h([123.0, 0.4]) == pytest.approx(quad([0.7, 0.4]))


def test_power_and_scalar_ops(quad):
    assert quad**2 == quad * quad
    assert (2.0 * quad - quad) == quad
    assert (1.0 - quad) == -(quad - 1.0)


@settings(max_examples=30, deadline=None)
@given(polys())
def test_text_round_trip(p):
    assert Polynomial.from_text(p.to_text()) == p


def test_text_format(quad):
    text = quad.to_text()
    lines = text.splitlines()
    assert lines[0] == "1 1"
    assert lines[1:4] == ["1 2 0", "-2 1 1", "1 0 2"]  # degree 2 in grlex order
    assert len(lines) == 5
    with pytest.raises(DimensionError):
        Polynomial.from_text("1 1\n1 2\n")
