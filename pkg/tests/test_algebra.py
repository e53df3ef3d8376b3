from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holodyn.algebra import GaussianRational, HomPolynomial, monomials, scalar_match
from holodyn.errors import ShapeError
from holodyn.roots import aberth, binary_roots, companion_roots

small = st.integers(-5, 5)


def test_gaussian_rational_field_ops():
    a = GaussianRational(1, 2)
    b = GaussianRational(Fraction(1, 3), -1)
    assert a * b / b == a
    assert (a + b) - b == a
    assert a * a.conjugate() == 5
    assert (a ** -2) * a ** 2 == 1
    assert complex(a) == 1 + 2j


@given(small, small, small, small)
def test_gaussian_rational_matches_complex(p, q, r, s):
    a, b = GaussianRational(p, q), GaussianRational(r, s)
    assert complex(a * b) == complex(p, q) * complex(r, s)
    assert complex(a + b) == complex(p + r, q + s)


def test_monomial_count():
    # C(d + k, k) monomials of degree d in k + 1 variables
    assert len(monomials(2, 5)) == 6
    assert len(monomials(3, 4)) == 15


def test_bad_exponent_rejected():
    with pytest.raises(ShapeError):
        HomPolynomial(2, 2, {(1, 0): 1})
    with pytest.raises(ShapeError):
        HomPolynomial(2, 1, {(1, 0, 0): 1})


def test_exact_composition_binomial():
    # (w0 + w1)^3 by composing u^3 with u -> w0 + w1
    cube = HomPolynomial(1, 3, {(3,): 1})
    lin = HomPolynomial(2, 1, {(1, 0): 1, (0, 1): 1})
    out = cube.compose([lin])
    assert out.terms == {(3, 0): 1, (2, 1): 3, (1, 2): 3, (0, 3): 1}
    assert out.exact


@settings(max_examples=30, deadline=None)
@given(st.lists(small, min_size=3, max_size=3), st.lists(small, min_size=3, max_size=3))
def test_compose_agrees_with_evaluation(c1, c2):
    p = HomPolynomial.from_binary(c1, 2)
    q0 = HomPolynomial.from_binary([1, 0, 1], 2)
    q1 = HomPolynomial.from_binary(c2, 2)
    comp = p.compose([q0, q1])
    w = np.array([0.3 + 0.1j, -0.7 + 0.4j])
    direct = p.evaluate([q0.evaluate(w), q1.evaluate(w)])
    assert abs(comp.evaluate(w) - direct) <= 1e-10 * max(1, abs(direct))


def test_vectorized_evaluation(rng):
    p = HomPolynomial(3, 2, {(2, 0, 0): 1, (0, 1, 1): 2 - 1j})
    W = rng.normal(size=(3, 50)) + 1j * rng.normal(size=(3, 50))
    vals = p.evaluate(list(W))
    assert np.allclose(vals, W[0] ** 2 + (2 - 1j) * W[1] * W[2])


def test_scalar_match_exact_and_none():
    p = HomPolynomial(2, 1, {(1, 0): 2, (0, 1): 4})
    q = HomPolynomial(2, 1, {(1, 0): 1, (0, 1): 2})
    assert scalar_match([p], [q], 0) == 2
    r = HomPolynomial(2, 1, {(1, 0): 1, (0, 1): 3})
    assert scalar_match([p], [r], 0) is None


def test_json_roundtrip_exact_and_float():
    p = HomPolynomial(2, 2, {(2, 0): Fraction(1, 3), (1, 1): GaussianRational(0, 2)})
    assert HomPolynomial.from_json(p.to_json()) == p
    q = p.to_numeric()
    assert HomPolynomial.from_json(q.to_json()).terms == q.terms


def test_companion_roots_oracle():
    # (z - 1)(z - 2)(z + 3) = z^3 - 7z + 6
    r = np.sort_complex(companion_roots([6, -7, 0, 1]))
    assert np.allclose(r, [-3, 1, 2])


def test_binary_roots_include_infinity():
    # w0 * w1: roots 0 and infinity
    r = binary_roots([0, 1, 0])
    assert r.shape == (2, 2)
    assert sorted(int(abs(row[0]) > 0.5) for row in r) == [0, 1]


def test_aberth_roots_of_unity():
    n = 12
    ratio = lambda z: (z ** n - 1) / (n * z ** (n - 1))
    z = aberth(ratio, n)
    assert np.allclose(np.abs(z ** n - 1), 0, atol=1e-12)
    assert len({(round(x.real, 8), round(x.imag, 8)) for x in z}) == n
