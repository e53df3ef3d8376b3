from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holodyn.catalog import chebyshev_map
from holodyn.errors import PreconditionError, UnsupportedError
from holodyn.normalform import (Germ, Series, TriangularMap, common_triangularize,
                                conjugacy_residual, germ_from_map, inverse_germ,
                                is_lambda_triangular, linear_germ, n_independence, poincare_map,
                                resonances, semiconjugacy_residual, sternberg_normalize)
from holodyn.projmap import ProjectivePoint


def germ2(c1, c2, order=10):
    return Germ([c1, c2], order)


def test_series_arithmetic():
    x = Series.variable(2, 0, 4)
    y = Series.variable(2, 1, 4)
    p = (x + y) ** 2
    assert p.terms == {(2, 0): 1, (1, 1): 2, (0, 2): 1}
    assert ((x + y) ** 5).terms == {}  # truncated at order 4


def test_series_reciprocal():
    x = Series.variable(1, 0, 6)
    inv = (1 - x).reciprocal()
    assert inv.terms == {(i,): 1 for i in range(7)}


def test_inverse_germ_roundtrip():
    g = germ2({(1, 0): 2}, {(0, 1): 3, (2, 0): Fraction(1, 2), (1, 1): 1})
    h = inverse_germ(g)
    assert g.compose(h) == Germ.identity(2, 10)


def test_resonance_enumeration():
    # 2^2 = 4: single resonance z_1^2 in component 2
    assert resonances([2, 4]) == [(2, (2, 0))]
    assert resonances([2, 3]) == []
    # 2^3 = 8 and 2 * ... : only z_1^3
    assert resonances([2, 8]) == [(2, (3, 0))]


def test_resonances_need_dilation():
    with pytest.raises(UnsupportedError):
        resonances([0.5, 2])


def test_nonresonant_exact_normalization():
    g = germ2({(1, 0): 2}, {(0, 1): 3, (2, 0): 1})
    phi, Lam = sternberg_normalize(g)
    assert Lam.nonlinear_count() == 0
    assert tuple(Lam.eigenvalues) == (2, 3)
    assert phi == germ2({(1, 0): 1}, {(0, 1): 1, (2, 0): 1})
    assert conjugacy_residual(g, phi, Lam) == 0


def test_resonant_term_kept():
    g = germ2({(1, 0): 2}, {(0, 1): 4, (2, 0): 1})
    phi, Lam = sternberg_normalize(g)
    assert Lam.resonant_terms[1] == {(2, 0): 1}
    assert phi == Germ.identity(2, 10)


def test_one_dimensional_linearization_oracle():
    # Koenigs function of 2z + z^2: phi(u) = ... solves phi(2u) = g(phi(u)); check residual
    g = Germ([{(1,): 2, (2,): 1}], 12)
    phi, Lam = sternberg_normalize(g)
    assert Lam.nonlinear_count() == 0
    # phi'' (0) / 2 = 1 / (4 - 2) from the degree-2 homological equation
    assert phi.components[0].coeff((2,)) == Fraction(1, 2)
    assert conjugacy_residual(g, phi, Lam) == 0


def _random_germ(rng, order=10):
    k = 2
    l1 = complex(*rng.uniform(1.2, 2.5, 2) * [1, 0.3])
    l2 = complex(*rng.uniform(1.2, 2.5, 2) * [1, 0.3])
    A = np.array([[l1, 0], [rng.normal(), l2]])
    P = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
    M = P @ A @ np.linalg.inv(P)
    comps = []
    for j in range(k):
        t = {(1, 0): M[j, 0], (0, 1): M[j, 1]}
        for a in [(2, 0), (1, 1), (0, 2), (3, 0), (1, 2)]:
            t[a] = complex(*rng.normal(size=2)) * 0.5
        comps.append(t)
    return Germ(comps, order)


def test_random_dilating_germs(rng):
    for _ in range(20):
        g = _random_germ(rng)
        phi, Lam = sternberg_normalize(g)
        assert is_lambda_triangular(Lam)
        assert conjugacy_residual(g, phi, Lam) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.integers(-3, 3))
def test_exact_diagonal_germs(a, b, c):
    lam1, lam2 = min(a, b), max(a, b)
    g = germ2({(1, 0): lam1, (0, 2): 0}, {(0, 1): lam2, (2, 0): c, (1, 1): 1}, 6)
    phi, Lam = sternberg_normalize(g)
    assert conjugacy_residual(g, phi, Lam) == 0


def test_triangular_map_validation():
    with pytest.raises(PreconditionError):
        TriangularMap([2, 4], resonant_terms=[{(2, 0): 1}, {}])  # not triangular in component 1
    T = TriangularMap([2, 4], resonant_terms=[{}, {(2, 0): 1}])
    z = np.array([0.3 + 0.1j, -0.2j])
    assert np.allclose(T.inverse(T.evaluate(z)), z)


def test_common_triangularization_chebyshev():
    p = ProjectivePoint.from_affine(1)
    g2 = germ_from_map(chebyshev_map(2), p, 10)
    g3 = germ_from_map(chebyshev_map(3), p, 10)
    cnf = common_triangularize(g2, g3)
    assert complex(cnf.Lambda1.eigenvalues[0]) == 4
    assert cnf.Lambda2.components[0].terms == {(1,): 9}
    assert cnf.leak <= 1e-8


def test_common_triangularization_needs_commuting():
    g = Germ([{(1,): 2, (2,): 1}], 6)
    h = Germ([{(1,): 3, (3,): 1}], 6)
    with pytest.raises(PreconditionError):
        common_triangularize(g, h)


def test_linear_germ_of_jordan_block():
    g = linear_germ(np.array([[3.0, 0.0], [1.0, 3.0]]), 5)
    phi, Lam = sternberg_normalize(g)
    assert conjugacy_residual(g, phi, Lam) <= 1e-12


def test_germ_from_map_exact():
    g = germ_from_map(chebyshev_map(2), ProjectivePoint.from_affine(1), 6)
    # 2(1 + u)^2 - 1 - 1 = 4u + 2u^2
    assert g.components[0].terms == {(1,): 4, (2,): 2}


def test_germ_from_map_rejects_nonfixed():
    with pytest.raises(PreconditionError):
        germ_from_map(chebyshev_map(2), ProjectivePoint.from_affine(0.3), 6)


def test_poincare_map_chebyshev(rng):
    # the global map of T2 at 1 is z -> cosh(sqrt(z)) type, entire; check its defining identities
    f = chebyshev_map(2)
    pm = poincare_map(f, ProjectivePoint.from_affine(1))
    Z = (rng.normal(size=(1, 50)) + 1j * rng.normal(size=(1, 50)))
    Z = Z / np.abs(Z) * rng.uniform(0, 100 * pm.radius, 50)
    assert semiconjugacy_residual(f, pm, Z) <= 1e-6
    assert n_independence(pm, Z) <= 1e-8
