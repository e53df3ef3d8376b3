import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import chebyshev as npcheb

from holodyn.catalog import (FAMILIES, Lattice, catalog_list, cheb_cheb_pair, cheb_power_pair,
                             chebyshev_coeffs, chebyshev_map, chebyshev_pair, duplication,
                             lattes_fit, lattes_pair, monomial_pair_p2, power_map, power_pair,
                             product_pair_p2, square_lattice, symmetric_pair, symmetric_product,
                             symmetric_residual, valid_chebyshev_signs, weierstrass_p)
from holodyn.errors import ConstructionError, PoleError
from holodyn.projmap import apply_batch, commutes, projective_distance


@pytest.mark.parametrize("d", range(0, 10))
def test_chebyshev_coefficients_match_numpy(d):
    ref = npcheb.cheb2poly([0] * d + [1])
    assert chebyshev_coeffs(d) == [int(round(c)) for c in ref]


@settings(max_examples=30)
@given(st.integers(1, 8), st.floats(0, 3.1))
def test_chebyshev_cosine_identity(d, t):
    c = chebyshev_coeffs(d)
    assert abs(np.polyval(c[::-1], math.cos(t)) - math.cos(d * t)) < 1e-9


def test_power_pair_root_of_unity_constraint():
    pair = power_pair(3, 2, lam=-1)  # lambda^2 = 1
    assert pair.certificate.commutes
    with pytest.raises(ConstructionError):
        power_pair(3, 2, lam=1j)
    # negative first exponent: lambda^(d1 + 1) = 1
    assert power_pair(2, 2, signs=(-1, 1), lam=complex(-0.5, math.sqrt(3) / 2)).certificate.commutes


def test_chebyshev_sign_rules():
    # -T_d commutes with T_e when e is odd
    assert (1, -1) in valid_chebyshev_signs(3, 3)
    assert valid_chebyshev_signs(2, 2) == [(1, 1), (-1, -1)]  # a map commutes with itself
    with pytest.raises(ConstructionError, match="coefficient"):
        chebyshev_pair(2, 2, (-1, 1))


def test_monomial_pair_requires_commuting_permutations():
    assert monomial_pair_p2((1, 0, 2), (0, 1, 2), 2, 3).certificate.commutes
    with pytest.raises(ConstructionError):
        monomial_pair_p2((1, 0, 2), (0, 2, 1), 2, 3)


def test_product_pair_scaled_lift():
    # mu != 1 for the lifts (w0^2, 4 w1^2) and (w0^3, 16 w1^3); lambda fixes it
    h1 = power_map(2, lam=4)
    h2 = power_map(3, lam=16)
    pair = product_pair_p2(h1, h2)
    assert pair.certificate.commutes
    mu = pair.parameters["mu"]
    lam = complex(pair.parameters["lambda"])
    assert abs(lam ** 1 * complex(mu) - 1) < 1e-12


def test_cheb_power_rejects_negative_power():
    with pytest.raises(ConstructionError):
        cheb_power_pair(2, 3, power_signs=(-1, 1))
    assert cheb_power_pair(2, 3).certificate.commutes


def test_cheb_cheb_swap():
    assert cheb_cheb_pair(2, 3, swap=True).certificate.commutes


@pytest.mark.parametrize("h", [power_map(2), power_map(3), chebyshev_map(2), chebyshev_map(3)])
def test_symmetric_product_residual(h):
    f = symmetric_product(h)
    assert symmetric_residual(f, h, 200, seed=3) <= 1e-10


def test_symmetric_square_of_z2_exact():
    f = symmetric_product(power_map(2))
    # (s, p) -> (s^2 - 2p, p^2)
    assert f.lift[1].terms == {(0, 2, 0): 1, (1, 0, 1): -2}
    assert f.lift[2].terms == {(0, 0, 2): 1}


def test_symmetric_pair_commutes():
    assert symmetric_pair(chebyshev_map(2), chebyshev_map(3)).certificate.residual == 0


def test_square_lattice_invariants():
    L = square_lattice()
    assert abs(L.g2 - math.gamma(0.25) ** 8 / (16 * math.pi ** 2)) < 1e-9
    assert L.g3 == 0
    hexagonal = Lattice(1, complex(0.5, math.sqrt(3) / 2))
    assert abs(hexagonal.g2) < 1e-10 * abs(hexagonal.g3)


def _laurent_p(g2, g3, z, terms=30):
    c = {2: g2 / 20, 3: g3 / 28}
    for k in range(4, terms):
        c[k] = 3 / ((2 * k + 1) * (k - 3)) * sum(c[m] * c[k - m] for m in range(2, k - 1))
    return 1 / z ** 2 + sum(c[k] * z ** (2 * k - 2) for k in range(2, terms))


@pytest.mark.parametrize("w2", [1j, complex(0.3, 1.2), complex(0.5, math.sqrt(3) / 2)])
def test_weierstrass_matches_laurent_series(w2):
    L = Lattice(1, w2)
    for z in [0.1, 0.2 + 0.15j, -0.05 + 0.3j]:
        wp, _ = weierstrass_p(L, z)
        ref = _laurent_p(L.g2, L.g3, z)
        assert abs(wp - ref) <= 1e-10 * abs(ref)


def test_weierstrass_differential_equation(rng):
    L = Lattice(complex(1, 0.2), complex(-0.4, 1.3))
    z = rng.uniform(0.1, 0.9, 20) * L.w1 + rng.uniform(0.1, 0.9, 20) * L.w2
    wp, dwp = weierstrass_p(L, z)
    lhs = dwp ** 2
    rhs = 4 * wp ** 3 - L.g2 * wp - L.g3
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-9


def test_weierstrass_periodic_and_pole():
    L = square_lattice()
    z = 0.3 + 0.2j
    assert abs(weierstrass_p(L, z)[0] - weierstrass_p(L, z + 1 - 2j)[0]) < 1e-9
    with pytest.raises(PoleError):
        weierstrass_p(L, 1 + 1j)


def test_duplication_formula():
    L = square_lattice()
    z = np.array([0.17 + 0.31j, 0.4 + 0.05j])
    assert np.allclose(weierstrass_p(L, 2 * z)[0], duplication(L, weierstrass_p(L, z)[0]),
                       rtol=1e-9)


def test_lattes_multiplication_by_two_matches_duplication():
    L = square_lattice()
    fit = lattes_fit(L, 2)
    x = np.linspace(-3, 3, 7) + 0.5j
    W = np.stack([np.ones_like(x), x])
    out = fit.map.lift_eval(W)
    assert np.allclose(out[1] / out[0], duplication(L, x), rtol=1e-8)


def test_lattes_rejects_bad_multiplier():
    with pytest.raises(ConstructionError):
        lattes_fit(square_lattice(), 1 + 1j + 0.1)
    with pytest.raises(ConstructionError):
        lattes_fit(Lattice(1, complex(0.3, 1.1)), 1j)  # not a CM lattice


def test_lattes_pair_commutes():
    pair = lattes_pair(square_lattice(), 1 + 2j, 1 - 2j)
    assert pair.f1.degree == 5
    assert pair.certificate.residual <= 1e-7


def test_catalog_list_covers_families():
    assert [r["family"] for r in catalog_list()] == list(FAMILIES)
