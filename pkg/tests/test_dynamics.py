import math

import numpy as np
import pytest

from holodyn.catalog import chebyshev_map, power_map, product_pair_p2
from holodyn.dynamics import (OrbifoldWeights, classify, common_periodic_points,
                              decreasing_with_noise, equidistribution_stat, minimal_period,
                              multipliers, orbifold_check, periodic_points_1d, periodic_points_2d,
                              postcritical_orbit, preimage_tree, repelling_image_check,
                              star_discrepancy, verify_periodic)
from holodyn.errors import PreconditionError, ResourceError
from holodyn.projmap import ProjectivePoint, affine_polynomial_map, apply_batch, projective_distance


def _affine(pts):
    return np.array([p.point.affine() if hasattr(p, "point") else p.affine() for p in pts])


def test_power_map_period_three():
    # z^8 = z: 0, infinity and the seven 7th roots of unity
    pts = periodic_points_1d(power_map(2), 3)
    assert sum(p.multiplicity for p in pts) == 9
    periods = sorted(p.period for p in pts)
    assert periods == [1, 1, 1] + [3] * 6
    for p in pts:
        if not p.point.is_infinite() and abs(p.point.affine()) > 0.5:
            assert abs(abs(p.multiplier[0]) - 2 ** p.period) < 1e-8
            assert p.classification == "repelling"


def test_chebyshev_fixed_point_multipliers():
    # 2z^2 - 1 = z at z = 1 (multiplier 4) and z = -1/2 (multiplier -2); infinity is superattracting
    pts = periodic_points_1d(chebyshev_map(2), 1)
    found = {}
    for p in pts:
        key = "inf" if p.point.is_infinite() else round(p.point.affine().real, 9)
        found[key] = p.multiplier[0]
    assert set(found) == {"inf", 1.0, -0.5}
    assert abs(found[1.0] - 4) < 1e-10
    assert abs(found[-0.5] + 2) < 1e-10
    assert abs(found["inf"]) < 1e-10


def test_multiple_fixed_point_counted():
    # z + z^2 has a parabolic (double) fixed point at 0
    f = affine_polynomial_map([0, 1, 1])
    pts = periodic_points_1d(f, 1)
    assert sum(p.multiplicity for p in pts) == 3
    zero = [p for p in pts if not p.point.is_infinite() and abs(p.point.affine()) < 1e-6]
    assert zero[0].multiplicity == 2
    assert zero[0].classification == "indifferent"


@pytest.mark.parametrize("d,n", [(2, 4), (3, 3), (4, 2)])
def test_chebyshev_counts_and_verification(d, n):
    f = chebyshev_map(d)
    pts = periodic_points_1d(f, n)
    assert sum(p.multiplicity for p in pts) == d ** n + 1
    assert verify_periodic(f, pts)


def test_cap_enforced():
    with pytest.raises(ResourceError):
        periodic_points_1d(power_map(3), 8, cap=1000)


def test_classify_bands():
    assert classify([2.0]) == "repelling"
    assert classify([0.5]) == "attracting"
    assert classify([1.0 + 1e-8]) == "indifferent"
    assert classify([2.0, 0.5]) == "mixed"


def test_minimal_period_of_two_cycle():
    # z^2 - 1 has the cycle 0 -> -1 -> 0
    f = affine_polynomial_map([-1, 0, 1])
    w = np.array([1.0, 0.0], dtype=complex)
    assert minimal_period(f, w, 4) == 2
    assert abs(multipliers(f, w, 2)[0]) < 1e-12


def test_p2_product_search_finds_fixed_points():
    pair = product_pair_p2(power_map(2), power_map(3))
    search = periodic_points_2d(pair.f1, 1, seeds=100)
    assert search.expected == 7
    for p in search.points:
        w = p.point.array
        assert projective_distance(apply_batch(pair.f1, w[:, None], 1)[:, 0], w) < 1e-10
    # (1, 1) in affine coordinates is fixed with multipliers (2, 2)
    ones = [p for p in search.points
            if projective_distance(p.point.array, np.ones(3)) < 1e-8]
    assert ones and np.allclose(sorted(np.abs(ones[0].multiplier)), [2, 2])


def test_preimages_of_one_under_square():
    pts = preimage_tree(power_map(2), ProjectivePoint.from_affine(1), 3)
    z = np.array([p.affine() for p in pts])
    assert len(z) == 8
    assert np.allclose(z ** 8, 1)
    assert len(set(np.round(np.angle(z), 8))) == 8


def test_preimage_tree_is_deterministic():
    a = ProjectivePoint.from_affine(0.3)
    p1 = preimage_tree(chebyshev_map(2), a, 5)
    p2 = preimage_tree(chebyshev_map(2), a, 5)
    assert [p.coords for p in p1] == [p.coords for p in p2]


def test_star_discrepancy_oracle():
    # the midpoint rule has star discrepancy 1 / (2n)
    n = 20
    u = (np.arange(n) + 0.5) / n
    assert star_discrepancy(u) == pytest.approx(1 / (2 * n))


def test_equidistribution_needs_enough_points():
    with pytest.raises(PreconditionError):
        equidistribution_stat([ProjectivePoint.from_affine(1)] * 5)


def test_chebyshev_preimages_arcsine():
    a = ProjectivePoint.from_affine(0.3)
    vals = [equidistribution_stat(preimage_tree(chebyshev_map(2), a, n), "uniform-interval-cos")
            .discrepancy for n in (4, 6, 8)]
    assert decreasing_with_noise(vals)
    assert vals[-1] < 0.01


def test_interval_reference_needs_real_points():
    # backward orbit of a nonreal point never reaches [-1, 1]
    pts = preimage_tree(chebyshev_map(2), ProjectivePoint.from_affine(0.3 + 0.1j), 5)
    with pytest.raises(PreconditionError):
        equidistribution_stat(pts, "uniform-interval-cos")


def test_common_periodic_chebyshev():
    common = common_periodic_points(chebyshev_map(2), chebyshev_map(3), 2)
    pts = sorted(round(c.point.point.affine().real, 8) for c in common
                 if not c.point.point.is_infinite())
    assert 1.0 in pts
    assert all(c.image_repelling_f1 for c in common if c.repelling_f1)


def test_common_periodic_rejects_noncommuting():
    with pytest.raises(PreconditionError):
        common_periodic_points(power_map(2), chebyshev_map(2), 1)


def test_repelling_images_stay_repelling():
    res = repelling_image_check(chebyshev_map(2), chebyshev_map(3), 3)
    assert res and all(ok for _, ok in res)


@pytest.mark.parametrize("c,expected", [(-1, True), (1j, True), (0, True)])
def test_postcritical_finite(c, expected):
    f = affine_polynomial_map([c, 0, 1])
    assert postcritical_orbit(f).finite is expected


def test_postcritical_infinite_orbit_not_finite():
    # critical orbit of z^2 + 0.3 escapes slowly and never lands
    rep = postcritical_orbit(affine_polynomial_map([0.3, 0, 1]), max_iters=200)
    assert rep.finite is not True
    assert rep.to_json()["finite"] in ("unknown", False)


def test_postcritical_p2_product():
    pair = product_pair_p2(chebyshev_map(2), chebyshev_map(2))
    assert postcritical_orbit(pair.f1).finite is True


def test_orbifold_chebyshev_and_power():
    t2 = chebyshev_map(2)
    ok = orbifold_check(t2, OrbifoldWeights([(1, 2), (-1, 2), ("inf", math.inf)]))
    assert ok.valid
    z2 = power_map(2)
    assert orbifold_check(z2, OrbifoldWeights([(0, math.inf), ("inf", math.inf)])).valid


def test_orbifold_violation_located():
    bad = orbifold_check(chebyshev_map(2), OrbifoldWeights([(1, 3), (-1, 2), ("inf", math.inf)]))
    assert not bad.valid
    assert any(abs(complex(*v["point"][1]) / complex(*v["point"][0]) - 1) < 1e-8
               or abs(complex(*v["image"][1]) / complex(*v["image"][0]) - 1) < 1e-8
               for v in bad.violations)


def test_orbifold_weights_validate():
    with pytest.raises(ValueError):
        OrbifoldWeights([(0, 0)])
