import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holodyn.catalog import chebyshev_map, power_map
from holodyn.errors import DomainError, PreconditionError
from holodyn.green import (GreenEvaluator, default_iterations, green_affine, green_equality_report,
                           green_grid, green_value, read_pgm, write_pgm)
from holodyn.projmap import scale_map


def _samples(rng, k, n):
    return rng.normal(size=(k + 1, n)) + 1j * rng.normal(size=(k + 1, n))


def test_power_map_closed_form(rng):
    # for the lift (w0^2, w1^2) the Green function is log of the sup norm
    ev = GreenEvaluator.build(power_map(2), 30)
    W = _samples(rng, 1, 50)
    assert np.allclose(ev.values(W), np.log(np.abs(W).max(axis=0)), atol=1e-12)


def test_chebyshev_escape_rate_joukowski():
    # z = (u + 1/u) / 2 with |u| >= 1 has escape rate log|u| under 2z^2 - 1
    ev = GreenEvaluator.build(chebyshev_map(2), 40)
    for u in [1.5, 2j, -3 + 1j, 1.05 * np.exp(0.3j)]:
        z = (u + 1 / u) / 2
        assert abs(green_affine(ev, z) - np.log(abs(u))) < 1e-8


def test_interval_has_zero_escape_rate():
    ev = GreenEvaluator.build(chebyshev_map(3), 30)
    assert green_affine(ev, 0.37) == pytest.approx(0.0, abs=1e-9)


def test_error_bound_decays_geometrically():
    ev = GreenEvaluator.build(chebyshev_map(2), 10)
    assert ev.error_bound(20) == pytest.approx(ev.error_bound(10) / 2 ** 10)
    assert default_iterations(2, ev.bound_M, 1e-8) >= 1


def test_error_bound_is_honest(rng):
    ev = GreenEvaluator.build(chebyshev_map(2), 60)
    W = _samples(rng, 1, 40)
    ref = ev.values(W)
    for n in (5, 10, 15):
        assert np.abs(ev.values(W, n) - ref).max() <= ev.error_bound(n)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 10), st.floats(0, 6.28))
def test_homogeneity(x, y, r, arg):
    ev = GreenEvaluator.build(chebyshev_map(3), 30)
    w = np.array([1.0, complex(x, y)])
    c = r * np.exp(1j * arg)
    g, _ = green_value(ev, w)
    gc, _ = green_value(ev, c * w)
    assert abs(gc - np.log(r) - g) <= 1e-9


def test_functional_equation(rng):
    f = chebyshev_map(3)
    ev = GreenEvaluator.build(f, 30)
    W = _samples(rng, 1, 30)
    FW = f.lift_eval(W)
    assert np.abs(ev.values(FW) - 3 * ev.values(W)).max() <= 1e-7


def test_origin_rejected():
    ev = GreenEvaluator.build(power_map(2), 5)
    with pytest.raises(DomainError):
        ev.values(np.zeros((2, 1)))


def test_equality_requires_commuting():
    with pytest.raises(PreconditionError):
        green_equality_report(power_map(2), chebyshev_map(2), np.ones((2, 3)))


def test_equality_after_normalization(rng):
    # the scaled lift 5 z^3 still commutes up to theta; normalized Green functions agree
    W = _samples(rng, 1, 20)
    rep = green_equality_report(power_map(2), scale_map(power_map(3), 5), W, 40)
    assert rep.residual <= 1e-9


def test_grid_threads_do_not_change_result():
    ev = GreenEvaluator.build(chebyshev_map(2), 20)
    a = green_grid(ev, (-2, 2, -1, 1), (16, 8), threads=1)
    b = green_grid(ev, (-2, 2, -1, 1), (16, 8), threads=4)
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == (8, 16)


def test_pgm_roundtrip(tmp_path):
    F = np.arange(12, dtype=float).reshape(3, 4)
    write_pgm(tmp_path / "x.pgm", F, comment="test")
    raw = read_pgm(tmp_path / "x.pgm")
    assert raw.shape == (3, 4)
    assert raw[0, 0] == 0 and raw[-1, -1] == 65535
