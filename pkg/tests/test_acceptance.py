"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the summary section at the end
lists every criterion with its measured value.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from holodyn.catalog import (Lattice, cheb_cheb_pair, cheb_power_pair, chebyshev_map,
                             duplication, lattes_fit, lattes_pair, monomial_pair_p2, power_map,
                             power_pair, product_pair_p2, square_lattice, symmetric_product,
                             symmetric_residual, weierstrass_p)
from holodyn.cli import main as cli_main
from holodyn.dynamics import (OrbifoldWeights, equidistribution_stat, orbifold_check,
                              periodic_points_1d, postcritical_orbit, preimage_tree)
from holodyn.green import GreenEvaluator, green_equality_report
from holodyn.normalform import (Germ, common_triangularize, conjugacy_residual, germ_from_map,
                                n_independence, poincare_map, semiconjugacy_residual,
                                sternberg_normalize)
from holodyn.projmap import ProjectivePoint, apply_batch, projective_distance

SEED = 2024


@pytest.fixture(scope="module")
def lattes():
    L = square_lattice()
    pair = lattes_pair(L, 1 + 2j, 1 - 2j, seed=SEED)
    return L, pair


def _sphere(rng, k, n):
    W = rng.normal(size=(k + 1, n)) + 1j * rng.normal(size=(k + 1, n))
    return W / np.linalg.norm(W, axis=0)


# ---------------------------------------------------------------------------

def test_criterion_01_chebyshev_exact(acceptance):
    t0 = time.perf_counter()
    bad = []
    for d1 in range(2, 9):
        for d2 in range(2, 9):
            f, g = chebyshev_map(d1), chebyshev_map(d2)
            fg = [p.compose(list(g.lift)) for p in f.lift]
            gf = [p.compose(list(f.lift)) for p in g.lift]
            ref = chebyshev_map(d1 * d2).lift
            if not all(a.terms == b.terms == c.terms for a, b, c in zip(fg, gf, ref)):
                bad.append((d1, d2))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1.0
    acceptance(1, ok, f"49 pairs, mismatches {bad}, {dt:.3f} s")
    assert ok


def test_criterion_02_shared_green(acceptance, lattes):
    _, lpair = lattes
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    pairs = {"z^2,z^3": (power_map(2), power_map(3)),
             "T2,T3": (chebyshev_map(2), chebyshev_map(3)),
             "lattes": (lpair.f1, lpair.f2)}
    worst = {}
    for name, (f1, f2) in pairs.items():
        W = _sphere(rng, 1, 200)
        worst[name] = green_equality_report(f1, f2, W, iterations=40, seed=SEED).residual
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and dt < 5.0
    acceptance(2, ok, ", ".join(f"{k}: {v:.1e}" for k, v in worst.items()) + f"; {dt:.2f} s")
    assert ok


def _small_catalog():
    """Catalog maps of degree <= 5, one representative per family and parameter."""
    maps = []
    for d in range(2, 6):
        maps += [power_map(d), power_map(d, -1), chebyshev_map(d), chebyshev_map(d, -1)]
    maps += [power_pair(3, 2, lam=-1).f2]
    maps += list(monomial_pair_p2((1, 0, 2), (0, 1, 2), 2, 3).__dict__[k] for k in ("f1", "f2"))
    maps += [product_pair_p2(chebyshev_map(2), chebyshev_map(3)).f1,
             product_pair_p2(power_map(2, lam=4), power_map(3, lam=16)).f2,
             cheb_power_pair(2, 3).f1, cheb_power_pair(2, 3).f2,
             cheb_cheb_pair(2, 3, swap=True).f1, cheb_cheb_pair(2, 3).f2]
    maps += [symmetric_product(h) for h in (power_map(2), chebyshev_map(3))]
    L = square_lattice()
    maps += [lattes_fit(L, 2).map, lattes_fit(L, 1 + 2j).map, lattes_fit(L, 1 - 2j).map]
    return maps


def test_criterion_03_green_functional_equations(acceptance):
    rng = np.random.default_rng(SEED)
    worst_f = worst_h = 0.0
    maps = _small_catalog()
    for f in maps:
        assert f.degree <= 5
        ev = GreenEvaluator.build(f, seed=SEED, target=1e-11)
        W = _sphere(rng, f.k, 100) * rng.uniform(0.2, 5, 100)
        g = ev.values(W)
        worst_f = max(worst_f, float(np.max(np.abs(ev.values(f.lift_eval(W)) - f.degree * g))))
        c = rng.normal(size=100) + 1j * rng.normal(size=100)
        worst_h = max(worst_h, float(np.max(np.abs(ev.values(c * W) - np.log(np.abs(c)) - g))))
    ok = worst_f <= 1e-7 and worst_h <= 1e-7
    acceptance(3, ok, f"{len(maps)} maps: |G(F)-dG| {worst_f:.1e}, |G(cw)-log|c|-G| {worst_h:.1e}")
    assert ok


def _fd_multiplier(f, w, p, h=1e-6):
    """Central-difference derivative of ``f^p`` in the affine chart containing ``w``."""
    w = w / np.abs(w).max()
    if abs(w[0]) >= abs(w[1]):
        z = w[1] / w[0]
        g = lambda s: (lambda o: o[1] / o[0])(apply_batch(f, np.array([[1.0], [s]]), p)[:, 0])
    else:
        z = w[0] / w[1]
        g = lambda s: (lambda o: o[0] / o[1])(apply_batch(f, np.array([[s], [1.0]]), p)[:, 0])
    return (g(z + h) - g(z - h)) / (2 * h)


def test_criterion_04_periodic_counts(acceptance):
    L = square_lattice()
    maps = {"z^2": power_map(2), "z^3": power_map(3), "z^-2": power_map(2, -1),
            "-z^3": power_pair(3, 3, lam=-1).f2, "T2": chebyshev_map(2), "T3": chebyshev_map(3),
            "-T3": chebyshev_map(3, -1), "T4": chebyshev_map(4),
            "lattes2": lattes_fit(L, 2).map, "lattes1+2i": lattes_fit(L, 1 + 2j).map}
    failures = []
    repelling_checked = 0
    for name, f in maps.items():
        for n in range(1, 6):
            pts = periodic_points_1d(f, n)
            total = sum(p.multiplicity for p in pts)
            if total != f.degree ** n + 1:
                failures.append(f"{name} n={n}: {total}")
            for p in pts:
                if p.classification == "repelling" and p.period <= 2:
                    repelling_checked += 1
                    m = _fd_multiplier(f, p.point.array, p.period)
                    if not abs(m) > 1:
                        failures.append(f"{name} n={n}: repelling point with |m|={abs(m):.3g}")
                elif p.classification == "repelling":
                    repelling_checked += 1
                    if not np.all(np.abs(p.multiplier) > 1):
                        failures.append(f"{name} n={n}: multiplier modulus <= 1")
    ok = not failures
    acceptance(4, ok, f"{len(maps)} maps x n<=5, {repelling_checked} repelling points checked; "
                      f"failures {failures[:3]}")
    assert ok


def test_criterion_05_equidistribution(acceptance):
    f = power_map(2)
    a = ProjectivePoint.from_affine(0.7 + 0.2j)
    disc = [equidistribution_stat(preimage_tree(f, a, n), "uniform-circle").discrepancy
            for n in (4, 6, 8, 10)]
    decreasing = all(b < a_ * 1.1 for a_, b in zip(disc, disc[1:]))
    ok = decreasing and disc[-1] <= 0.02
    acceptance(5, ok, "discrepancy " + ", ".join(f"{d:.2e}" for d in disc))
    assert ok


def test_criterion_06_sternberg(acceptance):
    g = Germ([{(1, 0): 2}, {(0, 1): 3, (2, 0): 1}], 10)
    phi, Lam = sternberg_normalize(g)
    want_phi = Germ([{(1, 0): 1}, {(0, 1): 1, (2, 0): 1}], 10)
    ok_a = phi == want_phi and Lam.nonlinear_count() == 0 and list(Lam.eigenvalues) == [2, 3]
    ok_a = ok_a and all(isinstance(c, (int, Fraction)) for s in phi.components
                        for c in s.terms.values())
    g = Germ([{(1, 0): 2}, {(0, 1): 4, (2, 0): 1}], 10)
    phi, Lam = sternberg_normalize(g)
    ok_b = phi == Germ.identity(2, 10) and Lam.resonant_terms == [{}, {(2, 0): 1}]
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        l1, l2 = sorted(rng.uniform(1.2, 3.0, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi, 2)),
                        key=abs)
        A = np.array([[l1, 0], [rng.normal(), l2]])
        P = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
        M = P @ A @ np.linalg.inv(P)
        comps = []
        for j in range(2):
            t = {(1, 0): M[j, 0], (0, 1): M[j, 1]}
            for a in [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (0, 3)]:
                t[a] = complex(*rng.normal(size=2)) * 0.5
            comps.append(t)
        g = Germ(comps, 10)
        phi, Lam = sternberg_normalize(g)
        worst = max(worst, conjugacy_residual(g, phi, Lam))
    ok = ok_a and ok_b and worst <= 1e-9
    acceptance(6, ok, f"exact cases {ok_a}/{ok_b}; random residual max {worst:.1e}")
    assert ok


def test_criterion_07_common_triangularization(acceptance):
    p = ProjectivePoint.from_affine(1)
    g2 = germ_from_map(chebyshev_map(2), p, 10)
    g3 = germ_from_map(chebyshev_map(3), p, 10)
    cnf = common_triangularize(g2, g3)
    lam1 = cnf.Lambda1.to_germ(10).components[0].terms
    lam2 = cnf.Lambda2.components[0].terms
    ok = lam1 == {(1,): 4} and lam2 == {(1,): 9} and cnf.leak <= 1e-8
    acceptance(7, ok, f"Lambda1 {lam1}, Lambda2 {lam2}, leak {cnf.leak:.1e}")
    assert ok


def _ball_samples(rng, k, n, r):
    Z = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    return Z / np.abs(Z).max(axis=0) * rng.uniform(0, r, n)


def test_criterion_08_poincare_extension(acceptance, lattes):
    rng = np.random.default_rng(SEED)
    _, lpair = lattes
    cases = {"T2 at 1": (chebyshev_map(2), ProjectivePoint.from_affine(1))}
    for i, p in enumerate(q for q in periodic_points_1d(lpair.f1, 1)
                          if q.classification == "repelling"):
        cases[f"lattes #{i}"] = (lpair.f1, p.point)
    out, ok = [], True
    worst_s = worst_n = 0.0
    for name, (f, q) in cases.items():
        pm = poincare_map(f, q)
        Z = _ball_samples(rng, f.k, 100, 100 * pm.radius)
        s = semiconjugacy_residual(f, pm, Z)
        n = n_independence(pm, Z)
        worst_s, worst_n = max(worst_s, s), max(worst_n, n)
        ok = ok and s <= 1e-6 and n <= 1e-8
        out.append(f"{name} r={pm.radius:g}")
    acceptance(8, ok, f"{len(cases)} fixed points ({', '.join(out)}); semiconj max {worst_s:.1e}, "
                      f"n-indep max {worst_n:.1e}")
    assert ok


def test_criterion_09_lattes_construction(acceptance):
    t0 = time.perf_counter()
    L = square_lattice()
    fit = lattes_fit(L, 1 + 2j, seed=SEED)
    # fresh held-out points, independent of the fit's own split
    rng = np.random.default_rng(SEED + 1)
    z = rng.uniform(0.05, 0.95, 100) * L.w1 + rng.uniform(0.05, 0.95, 100) * L.w2
    x = weierstrass_p(L, z)[0]
    y = weierstrass_p(L, (1 + 2j) * z)[0]
    W = np.stack([np.ones_like(x), x])
    hold = float(np.max(projective_distance(fit.map.lift_eval(W), np.stack([np.ones_like(y), y]))))
    dup = lattes_fit(L, 2, seed=SEED).map
    # compare with the duplication formula coefficientwise (monic leading numerator)
    g2, g3 = L.g2, L.g3
    num = np.array([g2 ** 2 / 16, 2 * g3, g2 / 2, 0, 1], dtype=complex)
    den = np.array([-g3, -g2, 0, 4, 0], dtype=complex)
    fn = np.array([dup.lift[1].coeff((4 - j, j)) for j in range(5)], dtype=complex)
    fd = np.array([dup.lift[0].coeff((4 - j, j)) for j in range(5)], dtype=complex)
    s = fn[4]
    dup_err = max(np.abs(fn / s - num).max(), np.abs(fd / s - den).max()) / max(abs(g2) ** 2 / 16, 1)
    pair = lattes_pair(L, 1 + 2j, 1 - 2j, seed=SEED)
    comm = pair.certificate.residual
    dt = time.perf_counter() - t0
    ok = hold <= 1e-7 and dup_err <= 1e-8 and comm <= 1e-7 and dt < 30
    acceptance(9, ok, f"hold-out {hold:.1e}, duplication {dup_err:.1e}, commutation {comm:.1e}, "
                      f"{dt:.1f} s")
    assert ok


def test_criterion_10_multiplier_modulus(acceptance, lattes):
    L, lpair = lattes
    f = lpair.f1
    half = [weierstrass_p(L, w)[0] for w in (L.w1 / 2, L.w2 / 2, (L.w1 + L.w2) / 2)]
    post = [np.array([1.0, e]) for e in half] + [np.array([0.0, 1.0])]
    mods = []
    for p in periodic_points_1d(f, 1):
        if p.classification != "repelling":
            continue
        if any(projective_distance(p.point.array, q) < 1e-6 for q in post):
            continue
        mods.append(abs(p.multiplier[0]) ** 2)
    ok = bool(mods) and max(abs(m - 5) for m in mods) <= 1e-3
    acceptance(10, ok, f"{len(mods)} points, |m|^2 in [{min(mods):.6f}, {max(mods):.6f}]")
    assert ok


def test_criterion_11_critically_finite_and_orbifold(acceptance, lattes):
    _, lpair = lattes
    maps = {f"T{d}": chebyshev_map(d) for d in range(2, 9)}
    maps.update({f"z^{d}": power_map(d) for d in range(2, 9)})
    maps["lattes"] = lpair.f1
    finite = {name: postcritical_orbit(f).finite for name, f in maps.items()}
    t2, z2 = chebyshev_map(2), power_map(2)
    good_t2 = orbifold_check(t2, OrbifoldWeights([(1, 2), (-1, 2), ("inf", math.inf)])).valid
    good_z2 = orbifold_check(z2, OrbifoldWeights([(0, math.inf), ("inf", math.inf)])).valid
    bad = orbifold_check(t2, OrbifoldWeights([(1, 3), (-1, 2), ("inf", math.inf)]))
    located = bool(bad.violations) and all("point" in v for v in bad.violations)
    not_finite = [k for k, v in finite.items() if v is not True]
    ok = not not_finite and good_t2 and good_z2 and not bad.valid and located
    acceptance(11, ok, f"not finite: {not_finite}; orbifold T2 {good_t2}, z^2 {good_z2}, "
                       f"perturbed rejected {not bad.valid} ({len(bad.violations)} violations)")
    assert ok


def test_criterion_12_symmetric_product(acceptance):
    hs = {"z^2": power_map(2), "z^3": power_map(3), "T2": chebyshev_map(2), "T3": chebyshev_map(3)}
    res = {k: symmetric_residual(symmetric_product(h), h, 200, SEED) for k, h in hs.items()}
    f = symmetric_product(power_map(2))
    exact = (f.lift[0].terms == {(2, 0, 0): 1} and f.lift[1].terms == {(0, 2, 0): 1, (1, 0, 1): -2}
             and f.lift[2].terms == {(0, 0, 2): 1})
    ok = max(res.values()) <= 1e-10 and exact
    acceptance(12, ok, ", ".join(f"{k}: {v:.1e}" for k, v in res.items()) + f"; z^2 exact {exact}")
    assert ok


def test_criterion_13_determinism(acceptance, tmp_path):
    maps = tmp_path / "maps"
    assert cli_main(["catalog", "build", "--family", "chebyshev", "--out-dir", str(maps)]) == 0
    t2 = str(maps / "f1.json")
    commands = [
        ["catalog", "build", "--family", "lattes", "--multiplier", "1,2", "--multiplier2", "1,-2"],
        ["verify-commute", "--f1", t2, "--f2", str(maps / "f2.json")],
        ["green-image", "--map", t2, "--window=-2,2,-1.5,1.5", "--res", "48,36", "--threads", "4"],
        ["periodic", "--map", t2, "--n", "4"],
        ["equidist", "--map", t2, "--point", "0.3,0.1"],
        ["linearize", "--map", t2, "--fixed-point", "1,0", "--extension-samples", "20"],
        ["postcritical", "--map", t2],
    ]
    differing = []
    for rep in ("a", "b"):
        for i, cmd in enumerate(commands):
            out = tmp_path / rep / str(i)
            rc = cli_main(cmd + ["--seed", str(SEED), "--out-dir", str(out)])
            assert rc in (0, 1)
    nfiles = 0
    for i in range(len(commands)):
        for fa in sorted((tmp_path / "a" / str(i)).iterdir()):
            fb = tmp_path / "b" / str(i) / fa.name
            nfiles += 1
            if fa.read_bytes() != fb.read_bytes():
                differing.append(f"{i}/{fa.name}")
    ok = not differing
    acceptance(13, ok, f"{nfiles} files compared, differing {differing}")
    assert ok
