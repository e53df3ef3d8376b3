"""Command-line interface.

Every subcommand writes a JSON report (sorted keys, no timestamps) into the
output directory and prints a short summary, or the report itself with
``--json``.  Exit codes: 0 success, 1 verification negative, 2 usage or
input error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import catalog as cat
from .dynamics import (OrbifoldReport, OrbifoldWeights, _as_point, equidistribution_stat,
                       periodic_points_1d, periodic_points_2d, postcritical_orbit,
                       preimage_tree, orbifold_check)
from .errors import HolodynError, InternalInvariantError
from .green import GreenEvaluator, green_grid, write_csv, write_pgm
from .normalform import (conjugacy_residual, germ_from_map, n_independence, poincare_map,
                         resonances, sternberg_normalize)
from .projmap import ProjectivePoint, commutes, load_map, save_map

OUT_ENV = "HOLODYN_OUT"
EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    """Bad command-line input detected after argument parsing."""


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _floats(text, n=None, name="value"):
    try:
        vals = [float(x) for x in str(text).split(",")]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) not in (n if isinstance(n, tuple) else (n,)):
        raise UsageError(f"{name}: expected {n} numbers, got {len(vals)}")
    return vals


def _ints(text, n=None, name="value"):
    vals = _floats(text, n, name)
    if any(v != int(v) for v in vals):
        raise UsageError(f"{name}: expected integers")
    return [int(v) for v in vals]


def _complex(text, name="value"):
    if str(text).strip().lower() == "solve":
        return "solve"
    re, im = (_floats(text, (1, 2), name) + [0.0])[:2]
    return complex(re, im)


def _point(text, k, name="point"):
    """``inf`` or affine coordinates ``re,im[,re,im]``."""
    if str(text).strip().lower() in ("inf", "infinity"):
        return ProjectivePoint.infinity(k)
    vals = _floats(text, 2 * k, name)
    z = [complex(vals[2 * i], vals[2 * i + 1]) for i in range(k)]
    return ProjectivePoint.from_affine(z)


def _signs(text):
    out = []
    for s in str(text).split(","):
        s = s.strip()
        if s in ("+", "+1", "1"):
            out.append(1)
        elif s in ("-", "-1"):
            out.append(-1)
        else:
            raise UsageError(f"signs: expected '+' or '-', got {s!r}")
    if len(out) != 2:
        raise UsageError("signs: expected two signs such as '+,-'")
    return tuple(out)


def _load(path):
    try:
        return load_map(path)
    except FileNotFoundError:
        raise UsageError(f"map file not found: {path}")
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{path}: malformed map JSON (missing or bad field {exc})")


def _clean(x):
    """Make a report JSON-safe: complex as [re, im], inf/nan as strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _config(args):
    skip = {"func", "json", "out_dir"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _versions():
    return {"holodyn": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _emit(args, name, result, tolerances, ok=True):
    report = {"command": args.command, "config": _config(args), "tolerances": tolerances,
              "versions": _versions(), "result": result, "ok": bool(ok)}
    text = dumps(report)
    path = _out_dir(args) / f"{name}.json"
    path.write_text(text)
    if args.json:
        sys.stdout.write(text)
    return path


def _say(args, msg):
    if not args.json:
        print(msg)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify_commute(args):
    f1, f2 = _load(args.f1), _load(args.f2)
    mode = args.mode
    if mode == "auto":
        mode = "exact" if (f1.exact and f2.exact) else "numeric"
    rep = commutes(f1, f2, mode, args.tol)
    _emit(args, "verify-commute", rep.to_json(), {"tol": args.tol if mode == "numeric" else 0})
    lam = rep.lam
    _say(args, f"commutes: {rep.commutes}  lambda: {lam}  theta: {rep.theta}  residual: {rep.residual}")
    return EXIT_OK if rep.commutes else EXIT_NEGATIVE


def cmd_green_image(args):
    f = _load(args.map)
    window = _floats(args.window, 4, "--window")
    res = _ints(args.res, 2, "--res")
    slice_rule = None
    if args.slice:
        parts = _floats(args.slice, 3, "--slice")
        slice_rule = (int(parts[0]), complex(parts[1], parts[2]))
    ev = GreenEvaluator.build(f, args.iters, seed=args.seed)
    grid = green_grid(ev, window, res, slice_rule, threads=args.threads, laplacian=args.laplacian)
    field = grid.laplacian if args.laplacian else grid.values
    out = _out_dir(args)
    base = args.name
    if args.format == "pgm":
        path = out / f"{base}.pgm"
        write_pgm(path, field, comment=grid.header())
    else:
        path = out / f"{base}.csv"
        write_csv(path, field)
    result = {"image": path.name, "min": float(field.min()), "max": float(field.max()),
              "iterations": ev.iterations, "error_bound": ev.error_bound(), "bound_M": ev.bound_M,
              "window": window, "resolution": res}
    _emit(args, base, result, {"green_error_bound": ev.error_bound()})
    _say(args, f"wrote {path} ({res[0]}x{res[1]}, {ev.iterations} iterations)")
    return EXIT_OK


def cmd_periodic(args):
    f = _load(args.map)
    if f.k == 1:
        pts = periodic_points_1d(f, args.n, cap=args.cap)
        result = {"n": args.n, "count_with_multiplicity": sum(p.multiplicity for p in pts),
                  "expected": f.degree ** args.n + 1, "points": [p.to_json() for p in pts]}
    else:
        search = periodic_points_2d(f, args.n, seeds=args.seeds, seed=args.seed)
        result = search.to_json()
        result["n"] = args.n
    _emit(args, "periodic", result, {"verify": 1e-10, "dedup": 1e-8, "indifferent_band": 1e-6})
    _say(args, f"{len(result['points'])} distinct periodic points for n = {args.n}")
    return EXIT_OK


def cmd_preimages(args):
    f = _load(args.map)
    a = _point(args.point, f.k, "--point")
    pts = preimage_tree(f, a, args.depth, cap=args.cap)
    result = {"depth": args.depth, "count": len(pts), "points": [p.to_json() for p in pts]}
    _emit(args, "preimages", result, {})
    _say(args, f"{len(pts)} preimages at depth {args.depth}")
    return EXIT_OK


def cmd_equidist(args):
    f = _load(args.map)
    a = _point(args.point, f.k, "--point")
    depths = _ints(args.depths, None, "--depths")
    rows = []
    for n in depths:
        pts = preimage_tree(f, a, n, cap=args.cap)
        st = equidistribution_stat(pts, args.reference)
        rows.append({"depth": n, **st.to_json()})
    _emit(args, "equidist", {"rows": rows}, {})
    for r in rows:
        _say(args, f"depth {r['depth']}: discrepancy {r['discrepancy']}")
    return EXIT_OK


def cmd_postcritical(args):
    f = _load(args.map)
    rep = postcritical_orbit(f, args.max_iters, args.tol)
    _emit(args, "postcritical", rep.to_json(), {"revisit": args.tol, "landing_jump": 1e-3})
    _say(args, f"critically finite: {rep.to_json()['finite']}")
    return EXIT_OK if rep.finite else EXIT_NEGATIVE


def _weights(path, k):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"weights file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    entries = []
    for e in data:
        w = e["weight"]
        w = math.inf if str(w).lower() in ("inf", "infinity") else int(w)
        if "z" in e:
            z = e["z"]
            p = ProjectivePoint.infinity(k) if str(z).lower() in ("inf", "infinity") \
                else ProjectivePoint.from_affine(complex(z[0], z[1]))
        else:
            p = ProjectivePoint.from_json(e["point"])
        entries.append((p, w))
    return OrbifoldWeights(entries)


def cmd_orbifold(args):
    f = _load(args.map)
    rep: OrbifoldReport = orbifold_check(f, _weights(args.weights, f.k))
    _emit(args, "orbifold", rep.to_json(), {"point_match": 1e-7})
    _say(args, f"valid: {rep.valid}  violations: {len(rep.violations)}")
    return EXIT_OK if rep.valid else EXIT_NEGATIVE


def cmd_linearize(args):
    f = _load(args.map)
    p = _point(args.fixed_point, f.k, "--fixed-point")
    g = germ_from_map(f, p, args.order)
    phi, Lam = sternberg_normalize(g)
    res = conjugacy_residual(g, phi, Lam)
    result = {"germ": g.to_json(), "phi": phi.to_json(), "normal_form": Lam.to_json(),
              "resonances": [[j, list(a)] for j, a in resonances(Lam.eigenvalues)],
              "conjugacy_residual": res}
    if args.extension_samples:
        pm = poincare_map(f, p, order=args.order)
        rng = np.random.default_rng(args.seed)
        Z = rng.normal(size=(f.k, args.extension_samples)) + 1j * rng.normal(size=(f.k, args.extension_samples))
        Z = Z / np.abs(Z).max(axis=0) * rng.uniform(0, 100 * pm.radius, args.extension_samples)
        from .normalform import semiconjugacy_residual
        result["extension"] = {"radius": pm.radius,
                               "semiconjugacy_residual": semiconjugacy_residual(f, pm, Z),
                               "n_independence": n_independence(pm, Z)}
    _emit(args, "linearize", result, {"conjugacy": 1e-9, "resonance": 1e-9, "small_divisor": 1e-9})
    _say(args, f"eigenvalues {list(Lam.eigenvalues)}; {Lam.nonlinear_count()} resonant terms; "
               f"residual {res:.3e}")
    return EXIT_OK if res <= 1e-9 else EXIT_NEGATIVE


def _map_arg(text):
    """``power:d``, ``cheb:d`` (optionally ``-cheb:d``) or a path to a map JSON."""
    t = str(text)
    sign = 1
    if t.startswith("-") and ":" in t:
        sign, t = -1, t[1:]
    if ":" in t:
        kind, d = t.split(":", 1)
        d = int(d)
        if kind == "power":
            return cat.power_map(d, sign)
        if kind == "cheb":
            return cat.chebyshev_map(d, sign)
        raise UsageError(f"unknown map shorthand {text!r}")
    return _load(t)


def cmd_catalog(args):
    if args.action == "list":
        result = {"families": cat.catalog_list()}
        _emit(args, "catalog-list", result, {})
        if not args.json:
            for r in result["families"]:
                print(f"{r['family']:18s} k={r['k']}  {r['maps']}")
        return EXIT_OK
    fam = args.family
    if fam is None:
        raise UsageError("catalog build needs --family")
    signs = _signs(args.signs)
    lam = _complex(args.lam, "--lambda")
    if fam == "power":
        pair = cat.power_pair(args.d1, args.d2, signs, lam)
    elif fam == "chebyshev":
        pair = cat.chebyshev_pair(args.d1, args.d2, signs)
    elif fam == "monomial_p2":
        consts = "solve" if args.constants == "solve" else _floats(args.constants, 3, "--constants")
        pair = cat.monomial_pair_p2(_ints(args.perm1, 3, "--perm1"), _ints(args.perm2, 3, "--perm2"),
                                    args.d1, args.d2, consts)
    elif fam == "product_p2":
        pair = cat.product_pair_p2(_map_arg(args.h1), _map_arg(args.h2), lam)
    elif fam == "cheb_power":
        pair = cat.cheb_power_pair(args.d1, args.d2, signs, lam)
    elif fam == "cheb_cheb":
        pair = cat.cheb_cheb_pair(args.d1, args.d2, signs, args.swap)
    elif fam == "symmetric_product":
        pair = cat.symmetric_pair(_map_arg(args.h1), _map_arg(args.h2))
    elif fam == "lattes":
        w = _floats(args.lattice, 4, "--lattice")
        L = cat.Lattice(complex(w[0], w[1]), complex(w[2], w[3]))
        m1 = _complex(args.multiplier, "--multiplier")
        fit = cat.lattes_fit(L, m1, seed=args.seed)
        out = _out_dir(args)
        save_map(fit.map, out / "lattes.json")
        cert = {"lattice": L.to_json(), "fit": {k: v for k, v in fit.to_json().items() if k != "map"}}
        if args.multiplier2:
            m2 = _complex(args.multiplier2, "--multiplier2")
            pair = cat.lattes_pair(L, m1, m2, seed=args.seed)
            save_map(pair.f2, out / "lattes2.json")
            cert["commutation"] = pair.certificate.to_json()
        (out / "lattes.certificate.json").write_text(dumps(cert))
        _emit(args, "catalog-build", {"family": "lattes", "map": "lattes.json",
                                      "certificate": cert}, {"holdout": 1e-6, "commute": 1e-7})
        _say(args, f"wrote {out / 'lattes.json'} (degree {fit.degree}, held-out residual "
                   f"{fit.holdout_residual:.2e})")
        return EXIT_OK
    else:
        raise UsageError(f"unknown family {fam!r}")
    out = _out_dir(args)
    save_map(pair.f1, out / "f1.json")
    save_map(pair.f2, out / "f2.json")
    (out / "certificate.json").write_text(dumps(pair.certificate.to_json()))
    _emit(args, "catalog-build", {"family": fam, "parameters": cat._jsonable(pair.parameters),
                                  "certificate": pair.certificate.to_json(),
                                  "maps": ["f1.json", "f2.json"]}, {"commute": 1e-7})
    _say(args, f"wrote {out / 'f1.json'} and {out / 'f2.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holodyn",
                                description="Commuting endomorphisms of P^1 and P^2.")
    p.add_argument("--version", action="version", version=f"holodyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="print the JSON report to stdout")
        sp.add_argument("--seed", type=int, default=0, help="seed for all random sampling")
        sp.add_argument("--out-dir", default=None,
                        help=f"output directory (default: ${OUT_ENV} or the current directory)")

    sp = sub.add_parser("verify-commute", help="check f1 o f2 = f2 o f1")
    common(sp)
    sp.add_argument("--f1", required=True)
    sp.add_argument("--f2", required=True)
    sp.add_argument("--mode", choices=["auto", "exact", "numeric"], default="auto")
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.set_defaults(func=cmd_verify_commute)

    sp = sub.add_parser("green-image", help="render the Green function on a window")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--window", default="-2,2,-2,2", help="xmin,xmax,ymin,ymax")
    sp.add_argument("--res", default="256,256", help="nx,ny")
    sp.add_argument("--iters", type=int, default=None)
    sp.add_argument("--slice", default=None, help="coord,re,im: fix affine coordinate (P^2 only)")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--laplacian", action="store_true", help="render the Laplacian proxy instead")
    sp.add_argument("--format", choices=["pgm", "csv"], default="pgm")
    sp.add_argument("--name", default="green")
    sp.set_defaults(func=cmd_green_image)

    sp = sub.add_parser("periodic", help="periodic points of period dividing n")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--cap", type=int, default=100_000)
    sp.add_argument("--seeds", type=int, default=200, help="Newton seeds (P^2 only)")
    sp.set_defaults(func=cmd_periodic)

    sp = sub.add_parser("preimages", help="iterated preimages of a point")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--point", required=True, help="re,im or inf")
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--cap", type=int, default=100_000)
    sp.set_defaults(func=cmd_preimages)

    sp = sub.add_parser("equidist", help="discrepancy of preimage distributions")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--point", required=True)
    sp.add_argument("--depths", default="4,6,8,10")
    sp.add_argument("--reference", default="uniform-circle",
                    choices=["uniform-circle", "uniform-interval-cos", "empirical"])
    sp.add_argument("--cap", type=int, default=100_000)
    sp.set_defaults(func=cmd_equidist)

    sp = sub.add_parser("postcritical", help="decide critical finiteness")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--max-iters", type=int, default=1000)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_postcritical)

    sp = sub.add_parser("orbifold", help="check an orbifold weight function")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--weights", required=True,
                    help='JSON list of {"z": [re, im] | "inf", "weight": n | "inf"}')
    sp.set_defaults(func=cmd_orbifold)

    sp = sub.add_parser("linearize", help="normal form at a fixed point")
    common(sp)
    sp.add_argument("--map", required=True)
    sp.add_argument("--fixed-point", required=True, help="re,im[,re,im] or inf")
    sp.add_argument("--order", type=int, default=10)
    sp.add_argument("--extension-samples", type=int, default=0,
                    help="also test the global extension at this many points")
    sp.set_defaults(func=cmd_linearize)

    sp = sub.add_parser("catalog", help="build or list commuting families")
    common(sp)
    sp.add_argument("action", choices=["build", "list"])
    sp.add_argument("--family", choices=list(cat.FAMILIES))
    sp.add_argument("--d1", type=int, default=2)
    sp.add_argument("--d2", type=int, default=3)
    sp.add_argument("--signs", default="+,+")
    sp.add_argument("--lambda", dest="lam", default="solve")
    sp.add_argument("--perm1", default="0,1,2")
    sp.add_argument("--perm2", default="0,1,2")
    sp.add_argument("--constants", default="solve")
    sp.add_argument("--h1", default="power:2", help="power:d, cheb:d or a map JSON path")
    sp.add_argument("--h2", default="power:3")
    sp.add_argument("--swap", action="store_true")
    sp.add_argument("--lattice", default="1,0,0,1", help="w1re,w1im,w2re,w2im")
    sp.add_argument("--multiplier", default="1,2")
    sp.add_argument("--multiplier2", default=None)
    sp.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (HolodynError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
