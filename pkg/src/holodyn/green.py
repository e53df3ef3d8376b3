"""Green functions of endomorphisms by renormalized iteration of the lift.

For a lift ``F`` of degree ``d`` the Green function is the limit of
``d**-n log ||F^n(w)||``.  Iterating ``F`` directly overflows after a handful
of steps, so every iterate is rescaled to sup-norm one and the logarithm of
the discarded scale is accumulated with weight ``d**-(j+1)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError, UnsupportedError
from .projmap import ProjectiveMap, commutes, normalized_pair, scale_map

TARGET_BOUND = 1e-8


def _sphere_samples(k, n, rng):
    w = rng.normal(size=(k + 1, n)) + 1j * rng.normal(size=(k + 1, n))
    return w / np.abs(w).max(axis=0)


def estimate_bound(f: ProjectiveMap, samples: int = 10_000, seed: int = 0) -> float:
    """Twice the sampled maximum of ``|log ||F(w)|||`` over the unit sphere."""
    rng = np.random.default_rng(seed)
    W = _sphere_samples(f.k, samples, rng)
    # include coordinate axes and the diagonal, where extremes often sit
    extra = np.eye(f.k + 1, dtype=complex)
    W = np.concatenate([W, extra, np.ones((f.k + 1, 1))], axis=1)
    W = W / np.abs(W).max(axis=0)
    v = np.abs(f.lift_eval(W)).max(axis=0)
    return 2.0 * float(np.max(np.abs(np.log(v))))


@dataclass(frozen=True)
class GreenEvaluator:
    """Green function of a fixed lift with an a-posteriori error bound.

    ``|G(w) - G_n(w)| <= bound_M * d**-n / (1 - 1/d)`` with ``n`` the number
    of iterations.
    """

    map: ProjectiveMap
    iterations: int
    bound_M: float

    @classmethod
    def build(cls, f: ProjectiveMap, iterations: int | None = None, seed: int = 0,
              samples: int = 10_000, target: float = TARGET_BOUND):
        if f.degree < 2:
            raise PreconditionError("Green functions need degree >= 2")
        M = estimate_bound(f, samples, seed)
        if iterations is None:
            iterations = default_iterations(f.degree, M, target)
        return cls(f, int(iterations), M)

    @property
    def degree(self) -> int:
        return self.map.degree

    def error_bound(self, n: int | None = None) -> float:
        n = self.iterations if n is None else n
        d = self.degree
        return self.bound_M * d ** (-float(n)) / (1 - 1 / d)

    def values(self, W, n: int | None = None):
        """Vectorized ``G_n`` on columns of ``W`` (shape ``(k+1, ...)``)."""
        n = self.iterations if n is None else n
        W = np.asarray(W, dtype=complex)
        shape = W.shape[1:]
        W = W.reshape(W.shape[0], -1)
        s = np.abs(W).max(axis=0)
        if np.any(s == 0):
            raise DomainError("the Green function is undefined at the origin")
        val = np.log(s)
        W = W / s
        d = float(self.degree)
        weight = 1.0
        for _ in range(n):
            weight /= d
            V = self.map.lift_eval(W)
            s = np.abs(V).max(axis=0)
            val = val + weight * np.log(s)
            W = V / s
        return val.reshape(shape)


def default_iterations(d: int, M: float, target: float = TARGET_BOUND) -> int:
    """Smallest ``n`` with ``M d^-n / (1 - 1/d) <= target``."""
    if M <= 0:
        return 1
    n = math.log(M / (target * (1 - 1 / d))) / math.log(d)
    return max(1, math.ceil(n))


def green_value(ev: GreenEvaluator, w, n: int | None = None):
    """``(G_n(w), error_bound)`` for a single nonzero vector ``w``."""
    w = np.asarray(w, dtype=complex)
    if w.shape != (ev.map.k + 1,):
        raise DomainError(f"expected a vector of length {ev.map.k + 1}")
    val = ev.values(w[:, None], n)[0]
    return float(val), ev.error_bound(n)


def polynomial_normalized(f: ProjectiveMap) -> ProjectiveMap:
    """Rescale a polynomial map's lift so that its first component is ``w0**d``.

    Raises
    ------
    UnsupportedError
        The first component is not a multiple of ``w0**d``, i.e. the
        hyperplane at infinity is not totally invariant in these
        coordinates.
    """
    d = f.degree
    head = (d,) + (0,) * f.k
    F0 = f.lift[0]
    if set(F0.terms) != {head}:
        raise UnsupportedError(
            "map is not polynomial in this chart: first lift component must be c*w0^d")
    c = F0.terms[head]
    if c == 1:
        return f
    inv = (1 / complex(c)) if not f.exact else _exact_inverse(c)
    return scale_map(f, inv)


def _exact_inverse(c):
    from .algebra import GaussianRational
    return (GaussianRational(1) / GaussianRational.coerce(c)).simplify()


def green_affine(ev: GreenEvaluator, z, n: int | None = None) -> float:
    """Escape rate ``lim d^-n log+ ||f^n(z)||`` of an affine point.

    Computed as the homogeneous Green function at ``(1, z)`` of the lift
    whose first component is ``w0**d``.
    """
    f = polynomial_normalized(ev.map)
    if f is not ev.map:
        ev = GreenEvaluator(f, ev.iterations, estimate_bound(f))
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.concatenate([[1.0], z])
    val, _ = green_value(ev, w, n)
    return max(0.0, val)


@dataclass
class GreenEqualityReport:
    residual: float
    iterations: int
    theta: complex
    samples: list = field(default_factory=list)

    def to_json(self):
        return {"residual": self.residual, "iterations": self.iterations,
                "theta": [self.theta.real, self.theta.imag], "samples": self.samples}


def green_equality_report(f1: ProjectiveMap, f2: ProjectiveMap, samples, iterations: int = 40,
                          seed: int = 0) -> GreenEqualityReport:
    """Compare the Green functions of a commuting pair with normalized lifts.

    Raises
    ------
    PreconditionError
        When the maps do not commute.
    """
    mode = "exact" if (f1.exact and f2.exact) else "numeric"
    rep = commutes(f1, f2, mode)
    if not rep.commutes:
        raise PreconditionError("green_equality_report needs a commuting pair")
    f1, f2n = normalized_pair(f1, f2, rep)
    e1 = GreenEvaluator.build(f1, iterations, seed)
    e2 = GreenEvaluator.build(f2n, iterations, seed)
    W = np.asarray(samples, dtype=complex)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[0] != f1.k + 1:
        W = W.T
    g1 = e1.values(W)
    g2 = e2.values(W)
    diff = np.abs(g1 - g2)
    detail = [{"g1": float(a), "g2": float(b), "diff": float(c),
               "bound1": e1.error_bound(), "bound2": e2.error_bound()}
              for a, b, c in zip(g1, g2, diff)]
    return GreenEqualityReport(float(diff.max()), iterations, complex(rep.theta), detail)


@dataclass
class GreenGrid:
    values: np.ndarray
    window: tuple
    resolution: tuple
    iterations: int
    laplacian: np.ndarray | None = None

    def header(self) -> str:
        x0, x1, y0, y1 = self.window
        return (f"window={x0!r},{x1!r},{y0!r},{y1!r} res={self.resolution[0]},"
                f"{self.resolution[1]} iters={self.iterations}")


def grid_points(window, resolution):
    """Affine grid, row-major with row 0 at the top (largest imaginary part)."""
    x0, x1, y0, y1 = window
    nx, ny = resolution
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y1, y0, ny)
    return xs[None, :] + 1j * ys[:, None]


def green_grid(ev: GreenEvaluator, window, resolution, slice_rule=None,
               threads: int = 1, laplacian: bool = False) -> GreenGrid:
    """Green function on a rectangle of an affine chart.

    On P^2 ``slice_rule = (coord, value)`` fixes affine coordinate ``coord``
    (1 or 2) at ``value`` and the other coordinate ranges over the window.
    Rows are independent, so the result does not depend on ``threads``.
    """
    x0, x1, y0, y1 = map(float, window)
    nx, ny = (int(r) for r in resolution)
    if not (x1 > x0 and y1 > y0):
        raise DomainError("empty window")
    if nx < 2 or ny < 2:
        raise DomainError("resolution must be at least 2x2")
    k = ev.map.k
    if k == 2:
        if slice_rule is None:
            raise DomainError("P^2 grids need a slice rule (coord, value)")
        coord, fixed = int(slice_rule[0]), complex(slice_rule[1])
        if coord not in (1, 2):
            raise DomainError("slice coordinate must be 1 or 2")
    Z = grid_points((x0, x1, y0, y1), (nx, ny))

    def row(i):
        z = Z[i]
        if k == 1:
            W = np.stack([np.ones_like(z), z])
        else:
            fixed_col = np.full_like(z, fixed)
            pair = (fixed_col, z) if coord == 1 else (z, fixed_col)
            W = np.stack([np.ones_like(z), pair[0], pair[1]])
        return ev.values(W)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(ny)))
    else:
        rows = [row(i) for i in range(ny)]
    G = np.stack(rows)
    lap = laplacian_proxy(G) if laplacian else None
    return GreenGrid(G, (x0, x1, y0, y1), (nx, ny), ev.iterations, lap)


def laplacian_proxy(G):
    """Magnitude of the 5-point discrete Laplacian; zero on the border."""
    L = np.zeros_like(G)
    L[1:-1, 1:-1] = np.abs(G[:-2, 1:-1] + G[2:, 1:-1] + G[1:-1, :-2] + G[1:-1, 2:]
                           - 4 * G[1:-1, 1:-1])
    return L


def write_pgm(path, field: np.ndarray, comment: str = ""):
    """16-bit binary PGM, min-max normalized."""
    F = np.asarray(field, dtype=float)
    lo, hi = float(F.min()), float(F.max())
    scaled = np.zeros_like(F) if hi == lo else (F - lo) / (hi - lo)
    data = np.round(scaled * 65535).astype(">u2")
    ny, nx = F.shape
    header = "P5\n"
    for line in comment.splitlines():
        header += f"# {line}\n"
    header += f"# min={lo!r} max={hi!r}\n{nx} {ny}\n65535\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    """Read back a file written by :func:`write_pgm` (returns the raw 16-bit array)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    lines, pos = [], 0
    while len(lines) < 3:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if not line.startswith("#"):
            lines.append(line)
    nx, ny = map(int, lines[1].split())
    return np.frombuffer(raw[pos:], dtype=">u2").reshape(ny, nx)


def write_csv(path, field: np.ndarray):
    np.savetxt(path, np.asarray(field, dtype=float), delimiter=",", fmt="%.17g")
