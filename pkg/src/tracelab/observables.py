"""Observables: real-valued functions on phase space with regularity tags.

Each Observable carries a scalar evaluator, an optional vectorized batch
evaluator over coordinate arrays, and a regularity claim — ("lipschitz", k),
("holder", eta, c), or ("continuous",) — that `validate_regularity` probes
empirically against a system's metric. Claims are metadata, not guarantees;
the validator exists precisely because a wrong claim (an indicator sold as
Lipschitz) should be caught rather than trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import systems as _systems
from .rng import substream

_TWO_PI = 2.0 * math.pi


@dataclass
class Observable:
    """A named observable with optional vectorized evaluation.

    fn: scalar evaluator taking one phase point (float, coordinate tuple,
        or SymbolPoint / symbol window row).
    batch: vectorized evaluator over a coordinate array — float (n,) for
        circle/interval systems, (n, 2) for the torus, int8 (n, >=depth)
        symbol windows for subshifts. None falls back to a scalar loop.
    regularity: modulus-of-continuity claim used by validate_regularity.
    depth: number of leading window symbols a symbolic observable reads.
    word: cylinder word when the observable is a plain cylinder indicator
        (enables the fast whole-series evaluation path in the stats layer).
    """

    name: str
    fn: object
    batch: object = None
    regularity: tuple = ("continuous",)
    depth: int | None = None
    word: tuple | None = None

    def __call__(self, x):
        return self.fn(x)

    def values(self, coords: np.ndarray) -> np.ndarray:
        """Evaluate on a coordinate array, using `batch` when available."""
        if self.batch is not None:
            return np.asarray(self.batch(coords), dtype=float)
        arr = np.asarray(coords)
        if arr.ndim == 1:
            return np.array([self.fn(float(v)) for v in arr], dtype=float)
        return np.array([self.fn(row) for row in arr], dtype=float)


def coordinate() -> Observable:
    """The coordinate t itself.

    1-Lipschitz for the interval metric; on the circle it jumps at the
    seam, which validate_regularity duly reports.
    """
    return Observable(
        name="coordinate",
        fn=lambda t: float(t),
        batch=lambda c: np.asarray(c, dtype=float),
        regularity=("lipschitz", 1.0),
    )


def cos_angle(harmonic: int = 1) -> Observable:
    """cos(2 pi k t) on the circle; Lipschitz constant 2 pi k."""
    k = int(harmonic)
    w = _TWO_PI * k
    return Observable(
        name=f"cos{k}",
        fn=lambda t: math.cos(w * float(t)),
        batch=lambda c: np.cos(w * np.asarray(c, dtype=float)),
        regularity=("lipschitz", w),
    )


def sin_angle(harmonic: int = 1) -> Observable:
    """sin(2 pi k t) on the circle; Lipschitz constant 2 pi k."""
    k = int(harmonic)
    w = _TWO_PI * k
    return Observable(
        name=f"sin{k}",
        fn=lambda t: math.sin(w * float(t)),
        batch=lambda c: np.sin(w * np.asarray(c, dtype=float)),
        regularity=("lipschitz", w),
    )


def torus_coordinate(axis: int = 0) -> Observable:
    """Coordinate x_axis of a torus point (interval-metric Lipschitz 1)."""
    a = int(axis)
    if a not in (0, 1):
        raise ValueError("axis must be 0 or 1")
    return Observable(
        name=f"torus-x{a}",
        fn=lambda x: float(x[a]),
        batch=lambda c: np.asarray(c, dtype=float)[:, a],
        regularity=("lipschitz", 1.0),
    )


def torus_cos(axis: int = 0, harmonic: int = 1) -> Observable:
    """cos(2 pi k x_axis) on the torus; Lipschitz 2 pi k in the max metric."""
    a = int(axis)
    k = int(harmonic)
    w = _TWO_PI * k
    return Observable(
        name=f"torus-cos{k}-x{a}",
        fn=lambda x: math.cos(w * float(x[a])),
        batch=lambda c: np.cos(w * np.asarray(c, dtype=float)[:, a]),
        regularity=("lipschitz", w),
    )


def interval_indicator(a: float, b: float) -> Observable:
    """Indicator of [a, b). Deliberately not Lipschitz; claim is continuous.

    Pass an explicit claim to validate_regularity to demonstrate failure.
    """
    lo, hi = float(a), float(b)

    def fn(t):
        return 1.0 if lo <= float(t) < hi else 0.0

    def batch(c):
        arr = np.asarray(c, dtype=float)
        return ((arr >= lo) & (arr < hi)).astype(float)

    return Observable(name=f"ind[{lo},{hi})", fn=fn, batch=batch)


def cylinder_indicator(word, symbols: int = 2) -> Observable:
    """Indicator of the cylinder fixing the leading window symbols.

    Reads len(word) symbols; Lipschitz for the 2**-j symbol metric with
    constant 2**(len(word) - 1) (windows agreeing to that depth give equal
    values, otherwise the distance is already at least 2**-(depth-1)).
    """
    w = tuple(int(s) for s in word)
    if not w:
        raise ValueError("word must be nonempty")
    if any(s < 0 or s >= symbols for s in w):
        raise ValueError("word symbols out of range")
    d = len(w)
    target = np.array(w, dtype=np.int8)

    def fn(x):
        if isinstance(x, _systems.SymbolPoint):
            vis = x.expand(d)
        else:
            vis = tuple(int(s) for s in x[:d])
        return 1.0 if vis == w else 0.0

    def batch(c):
        mat = np.asarray(c)
        if mat.ndim != 2 or mat.shape[1] < d:
            raise ValueError("window matrix narrower than cylinder depth")
        return (mat[:, :d] == target).all(axis=1).astype(float)

    return Observable(
        name="cyl" + "".join(str(s) for s in w),
        fn=fn,
        batch=batch,
        regularity=("lipschitz", float(2 ** (d - 1))),
        depth=d,
        word=w,
    )


def shifted(obs: Observable, offset: float) -> Observable:
    """obs + offset (used to center indicators and coordinates)."""
    c = float(offset)

    def batch(coords):
        return obs.values(coords) + c

    return Observable(
        name=f"{obs.name}{c:+g}",
        fn=lambda x: obs.fn(x) + c,
        batch=batch,
        regularity=obs.regularity,
        depth=obs.depth,
    )


def coboundary(g: Observable, sys: _systems.SystemSpec) -> Observable:
    """g(h x) - g(x): an exact telescoping observable of the system.

    Ergodic sums collapse to two boundary terms, so its limit variance
    vanishes; used to exercise the degenerate branch of the central limit
    diagnostics. Batch evaluation applies the float coordinate step once.
    """
    if sys.space == "symbolic":
        raise ValueError("coboundary helper covers coordinate spaces only")
    lip_h = _systems.map_lipschitz_bound(sys)

    def fn(x):
        return g.fn(_systems.step(sys, x)) - g.fn(x)

    def batch(coords):
        return g.values(_systems.step_coords(sys, coords)) - g.values(coords)

    reg = g.regularity
    if reg[0] == "lipschitz":
        reg = ("lipschitz", reg[1] * (1.0 + lip_h))
    return Observable(
        name=f"cob({g.name})", fn=fn, batch=batch, regularity=reg, depth=g.depth
    )


# ---------------------------------------------------------------------------
# regularity validation


def validate_regularity(
    f: Observable,
    sys: _systems.SystemSpec,
    claim: tuple | None = None,
    pairs: int = 1000,
    seed: int = 0,
    slack: float = 1e-9,
) -> dict:
    """Probe a modulus-of-continuity claim against sampled point pairs.

    Draws random pairs from the invariant measure, plus systematic
    near-pairs: a ladder of small separations straddling a uniform grid on
    coordinate spaces, and single-symbol flips at every window position on
    symbol spaces. Returns a dict with ok, violations, max_ratio, checked.
    A ("continuous",) claim is vacuous and always passes.
    """
    claim = claim if claim is not None else f.regularity
    kind = claim[0]
    if kind == "continuous":
        return {"ok": True, "violations": 0, "max_ratio": 0.0, "checked": 0}
    if kind == "lipschitz":
        bound = lambda d: claim[1] * d
    elif kind == "holder":
        eta, cst = claim[1], claim[2]
        bound = lambda d: cst * d**eta
    else:
        raise ValueError(f"unknown regularity kind {kind!r}")

    gen = substream(seed, 0x2E6)
    xs: list = []
    ys: list = []
    if sys.space in ("circle", "torus"):
        mu_pts = _systems.sample_invariant(sys, 2 * pairs, seed).points
        if sys.space == "circle":
            xs.extend(float(v) for v in mu_pts[:pairs])
            ys.extend(float(v) for v in mu_pts[pairs:])
            for scale in (1e-2, 1e-3, 1e-4, 1e-6, 1e-8):
                for j in range(64):
                    c = j / 64.0
                    xs.append((c - 0.5 * scale) % 1.0)
                    ys.append((c + 0.5 * scale) % 1.0)
        else:
            xs.extend((float(a), float(b)) for a, b in mu_pts[:pairs])
            ys.extend((float(a), float(b)) for a, b in mu_pts[pairs:])
            for scale in (1e-2, 1e-4, 1e-6):
                for j in range(32):
                    c0, c1 = (j % 8) / 8.0, (j // 8) / 4.0
                    xs.append(((c0 - 0.5 * scale) % 1.0, c1))
                    ys.append(((c0 + 0.5 * scale) % 1.0, c1))
    elif sys.space == "symbolic":
        mu = _systems.sample_invariant(sys, pairs, seed)
        pts = mu.point_list()
        half = len(pts) // 2
        xs.extend(pts[:half])
        ys.extend(pts[half : 2 * half])
        r = sys.symbols
        for p in pts[: min(64, len(pts))]:
            for j in range(min(sys.window, 24)):
                flipped = list(p.word)
                flipped[j] = (flipped[j] + 1) % r
                xs.append(p)
                ys.append(_systems.SymbolPoint(word=tuple(flipped), tail=p.tail))
    else:
        raise ValueError(f"unknown space {sys.space!r}")

    violations = 0
    max_ratio = 0.0
    for x, y in zip(xs, ys):
        d = _systems.distance(sys, x, y)
        if d == 0:
            continue
        gap = abs(f.fn(x) - f.fn(y))
        allowed = bound(d) + slack
        if gap > allowed:
            violations += 1
        if bound(d) > 0:
            max_ratio = max(max_ratio, gap / bound(d))
    return {
        "ok": violations == 0,
        "violations": violations,
        "max_ratio": max_ratio,
        "checked": len(xs),
    }
