"""Empirical measures, optimal-transport distances, and sanity diagnostics.

An EmpiricalMeasure is a finitely supported probability measure: an array of
phase-space points plus a weight vector summing to 1. These are the raw
material for traces and for every Monte Carlo statistic; the diagnostics
here flag the failure modes that matter downstream (unexpected atoms, poor
coverage of the space, mass stuck near an interval boundary).

Wasserstein-1 distances come in two independently implemented routes: a
closed-form cumulative-distribution formula on the interval and circle, and
an exact linear-program coupling for every space. The two agree to solver
precision and are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import systems as _systems
from .rng import substream

_WEIGHT_TOL = 1e-12

_SPACES = ("interval", "circle", "torus", "symbolic")


@dataclass
class EmpiricalMeasure:
    """Finitely supported probability measure on one of the phase spaces.

    points: coordinate array, shape (n,) for interval/circle, (n, 2) for the
        torus, (n, window) int8 for symbolic windows.
    weights: probability vector of length n; None means uniform.
    """

    space: str
    points: np.ndarray
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.space not in _SPACES:
            raise ValueError(f"unknown space {self.space!r}")
        pts = np.asarray(self.points)
        if self.space in ("interval", "circle"):
            pts = pts.astype(float).reshape(-1)
        elif self.space == "torus":
            pts = pts.astype(float).reshape(-1, 2)
        else:
            pts = pts.astype(np.int8)
            if pts.ndim != 2:
                raise ValueError("symbolic support must be a window matrix")
        self.points = pts
        n = pts.shape[0]
        if n == 0:
            raise ValueError("empty support")
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ValueError("weights length must match support size")
            if (w < -_WEIGHT_TOL).any():
                raise ValueError("weights must be nonnegative")
            if abs(w.sum() - 1.0) > _WEIGHT_TOL:
                raise ValueError(
                    f"weights must sum to 1 within {_WEIGHT_TOL}, got {w.sum()!r}"
                )
            w = np.clip(w, 0.0, None)
        self.weights = w

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def point_list(self) -> list:
        """Materialize the support as scalar points.

        Symbolic rows become SymbolPoints whose stochastic tails are keyed
        by the measure's tail seed and the row index, so downstream orbits
        replay exactly.
        """
        if self.space in ("interval", "circle"):
            return [float(v) for v in self.points]
        if self.space == "torus":
            return [(float(a), float(b)) for a, b in self.points]
        seed = int(self.meta.get("tail_seed", 0))
        return [
            _systems.SymbolPoint(
                word=tuple(int(s) for s in row), tail=("seed", seed ^ (i + 1), 0)
            )
            for i, row in enumerate(self.points)
        ]


def empirical_measure(points, weights=None, space="circle", normalize=False, meta=None):
    """Build an EmpiricalMeasure from raw points.

    With normalize=True the weight vector is rescaled to total mass 1
    instead of being validated against it.
    """
    if weights is not None and normalize:
        w = np.asarray(weights, dtype=float)
        s = w.sum()
        if s <= 0:
            raise ValueError("total weight must be positive")
        weights = w / s
    return EmpiricalMeasure(
        space=space, points=np.asarray(points), weights=weights, meta=meta or {}
    )


def dirac(x, space="circle") -> EmpiricalMeasure:
    """Point mass at x."""
    if space in ("interval", "circle"):
        pts = np.array([float(x)])
    elif space == "torus":
        pts = np.array([[float(x[0]), float(x[1])]])
    else:
        word = x.word if isinstance(x, _systems.SymbolPoint) else tuple(x)
        pts = np.array([list(word)], dtype=np.int8)
    return EmpiricalMeasure(space=space, points=pts, weights=None, meta={"dirac": True})


def resample_indices(mu: EmpiricalMeasure, size: int, gen) -> np.ndarray:
    """Draw `size` support indices distributed by the weights."""
    n = mu.size
    w = mu.weights
    if np.ptp(w) < 1e-15:
        return gen.integers(0, n, size=size)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, gen.random(size), side="right")
    return np.minimum(idx, n - 1)


# ---------------------------------------------------------------------------
# diagnostics


def ou_diagnostics(mu: EmpiricalMeasure, eps: float) -> dict:
    """Resolution-eps sanity diagnostics for an empirical measure.

    Returns a dict with:

    atom_proxy: largest mass found in a closed eps-ball centered at a
        support point (detects unexpected atoms; a genuine atom of mass w
        always scores at least w).
    coverage: fraction of the eps-grid cells (admissible depth-j cylinders
        for symbolic spaces, j = ceil(log2(1/eps))) carrying positive mass.
    boundary_mass: mass within eps of the interval endpoints; identically
        0.0 on the circle, torus, and symbol spaces, which have no boundary.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    space = mu.space
    w = mu.weights
    if space in ("interval", "circle"):
        order = np.argsort(mu.points, kind="stable")
        x = mu.points[order]
        ws = w[order]
        if space == "circle":
            centers = x + 1.0
            x = np.concatenate([x, x + 1.0, x + 2.0])
            ws = np.concatenate([ws, ws, ws])
        else:
            centers = x
        cum = np.concatenate([[0.0], np.cumsum(ws)])
        lo = np.searchsorted(x, centers - eps, side="left")
        hi = np.searchsorted(x, centers + eps, side="right")
        atom = float(np.max(cum[hi] - cum[lo]))
        atom = min(atom, 1.0)
        ncells = int(np.ceil(1.0 / eps))
        cells = np.minimum((mu.points * ncells).astype(np.int64), ncells - 1)
        coverage = len(np.unique(cells[w > 0])) / ncells
        if space == "interval":
            boundary = float(w[(mu.points <= eps) | (mu.points >= 1.0 - eps)].sum())
        else:
            boundary = 0.0
        return {"atom_proxy": atom, "coverage": coverage, "boundary_mass": boundary}
    if space == "torus":
        pts = mu.points
        atom = 0.0
        chunk = 1024
        for s in range(0, mu.size, chunk):
            block = pts[s : s + chunk]
            d0 = np.abs(block[:, None, 0] - pts[None, :, 0])
            d0 = np.minimum(d0, 1.0 - d0)
            d1 = np.abs(block[:, None, 1] - pts[None, :, 1])
            d1 = np.minimum(d1, 1.0 - d1)
            inside = np.maximum(d0, d1) <= eps
            atom = max(atom, float((inside * w[None, :]).sum(axis=1).max()))
        ncells = int(np.ceil(1.0 / eps))
        ij = np.minimum((pts * ncells).astype(np.int64), ncells - 1)
        flat = ij[:, 0] * ncells + ij[:, 1]
        coverage = len(np.unique(flat[w > 0])) / ncells**2
        return {
            "atom_proxy": min(atom, 1.0),
            "coverage": coverage,
            "boundary_mass": 0.0,
        }
    # symbolic: eps-balls are exactly the depth-j cylinders
    depth = max(1, int(np.ceil(-np.log2(eps))))
    depth = min(depth, mu.points.shape[1])
    keys = _cylinder_keys(mu.points, depth)
    masses = {}
    for k, wi in zip(keys, w):
        masses[k] = masses.get(k, 0.0) + wi
    atom = max(masses.values())
    total = _count_admissible(mu, depth)
    coverage = sum(1 for v in masses.values() if v > 0) / total
    return {"atom_proxy": atom, "coverage": coverage, "boundary_mass": 0.0}


def _cylinder_keys(windows: np.ndarray, depth: int) -> list:
    return [tuple(int(s) for s in row[:depth]) for row in windows]


def _count_admissible(mu: EmpiricalMeasure, depth: int) -> int:
    trans = mu.meta.get("transitions")
    if trans is None:
        r = int(mu.points.max()) + 1
        return r**depth
    a = np.asarray(trans, dtype=np.int64)
    if depth == 1:
        return a.shape[0]
    count = np.ones(a.shape[0], dtype=np.int64)
    for _ in range(depth - 1):
        count = a @ count
    return int(count.sum())


# ---------------------------------------------------------------------------
# pushforward


def pushforward_measure(sys: _systems.SystemSpec, mu: EmpiricalMeasure) -> EmpiricalMeasure:
    """Image of mu under one application of the system map.

    Support points are transported, weights are untouched. Symbolic windows
    shift left and draw the revealed symbol from the Markov tail stream
    keyed by the measure's tail seed, so the result is deterministic given
    the input measure.
    """
    space = mu.space
    if space in ("interval", "circle"):
        x = mu.points
        name = sys.name
        if name == "doubling":
            y = 2.0 * x
            y[y >= 1.0] -= 1.0
        elif name == "rotation":
            y = (x + float(sys.theta)) % 1.0
        elif name == "dyadic-permutation":
            delta = 2.0**-sys.rank
            y = x.copy()
            wrap = y >= 1.0 - delta
            y[wrap] -= 1.0 - delta
            y[~wrap] += delta
        elif name == "intermittent":
            y = x.copy()
            left = y < 0.5
            yl = y[left]
            y[left] = yl + (2.0**sys.alpha) * yl ** (1.0 + sys.alpha)
            y[~left] = 2.0 * y[~left] - 1.0
        else:
            raise ValueError(f"{name!r} does not act on a 1-d space")
        out_space = space
    elif space == "torus":
        mt = np.array(sys.matrix, dtype=float).T
        y = np.mod(mu.points @ mt, 1.0)
        out_space = "torus"
    elif space == "symbolic":
        seed = int(mu.meta.get("tail_seed", 0))
        steps = int(mu.meta.get("pushforward_steps", 0))
        gen = substream(seed, 0xF0, steps)
        mat = np.empty((mu.size, mu.points.shape[1] + 1), dtype=np.int8)
        mat[:, :-1] = mu.points
        _systems._extend_markov(sys, mat, mu.points.shape[1], gen)
        y = mat[:, 1:]
        out_space = "symbolic"
    else:
        raise ValueError(f"unknown space {space!r}")
    meta = dict(mu.meta)
    meta["pushforward_steps"] = int(mu.meta.get("pushforward_steps", 0)) + 1
    return EmpiricalMeasure(space=out_space, points=y, weights=mu.weights.copy(), meta=meta)


# ---------------------------------------------------------------------------
# Wasserstein-1


def wasserstein1(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    method: str = "auto",
    cap: int = 4096,
) -> float:
    """Wasserstein-1 distance between two finitely supported measures.

    method:
        "cdf"  closed-form cumulative-distribution formula (interval and
               circle only; on the circle the optimal rotation offset is a
               weighted median, still exact),
        "lp"   exact optimal coupling by linear programming (any space),
        "auto" cdf where available, lp otherwise.

    Supports larger than `cap` points per side are rejected; consolidate or
    subsample first (the LP has size(mu) * size(nu) unknowns).
    """
    if mu.space != nu.space:
        raise ValueError(f"space mismatch: {mu.space!r} vs {nu.space!r}")
    if mu.size > cap or nu.size > cap:
        raise ValueError(
            f"support size exceeds cap={cap}; consolidate or subsample first"
        )
    if method == "auto":
        method = "cdf" if mu.space in ("interval", "circle") else "lp"
    if method == "cdf":
        if mu.space == "interval":
            return _w1_interval_cdf(mu, nu)
        if mu.space == "circle":
            return _w1_circle_cdf(mu, nu)
        raise ValueError(f"cdf method undefined on space {mu.space!r}")
    if method == "lp":
        return _w1_lp(mu, nu)
    raise ValueError(f"unknown method {method!r}")


def _signed_cdf_steps(mu, nu):
    """Breakpoints and the running F_mu - F_nu between them."""
    x = np.concatenate([mu.points, nu.points])
    s = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(x, kind="stable")
    x = x[order]
    s = s[order]
    return x, np.cumsum(s)


def _w1_interval_cdf(mu, nu) -> float:
    x, g = _signed_cdf_steps(mu, nu)
    gaps = np.diff(x)
    return float(np.abs(g[:-1]) @ gaps)


def _w1_circle_cdf(mu, nu) -> float:
    x, g = _signed_cdf_steps(mu, nu)
    gaps = np.concatenate([np.diff(x), [1.0 - x[-1] + x[0]]])
    keep = gaps > 0
    vals = g[keep]
    lens = gaps[keep]
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    lens = lens[order]
    cum = np.cumsum(lens)
    c = vals[np.searchsorted(cum, 0.5 * cum[-1], side="left")]
    return float(np.abs(vals - c) @ lens)


def _pairwise_cost(mu, nu) -> np.ndarray:
    a, b = mu.points, nu.points
    if mu.space == "interval":
        return np.abs(a[:, None] - b[None, :])
    if mu.space == "circle":
        d = np.abs(a[:, None] - b[None, :])
        return np.minimum(d, 1.0 - d)
    if mu.space == "torus":
        d0 = np.abs(a[:, None, 0] - b[None, :, 0])
        d0 = np.minimum(d0, 1.0 - d0)
        d1 = np.abs(a[:, None, 1] - b[None, :, 1])
        d1 = np.minimum(d1, 1.0 - d1)
        return np.maximum(d0, d1)
    if mu.space == "symbolic":
        wa = a[:, None, :]
        wb = b[None, :, :]
        width = min(a.shape[1], b.shape[1])
        neq = wa[:, :, :width] != wb[:, :, :width]
        first = np.where(
            neq.any(axis=2), neq.argmax(axis=2), width
        )
        return np.power(2.0, -first.astype(float))
    raise ValueError(f"unknown space {mu.space!r}")


def _w1_lp(mu, nu) -> float:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    cost = _pairwise_cost(mu, nu)
    n, m = cost.shape
    nv = n * m
    rows = []
    cols = []
    for i in range(n):
        rows.extend([i] * m)
        cols.extend(range(i * m, (i + 1) * m))
    for j in range(m - 1):
        rows.extend([n + j] * n)
        cols.extend(range(j, nv, m))
    a_eq = coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n + m - 1, nv)
    ).tocsr()
    b_eq = np.concatenate([mu.weights, nu.weights[:-1]])
    res = linprog(
        cost.reshape(-1),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)
