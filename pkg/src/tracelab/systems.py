"""Concrete measure-preserving systems and their simulation kernels.

The zoo covers five families on three kinds of phase space:

* circle maps on [0, 1): angle doubling, rigid rotation, an intermittent map
  with a neutral fixed point at 0, and the rank-k dyadic cyclic permutation
  (rotation by 2**-k),
* hyperbolic automorphisms of the 2-torus given by integer matrices,
* subshifts of finite type carrying Markov measures, observed through a
  finite symbol window.

Scalar `step`/`orbit` operate on individual points (floats, Fractions,
coordinate tuples, or SymbolPoint windows) and are exactly reproducible.
Batch kernels used by the statistics layer evolve whole sample arrays; for
angle doubling they work on the binary expansion directly (a sliding 53-bit
integer window fed by a seeded bit stream), because naive float64 iteration
of 2t mod 1 empties the mantissa after 52 steps and silently collapses every
orbit to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .rng import substream

_MANT_BITS = 53
_MANT_SCALE = float(2**_MANT_BITS)
_TAIL_LABEL = 0xA11CE


# ---------------------------------------------------------------------------
# system specifications


@dataclass
class SystemSpec:
    """Description of one concrete system.

    `space` is one of "circle", "torus", "symbolic". Parameter fields are
    populated by the constructor functions below; unused ones stay None.
    """

    name: str
    space: str
    alpha: float | None = None
    theta: float | Fraction | None = None
    matrix: tuple[tuple[int, int], tuple[int, int]] | None = None
    rank: int | None = None
    transitions: np.ndarray | None = None
    weights: np.ndarray | None = None
    stationary: np.ndarray | None = None
    window: int = 64

    @property
    def symbols(self) -> int:
        if self.transitions is None:
            raise ValueError("not a symbolic system")
        return self.transitions.shape[0]

    def describe(self) -> str:
        bits = [self.name]
        if self.alpha is not None:
            bits.append(f"alpha={self.alpha}")
        if self.theta is not None:
            bits.append(f"theta={float(self.theta)!r}")
        if self.matrix is not None:
            bits.append(f"matrix={self.matrix}")
        if self.rank is not None:
            bits.append(f"rank={self.rank}")
        if self.transitions is not None:
            bits.append(f"symbols={self.symbols}, window={self.window}")
        return " ".join(bits)


@dataclass(frozen=True)
class SymbolPoint:
    """A point of a subshift, visible through a finite window.

    `word` holds the visible symbols. For tail ("periodic",) the word is one
    full period and the point is the bi-infinite repetition; for tail
    ("seed", s, k) the word is a full window and future symbols are drawn
    from the Markov weights through the substream keyed by (s, position k).
    Stepping is a pure function of the fields, so orbits replay exactly.
    """

    word: tuple[int, ...]
    tail: tuple = ("periodic",)

    def expand(self, length: int) -> tuple[int, ...]:
        """Visible symbols up to `length` (tiles periodic words)."""
        if self.tail[0] == "periodic":
            reps = -(-length // len(self.word))
            return (self.word * reps)[:length]
        return self.word[:length]


def doubling() -> SystemSpec:
    """Angle doubling t -> 2t mod 1 on the circle (Lebesgue invariant)."""
    return SystemSpec(name="doubling", space="circle")


def rotation(theta) -> SystemSpec:
    """Rigid rotation t -> t + theta mod 1 (Lebesgue invariant).

    `theta` may be a float or a Fraction; Fraction angles keep rational
    points exact under iteration.
    """
    th = theta if isinstance(theta, Fraction) else float(theta)
    if isinstance(th, float):
        th = th % 1.0
    else:
        th = th % 1
    return SystemSpec(name="rotation", space="circle", theta=th)


def intermittent(alpha: float) -> SystemSpec:
    """Intermittent circle map with a neutral fixed point at 0.

    Left branch t + 2**alpha * t**(1+alpha) on [0, 1/2), right branch
    2t - 1 on [1/2, 1]; t = 1/2 takes the right branch. Requires
    0 < alpha < 1 so a finite absolutely continuous invariant measure
    exists. Correlation decay is polynomial and for alpha in (1/2, 1) the
    usual sqrt(n) normalization of ergodic sums has no Gaussian limit.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return SystemSpec(name="intermittent", space="circle", alpha=alpha)


def toral(matrix=((2, 1), (1, 1))) -> SystemSpec:
    """Hyperbolic automorphism of the 2-torus from an integer matrix.

    The matrix must be integral with determinant +-1 and no eigenvalue of
    modulus 1; Lebesgue measure on the torus is invariant.
    """
    m = tuple(tuple(int(v) for v in row) for row in matrix)
    if len(m) != 2 or any(len(r) != 2 for r in m):
        raise ValueError("matrix must be 2x2")
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if abs(det) != 1:
        raise ValueError(f"matrix must have determinant +-1, got {det}")
    eig = np.linalg.eigvals(np.array(m, dtype=float))
    if np.min(np.abs(np.abs(eig) - 1.0)) < 1e-9:
        raise ValueError("matrix has an eigenvalue on the unit circle")
    return SystemSpec(name="toral", space="torus", matrix=m)


def dyadic_permutation(rank: int) -> SystemSpec:
    """Rotation by 2**-rank: a cyclic permutation of the dyadic grid.

    Every orbit has exact period 2**rank. On binary64 samples drawn from
    Lebesgue measure the step arithmetic is exact (adding 2**-rank to a
    53-bit fraction and wrapping by subtracting 1 - 2**-rank incur no
    rounding), so the periodicity is exact in floating point too.
    """
    rank = int(rank)
    if rank < 1:
        raise ValueError("rank must be a positive integer")
    if rank > 50:
        raise ValueError("rank above 50 breaks exact float wrap arithmetic")
    return SystemSpec(name="dyadic-permutation", space="circle", rank=rank)


def subshift(transitions, weights=None, window: int = 64, stationary=None) -> SystemSpec:
    """Subshift of finite type with a Markov measure.

    Parameters
    ----------
    transitions : 0-1 matrix, entry (i, j) = 1 when symbol j may follow i.
    weights : row-stochastic matrix supported inside `transitions`; defaults
        to the uniform distribution on the allowed transitions of each row.
    window : length of the visible symbol window (metric resolution 2**-window).
    stationary : explicit stationary row vector. Required when `weights` is
        not primitive; otherwise computed by eigenvector extraction.
    """
    a = np.asarray(transitions)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("transitions must be square")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("transitions must be a 0-1 matrix")
    a = a.astype(np.int8)
    r = a.shape[0]
    if (a.sum(axis=1) == 0).any():
        raise ValueError("every symbol needs at least one outgoing transition")
    if weights is None:
        w = a.astype(float)
        w /= w.sum(axis=1, keepdims=True)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != a.shape:
            raise ValueError("weights shape must match transitions")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if np.abs(w.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("weight rows must sum to 1 within 1e-12")
        if ((w > 0) & (a == 0)).any():
            raise ValueError("weights must vanish on forbidden transitions")
    if stationary is not None:
        pi = np.asarray(stationary, dtype=float)
        if pi.shape != (r,) or (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("stationary must be a probability vector")
        if np.abs(pi @ w - pi).max() > 1e-9:
            raise ValueError("stationary vector is not invariant for the weights")
    else:
        primitive, _ = primitivity_check(w > 0)
        if not primitive:
            raise ValueError(
                "weights are not primitive; pass an explicit stationary vector"
            )
        pi = _stationary_vector(w)
    if window < 1:
        raise ValueError("window must be positive")
    return SystemSpec(
        name="sft",
        space="symbolic",
        transitions=a,
        weights=w,
        stationary=pi,
        window=int(window),
    )


def full_shift(symbols: int = 2, probs=None, window: int = 64) -> SystemSpec:
    """Full shift on `symbols` letters with an iid product measure."""
    r = int(symbols)
    if r < 2:
        raise ValueError("need at least two symbols")
    a = np.ones((r, r), dtype=np.int8)
    if probs is None:
        w = np.full((r, r), 1.0 / r)
    else:
        p = np.asarray(probs, dtype=float)
        if p.shape != (r,) or (p <= 0).any() or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a positive probability vector")
        w = np.tile(p, (r, 1))
    return subshift(a, w, window=window)


def _stationary_vector(w: np.ndarray) -> np.ndarray:
    """Stationary row vector of a primitive stochastic matrix."""
    vals, vecs = np.linalg.eig(w.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, k])
    pi = np.abs(pi)
    return pi / pi.sum()


def primitivity_check(matrix, bound: int | None = None):
    """Decide primitivity of a nonnegative matrix by boolean powering.

    Returns (is_primitive, exponent) where the exponent is the smallest k
    with all entries of matrix**k positive, searched up to the Wielandt
    bound (n-1)**2 + 1 (the sharp universal bound); None when not primitive.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if (np.asarray(a, dtype=float) < 0).any():
        raise ValueError("matrix must be nonnegative")
    n = a.shape[0]
    if bound is None:
        bound = (n - 1) ** 2 + 1
    b = a > 0
    cur = np.eye(n, dtype=bool)
    for k in range(1, bound + 1):
        cur = (cur.astype(np.int64) @ b.astype(np.int64)) > 0
        if cur.all():
            return True, k
    return False, None


# ---------------------------------------------------------------------------
# scalar dynamics


def _circle_dist(a, b):
    d = abs(a - b)
    half = Fraction(1, 2) if isinstance(d, Fraction) else 0.5
    return d if d <= half else 1 - d


def step(sys: SystemSpec, x):
    """Apply the map once to a single point.

    Fraction inputs stay exact for the arithmetic maps (doubling, rational
    rotation, dyadic permutation, toral); the intermittent map returns
    floats. Symbolic points advance their window by one symbol.
    """
    name = sys.name
    if name == "doubling":
        if isinstance(x, Fraction):
            return (2 * x) % 1
        y = 2.0 * float(x)
        return y - 1.0 if y >= 1.0 else y
    if name == "rotation":
        y = x + sys.theta
        return y % 1 if isinstance(y, Fraction) else y % 1.0
    if name == "dyadic-permutation":
        if isinstance(x, Fraction):
            return (x + Fraction(1, 2**sys.rank)) % 1
        delta = 2.0**-sys.rank
        xf = float(x)
        return xf - (1.0 - delta) if xf >= 1.0 - delta else xf + delta
    if name == "intermittent":
        t = float(x)
        if t < 0.5:
            return t + (2.0**sys.alpha) * t ** (1.0 + sys.alpha)
        return 2.0 * t - 1.0
    if name == "toral":
        (a, b), (c, d) = sys.matrix
        u, v = x
        if isinstance(u, Fraction) or isinstance(v, Fraction):
            return ((a * u + b * v) % 1, (c * u + d * v) % 1)
        return ((a * u + b * v) % 1.0, (c * u + d * v) % 1.0)
    if name == "sft":
        return _step_symbol(sys, x)
    raise ValueError(f"unknown system {name!r}")


def _step_symbol(sys: SystemSpec, x: SymbolPoint) -> SymbolPoint:
    if x.tail[0] == "periodic":
        w = x.word
        return SymbolPoint(word=w[1:] + (w[0],), tail=x.tail)
    _, seed, offset = x.tail
    last = x.word[-1]
    gen = substream(seed, _TAIL_LABEL, offset)
    u = gen.random()
    cum = np.cumsum(sys.weights[last])
    nxt = int(np.searchsorted(cum, u, side="right"))
    nxt = min(nxt, sys.symbols - 1)
    while sys.weights[last][nxt] == 0.0 and nxt > 0:
        nxt -= 1
    return SymbolPoint(word=x.word[1:] + (nxt,), tail=("seed", seed, offset + 1))


def orbit(sys: SystemSpec, x0, n: int) -> list:
    """First n points of the forward orbit, starting at x0."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    pts = []
    x = x0
    for _ in range(n):
        pts.append(x)
        x = step(sys, x)
    return pts


def distance(sys: SystemSpec, x, y) -> float:
    """Metric of the system's phase space.

    Circle: arc distance. Torus: max of coordinate arc distances. Symbolic:
    2**-(first disagreement) over the visible window, 0 for equal points,
    floor 2**-window for distinct points with identical windows.
    """
    if sys.space == "circle":
        return _circle_dist(x, y)
    if sys.space == "torus":
        return max(_circle_dist(x[0], y[0]), _circle_dist(x[1], y[1]))
    if sys.space == "symbolic":
        if x == y:
            return 0.0
        L = sys.window
        wx, wy = x.expand(L), y.expand(L)
        m = min(len(wx), len(wy))
        for j in range(m):
            if wx[j] != wy[j]:
                return 2.0**-j
        return 2.0**-L
    raise ValueError(f"unknown space {sys.space!r}")


# ---------------------------------------------------------------------------
# invariant sampling


def sample_invariant(sys: SystemSpec, n: int, seed: int, burn_in: int = 1000):
    """Draw n points distributed by the system's invariant measure.

    Doubling, rotation, dyadic permutation: iid Lebesgue samples (exact
    53-bit dyadic uniforms). Toral: iid Lebesgue on the square. Intermittent:
    consecutive orbit points after a burn-in (the absolutely continuous
    invariant density has no closed form, so the orbit itself is the
    sampler; atoms are correlated). Subshift: iid window draws from the
    stationary Markov chain.

    Returns an EmpiricalMeasure with uniform weights.
    """
    from .measures import EmpiricalMeasure

    gen = substream(seed, 0x5A17)
    meta = {"system": sys.name, "seed": int(seed), "kind": "invariant-sample"}
    if sys.space == "circle":
        if sys.name == "intermittent":
            x = gen.random()
            for _ in range(burn_in):
                x = step(sys, x)
            out = np.empty(n)
            for i in range(n):
                out[i] = x
                x = step(sys, x)
            meta["burn_in"] = burn_in
        else:
            out = gen.random(n)
        return EmpiricalMeasure(space="circle", points=out, weights=None, meta=meta)
    if sys.space == "torus":
        return EmpiricalMeasure(
            space="torus", points=gen.random((n, 2)), weights=None, meta=meta
        )
    if sys.space == "symbolic":
        wins = _markov_windows(sys, n, sys.window, gen)
        meta["tail_seed"] = int(seed)
        return EmpiricalMeasure(space="symbolic", points=wins, weights=None, meta=meta)
    raise ValueError(f"unknown space {sys.space!r}")


def _markov_windows(sys: SystemSpec, n: int, length: int, gen) -> np.ndarray:
    """n independent stationary Markov words of the given length."""
    r = sys.symbols
    out = np.empty((n, length), dtype=np.int8)
    cum0 = np.cumsum(sys.stationary)
    first = np.searchsorted(cum0, gen.random(n), side="right")
    out[:, 0] = np.minimum(first, r - 1)
    cum = np.cumsum(sys.weights, axis=1)
    last_allowed = np.array(
        [max(np.nonzero(sys.weights[s])[0]) for s in range(r)], dtype=np.int64
    )
    for k in range(1, length):
        u = gen.random(n)
        prev = out[:, k - 1].astype(np.int64)
        nxt = (cum[prev] <= u[:, None]).sum(axis=1)
        out[:, k] = np.minimum(nxt, last_allowed[prev])
    return out


# ---------------------------------------------------------------------------
# periodic points


def periodic_points(
    sys: SystemSpec,
    period: int,
    *,
    tol: float = 1e-12,
    max_period: int = 20,
    max_points: int = 20000,
) -> list:
    """All points with h**period x = x (shorter periods included).

    Doubling returns the exact rationals k/(2**period - 1). Toral solutions
    come from integer normal-form arithmetic and are exact Fractions. The
    intermittent map is solved per branch word by monotone bisection.
    Rotations and dyadic permutations are periodic only when the angle step
    is rationally compatible with the period; then every point is periodic
    and a finite set of representatives is returned (the dyadic grid orbit
    of 0, or 8 evenly spaced points for a rational rotation).
    """
    p = int(period)
    if p < 1:
        raise ValueError("period must be positive")
    if p > max_period:
        raise ValueError(
            f"period {p} exceeds the cap {max_period}; raise max_period to force"
        )
    name = sys.name
    if name == "doubling":
        q = 2**p - 1
        if q > max_points:
            raise ValueError("too many periodic points; raise max_points")
        return [Fraction(k, q) for k in range(q)]
    if name == "rotation":
        th = sys.theta
        if isinstance(th, Fraction):
            frac = (p * th) % 1
            near = frac == 0
        else:
            frac = (p * th) % 1.0
            near = min(frac, 1.0 - frac) <= tol
        if near:
            return [Fraction(i, 8) for i in range(8)]
        return []
    if name == "dyadic-permutation":
        if p % (2**sys.rank) == 0:
            return [Fraction(i, 2**sys.rank) for i in range(2**sys.rank)]
        return []
    if name == "intermittent":
        return _intermittent_periodic(sys, p)
    if name == "toral":
        return _toral_periodic(sys, p, max_points)
    if name == "sft":
        return _sft_periodic(sys, p, max_points)
    raise ValueError(f"unknown system {name!r}")


def _intermittent_left_inverse(sys: SystemSpec, y: float) -> float:
    """Solve t + 2**a t**(1+a) = y for t in [0, 1/2) by bisection."""
    lo, hi = 0.0, 0.5
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid + (2.0**sys.alpha) * mid ** (1.0 + sys.alpha) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _intermittent_forward(sys: SystemSpec, x: float, word) -> float:
    """Compose branches forced by `word` (0 = left, 1 = right)."""
    for b in word:
        if b == 0:
            x = x + (2.0**sys.alpha) * x ** (1.0 + sys.alpha)
        else:
            x = 2.0 * x - 1.0
    return x


def _intermittent_periodic(sys: SystemSpec, p: int) -> list:
    if p > 16:
        raise ValueError("intermittent periodic search capped at period 16")
    pts = [0.0]
    for word in product((0, 1), repeat=p):
        if all(b == 0 for b in word):
            continue
        lo, hi = 0.0, 1.0
        ok = True
        for b in reversed(word):
            if b == 1:
                lo, hi = (lo + 1.0) / 2.0, (hi + 1.0) / 2.0
                if lo >= 1.0:
                    ok = False
                    break
            else:
                hi = min(hi, 1.0 - 1e-15)
                lo = _intermittent_left_inverse(sys, lo)
                hi = _intermittent_left_inverse(sys, hi)
        if not ok:
            continue
        g_lo = _intermittent_forward(sys, lo, word) - lo
        g_hi = _intermittent_forward(sys, hi, word) - hi
        if g_lo > 0 or g_hi < 0:
            continue
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if _intermittent_forward(sys, mid, word) - mid < 0:
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        if _circle_dist(x % 1.0, 0.0) > 1e-9:
            pts.append(x)
    pts.sort()
    return pts


def _toral_periodic(sys: SystemSpec, p: int, max_points: int) -> list:
    from .ktheory import smith_normal_form

    m = np.array(sys.matrix, dtype=object)
    mp = np.eye(2, dtype=object)
    for _ in range(p):
        mp = mp @ m
    a = [[int(mp[0, 0]) - 1, int(mp[0, 1])], [int(mp[1, 0]), int(mp[1, 1]) - 1]]
    u, d, v = smith_normal_form(a)
    d1, d2 = abs(d[0][0]), abs(d[1][1])
    if d1 * d2 == 0:
        raise ValueError("matrix power has eigenvalue 1; system not hyperbolic")
    if d1 * d2 > max_points:
        raise ValueError("too many periodic points; raise max_points")
    pts = []
    for i in range(d1):
        for j in range(d2):
            y = (Fraction(i, d1), Fraction(j, d2))
            x0 = (v[0][0] * y[0] + v[0][1] * y[1]) % 1
            x1 = (v[1][0] * y[0] + v[1][1] * y[1]) % 1
            pts.append((x0, x1))
    return pts


def _sft_periodic(sys: SystemSpec, p: int, max_points: int) -> list:
    r = sys.symbols
    if r**p > 4 * max_points:
        raise ValueError("too many candidate words; raise max_points")
    a = sys.transitions
    pts = []
    for word in product(range(r), repeat=p):
        if all(a[word[i], word[(i + 1) % p]] for i in range(p)):
            pts.append(SymbolPoint(word=tuple(word), tail=("periodic",)))
            if len(pts) > max_points:
                raise ValueError("too many periodic points; raise max_points")
    return pts


# ---------------------------------------------------------------------------
# batch kernels


class _FloatBatch:
    """Vectorized orbits for rotation, intermittent, dyadic permutation."""

    def __init__(self, sys, x):
        self.sys = sys
        self.x = np.asarray(x, dtype=float)
        self.n = self.x.shape[0]

    def coords(self):
        return self.x

    def advance(self):
        sys = self.sys
        x = self.x
        if sys.name == "rotation":
            x += float(sys.theta)
            x[x >= 1.0] -= 1.0
        elif sys.name == "dyadic-permutation":
            delta = 2.0**-sys.rank
            wrap = x >= 1.0 - delta
            x[wrap] -= 1.0 - delta
            x[~wrap] += delta
        elif sys.name == "intermittent":
            left = x < 0.5
            xl = x[left]
            x[left] = xl + (2.0**sys.alpha) * xl ** (1.0 + sys.alpha)
            x[~left] = 2.0 * x[~left] - 1.0
        else:
            raise ValueError(f"no float kernel for {sys.name!r}")


class _BitBatch:
    """Angle-doubling orbits as sliding 53-bit windows over bit streams."""

    def __init__(self, mant, gen):
        self.mant = np.asarray(mant, dtype=np.uint64)
        self.gen = gen
        self.n = self.mant.shape[0]
        self._mask = np.uint64(2**_MANT_BITS - 1)

    def coords(self):
        return self.mant * (1.0 / _MANT_SCALE)

    def advance(self):
        bits = self.gen.integers(0, 2, size=self.n, dtype=np.uint64)
        self.mant = ((self.mant << np.uint64(1)) & self._mask) | bits


class _TorusBatch:
    """Vectorized toral automorphism orbits."""

    def __init__(self, sys, x):
        self.sys = sys
        self.x = np.asarray(x, dtype=float).reshape(-1, 2)
        self.n = self.x.shape[0]
        self._mt = np.array(sys.matrix, dtype=float).T

    def coords(self):
        return self.x

    def advance(self):
        self.x = np.mod(self.x @ self._mt, 1.0)


class _SymbolBatch:
    """Pregenerated Markov symbol matrices, advanced by a sliding cursor.

    coords() returns a width-`window` view; observables read their cylinder
    depth off the leading columns.
    """

    def __init__(self, sys, windows, n_steps, gen):
        w = np.asarray(windows, dtype=np.int8)
        self.sys = sys
        self.n = w.shape[0]
        L = sys.window
        total = L + n_steps
        self.mat = np.empty((self.n, total), dtype=np.int8)
        self.mat[:, :L] = w
        if n_steps > 0:
            _extend_markov(sys, self.mat, L, gen)
        self.cursor = 0
        self._L = L

    def coords(self):
        return self.mat[:, self.cursor : self.cursor + self._L]

    def advance(self):
        if self.cursor + self._L >= self.mat.shape[1]:
            raise RuntimeError("symbol batch advanced past its reserved steps")
        self.cursor += 1


def _extend_markov(sys, mat, start, gen):
    """Fill mat[:, start:] by the Markov chain conditioned on mat[:, start-1]."""
    n, total = mat.shape
    r = sys.symbols
    w = sys.weights
    iid = np.abs(w - w[0]).max() < 1e-15
    if iid:
        cum = np.cumsum(w[0])
        u = gen.random((n, total - start))
        vals = (cum[:-1][None, None, :] <= u[:, :, None]).sum(axis=2)
        mat[:, start:] = vals.astype(np.int8)
        return
    cum = np.cumsum(w, axis=1)
    last_allowed = np.array(
        [max(np.nonzero(w[s])[0]) for s in range(r)], dtype=np.int64
    )
    for k in range(start, total):
        u = gen.random(n)
        prev = mat[:, k - 1].astype(np.int64)
        nxt = (cum[prev] <= u[:, None]).sum(axis=1)
        mat[:, k] = np.minimum(nxt, last_allowed[prev]).astype(np.int8)


def make_batch(sys: SystemSpec, init, n_steps: int, gen):
    """Build a batch of orbits ready to advance n_steps times.

    `init` is either an integer (draw that many points from the invariant
    measure using `gen`) or an array of phase coordinates (float vector,
    (n, 2) torus array, or (n, window) symbol matrix). `gen` also feeds any
    stochastic tails (doubling bit streams, subshift extensions).
    """
    if sys.name == "doubling":
        if isinstance(init, (int, np.integer)):
            mant = gen.integers(0, 2**_MANT_BITS, size=int(init), dtype=np.uint64)
        else:
            c = np.asarray(init, dtype=float)
            mant = np.minimum(
                np.rint(c * _MANT_SCALE), _MANT_SCALE - 1
            ).astype(np.uint64)
        return _BitBatch(mant, gen)
    if sys.space == "circle":
        if isinstance(init, (int, np.integer)):
            if sys.name == "intermittent":
                x = gen.random(int(init))
                warm = _FloatBatch(sys, x)
                for _ in range(1000):
                    warm.advance()
                return warm
            x = gen.random(int(init))
        else:
            x = np.array(init, dtype=float, copy=True)
        return _FloatBatch(sys, x)
    if sys.space == "torus":
        if isinstance(init, (int, np.integer)):
            x = gen.random((int(init), 2))
        else:
            x = np.array(init, dtype=float, copy=True)
        return _TorusBatch(sys, x)
    if sys.space == "symbolic":
        if isinstance(init, (int, np.integer)):
            wins = _markov_windows(sys, int(init), sys.window, gen)
        else:
            wins = np.asarray(init, dtype=np.int8)
        return _SymbolBatch(sys, wins, n_steps, gen)
    raise ValueError(f"unknown space {sys.space!r}")


def step_coords(sys: SystemSpec, coords: np.ndarray) -> np.ndarray:
    """Apply the map once to an array of float coordinates.

    Plain float64 arithmetic on the given coordinates (no bit-stream state),
    suitable for one-shot pushforwards and coboundary evaluation. Iterating
    this on angle doubling degrades after ~52 steps; long doubling orbits
    must go through make_batch / orbit_coord_series instead.
    """
    x = np.asarray(coords, dtype=float)
    name = sys.name
    if name == "doubling":
        y = 2.0 * x.copy()
        y[y >= 1.0] -= 1.0
        return y
    if name == "rotation":
        return (x + float(sys.theta)) % 1.0
    if name == "dyadic-permutation":
        delta = 2.0**-sys.rank
        y = x.copy()
        wrap = y >= 1.0 - delta
        y[wrap] -= 1.0 - delta
        y[~wrap] += delta
        return y
    if name == "intermittent":
        y = x.copy()
        left = y < 0.5
        yl = y[left]
        y[left] = yl + (2.0**sys.alpha) * yl ** (1.0 + sys.alpha)
        y[~left] = 2.0 * y[~left] - 1.0
        return y
    if name == "toral":
        mt = np.array(sys.matrix, dtype=float).T
        return np.mod(x.reshape(-1, 2) @ mt, 1.0)
    raise ValueError(f"no coordinate step for system {name!r}")


def map_lipschitz_bound(sys: SystemSpec) -> float:
    """Upper bound for the Lipschitz constant of one map application."""
    name = sys.name
    if name in ("rotation", "dyadic-permutation"):
        return 1.0
    if name == "doubling":
        return 2.0
    if name == "intermittent":
        return 2.0 + sys.alpha
    if name == "toral":
        return float(max(abs(a) + abs(b) for a, b in sys.matrix))
    if name == "sft":
        return 2.0
    raise ValueError(f"unknown system {name!r}")


def orbit_coord_series(sys: SystemSpec, n_steps: int, seed: int, x0=None):
    """Coordinates along one long orbit, computed by the fastest exact route.

    Returns a float array (n_steps,) for circle systems, an (n_steps, 2)
    array for the torus, and an (n_steps + window,) symbol array for
    subshifts (consume windows via a sliding view). Used by single-orbit
    statistics; doubling uses an explicit bit stream so the orbit stays
    nondegenerate for arbitrarily many steps.
    """
    gen = substream(seed, 0x0B17)
    if sys.name == "doubling":
        bits = gen.integers(0, 2, size=n_steps + _MANT_BITS, dtype=np.uint8)
        if x0 is not None:
            m = int(min(np.rint(float(x0) * _MANT_SCALE), _MANT_SCALE - 1))
            for j in range(_MANT_BITS):
                bits[j] = (m >> (_MANT_BITS - 1 - j)) & 1
        pows = 0.5 ** np.arange(1, _MANT_BITS + 1)
        out = np.empty(n_steps)
        view = np.lib.stride_tricks.sliding_window_view(bits, _MANT_BITS)
        chunk = 1 << 17
        for s in range(0, n_steps, chunk):
            e = min(s + chunk, n_steps)
            out[s:e] = view[s:e].astype(float) @ pows
        return out
    if sys.name == "rotation":
        start = gen.random() if x0 is None else float(x0)
        th = float(sys.theta)
        return np.mod(start + th * np.arange(n_steps, dtype=float), 1.0)
    if sys.name == "dyadic-permutation":
        start = gen.random() if x0 is None else float(x0)
        batch = _FloatBatch(sys, np.array([start]))
        out = np.empty(n_steps)
        for k in range(n_steps):
            out[k] = batch.x[0]
            batch.advance()
        return out
    if sys.name == "intermittent":
        x = gen.random() if x0 is None else float(x0)
        if x0 is None:
            for _ in range(1000):
                x = step(sys, x)
        out = np.empty(n_steps)
        alpha = sys.alpha
        coef = 2.0**alpha
        for k in range(n_steps):
            out[k] = x
            x = x + coef * x ** (1.0 + alpha) if x < 0.5 else 2.0 * x - 1.0
        return out
    if sys.space == "torus":
        x = tuple(gen.random(2)) if x0 is None else (float(x0[0]), float(x0[1]))
        out = np.empty((n_steps, 2))
        for k in range(n_steps):
            out[k] = x
            x = step(sys, x)
        return out
    if sys.space == "symbolic":
        total = n_steps + sys.window
        mat = np.empty((1, total), dtype=np.int8)
        if x0 is None:
            mat[0, : sys.window] = _markov_windows(sys, 1, sys.window, gen)[0]
        else:
            mat[0, : sys.window] = np.asarray(x0.expand(sys.window), dtype=np.int8)
        _extend_markov(sys, mat, sys.window, gen)
        return mat[0]
    raise ValueError(f"unknown system {sys.name!r}")
