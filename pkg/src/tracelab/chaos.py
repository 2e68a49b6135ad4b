"""Finite-resolution chaos certificates with replayable witnesses.

Three checks at a declared grid resolution eps: topological transitivity
(every ordered cell pair linked by an orbit segment), density of periodic
points (every cell contains one), and sensitive dependence (nearby probe
pairs separate to macroscopic distance). Every PASS is witnessed by
concrete data — an initial point and a step count, a periodic point and its
period — and every witness replays exactly through the system's own
dynamics: angle-doubling witnesses are dyadic or odd-denominator rationals
handled in exact arithmetic, subshift witnesses are explicit periodic
words, float witnesses replay through the identical vectorized kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from . import systems as _systems
from .rng import substream


# ---------------------------------------------------------------------------
# grid cells


@dataclass(frozen=True)
class GridCell:
    """Half-open grid cell at resolution eps.

    index: (i,) on the circle for [i*eps, (i+1)*eps), (i, j) on the torus,
    and a symbol word (cylinder) on shift spaces, where eps = 2**-len(word).
    """

    eps: float
    index: tuple

    def as_json(self):
        return {"eps": self.eps, "index": list(self.index)}


def _num_side(eps: float) -> int:
    n = round(1.0 / eps)
    if abs(n * eps - 1.0) > 1e-9:
        raise ValueError(f"eps must divide 1 evenly, got {eps}")
    return int(n)


def cells_of(sys, eps: float) -> list[GridCell]:
    """All grid cells of the partition at resolution eps."""
    if sys.space == "circle":
        n = _num_side(eps)
        return [GridCell(eps, (i,)) for i in range(n)]
    if sys.space == "torus":
        n = _num_side(eps)
        return [GridCell(eps, (i, j)) for i in range(n) for j in range(n)]
    if sys.space == "symbolic":
        depth = round(-math.log2(eps))
        if abs(2.0**-depth - eps) > 1e-12:
            raise ValueError("symbolic resolutions must be powers of 1/2")
        r = sys.symbols
        a = sys.transitions
        words = []
        for w in product(range(r), repeat=depth):
            if all(a[w[i], w[i + 1]] for i in range(depth - 1)):
                words.append(GridCell(eps, tuple(w)))
        return words
    raise ValueError(f"unknown space {sys.space!r}")


def cell_of(sys, eps: float, x) -> GridCell:
    """The grid cell containing the point x."""
    if sys.space == "circle":
        n = _num_side(eps)
        i = min(int(float(x) * n), n - 1)
        return GridCell(eps, (i,))
    if sys.space == "torus":
        n = _num_side(eps)
        i = min(int(float(x[0]) * n), n - 1)
        j = min(int(float(x[1]) * n), n - 1)
        return GridCell(eps, (i, j))
    if sys.space == "symbolic":
        depth = round(-math.log2(eps))
        return GridCell(eps, tuple(x.expand(depth)))
    raise ValueError(f"unknown space {sys.space!r}")


def cell_contains(sys, cell: GridCell, x) -> bool:
    """Exact membership test (rationals compared exactly)."""
    if sys.space == "circle":
        n = _num_side(cell.eps)
        i = cell.index[0]
        if isinstance(x, Fraction):
            return Fraction(i, n) <= x < Fraction(i + 1, n)
        return i / n <= float(x) < (i + 1) / n
    if sys.space == "torus":
        n = _num_side(cell.eps)
        i, j = cell.index
        def inside(v, k):
            if isinstance(v, Fraction):
                return Fraction(k, n) <= v < Fraction(k + 1, n)
            return k / n <= float(v) < (k + 1) / n
        return inside(x[0], i) and inside(x[1], j)
    if sys.space == "symbolic":
        return tuple(x.expand(len(cell.index))) == cell.index
    raise ValueError(f"unknown space {sys.space!r}")


def _cell_center(sys, cell: GridCell):
    if sys.space == "circle":
        n = _num_side(cell.eps)
        return (cell.index[0] + 0.5) / n
    if sys.space == "torus":
        n = _num_side(cell.eps)
        return ((cell.index[0] + 0.5) / n, (cell.index[1] + 0.5) / n)
    raise ValueError("no coordinate centers on symbol spaces")


# ---------------------------------------------------------------------------
# serialization helpers


def _point_json(x):
    if isinstance(x, Fraction):
        return {"type": "fraction", "num": int(x.numerator), "den": int(x.denominator)}
    if isinstance(x, _systems.SymbolPoint):
        return {"type": "word", "word": [int(s) for s in x.word], "tail": list(x.tail)}
    if isinstance(x, tuple):
        return {"type": "pair", "values": [_point_json(v) for v in x]}
    return {"type": "float", "value": float(x)}


# ---------------------------------------------------------------------------
# transitivity


@dataclass
class TransitivityReport:
    ok: bool
    eps: float
    horizon: int
    covered_pairs: int
    total_pairs: int
    missing: list
    witnesses: dict
    method: str

    def to_dict(self) -> dict:
        wit = {
            f"{u}->{v}": {"x0": _point_json(x0), "steps": int(n)}
            for (u, v), (x0, n) in sorted(self.witnesses.items())
        }
        return {
            "kind": "transitivity",
            "ok": bool(self.ok),
            "eps": float(self.eps),
            "horizon": int(self.horizon),
            "covered_pairs": int(self.covered_pairs),
            "total_pairs": int(self.total_pairs),
            "missing": [list(map(list, mv)) for mv in self.missing],
            "method": self.method,
            "witnesses": wit,
        }


def transitivity_check(
    sys, eps: float, horizon: int = 4096, fills: int = 32, seed: int = 0
) -> TransitivityReport:
    """Witness orbit segments from every grid cell into every grid cell.

    Angle doubling takes a constructive route: the cell pair (U, V) with
    addresses u, v is witnessed by the dyadic rational 0.uv, whose orbit
    lands on the left endpoint of V after |u| steps; each witness is
    replayed exactly before being accepted. Subshifts are witnessed by
    explicit admissible bridge words. Other systems are sampled: cell
    centers plus `fills` random points per cell evolve up to `horizon`
    steps and first arrivals are recorded.
    """
    if sys.name == "doubling":
        return _transitivity_doubling(sys, eps)
    if sys.space == "symbolic":
        return _transitivity_symbolic(sys, eps)
    return _transitivity_sampled(sys, eps, horizon, fills, seed)


def _transitivity_doubling(sys, eps: float) -> TransitivityReport:
    n = _num_side(eps)
    depth = round(math.log2(n))
    if abs(2**depth - n) > 0:
        raise ValueError("doubling transitivity needs a dyadic resolution")
    witnesses = {}
    for u in range(n):
        for v in range(n):
            num = u * n + v
            den = n * n
            if 2 * depth <= 52:
                x0 = num / den
            else:
                x0 = Fraction(num, den)
            # replay exactly
            y = Fraction(num, den)
            for _ in range(depth):
                y = _systems.step(sys, y)
            cell_v = GridCell(eps, (v,))
            if not cell_contains(sys, cell_v, y):
                raise AssertionError("doubling witness failed exact replay")
            witnesses[((u,), (v,))] = (x0, depth)
    total = n * n
    return TransitivityReport(
        ok=True,
        eps=eps,
        horizon=depth,
        covered_pairs=total,
        total_pairs=total,
        missing=[],
        witnesses=witnesses,
        method="dyadic-address",
    )


def _bridge_words(sys):
    """Shortest positive-length admissible paths between symbols.

    paths[(src, dst)] is the word of symbols following src and ending at
    dst, always with at least one step so that concatenations never need a
    possibly forbidden self-transition.
    """
    r = sys.symbols
    a = sys.transitions
    nxt = [[int(t) for t in np.nonzero(a[s])[0]] for s in range(r)]
    paths = {}
    for src in range(r):
        seen = {}
        frontier = []
        for t in nxt[src]:
            if t not in seen:
                seen[t] = (t,)
                frontier.append(t)
        while frontier:
            new = []
            for s in frontier:
                for t in nxt[s]:
                    if t not in seen:
                        seen[t] = seen[s] + (t,)
                        new.append(t)
            frontier = new
        for dst, path in seen.items():
            paths[(src, dst)] = path
    return paths


def _transitivity_symbolic(sys, eps: float) -> TransitivityReport:
    depth = round(-math.log2(eps))
    cells = cells_of(sys, eps)
    paths = _bridge_words(sys)
    witnesses = {}
    missing = []
    for cu in cells:
        for cv in cells:
            u, v = cu.index, cv.index
            key = (paths.get((u[-1], v[0]), None))
            back = paths.get((v[-1], u[0]), None)
            if key is None or back is None:
                missing.append((u, v))
                continue
            bridge_uv = key[:-1] if len(key) else ()
            bridge_vu = back[:-1] if len(back) else ()
            cycle = u + bridge_uv + v + bridge_vu
            x0 = _systems.SymbolPoint(word=cycle, tail=("periodic",))
            steps = len(u) + len(bridge_uv)
            y = x0
            for _ in range(steps):
                y = _systems.step(sys, y)
            if tuple(y.expand(depth)) != v:
                missing.append((u, v))
                continue
            witnesses[(u, v)] = (x0, steps)
    total = len(cells) ** 2
    return TransitivityReport(
        ok=not missing,
        eps=eps,
        horizon=max((n for _, n in witnesses.values()), default=0),
        covered_pairs=total - len(missing),
        total_pairs=total,
        missing=missing,
        witnesses=witnesses,
        method="bridge-words",
    )


def _transitivity_sampled(sys, eps, horizon, fills, seed) -> TransitivityReport:
    cells = cells_of(sys, eps)
    ncells = len(cells)
    gen = substream(seed, 0x7A5)
    seeds = []
    origin = []
    for ci, cell in enumerate(cells):
        if sys.space == "circle":
            n = _num_side(eps)
            base = cell.index[0] / n
            seeds.append(base + 0.5 * eps)
            pts = base + gen.random(fills) * eps
            seeds.extend(pts.tolist())
        else:
            n = _num_side(eps)
            bi, bj = cell.index[0] / n, cell.index[1] / n
            seeds.append((bi + 0.5 * eps, bj + 0.5 * eps))
            pts = np.column_stack(
                [bi + gen.random(fills) * eps, bj + gen.random(fills) * eps]
            )
            seeds.extend(map(tuple, pts))
        origin.extend([ci] * (fills + 1))
    coords = np.array(seeds, dtype=float)
    origin = np.array(origin)
    starts = coords.copy()
    covered = np.zeros((ncells, ncells), dtype=bool)
    witnesses = {}

    def cell_idx(arr):
        if sys.space == "circle":
            n = _num_side(eps)
            return np.minimum((arr * n).astype(np.int64), n - 1)
        n = _num_side(eps)
        ij = np.minimum((arr * n).astype(np.int64), n - 1)
        return ij[:, 0] * n + ij[:, 1]

    cur = coords
    for step_no in range(horizon + 1):
        vi = cell_idx(cur)
        newly = ~covered[origin, vi]
        if newly.any():
            for s in np.nonzero(newly)[0]:
                u, v = origin[s], vi[s]
                if not covered[u, v]:
                    covered[u, v] = True
                    x0 = (
                        float(starts[s])
                        if sys.space == "circle"
                        else (float(starts[s][0]), float(starts[s][1]))
                    )
                    witnesses[(cells[u].index, cells[v].index)] = (x0, step_no)
        if covered.all() or step_no == horizon:
            break
        cur = _systems.step_coords(sys, cur)

    missing = [
        (cells[u].index, cells[v].index)
        for u in range(ncells)
        for v in range(ncells)
        if not covered[u, v]
    ]
    return TransitivityReport(
        ok=not missing,
        eps=eps,
        horizon=horizon,
        covered_pairs=int(covered.sum()),
        total_pairs=ncells * ncells,
        missing=missing,
        witnesses=witnesses,
        method="sampled-orbits",
    )


# ---------------------------------------------------------------------------
# periodic density


@dataclass
class PeriodicDensityReport:
    ok: bool
    eps: float
    max_period: int
    replay_tol: float
    witnesses: dict
    uncovered: list

    def to_dict(self) -> dict:
        wit = {
            str(idx): {"point": _point_json(x), "period": int(p)}
            for idx, (x, p) in sorted(self.witnesses.items())
        }
        return {
            "kind": "periodic-density",
            "ok": bool(self.ok),
            "eps": float(self.eps),
            "max_period": int(self.max_period),
            "replay_tol": float(self.replay_tol),
            "uncovered": [list(ix) for ix in self.uncovered],
            "witnesses": wit,
        }


def periodic_density_check(
    sys, eps: float, max_period: int = 10, replay_tol: float = 1e-9
) -> PeriodicDensityReport:
    """Find a periodic point in every grid cell, replaying each witness.

    Periods 1..max_period are enumerated until every cell holds a witness
    whose replayed orbit returns within replay_tol (exactly, for rational
    witnesses). Cells still empty afterwards are reported as uncovered.
    """
    cells = cells_of(sys, eps)
    remaining = {c.index for c in cells}
    witnesses = {}
    for p in range(1, max_period + 1):
        if not remaining:
            break
        pts = _systems.periodic_points(sys, p, max_period=max_period)
        for x in pts:
            idx = cell_of(sys, eps, x).index
            if idx not in remaining:
                continue
            y = x
            for _ in range(p):
                y = _systems.step(sys, y)
            if _systems.distance(sys, y, x) <= replay_tol:
                witnesses[idx] = (x, p)
                remaining.discard(idx)
    uncovered = sorted(remaining)
    return PeriodicDensityReport(
        ok=not uncovered,
        eps=eps,
        max_period=max_period,
        replay_tol=replay_tol,
        witnesses=witnesses,
        uncovered=uncovered,
    )


# ---------------------------------------------------------------------------
# sensitivity


@dataclass
class SensitivityReport:
    delta_hat: float
    probe_eps: float
    horizon: int
    trials: int
    sensitive: bool
    witness: dict

    def to_dict(self) -> dict:
        return {
            "kind": "sensitivity",
            "delta_hat": float(self.delta_hat),
            "probe_eps": float(self.probe_eps),
            "horizon": int(self.horizon),
            "trials": int(self.trials),
            "sensitive": bool(self.sensitive),
            "witness": self.witness,
        }


def sensitivity_estimate(
    sys,
    probe_eps: float = 1e-6,
    trials: int = 1000,
    horizon: int = 40,
    seed: int = 0,
) -> SensitivityReport:
    """Estimate a sensitivity constant from probe pairs.

    For each base point x (invariant sample) a probe y at distance
    probe_eps / 2 is launched and both orbits run `horizon` steps through
    the identical vectorized kernel; delta_hat is the worst-case (minimum
    over pairs) of the maximal separation. `sensitive` requires delta_hat
    to exceed 10 * probe_eps, so an isometry (separation frozen at the
    probe offset) can never pass. For angle doubling the float kernel is
    exact up to 52 steps, so horizons beyond 50 are rejected.
    """
    if sys.space == "symbolic":
        return _sensitivity_symbolic(sys, probe_eps, trials, horizon, seed)
    if sys.name == "doubling" and horizon > 50:
        raise ValueError("doubling sensitivity horizon capped at 50 float steps")
    gen = substream(seed, 0x5E25)
    if sys.space == "circle":
        x = gen.random(trials)
        y = (x + 0.5 * probe_eps) % 1.0
    else:
        x = gen.random((trials, 2))
        y = x.copy()
        y[:, 0] = (y[:, 0] + 0.5 * probe_eps) % 1.0
    best = np.zeros(trials)
    best_step = np.zeros(trials, dtype=np.int64)
    cx, cy = x.copy(), y.copy()
    for k in range(1, horizon + 1):
        cx = _systems.step_coords(sys, cx)
        cy = _systems.step_coords(sys, cy)
        if sys.space == "circle":
            d = np.abs(cx - cy)
            d = np.minimum(d, 1.0 - d)
        else:
            d0 = np.abs(cx[:, 0] - cy[:, 0])
            d0 = np.minimum(d0, 1.0 - d0)
            d1 = np.abs(cx[:, 1] - cy[:, 1])
            d1 = np.minimum(d1, 1.0 - d1)
            d = np.maximum(d0, d1)
        grow = d > best
        best[grow] = d[grow]
        best_step[grow] = k
    w = int(np.argmin(best))
    delta = float(best[w])
    witness = {
        "x": _point_json(float(x[w]) if sys.space == "circle" else tuple(x[w])),
        "y": _point_json(float(y[w]) if sys.space == "circle" else tuple(y[w])),
        "separation": float(best[w]),
        "at_step": int(best_step[w]),
    }
    return SensitivityReport(
        delta_hat=delta,
        probe_eps=probe_eps,
        horizon=horizon,
        trials=trials,
        sensitive=bool(delta > 10.0 * probe_eps),
        witness=witness,
    )


def _admissible_flip(sys, word, start):
    """Copy `word` changed at the first position >= start with a branching
    row, re-extending the suffix admissibly; None if no branch exists."""
    a = sys.transitions
    w = list(word)
    for pos in range(start, len(w) - 1):
        prev = w[pos - 1] if pos > 0 else None
        allowed = (
            np.nonzero(a[prev])[0] if prev is not None else np.arange(sys.symbols)
        )
        others = [int(s) for s in allowed if s != w[pos]]
        if not others:
            continue
        w[pos] = others[0]
        for j in range(pos + 1, len(w)):
            w[j] = int(np.nonzero(a[w[j - 1]])[0][0])
        return tuple(w), pos
    return None


def _sensitivity_symbolic(sys, probe_eps, trials, horizon, seed):
    depth = max(1, math.ceil(-math.log2(probe_eps)))
    if depth >= sys.window:
        raise ValueError("probe_eps finer than the symbol window resolution")
    trials = min(trials, 64)  # scalar symbol stepping; separation is forced
    mu = _systems.sample_invariant(sys, trials, seed)
    pts = mu.point_list()
    best = None
    for p in pts:
        flip = _admissible_flip(sys, p.word, depth)
        if flip is None:
            continue
        flipped, pos = flip
        if 2.0**-pos > probe_eps:
            continue
        q = _systems.SymbolPoint(word=flipped, tail=p.tail)
        dmax, kstar = 0.0, 0
        a, b = p, q
        for k in range(1, horizon + 1):
            a = _systems.step(sys, a)
            b = _systems.step(sys, b)
            d = _systems.distance(sys, a, b)
            if d > dmax:
                dmax, kstar = d, k
        if best is None or dmax < best[0]:
            best = (dmax, kstar, p, q)
    if best is None:
        raise ValueError("no admissible probe pair at this resolution")
    delta, kstar, p, q = best
    return SensitivityReport(
        delta_hat=float(delta),
        probe_eps=probe_eps,
        horizon=horizon,
        trials=trials,
        sensitive=bool(delta > 10.0 * probe_eps),
        witness={
            "x": _point_json(p),
            "y": _point_json(q),
            "separation": float(delta),
            "at_step": int(kstar),
        },
    )


# ---------------------------------------------------------------------------
# simultaneous-visit witnesses


@dataclass
class TouheyWitness:
    point: object
    period: int
    u_phase: int
    v_phase: int

    def to_dict(self) -> dict:
        return {
            "kind": "touhey-witness",
            "point": _point_json(self.point),
            "period": int(self.period),
            "u_phase": int(self.u_phase),
            "v_phase": int(self.v_phase),
        }


def touhey_witness(sys, u_cell: GridCell, v_cell: GridCell, max_period: int = 12):
    """A single periodic orbit visiting both cells, with visit phases.

    For angle doubling the witness is constructed exactly: concatenating
    the cell addresses u, v into a repeating word gives the rational
    k / (2**(|u|+|v|) - 1), which sits in U at phase 0 and in V at phase
    |u|. Subshifts concatenate admissible bridge words. Other systems
    search the enumerated periodic points up to max_period; returns None
    when no periodic orbit meets both cells.
    """
    if sys.name == "doubling":
        nu = _num_side(u_cell.eps)
        nv = _num_side(v_cell.eps)
        du, dv = round(math.log2(nu)), round(math.log2(nv))
        u, v = u_cell.index[0], v_cell.index[0]
        period = du + dv
        k = u * nv + v
        if k == 2**period - 1:
            # all-ones address word encodes the point 1 = 0 mod 1, which
            # leaves the top cell; a padded zero bit keeps both prefix
            # memberships and breaks the degeneracy
            period += 1
            k *= 2
        x = Fraction(k, 2**period - 1)
        y = x
        for _ in range(du):
            y = _systems.step(sys, y)
        if not (cell_contains(sys, u_cell, x) and cell_contains(sys, v_cell, y)):
            return None
        return TouheyWitness(point=x, period=period, u_phase=0, v_phase=du)
    if sys.space == "symbolic":
        paths = _bridge_words(sys)
        u, v = u_cell.index, v_cell.index
        f = paths.get((u[-1], v[0]))
        b = paths.get((v[-1], u[0]))
        if f is None or b is None:
            return None
        cycle = u + f[:-1] + v + b[:-1]
        x = _systems.SymbolPoint(word=cycle, tail=("periodic",))
        return TouheyWitness(
            point=x, period=len(cycle), u_phase=0, v_phase=len(u) + len(f[:-1])
        )
    for p in range(1, max_period + 1):
        try:
            pts = _systems.periodic_points(sys, p, max_period=max_period)
        except ValueError:
            break
        for x in pts:
            orbit = [x]
            y = x
            for _ in range(p - 1):
                y = _systems.step(sys, y)
                orbit.append(y)
            pu = [k for k, z in enumerate(orbit) if cell_contains(sys, u_cell, z)]
            pv = [k for k, z in enumerate(orbit) if cell_contains(sys, v_cell, z)]
            if pu and pv:
                return TouheyWitness(
                    point=x, period=p, u_phase=pu[0], v_phase=pv[0]
                )
    return None


# ---------------------------------------------------------------------------
# combined certificate


@dataclass
class ChaosCertificate:
    chaotic: bool
    eps: float
    transitivity: TransitivityReport
    periodic_density: PeriodicDensityReport
    sensitivity: SensitivityReport

    def to_dict(self) -> dict:
        return {
            "kind": "chaos-certificate",
            "chaotic": bool(self.chaotic),
            "eps": float(self.eps),
            "transitivity": self.transitivity.to_dict(),
            "periodic_density": self.periodic_density.to_dict(),
            "sensitivity": self.sensitivity.to_dict(),
        }


def chaos_certificate(
    sys,
    eps: float,
    horizon: int = 4096,
    max_period: int = 10,
    probe_eps: float = 1e-6,
    trials: int = 1000,
    sensitivity_horizon: int = 40,
    seed: int = 0,
) -> ChaosCertificate:
    """Run all three finite-resolution checks and combine the verdict.

    The certificate passes when transitivity and periodic density hold at
    resolution eps and the sensitivity estimate clears 10 * probe_eps.
    """
    trans = transitivity_check(sys, eps, horizon=horizon, seed=seed)
    dens = periodic_density_check(sys, eps, max_period=max_period)
    sens = sensitivity_estimate(
        sys, probe_eps=probe_eps, trials=trials, horizon=sensitivity_horizon, seed=seed
    )
    return ChaosCertificate(
        chaotic=bool(trans.ok and dens.ok and sens.sensitive),
        eps=eps,
        transitivity=trans,
        periodic_density=dens,
        sensitivity=sens,
    )
