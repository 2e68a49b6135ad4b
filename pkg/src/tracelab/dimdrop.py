"""Numerical checks for a dimension-drop interval construction.

The construction iterates building blocks A(p, q): continuous M_{p q}-valued
functions on [0, 1] whose endpoint values factor as M_p tensor 1 and
1 tensor M_q. A stage is a coprime pair (p, q) together with a successor
(p', q') and a copy count N = p'q' / (pq); the successor is admissible when
q'/N stays below both 1/m**2 and (exp(1/m**2) - 1)/K_m, which keeps the
total Lipschitz inflation of traced observables bounded by exp(pi**2 / 6)
across all stages. This module generates admissible stage tables exactly,
builds one fully explicit connecting map as a concrete demonstration (with
permutation matrices realizing the endpoint conditions), verifies the
endpoint algebra memberships two independent ways, and implements the
induced pushforward of traces in the empirical-measure picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .measures import EmpiricalMeasure
from .rng import substream

_BUDGET_BOUND = math.exp(math.pi**2 / 6.0)


# ---------------------------------------------------------------------------
# primality (deterministic Miller-Rabin, enough for any 64-bit stage table)

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _next_prime(n: int) -> int:
    c = n + 1
    while not _is_prime(c):
        c += 1
    return c


# ---------------------------------------------------------------------------
# stage tables


@dataclass(frozen=True)
class StageParams:
    """One admissible stage (p, q) -> (next_p, next_q) with N copies.

    bands is the copy split (N - next_q, next_p, next_q - next_p): how many
    of the N evaluation paths are boundary-to-boundary, pinned to a single
    interior point, and retraction-reparametrized, respectively. ratio is
    the exact next_q / N = p q / next_p, and bound is the admissibility
    ceiling min(1/m**2, (exp(1/m**2) - 1) / K) it must stay under.
    """

    index: int
    p: int
    q: int
    next_p: int
    next_q: int
    N: int
    s: int
    K: float
    bands: tuple
    ratio: Fraction
    bound: float

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "p": self.p,
            "q": self.q,
            "next_p": self.next_p,
            "next_q": self.next_q,
            "N": self.N,
            "s": self.s,
            "K": self.K,
            "bands": list(self.bands),
            "ratio": [int(self.ratio.numerator), int(self.ratio.denominator)],
            "bound": self.bound,
        }


def generate_parameters(stages: int, start=(2, 3), K=1.0) -> list[StageParams]:
    """Exact admissible stage table from a coprime seed pair.

    Stage m picks next_p as the smallest prime exceeding
    p*q*max(m**2, K_m / (exp(1/m**2) - 1)), then the smallest multiple
    next_q = p*q*s above next_p; N = next_p * s keeps p*q*N = next_p*next_q
    exactly. next_p prime and larger than both p*q and s forces
    gcd(next_p, next_q) = 1, and next_q / N = p*q / next_p lands strictly
    under the admissibility ceiling by the choice of next_p. K may be one
    number or a sequence with one entry per stage.
    """
    stages = int(stages)
    if stages < 0:
        raise ValueError("stages must be nonnegative")
    p, q = int(start[0]), int(start[1])
    if p < 2 or q <= p:
        raise ValueError("start needs q > p >= 2")
    if math.gcd(p, q) != 1:
        raise ValueError("start pair must be coprime")
    if np.ndim(K) == 0:
        ks = [float(K)] * stages
    else:
        ks = [float(v) for v in K]
        if len(ks) != stages:
            raise ValueError("one K entry per stage required")
    if any(k <= 0 for k in ks):
        raise ValueError("K entries must be positive")
    table = []
    for m in range(1, stages + 1):
        k = ks[m - 1]
        grow = math.expm1(1.0 / m**2)
        floor_real = p * q * max(float(m * m), k / grow)
        next_p = _next_prime(int(math.floor(floor_real)))
        while next_p <= floor_real:
            next_p = _next_prime(next_p)
        s = next_p // (p * q) + 1
        next_q = p * q * s
        N = next_p * s
        ratio = Fraction(p * q, next_p)
        bound = min(1.0 / m**2, grow / k)
        if not float(ratio) < bound:
            raise AssertionError("stage violates its admissibility ceiling")
        table.append(
            StageParams(
                index=m,
                p=p,
                q=q,
                next_p=next_p,
                next_q=next_q,
                N=N,
                s=s,
                K=k,
                bands=(N - next_q, next_p, next_q - next_p),
                ratio=ratio,
                bound=bound,
            )
        )
        p, q = next_p, next_q
    return table


def lipschitz_budget(table: list[StageParams], K=None) -> dict:
    """Per-stage trace-Lipschitz factors and their running product.

    Stage m inflates the Lipschitz constant of traced observables by at
    most (N - next_q + K*(next_q - next_p)) / N; admissibility keeps each
    factor under exp(1/m**2), so any table's product stays below
    exp(pi**2/6). Returns the factors, the product, the universal bound,
    and whether the product respects it.
    """
    if K is None:
        ks = [st.K for st in table]
    elif np.ndim(K) == 0:
        ks = [float(K)] * len(table)
    else:
        ks = [float(v) for v in K]
        if len(ks) != len(table):
            raise ValueError("one K entry per stage required")
    factors = []
    for st, k in zip(table, ks):
        a, b, c = st.bands
        factors.append((a + k * c) / st.N + 0.0)
    product = float(np.prod(factors)) if factors else 1.0
    return {
        "factors": [float(v) for v in factors],
        "product": product,
        "bound": _BUDGET_BOUND,
        "ok": bool(product <= _BUDGET_BOUND),
    }


# ---------------------------------------------------------------------------
# waypoint schedules and mesh functions


def _radical_inverse(k: int) -> float:
    v, denom = 0.0, 1.0
    while k:
        denom *= 2.0
        v += (k & 1) / denom
        k >>= 1
    return v


def fold_retract(t, lo: float = 0.0, hi: float = 1.0):
    """Retract reals onto [lo, hi] by reflecting at both ends (1-Lipschitz)."""
    if hi <= lo:
        raise ValueError("need hi > lo")
    width = hi - lo
    r = np.mod(np.asarray(t, dtype=float) - lo, 2.0 * width)
    r = np.where(r > width, 2.0 * width - r, r)
    out = lo + r
    if np.ndim(t) == 0:
        return float(out)
    return out


def xi_schedule(count: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Low-discrepancy interior waypoints: bit-reversed dyadics in [lo, hi].

    The base-2 radical inverses of 1..count are spread evenly at every
    prefix length; they are mapped affinely into [lo, hi], never hitting
    the endpoints.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    base = np.array([_radical_inverse(k) for k in range(1, count + 1)])
    return lo + (hi - lo) * base


@dataclass
class MeshFunction:
    """Piecewise-linear function on a knot mesh of [0, 1]."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or v.shape != k.shape or k.size < 2:
            raise ValueError("knots and values must be matching vectors")
        if (np.diff(k) <= 0).any():
            raise ValueError("knots must increase strictly")
        if abs(k[0]) > 1e-12 or abs(k[-1] - 1.0) > 1e-12:
            raise ValueError("mesh must span [0, 1]")
        self.knots = k
        self.values = v

    def __call__(self, t):
        out = np.interp(np.asarray(t, dtype=float), self.knots, self.values)
        if np.ndim(t) == 0:
            return float(out)
        return out

    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.knots))))


def sample_mesh_function(
    knots: int = 33,
    lip: float = 4.0,
    seed: int = 0,
    lo: float = 0.0,
    hi: float = 1.0,
    endpoints=None,
) -> MeshFunction:
    """Random mesh function into [lo, hi] with Lipschitz constant <= lip.

    Increments are uniform in [-lip*dt, lip*dt] and the running values are
    folded back into [lo, hi]; folding is 1-Lipschitz so the budget
    survives. endpoints=(v0, v1) pins both ends (reachability permitting a
    final fold keeps the constant).
    """
    if knots < 2:
        raise ValueError("need at least two knots")
    if lip <= 0:
        raise ValueError("lip must be positive")
    gen = substream(seed, 0xD0D0)
    mesh = np.linspace(0.0, 1.0, int(knots))
    dt = np.diff(mesh)
    inner = lip if endpoints is None else 0.5 * lip
    vals = np.empty(knots)
    vals[0] = lo + (hi - lo) * gen.random() if endpoints is None else endpoints[0]
    for i, d in enumerate(dt):
        step = (2.0 * gen.random() - 1.0) * inner * d
        vals[i + 1] = fold_retract(vals[i] + step, lo, hi)
    if endpoints is not None:
        target = float(endpoints[1])
        if not lo <= target <= hi:
            raise ValueError("endpoint outside the range")
        drift = target - vals[-1]
        if abs(drift) > 0.5 * lip:
            raise ValueError("endpoint drift exceeds the Lipschitz budget")
        ramp = (mesh - mesh[0]) / (mesh[-1] - mesh[0])
        vals = fold_retract(vals + drift * ramp, lo, hi)
        vals[-1] = target
    return MeshFunction(knots=mesh, values=vals)


# ---------------------------------------------------------------------------
# a fully explicit connecting map for the admissible stage (2,3) -> (8,9)


@dataclass
class DimDropElement:
    """An element of A(p, q): f(0) = a tensor 1_q, f(1) = 1_p tensor b."""

    p: int
    q: int
    a: np.ndarray
    b: np.ndarray
    bump: np.ndarray

    def __call__(self, t):
        t = float(t)
        left = np.kron(self.a, np.eye(self.q))
        right = np.kron(np.eye(self.p), self.b)
        return (1.0 - t) * left + t * right + (t * (1.0 - t)) * self.bump


def sample_element(p: int, q: int, seed: int = 0) -> DimDropElement:
    """Random Hermitian-valued element of A(p, q)."""
    gen = substream(seed, 0xE1E)

    def herm(n):
        m = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
        return (m + m.conj().T) / 2.0

    return DimDropElement(
        p=int(p), q=int(q), a=herm(p), b=herm(q), bump=herm(p * q)
    )


def _perm_matrix(sigma: np.ndarray) -> np.ndarray:
    n = sigma.shape[0]
    mat = np.zeros((n, n))
    mat[sigma, np.arange(n)] = 1.0
    return mat


def _perm_fractional_power(pi: np.ndarray, s: float) -> np.ndarray:
    """Continuous unitary path I -> P(pi): cyclewise DFT interpolation."""
    n = pi.shape[0]
    out = np.zeros((n, n), dtype=complex)
    seen = np.zeros(n, dtype=bool)
    for start in range(n):
        if seen[start]:
            continue
        cycle = [start]
        seen[start] = True
        j = int(pi[start])
        while j != start:
            cycle.append(j)
            seen[j] = True
            j = int(pi[j])
        L = len(cycle)
        alpha = np.arange(L)
        phase = np.exp(
            2j
            * np.pi
            * np.arange(L)[:, None, None]
            * (np.subtract.outer(alpha, alpha)[None, :, :] - s)
            / L
        )
        block = phase.mean(axis=0)
        out[np.ix_(cycle, cycle)] = block
    return out


def _smoothstep(r: float) -> float:
    r = min(1.0, max(0.0, r))
    return r * r * (3.0 - 2.0 * r)


@dataclass
class ConnectingMap:
    """Explicit unital embedding of A(p, q) into A(next_p, next_q).

    N copies of the source are evaluated along the waypoint paths and
    conjugated by a continuous unitary path that equals the exact endpoint
    permutations at 0 and 1, so both boundary memberships hold on the nose.
    Traces of the image never see the unitary; they integrate the source
    trace against the band measure (see connecting_trace_pushforward).
    """

    p: int
    q: int
    next_p: int
    next_q: int
    N: int
    bands: tuple
    z0: float
    z1: float
    paths: list
    sigma0: np.ndarray = field(repr=False)
    sigma1: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._P0 = _perm_matrix(self.sigma0)
        inv0 = np.argsort(self.sigma0)
        self._rho = inv0[self.sigma1]

    def unitary(self, x: float) -> np.ndarray:
        s = _smoothstep(2.0 * float(x) - 1.0)
        return self._P0 @ _perm_fractional_power(self._rho, s)

    def evaluate(self, f, x: float) -> np.ndarray:
        """The image element at x: u(x) diag(f(paths(x))) u(x)*."""
        x = float(x)
        d = self.p * self.q
        big = self.N * d
        diag = np.zeros((big, big), dtype=complex)
        for i, path in enumerate(self.paths):
            diag[i * d : (i + 1) * d, i * d : (i + 1) * d] = f(path(x))
        u = self.unitary(x)
        return u @ diag @ u.conj().T


def demo_connecting_map(z0: float | None = None, z1: float | None = None) -> ConnectingMap:
    """The stage (2, 3) -> (8, 9) with N = 12, written out index by index.

    This pair admits exact permutation endpoint unitaries because next_q
    divides q*(N - next_q) and next_p divides p*(N - next_p) (9 | 9 and
    8 | 8 here); the generic prime-selection stages need genuinely
    continuous endpoint corrections instead. Band split (3, 8, 1): three
    identity paths 0 -> 1, eight pinned paths z0 -> z1, one retraction
    path z0 -> 1. At x = 0 the image is (a + f(z0)) tensor 1_9 in block
    form; at x = 1 it is 1_8 tensor (b + f(z1)).
    """
    p, q, np_, nq = 2, 3, 8, 9
    N = (np_ * nq) // (p * q)
    if z0 is None or z1 is None:
        zs = xi_schedule(2, 0.25, 0.75)
        z0 = float(zs[0]) if z0 is None else float(z0)
        z1 = float(zs[1]) if z1 is None else float(z1)

    sigma0 = np.empty(N * p * q, dtype=np.int64)
    for b in range(3):
        for i in range(2):
            for j in range(3):
                sigma0[6 * b + 3 * i + j] = 9 * i + 3 * b + j
    for g in range(9):
        for s in range(6):
            sigma0[18 + 6 * g + s] = 9 * (2 + s) + g

    sigma1 = np.empty(N * p * q, dtype=np.int64)
    for c in range(4):
        for i in range(2):
            for j in range(3):
                sigma1[6 * c + 3 * i + j] = 9 * (2 * c + i) + j
    for k in range(8):
        for s in range(6):
            sigma1[24 + 6 * k + s] = 9 * k + 3 + s

    def line(u, v):
        return lambda x, _u=float(u), _v=float(v): _u + (_v - _u) * float(x)

    # copy layout must match the endpoint permutations: at x = 0 copies
    # 0..2 sit at 0 and copies 3..11 at z0; at x = 1 copies 0..3 sit at 1
    # and copies 4..11 at z1.
    paths = [line(0.0, 1.0) for _ in range(3)]
    paths.append(line(z0, 1.0))
    paths.extend(line(z0, z1) for _ in range(8))
    return ConnectingMap(
        p=p,
        q=q,
        next_p=np_,
        next_q=nq,
        N=N,
        bands=(N - nq, np_, nq - np_),
        z0=float(z0),
        z1=float(z1),
        paths=paths,
        sigma0=sigma0,
        sigma1=sigma1,
    )


# ---------------------------------------------------------------------------
# endpoint verification, two ways


def _factor_residual(mat: np.ndarray, p: int, q: int, side: str):
    """Distance from M_p tensor 1_q ("left") or 1_p tensor M_q ("right").

    Averages the candidate factor out of `mat` (the conditional expectation
    onto the subalgebra) and reports the reconstruction residual plus the
    factor itself.
    """
    t = mat.reshape(p, q, p, q)
    if side == "left":
        c = np.trace(t, axis1=1, axis2=3) / q
        recon = np.kron(c, np.eye(q))
    else:
        c = np.trace(t, axis1=0, axis2=2) / p
        recon = np.kron(np.eye(p), c)
    return float(np.abs(mat - recon).max()), c


def _commutant_generators(p: int, q: int, side: str) -> list[np.ndarray]:
    """Generators of the algebra the endpoint value must commute with."""
    def shift(n):
        s = np.zeros((n, n))
        s[np.arange(n), (np.arange(n) + 1) % n] = 1.0
        return s

    def corner(n):
        e = np.zeros((n, n))
        e[0, 0] = 1.0
        return e

    if side == "left":
        return [np.kron(np.eye(p), shift(q)), np.kron(np.eye(p), corner(q))]
    return [np.kron(shift(p), np.eye(q)), np.kron(corner(p), np.eye(q))]


def boundary_check(conn: ConnectingMap, f=None, tol: float = 1e-9, seed: int = 0) -> dict:
    """Verify both endpoint memberships of the embedded element, two ways.

    Route one averages the required tensor factor out (conditional
    expectation) and measures the reconstruction residual. Route two takes
    operator norms of commutators with generators of the algebra the value
    must commute with. For a DimDropElement the recovered corner factors
    are also compared against their predicted block forms a + f(z0) and
    b + f(z1).
    """
    if f is None:
        f = sample_element(conn.p, conn.q, seed=seed)
    P, Q = conn.next_p, conn.next_q
    out = {}
    for where, side, x in (("at0", "left", 0.0), ("at1", "right", 1.0)):
        val = conn.evaluate(f, x)
        resid, factor = _factor_residual(val, P, Q, side)
        comms = [
            float(np.linalg.norm(val @ g - g @ val, 2))
            for g in _commutant_generators(P, Q, side)
        ]
        entry = {
            "expectation_residual": resid,
            "commutator_norms": comms,
            "ok": bool(resid <= tol and max(comms) <= tol),
        }
        if isinstance(f, DimDropElement):
            if side == "left":
                corner = np.zeros((P, P), dtype=complex)
                corner[: conn.p, : conn.p] = f.a
                corner[conn.p :, conn.p :] = f(conn.z0)
            else:
                corner = np.zeros((Q, Q), dtype=complex)
                corner[: conn.q, : conn.q] = f.b
                corner[conn.q :, conn.q :] = f(conn.z1)
            entry["corner_residual"] = float(np.abs(factor - corner).max())
            entry["ok"] = bool(entry["ok"] and entry["corner_residual"] <= tol)
        out[where] = entry
    out["ok"] = bool(out["at0"]["ok"] and out["at1"]["ok"])
    return out


# ---------------------------------------------------------------------------
# trace pushforward through a connecting map


def connecting_trace_pushforward(stage, tau, z: float, retraction=None):
    """The induced trace in the empirical-measure picture.

    A trace given by a measure tau over [0, 1] pushes through a stage's
    connecting map to the convex combination

        (1/N) [ (N - next_q) tau + next_p delta_z + (next_q - next_p) e_* tau ]

    where z is the pinned interior evaluation point and e the retraction
    reparametrizing the remaining band (identity when omitted). Accepts a
    Trace or a bare EmpiricalMeasure on the interval or circle and returns
    the same kind.
    """
    from .traces import Trace

    wrap = isinstance(tau, Trace)
    mu = tau.measure if wrap else tau
    if mu.space not in ("interval", "circle"):
        raise ValueError("trace pushforward lives on interval measures")
    N = stage.N
    nq, np_ = stage.next_q, stage.next_p
    if not 0.0 <= float(z) <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    pts = np.asarray(mu.points, dtype=float)
    if retraction is None:
        moved = pts.copy()
    else:
        moved = np.asarray(retraction(pts), dtype=float)
    new_pts = np.concatenate([pts, [float(z)], moved])
    w = mu.weights
    new_w = np.concatenate(
        [(N - nq) / N * w, [np_ / N], (nq - np_) / N * w]
    )
    meta = {"pushed_through": f"stage({stage.p},{stage.q})->({np_},{nq})"}
    out = EmpiricalMeasure(space=mu.space, points=new_pts, weights=new_w, meta=meta)
    if wrap:
        label = getattr(tau, "label", "trace")
        return Trace(measure=out, label=f"{label}.conn")
    return out
