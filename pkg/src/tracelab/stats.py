"""Ergodic-statistics engine: sums, correlations, limit-theorem diagnostics.

Everything here is Monte Carlo over batches of orbits. Batches are split
into fixed 4096-trial chunks; each chunk owns a substream keyed by (seed,
chunk index), and chunk results are combined in index order, so every
statistic is byte-identical for a given seed regardless of thread count.

Centering convention: statistics that need the invariant mean of an
observable subtract the pooled orbit-sample mean of the run itself (all
trials, all time steps). Its error is O(sigma / sqrt(n * trials)), far below
every tolerance used here, whereas centering by a small fixed support would
inject a sqrt(n)-amplified bias into normalized sums.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf as _erf

from . import systems as _systems
from .measures import EmpiricalMeasure, resample_indices, wasserstein1
from .observables import Observable
from .rng import CHUNK, chunk_ranges, substream

_RESAMPLE_LABEL = 0x5E1
_CHUNK_LABEL = 0xBA7C4


def _normal_cdf(x: np.ndarray, sigma: float) -> np.ndarray:
    return 0.5 * (1.0 + _erf(np.asarray(x, dtype=float) / (sigma * math.sqrt(2.0))))


def _ks_against_normal(values: np.ndarray, sigma: float, weights=None) -> float:
    """Kolmogorov-Smirnov distance of a (weighted) sample to N(0, sigma^2)."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    v = v[order]
    if weights is None:
        cw = np.arange(1, v.size + 1) / v.size
    else:
        w = np.asarray(weights, dtype=float)[order]
        cw = np.cumsum(w)
        cw /= cw[-1]
    phi = _normal_cdf(v, sigma)
    lo = np.concatenate([[0.0], cw[:-1]])
    return float(np.max(np.maximum(np.abs(cw - phi), np.abs(lo - phi))))


def _ks_against_heaviside(values: np.ndarray) -> float:
    """KS distance to the point mass at 0 (degenerate limit law)."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    cdf_at = lambda x: np.searchsorted(v, x, side="right") / n
    below = cdf_at(-0.0) if not (v < 0).any() else (v < 0).mean()
    above = 1.0 - cdf_at(0.0)
    return float(max(below, above))


# ---------------------------------------------------------------------------
# scalar sums


def ergodic_sum(f: Observable, sys, x, n: int) -> float:
    """S_n f(x) = sum of f along the first n orbit points (fsum-accurate)."""
    vals = []
    y = x
    for _ in range(int(n)):
        vals.append(f.fn(y))
        y = _systems.step(sys, y)
    return math.fsum(vals)


def birkhoff_average(f: Observable, sys, x, n: int) -> float:
    """S_n f(x) / n."""
    if n <= 0:
        raise ValueError("n must be positive")
    return ergodic_sum(f, sys, x, n) / n


# ---------------------------------------------------------------------------
# chunked batch driver


def _chunk_init(sys, mu, trials, seed):
    """Initial conditions per chunk: resampled support rows or fresh draws."""
    if mu is None:
        return [("fresh", stop - start) for _, start, stop in chunk_ranges(trials)]
    idx = resample_indices(mu, trials, substream(seed, _RESAMPLE_LABEL))
    return [
        ("points", mu.points[idx[start:stop]])
        for _, start, stop in chunk_ranges(trials)
    ]


def _run_chunked(sys, mu, trials, n_steps, seed, worker, threads=1):
    """Run `worker(batch, weights_slice)` over fixed chunks, ordered combine.

    Returns the list of per-chunk results in chunk order. Each chunk gets
    its own substream and batch, so thread scheduling cannot affect any
    drawn bit.
    """
    inits = _chunk_init(sys, mu, trials, seed)

    def job(args):
        chunk_idx, init_spec = args
        gen = substream(seed, _CHUNK_LABEL, chunk_idx)
        kind, payload = init_spec
        init = payload if kind == "points" else int(payload)
        batch = _systems.make_batch(sys, init, n_steps, gen)
        return worker(batch)

    jobs = list(enumerate(inits))
    if threads <= 1 or len(jobs) == 1:
        return [job(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(job, jobs))


def _checkpoint_sums(f, sys, mu, checkpoints, trials, seed, threads=1):
    """Per-trial ergodic sums of f at the given checkpoints.

    Returns an array of shape (trials, len(checkpoints)). checkpoints must
    be increasing positive ints; S_c = sum_{k=0}^{c-1} f(h^k x).
    """
    cps = [int(c) for c in checkpoints]
    if any(c <= 0 for c in cps) or sorted(cps) != cps:
        raise ValueError("checkpoints must be increasing positive integers")
    n = cps[-1]

    def worker(batch):
        fast = _cylinder_series(f, batch, n)
        if fast is not None:
            out = np.empty((batch.n, len(cps)))
            s = np.zeros(batch.n)
            prev = 0
            for j, c in enumerate(cps):
                s = s + fast[:, prev:c].sum(axis=1)
                out[:, j] = s
                prev = c
            return out
        s = np.zeros(batch.n)
        out = np.empty((batch.n, len(cps)))
        nxt = 0
        for k in range(n):
            s += f.values(batch.coords())
            if k + 1 == cps[nxt]:
                out[:, nxt] = s
                nxt += 1
            if k + 1 < n:
                batch.advance()
        return out

    parts = _run_chunked(sys, mu, trials, n, seed, worker, threads)
    return np.concatenate(parts, axis=0)


def _cylinder_series(f, batch, n):
    """(trials, n) 0/1 value series for cylinder observables, else None."""
    if f.word is None or not isinstance(batch, _systems._SymbolBatch):
        return None
    mat = batch.mat
    if mat.shape[1] < n + len(f.word) - 1:
        return None
    match = np.ones((mat.shape[0], n), dtype=bool)
    for j, s in enumerate(f.word):
        match &= mat[:, j : j + n] == s
    return match


# ---------------------------------------------------------------------------
# correlations


@dataclass
class CorrelationSeries:
    """Estimated correlations C_k = E[f(h^k x) g(x)] - E[f] E[g], k = 0..N."""

    values: np.ndarray
    stderr: np.ndarray
    nsamples: int
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.values.size)

    def to_dict(self) -> dict:
        return {
            "kind": "correlation-series",
            "lags": [int(k) for k in self.lags],
            "values": [float(v) for v in self.values],
            "stderr": [float(v) for v in self.stderr],
            "nsamples": int(self.nsamples),
            "seed": int(self.seed),
        }


def _warn_unless_invariant(sys, mu):
    """Cheap advisory check that mu is (nearly) invariant for sys."""
    from .measures import pushforward_measure

    try:
        if mu.space in ("interval", "circle"):
            sub = mu
            if mu.size > 4096:
                keep = np.linspace(0, mu.size - 1, 4096).astype(int)
                sub = EmpiricalMeasure(
                    space=mu.space,
                    points=mu.points[keep],
                    weights=None,
                    meta=dict(mu.meta),
                )
            dist = wasserstein1(sub, pushforward_measure(sys, sub))
            if dist > 8.0 / math.sqrt(sub.size):
                warnings.warn(
                    f"measure moved by W1 = {dist:.3g} under one step; "
                    "correlations assume an invariant measure",
                    stacklevel=3,
                )
    except Exception:
        pass


def correlation_series(
    f: Observable,
    g: Observable,
    sys,
    mu: EmpiricalMeasure,
    lags: int,
    seed: int = 0,
    threads: int = 1,
    invariance_warning: bool = True,
) -> CorrelationSeries:
    """Correlation estimates over the support of mu, with jackknife errors.

    Uses the support points of mu themselves (no resampling), so C_0 equals
    the weighted sample covariance of f and g exactly. Standard errors are
    delete-one jackknife values computed in closed form. mu should be
    invariant for the system; a gross violation triggers a warning.
    """
    n_lags = int(lags)
    if n_lags < 0:
        raise ValueError("lags must be nonnegative")
    if invariance_warning:
        _warn_unless_invariant(sys, mu)
    m = mu.size
    w = mu.weights
    uniform = np.ptp(w) < 1e-15

    feats_dim = 4  # (p, f0, g0, f0*g0) per sample

    def worker_factory(w_slice):
        def worker(batch):
            g0 = g.values(batch.coords())
            f0 = f.values(batch.coords())
            sums = np.zeros((n_lags + 1, 3))  # sum w*p, sum w*f0, sum w*g0
            s1 = np.zeros((n_lags + 1, feats_dim))
            s2 = np.zeros((n_lags + 1, feats_dim, feats_dim))
            for k in range(n_lags + 1):
                fk = f0 if k == 0 else f.values(batch.coords())
                p = fk * g0
                sums[k, 0] = p @ w_slice
                sums[k, 1] = f0 @ w_slice
                sums[k, 2] = g0 @ w_slice
                feats = np.stack([p, f0, g0, f0 * g0], axis=1)
                s1[k] += feats.sum(axis=0)
                s2[k] += feats.T @ feats
                if k < n_lags:
                    batch.advance()
            return sums, s1, s2

        return worker

    jobs = [
        (chunk_idx, mu.points[start:stop], w[start:stop])
        for chunk_idx, start, stop in chunk_ranges(m)
    ]

    def job(args):
        chunk_idx, init, w_slice = args
        gen = substream(seed, _CHUNK_LABEL, chunk_idx)
        batch = _systems.make_batch(sys, init, n_lags, gen)
        return worker_factory(w_slice)(batch)

    if threads <= 1 or len(jobs) == 1:
        parts = [job(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(job, jobs))

    sums = np.sum([p[0] for p in parts], axis=0)
    s1 = np.sum([p[1] for p in parts], axis=0)
    s2 = np.sum([p[2] for p in parts], axis=0)

    a = sums[:, 0]
    b = sums[:, 1]
    c = sums[:, 2]
    values = a - b * c

    stderr = np.zeros(n_lags + 1)
    if m > 1 and uniform:
        u = m / (m - 1.0)
        for k in range(n_lags + 1):
            coef = np.array(
                [-u / m, (u * u) * c[k] / m, (u * u) * b[k] / m, -(u * u) / (m * m)]
            )
            mean_feats = s1[k] / m
            cov = s2[k] / m - np.outer(mean_feats, mean_feats)
            var_t = float(coef @ cov @ coef)
            stderr[k] = math.sqrt(max(var_t, 0.0) * (m - 1.0))
    elif m > 1:
        # weighted fallback: conservative iid-style error on the weighted mean
        for k in range(n_lags + 1):
            mean_feats = s1[k] / m
            cov = s2[k] / m - np.outer(mean_feats, mean_feats)
            stderr[k] = math.sqrt(max(cov[0, 0], 0.0) * float(w @ w))
    return CorrelationSeries(
        values=values,
        stderr=stderr,
        nsamples=m,
        seed=int(seed),
        meta={"f": f.name, "g": g.name, "system": sys.name},
    )


@dataclass
class EDCFit:
    """Exponential-decay fit log|C_k| ~ log c + k log gamma on a lag window."""

    c: float | None
    gamma: float | None
    residual: float | None
    verdict: str
    window: list

    def to_dict(self) -> dict:
        return {
            "kind": "edc-fit",
            "c": None if self.c is None else float(self.c),
            "gamma": None if self.gamma is None else float(self.gamma),
            "residual": None if self.residual is None else float(self.residual),
            "verdict": self.verdict,
            "window": [int(k) for k in self.window],
        }


def edc_fit(
    series: CorrelationSeries,
    window=None,
    residual_threshold: float = 0.25,
    min_points: int = 3,
) -> EDCFit:
    """Fit exponential correlation decay above the noise floor.

    The default window keeps lags k >= 1 whose |C_k| exceeds 3 jackknife
    standard errors. Verdicts: "exponential" (decaying fit with small rms
    log-residual), "non-decaying" (fitted gamma >= 1), "poor-fit" (residual
    above threshold: the decay exists but is not exponential),
    "no-signal" (too few lags above noise).
    """
    vals = series.values
    errs = series.stderr
    if window is None:
        window = [
            k for k in range(1, vals.size) if abs(vals[k]) > 3.0 * errs[k]
        ]
    else:
        window = [int(k) for k in window]
        if any(k < 1 or k >= vals.size for k in window):
            raise ValueError("window lags out of range")
    window = [k for k in window if vals[k] != 0.0]
    if len(window) < min_points:
        return EDCFit(c=None, gamma=None, residual=None, verdict="no-signal", window=window)
    ks = np.array(window, dtype=float)
    ys = np.log(np.abs(vals[window]))
    slope, intercept = np.polyfit(ks, ys, 1)
    resid = float(np.sqrt(np.mean((ys - (slope * ks + intercept)) ** 2)))
    gamma = math.exp(slope)
    c = math.exp(intercept)
    if gamma >= 1.0:
        verdict = "non-decaying"
    elif resid > residual_threshold:
        verdict = "poor-fit"
    else:
        verdict = "exponential"
    return EDCFit(c=c, gamma=gamma, residual=resid, verdict=verdict, window=window)


# ---------------------------------------------------------------------------
# variance


@dataclass
class VarianceReport:
    """Two independent limit-variance estimates and their agreement."""

    direct: float
    green_kubo: float
    stderr_direct: float
    stderr_green_kubo: float
    truncation_lag: int
    agree: bool
    degenerate: bool
    n: int
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": "variance",
            "direct": float(self.direct),
            "green_kubo": float(self.green_kubo),
            "stderr_direct": float(self.stderr_direct),
            "stderr_green_kubo": float(self.stderr_green_kubo),
            "truncation_lag": int(self.truncation_lag),
            "agree": bool(self.agree),
            "degenerate": bool(self.degenerate),
            "n": int(self.n),
            "trials": int(self.trials),
            "seed": int(self.seed),
        }


def variance_estimate(
    f: Observable,
    sys,
    mu: EmpiricalMeasure,
    n: int = 1000,
    trials: int = 2000,
    maxlag: int = 64,
    seed: int = 0,
    threads: int = 1,
    degenerate_floor: float = 1e-2,
) -> VarianceReport:
    """Limit variance of S_n f / sqrt(n), two ways.

    direct: sample variance of S_n / sqrt(n) over fresh trials (centered by
    the pooled orbit mean). green_kubo: C_0 + 2 sum_k C_k with the sum
    truncated adaptively at the first lag whose |C_k| drops below 3 standard
    errors. `agree` checks the two within 3 combined standard errors;
    `degenerate` flags both estimates below the coboundary floor.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    if mu is None:
        mu = _systems.sample_invariant(sys, min(trials * 10, 20000), seed=seed)
    sums = _checkpoint_sums(f, sys, mu, [n], trials, seed, threads)[:, 0]
    centered = sums - sums.mean()
    direct = float(centered @ centered / (trials - 1) / n)
    se_direct = direct * math.sqrt(2.0 / max(trials - 1, 1))

    series = correlation_series(
        f, f, sys, mu, min(maxlag, max(n - 1, 1)), seed=seed + 1, threads=threads
    )
    cut = series.values.size
    for k in range(1, series.values.size):
        if abs(series.values[k]) <= 3.0 * series.stderr[k]:
            cut = k
            break
    gk = float(series.values[0] + 2.0 * series.values[1:cut].sum())
    se_gk = math.sqrt(
        float(series.stderr[0] ** 2 + 4.0 * (series.stderr[1:cut] ** 2).sum())
    )
    agree = abs(direct - gk) <= 3.0 * math.sqrt(se_direct**2 + se_gk**2)
    degenerate = max(direct, gk) < degenerate_floor
    return VarianceReport(
        direct=direct,
        green_kubo=gk,
        stderr_direct=se_direct,
        stderr_green_kubo=se_gk,
        truncation_lag=cut - 1,
        agree=agree,
        degenerate=degenerate,
        n=int(n),
        trials=int(trials),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# central limit diagnostics


@dataclass
class CLTReport:
    """Distributional test of normalized ergodic sums against a Gaussian."""

    n: int
    trials: int
    normalization: str
    sigma2: float
    ks: float
    ks_threshold: float
    gaussian_pass: bool
    degenerate: bool
    ks_reference: float | None
    reference_sigma2: float | None
    samples: np.ndarray
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": "clt",
            "n": int(self.n),
            "trials": int(self.trials),
            "normalization": self.normalization,
            "sigma2": float(self.sigma2),
            "ks": float(self.ks),
            "ks_threshold": float(self.ks_threshold),
            "gaussian_pass": bool(self.gaussian_pass),
            "degenerate": bool(self.degenerate),
            "ks_reference": None
            if self.ks_reference is None
            else float(self.ks_reference),
            "reference_sigma2": None
            if self.reference_sigma2 is None
            else float(self.reference_sigma2),
            "seed": int(self.seed),
        }


def clt_test(
    f: Observable,
    sys,
    mu: EmpiricalMeasure | None,
    n: int = 10000,
    trials: int = 10000,
    normalization: str = "sqrt_n",
    reference_sigma2: float | None = None,
    ks_threshold: float = 0.05,
    degenerate_floor: float = 1e-2,
    seed: int = 0,
    threads: int = 1,
) -> CLTReport:
    """Draw trials, form centered normalized ergodic sums, test normality.

    Initial points are resampled from mu (or drawn from the invariant
    measure when mu is None). Sums are centered by the pooled orbit mean
    and divided by sqrt(n) (or sqrt(n log n) when
    normalization="sqrt_n_log_n"). The KS statistic is computed against the
    centered Gaussian with the fitted variance; when the fitted variance
    falls below `degenerate_floor` the limit is treated as a point mass and
    the KS distance to the Heaviside law is reported with degenerate=True.
    """
    if trials < 100:
        raise ValueError("trials must be at least 100")
    if normalization == "sqrt_n":
        factor = math.sqrt(n)
    elif normalization == "sqrt_n_log_n":
        if n < 2:
            raise ValueError("sqrt_n_log_n normalization needs n >= 2")
        factor = math.sqrt(n * math.log(n))
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    sums = _checkpoint_sums(f, sys, mu, [n], trials, seed, threads)[:, 0]
    vals = (sums - sums.mean()) / factor
    sigma2 = float(vals @ vals / vals.size)
    degenerate = sigma2 < degenerate_floor
    if degenerate:
        ks = _ks_against_heaviside(vals)
    else:
        ks = _ks_against_normal(vals, math.sqrt(sigma2))
    ks_ref = None
    if reference_sigma2 is not None and reference_sigma2 > 0:
        ks_ref = _ks_against_normal(vals, math.sqrt(reference_sigma2))
    return CLTReport(
        n=int(n),
        trials=int(trials),
        normalization=normalization,
        sigma2=sigma2,
        ks=float(ks),
        ks_threshold=float(ks_threshold),
        gaussian_pass=bool(not degenerate and ks <= ks_threshold),
        degenerate=bool(degenerate),
        ks_reference=ks_ref,
        reference_sigma2=reference_sigma2,
        samples=vals,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# almost-sure central limit diagnostics


@dataclass
class ASCLTReport:
    """Logarithmic-average test along a single orbit."""

    n: int
    dn: float
    sigma2: float
    ks: float
    ks_reference: float | None
    reference_sigma2: float | None
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": "asclt",
            "n": int(self.n),
            "dn": float(self.dn),
            "sigma2": float(self.sigma2),
            "ks": float(self.ks),
            "ks_reference": None
            if self.ks_reference is None
            else float(self.ks_reference),
            "reference_sigma2": None
            if self.reference_sigma2 is None
            else float(self.reference_sigma2),
            "seed": int(self.seed),
        }


def asclt_test(
    f: Observable,
    sys,
    n: int,
    seed: int = 0,
    x0=None,
    reference_sigma2: float | None = None,
) -> ASCLTReport:
    """Almost-sure CLT measure along one orbit.

    Builds the random measure sum_{k<=n} (1/k) delta at S_k f / sqrt(k),
    normalized by the exact harmonic sum D_n, and reports its weighted KS
    distance to the Gaussian with the measure's own fitted variance (and to
    a reference variance when given). Sums are centered with the full-orbit
    mean of f.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    coords = _systems.orbit_coord_series(sys, n, seed, x0=x0)
    if sys.space == "symbolic":
        wins = np.lib.stride_tricks.sliding_window_view(coords, sys.window)[:n]
        vals = f.values(wins)
    else:
        vals = f.values(coords)
    s = np.cumsum(vals)
    ks_idx = np.arange(1, n + 1, dtype=float)
    mean = s[-1] / n
    atoms = (s - ks_idx * mean) / np.sqrt(ks_idx)
    weights = 1.0 / ks_idx
    dn = math.fsum(1.0 / k for k in range(1, n + 1))
    weights = weights / dn
    sigma2 = float((weights * atoms * atoms).sum())
    if sigma2 <= 0:
        sigma2 = 1e-300
    ks = _ks_against_normal(atoms, math.sqrt(sigma2), weights=weights)
    ks_ref = None
    if reference_sigma2 is not None and reference_sigma2 > 0:
        ks_ref = _ks_against_normal(
            atoms, math.sqrt(reference_sigma2), weights=weights
        )
    return ASCLTReport(
        n=int(n),
        dn=float(dn),
        sigma2=sigma2,
        ks=float(ks),
        ks_reference=ks_ref,
        reference_sigma2=reference_sigma2,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# large deviations


@dataclass
class DeviationProfile:
    """Exceedance probabilities of Birkhoff averages at one tolerance eps."""

    eps: float
    ns: np.ndarray
    probs: np.ndarray
    censored: np.ndarray
    trials: int
    c1: float | None
    c2: float | None
    fit_residual: float | None
    exponential: bool
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": "deviation-profile",
            "eps": float(self.eps),
            "ns": [int(v) for v in self.ns],
            "probs": [float(v) for v in self.probs],
            "censored": [bool(v) for v in self.censored],
            "trials": int(self.trials),
            "c1": None if self.c1 is None else float(self.c1),
            "c2": None if self.c2 is None else float(self.c2),
            "fit_residual": None
            if self.fit_residual is None
            else float(self.fit_residual),
            "exponential": bool(self.exponential),
            "seed": int(self.seed),
        }


def deviation_profile(
    f: Observable,
    sys,
    mu: EmpiricalMeasure | None,
    eps: float,
    ns,
    trials: int,
    seed: int = 0,
    threads: int = 1,
) -> DeviationProfile:
    """Estimate p_n = P(|S_n f / n - mean| > eps) along a ladder of n.

    Probabilities indistinguishable from zero at this trial count (no
    exceedances observed) are censored and excluded from the exponential
    fit log p ~ log c1 - c2 * n * eps^2. Runs with the same seed reuse
    identical trajectories across different eps, so exceedance sets are
    nested and the estimated probabilities are monotone in eps.
    """
    ns = sorted(int(v) for v in ns)
    if not ns or ns[0] <= 0:
        raise ValueError("ns must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    sums = _checkpoint_sums(f, sys, mu, ns, trials, seed, threads)
    pooled_mean = float(sums[:, -1].sum() / (trials * ns[-1]))
    probs = np.empty(len(ns))
    for j, nc in enumerate(ns):
        avg = sums[:, j] / nc
        probs[j] = float((np.abs(avg - pooled_mean) > eps).mean())
    censored = probs < 1.0 / trials
    usable = (~censored) & (probs > 0) & (probs < 1.0)
    c1 = c2 = resid = None
    exponential = False
    if usable.sum() >= 2:
        xs = np.array([n for n, u in zip(ns, usable) if u], dtype=float) * eps * eps
        ys = np.log(probs[usable])
        slope, intercept = np.polyfit(xs, ys, 1)
        c1 = math.exp(intercept)
        c2 = -slope
        resid = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
        exponential = c2 > 0
    return DeviationProfile(
        eps=float(eps),
        ns=np.array(ns),
        probs=probs,
        censored=censored,
        trials=int(trials),
        c1=c1,
        c2=c2,
        fit_residual=resid,
        exponential=exponential,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# mixing classifier


@dataclass
class MixingReport:
    """Four-level mixing verdict from finite-resolution correlation decay."""

    antiperiodic: bool
    ergodic: bool
    weak_mixing: bool
    strong_mixing: bool
    label: str
    statistics: dict
    near_periodic_fraction: float
    cells: int
    lag_window: tuple
    trials: int
    seed: int
    product_check: dict | None = None

    def to_dict(self) -> dict:
        return {
            "kind": "mixing-classifier",
            "antiperiodic": bool(self.antiperiodic),
            "ergodic": bool(self.ergodic),
            "weak_mixing": bool(self.weak_mixing),
            "strong_mixing": bool(self.strong_mixing),
            "label": self.label,
            "statistics": {k: float(v) for k, v in self.statistics.items()},
            "near_periodic_fraction": float(self.near_periodic_fraction),
            "cells": int(self.cells),
            "lag_window": [int(v) for v in self.lag_window],
            "trials": int(self.trials),
            "seed": int(self.seed),
            "product_check": self.product_check,
        }


def _cell_indices(sys, coords, cells: int) -> np.ndarray:
    if sys.space == "circle":
        return np.minimum((coords * cells).astype(np.int64), cells - 1)
    if sys.space == "torus":
        side = int(round(math.sqrt(cells)))
        if side * side != cells:
            raise ValueError("torus partitions need a square cell count")
        ij = np.minimum((coords * side).astype(np.int64), side - 1)
        return ij[:, 0] * side + ij[:, 1]
    if sys.space == "symbolic":
        r = sys.symbols
        depth = max(1, int(round(math.log(cells, r))))
        if r**depth != cells:
            raise ValueError("symbolic partitions need a power-of-r cell count")
        idx = np.zeros(coords.shape[0], dtype=np.int64)
        for j in range(depth):
            idx = idx * r + coords[:, j].astype(np.int64)
        return idx
    raise ValueError(f"unknown space {sys.space!r}")


def _near_periodic_fraction(sys, mu, sample: int, horizon: int, tol: float, seed: int):
    gen = substream(seed, 0xAB7)
    if mu is None:
        init = sample
    else:
        idx = resample_indices(mu, sample, gen)
        init = mu.points[idx]
    batch = _systems.make_batch(sys, init, horizon, gen)
    start = np.array(batch.coords(), copy=True)
    near = np.zeros(batch.n, dtype=bool)
    for _ in range(horizon):
        batch.advance()
        cur = batch.coords()
        if sys.space == "circle":
            d = np.abs(cur - start)
            d = np.minimum(d, 1.0 - d)
        elif sys.space == "torus":
            d0 = np.abs(cur[:, 0] - start[:, 0])
            d0 = np.minimum(d0, 1.0 - d0)
            d1 = np.abs(cur[:, 1] - start[:, 1])
            d1 = np.minimum(d1, 1.0 - d1)
            d = np.maximum(d0, d1)
        else:
            depth = min(start.shape[1], max(1, int(math.ceil(-math.log2(tol)))))
            d = np.where(
                (cur[:, :depth] == start[:, :depth]).all(axis=1), 0.0, 1.0
            )
        near |= d < tol
    return float(near.mean())


def mixing_classifier(
    sys,
    mu: EmpiricalMeasure | None = None,
    lags: int = 610,
    trials: int = 20000,
    cells: int = 8,
    settle: int = 8,
    seed: int = 0,
    threads: int = 1,
    near_period_horizon: int = 64,
    near_period_tol: float = 1e-6,
    near_period_threshold: float = 0.02,
    product_check: bool = False,
) -> MixingReport:
    """Classify mixing strength from cell-pair correlation decay.

    For a partition into `cells` grid cells the classifier estimates
    dev_k(A, B) = mu(h^-k A and B) - mu(A) mu(B) over a lag window
    [settle, lags], then forms per-pair statistics ordered pointwise:

        T_erg    = max over pairs |mean_k dev_k|      (Cesaro decay)
        T_weak   = max over pairs  mean_k |dev_k|     (absolute Cesaro decay)
        T_strong = max over pairs   max_k |dev_k|     (plain decay)

    Each passes at 3x its Monte Carlo error plus an explicit finite-window
    Cesaro allowance (T_strong uses a max-statistic correction). Verdicts
    gate upward — strong requires weak requires ergodic requires the
    near-periodicity proxy to clear — so the implication chain holds on
    every run. The near-periodicity proxy measures the fraction of sampled
    points returning within `near_period_tol` of themselves in at most
    `near_period_horizon` steps.

    `product_check=True` additionally runs the Cesaro test for the product
    system h x h (an independent corroboration of weak mixing); its outcome
    is reported but does not change the verdicts.
    """
    n_lags = int(lags)
    if n_lags <= settle:
        raise ValueError("lags must exceed settle")
    ncells = int(cells)
    n_pairs = ncells * ncells

    def worker(batch):
        b0 = _cell_indices(sys, batch.coords(), ncells)
        joint = np.zeros((n_lags + 1, n_pairs))
        for k in range(1, n_lags + 1):
            batch.advance()
            a = _cell_indices(sys, batch.coords(), ncells)
            joint[k] = np.bincount(a * ncells + b0, minlength=n_pairs)
        base = np.bincount(b0, minlength=ncells)
        return joint, base, batch.n

    parts = _run_chunked(sys, mu, trials, n_lags, seed, worker, threads)
    joint = np.sum([p[0] for p in parts], axis=0) / trials
    base = np.sum([p[1] for p in parts], axis=0) / trials
    outer = np.outer(base, base).reshape(-1)
    dev = joint[1:] - outer[None, :]  # shape (lags, pairs)

    window = dev[settle - 1 :]  # lags settle..n_lags
    wlen = window.shape[0]
    t_erg = float(np.abs(window.mean(axis=0)).max())
    t_weak = float(np.abs(window).mean(axis=0).max())
    t_strong = float(np.abs(window).max())

    max_p = float(max(joint.max(), outer.max()))
    se = math.sqrt(max(max_p, 1.0 / trials) * (1.0 - min(max_p, 0.5)) / trials)
    cesaro = 4.0 / (ncells * wlen)
    tol_erg = 3.0 * se + cesaro
    tol_weak = 3.0 * se + cesaro
    tol_strong = se * (3.0 + math.sqrt(2.0 * math.log(n_pairs * wlen))) + cesaro

    frac = _near_periodic_fraction(
        sys,
        mu,
        sample=min(trials, 512),
        horizon=near_period_horizon,
        tol=near_period_tol,
        seed=seed,
    )
    antiperiodic = frac <= near_period_threshold
    ergodic = antiperiodic and (t_erg <= tol_erg)
    weak = ergodic and (t_weak <= tol_weak)
    strong = weak and (t_strong <= tol_strong)

    if not antiperiodic:
        label = "periodic"
    elif not ergodic:
        label = "not-ergodic"
    elif not weak:
        label = "ergodic-only"
    elif not strong:
        label = "weak-mixing"
    else:
        label = "strong-mixing"

    prod_report = None
    if product_check and sys.space == "circle":
        prod_report = _product_ergodicity(
            sys, mu, n_lags, trials, ncells, settle, seed
        )

    return MixingReport(
        antiperiodic=antiperiodic,
        ergodic=ergodic,
        weak_mixing=weak,
        strong_mixing=strong,
        label=label,
        statistics={
            "t_ergodic": t_erg,
            "t_weak": t_weak,
            "t_strong": t_strong,
            "tol_ergodic": tol_erg,
            "tol_weak": tol_weak,
            "tol_strong": tol_strong,
            "mc_se": se,
            "cesaro_allowance": cesaro,
        },
        near_periodic_fraction=frac,
        cells=ncells,
        lag_window=(settle, n_lags),
        trials=int(trials),
        seed=int(seed),
        product_check=prod_report,
    )


def _product_ergodicity(sys, mu, n_lags, trials, ncells, settle, seed):
    """Cesaro decay test for h x h on product cells (weak-mixing cross-check)."""
    gen = substream(seed, 0xDB1)
    half = trials // 2
    if mu is None:
        init_x, init_y = half, half
    else:
        idx = resample_indices(mu, 2 * half, gen)
        init_x = mu.points[idx[:half]]
        init_y = mu.points[idx[half:]]
    bx = _systems.make_batch(sys, init_x, n_lags, substream(seed, 0xDB2))
    by = _systems.make_batch(sys, init_y, n_lags, substream(seed, 0xDB3))
    cx0 = _cell_indices(sys, bx.coords(), ncells)
    cy0 = _cell_indices(sys, by.coords(), ncells)
    b0 = cx0 * ncells + cy0
    npairs2 = ncells**2
    joint = np.zeros((n_lags + 1, npairs2 * npairs2))
    for k in range(1, n_lags + 1):
        bx.advance()
        by.advance()
        a = _cell_indices(sys, bx.coords(), ncells) * ncells + _cell_indices(
            sys, by.coords(), ncells
        )
        joint[k] = np.bincount(a * npairs2 + b0, minlength=npairs2 * npairs2)
    joint /= half
    base = np.bincount(b0, minlength=npairs2) / half
    outer = np.outer(base, base).reshape(-1)
    window = joint[settle:] - outer[None, :]
    wlen = window.shape[0]
    t_erg = float(np.abs(window.mean(axis=0)).max())
    max_p = float(max(joint.max(), outer.max()))
    se = math.sqrt(max(max_p, 1.0 / half) * (1.0 - min(max_p, 0.5)) / half)
    tol = 3.0 * se + 16.0 / (npairs2 * wlen)
    return {
        "t_ergodic": t_erg,
        "tolerance": tol,
        "pass": bool(t_erg <= tol),
        "cells": npairs2,
    }
