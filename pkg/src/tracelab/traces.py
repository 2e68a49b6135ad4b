"""Traces on the observable algebra, modeled as empirical measures.

A tracial state on the commutative algebra of observables is represented by
a finitely supported probability measure: the trace of an observable is its
integral. Everything the statistics layer measures about the dynamics then
has a tracial reading — pushforward of a trace under the map, ergodic
averages of traced observables, and the limit theorems — and this module is
the thin dictionary between the two languages. Lipschitz data rides along
so that trace differences can be certified against transport distance:
|trace_a(f) - trace_b(f)| <= Lip(f) * W1(a, b).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import systems as _systems
from .measures import EmpiricalMeasure, pushforward_measure, wasserstein1
from .observables import Observable, validate_regularity
from .rng import substream
from . import stats as _stats


@dataclass
class Trace:
    """A tracial state: evaluation is integration against `measure`."""

    measure: EmpiricalMeasure
    label: str = "trace"

    @property
    def space(self) -> str:
        return self.measure.space

    @property
    def size(self) -> int:
        return self.measure.size

    def __call__(self, obs) -> float:
        return trace_eval(self, obs)


@dataclass
class TracialObservable:
    """An observable bundled with the Lipschitz constant its traces use.

    The constant defaults to the observable's own regularity claim. It is
    a declaration; `validate` probes it against a concrete system, and
    `pairing_bound` turns it into the transport inequality
    |trace_a(f) - trace_b(f)| <= lipschitz * W1(a, b).
    """

    observable: Observable
    lipschitz: float | None = None

    def __post_init__(self):
        if self.lipschitz is None:
            reg = self.observable.regularity
            if reg[0] != "lipschitz":
                raise ValueError(
                    "observable carries no lipschitz claim; pass the constant"
                )
            self.lipschitz = float(reg[1])
        else:
            self.lipschitz = float(self.lipschitz)

    @property
    def name(self) -> str:
        return self.observable.name

    def validate(self, sys, pairs: int = 1000, seed: int = 0) -> dict:
        return validate_regularity(
            self.observable,
            sys,
            claim=("lipschitz", self.lipschitz),
            pairs=pairs,
            seed=seed,
        )

    def pairing_bound(self, a: Trace, b: Trace, method: str = "auto") -> dict:
        """Check the trace gap against the transport bound."""
        if a.space != b.space:
            raise ValueError("traces live on different spaces")
        gap = abs(trace_eval(a, self) - trace_eval(b, self))
        w1 = wasserstein1(a.measure, b.measure, method=method)
        bound = self.lipschitz * w1
        return {
            "gap": float(gap),
            "w1": float(w1),
            "lipschitz": float(self.lipschitz),
            "bound": float(bound),
            "ok": bool(gap <= bound + 1e-9),
        }


def _unwrap(f) -> Observable:
    return f.observable if isinstance(f, TracialObservable) else f


def trace_eval(trace: Trace, obs) -> float:
    """trace(f): the weighted average of f over the trace's support."""
    f = _unwrap(obs)
    mu = trace.measure
    if mu.space == "symbolic" and f.batch is None:
        vals = np.array([f.fn(p) for p in mu.point_list()], dtype=float)
    else:
        vals = f.values(mu.points)
    return float(vals @ mu.weights)


def trace_pushforward(trace: Trace, sys, steps: int = 1) -> Trace:
    """The trace composed with `steps` applications of the dynamics."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    mu = trace.measure
    for _ in range(int(steps)):
        mu = pushforward_measure(sys, mu)
    label = trace.label if steps == 0 else f"{trace.label}.h{int(steps)}"
    return Trace(measure=mu, label=label)


@dataclass
class TracialAverageReport:
    """Cesàro averages of a traced observable along the dynamics."""

    value: float
    n_steps: int
    per_step: np.ndarray = field(repr=False)
    running: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "kind": "tracial-ergodic-average",
            "value": float(self.value),
            "n_steps": int(self.n_steps),
            "final_step_value": float(self.per_step[-1]),
        }


def tracial_ergodic_average(
    f, sys, trace: Trace, n_steps: int = 1000, seed: int = 0
) -> TracialAverageReport:
    """Average trace(f composed with h**k) for k < n_steps.

    The support is evolved through the batch kernels (exact bit-stream
    dynamics for angle doubling), the trace of f is recorded at every
    step, and the running Cesàro mean is returned alongside the full
    series. For an invariant trace the per-step series is constant up to
    the support's sampling error.
    """
    obs = _unwrap(f)
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    gen = substream(seed, 0x7ACE)
    batch = _systems.make_batch(sys, trace.measure.points, n_steps, gen)
    w = trace.measure.weights
    per_step = np.empty(n_steps)
    for k in range(n_steps):
        per_step[k] = obs.values(batch.coords()) @ w
        if k + 1 < n_steps:
            batch.advance()
    running = np.cumsum(per_step) / np.arange(1, n_steps + 1)
    return TracialAverageReport(
        value=float(running[-1]),
        n_steps=int(n_steps),
        per_step=per_step,
        running=running,
    )


_BRIDGE_KINDS = ("edc", "clt", "asclt", "deviation")


def tracial_statistics_bridge(kind: str, f, sys, trace: Trace, **kwargs):
    """Run a statistics-layer analysis with the trace as the sampling state.

    kind selects the analysis: "edc" (correlation decay fit; returns the
    series and the fit), "clt" (distributional central limit test),
    "asclt" (almost-sure central limit test along an orbit started from
    the trace's heaviest atom unless x0 is given), "deviation" (large
    deviation profile; requires eps, ns, trials). Remaining keyword
    arguments pass through to the underlying routine.
    """
    obs = _unwrap(f)
    if kind not in _BRIDGE_KINDS:
        raise ValueError(f"kind must be one of {_BRIDGE_KINDS}, got {kind!r}")
    if kind == "edc":
        lags = kwargs.pop("lags", 64)
        fit_args = {
            k: kwargs.pop(k)
            for k in ("window", "residual_threshold", "min_points")
            if k in kwargs
        }
        series = _stats.correlation_series(
            obs, obs, sys, trace.measure, lags, **kwargs
        )
        fit = _stats.edc_fit(series, **fit_args)
        return {"series": series, "fit": fit}
    if kind == "clt":
        return _stats.clt_test(obs, sys, trace.measure, **kwargs)
    if kind == "asclt":
        if "x0" not in kwargs and trace.space != "symbolic":
            heaviest = int(np.argmax(trace.measure.weights))
            kwargs["x0"] = trace.measure.point_list()[heaviest]
        n = kwargs.pop("n", 10000)
        return _stats.asclt_test(obs, sys, n, **kwargs)
    eps = kwargs.pop("eps")
    ns = kwargs.pop("ns")
    trials = kwargs.pop("trials", 2000)
    return _stats.deviation_profile(
        obs, sys, trace.measure, eps, ns, trials, **kwargs
    )


def mix_traces(traces, weights=None, label: str = "mixture") -> Trace:
    """Convex combination of traces over a common space.

    weights defaults to the uniform mixture. Symbolic supports must share
    one window width; the mixture keeps the first component's tail seed
    for its replayable point list.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    space = traces[0].space
    if any(t.space != space for t in traces):
        raise ValueError("traces live on different spaces")
    if weights is None:
        lam = np.full(len(traces), 1.0 / len(traces))
    else:
        lam = np.asarray(weights, dtype=float).reshape(-1)
        if lam.shape[0] != len(traces):
            raise ValueError("one weight per trace required")
        if (lam < 0).any() or abs(lam.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
    if space == "symbolic":
        widths = {t.measure.points.shape[1] for t in traces}
        if len(widths) != 1:
            raise ValueError("symbolic supports must share a window width")
    pts = np.concatenate([t.measure.points for t in traces], axis=0)
    w = np.concatenate(
        [lam[i] * t.measure.weights for i, t in enumerate(traces)]
    )
    meta = {
        "mixture_of": [t.label for t in traces],
        "mixture_weights": [float(v) for v in lam],
    }
    if space == "symbolic":
        meta["tail_seed"] = int(traces[0].measure.meta.get("tail_seed", 0))
        first_meta = traces[0].measure.meta
        if "transitions" in first_meta:
            meta["transitions"] = first_meta["transitions"]
    mu = EmpiricalMeasure(space=space, points=pts, weights=w, meta=meta)
    return Trace(measure=mu, label=label)
