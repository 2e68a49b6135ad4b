"""Traces as empirical measures and the bridge into the statistics layer."""

import numpy as np
import pytest

from tracelab import observables as O
from tracelab import systems as S
from tracelab.measures import EmpiricalMeasure, wasserstein1
from tracelab.traces import (
    Trace,
    TracialObservable,
    mix_traces,
    trace_eval,
    trace_pushforward,
    tracial_ergodic_average,
    tracial_statistics_bridge,
)


@pytest.fixture
def doubling():
    return S.doubling()


@pytest.fixture
def sample_trace(doubling):
    return Trace(S.sample_invariant(doubling, 600, seed=2), label="sample")


def test_trace_eval_is_weighted_average():
    mu = EmpiricalMeasure(
        space="circle",
        points=np.array([0.0, 0.25, 0.5]),
        weights=np.array([0.5, 0.25, 0.25]),
    )
    tr = Trace(mu)
    f = O.cos_angle()
    # 0.5 * 1 + 0.25 * 0 + 0.25 * (-1) = 0.25
    assert tr(f) == pytest.approx(0.25, abs=1e-12)
    assert trace_eval(tr, f) == tr(f)


def test_trace_eval_linear_in_mixtures(sample_trace, doubling):
    other = Trace(S.sample_invariant(doubling, 400, seed=9), label="other")
    f = O.cos_angle()
    lam = 0.3
    mixed = mix_traces([sample_trace, other], [lam, 1 - lam])
    expect = lam * sample_trace(f) + (1 - lam) * other(f)
    assert mixed(f) == pytest.approx(expect, abs=1e-12)


def test_tracial_observable_pulls_lipschitz_claim():
    f = TracialObservable(O.cos_angle())
    assert f.lipschitz == pytest.approx(2 * np.pi)
    g = TracialObservable(O.cos_angle(), 10.0)
    assert g.lipschitz == 10.0


def test_tracial_observable_requires_constant_for_plain_claims():
    with pytest.raises(ValueError):
        TracialObservable(O.interval_indicator(0.2, 0.6))


def test_tracial_observable_validate(doubling):
    f = TracialObservable(O.cos_angle())
    rep = f.validate(doubling, pairs=200, seed=1)
    assert rep["ok"]


def test_pushforward_composes_with_dynamics(sample_trace, doubling):
    f = O.cos_angle()
    pushed = trace_pushforward(sample_trace, doubling, steps=2)
    assert pushed.label == "sample.h2"
    # trace of f after pushing equals trace of f(h^2 .) before
    direct = float(
        np.cos(2 * np.pi * ((4 * sample_trace.measure.points) % 1.0))
        @ sample_trace.measure.weights
    )
    assert pushed(f) == pytest.approx(direct, abs=1e-12)


def test_pushforward_zero_steps_identity(sample_trace, doubling):
    same = trace_pushforward(sample_trace, doubling, steps=0)
    assert same.label == "sample"
    assert np.array_equal(same.measure.points, sample_trace.measure.points)


def test_pairing_bound_certifies_gap(sample_trace, doubling):
    f = TracialObservable(O.cos_angle())
    pushed = trace_pushforward(sample_trace, doubling)
    rep = f.pairing_bound(sample_trace, pushed)
    assert rep["ok"]
    assert rep["gap"] <= rep["bound"] + 1e-9
    assert rep["w1"] == pytest.approx(
        wasserstein1(sample_trace.measure, pushed.measure), abs=1e-12
    )


def test_pairing_bound_space_mismatch(sample_trace):
    f = TracialObservable(O.cos_angle())
    sym = Trace(S.sample_invariant(S.full_shift(2), 50, seed=1))
    with pytest.raises(ValueError):
        f.pairing_bound(sample_trace, sym)


def test_ergodic_average_constant_for_invariant_trace(sample_trace, doubling):
    f = O.cos_angle()
    rep = tracial_ergodic_average(f, doubling, sample_trace, n_steps=40, seed=3)
    assert rep.n_steps == 40
    assert rep.per_step.shape == (40,)
    # per-step traces fluctuate only by the support's sampling error
    assert np.abs(rep.per_step - rep.per_step.mean()).max() < 0.2
    assert rep.value == pytest.approx(rep.running[-1])
    assert rep.running[-1] == pytest.approx(rep.per_step.mean(), abs=1e-12)


def test_ergodic_average_dirac_tracks_orbit(doubling):
    from fractions import Fraction

    mu = EmpiricalMeasure(space="circle", points=np.array([1 / 3]), weights=None)
    tr = Trace(mu)
    f = O.coordinate()
    rep = tracial_ergodic_average(f, doubling, tr, n_steps=6, seed=0)
    # orbit of 1/3: 1/3, 2/3, 1/3, ... so the average tends to 1/2
    assert rep.per_step[0] == pytest.approx(1 / 3, abs=1e-9)
    assert rep.per_step[1] == pytest.approx(2 / 3, abs=1e-9)
    assert rep.value == pytest.approx(0.5, abs=0.09)


def test_bridge_edc(sample_trace, doubling):
    out = tracial_statistics_bridge(
        "edc", O.cos_angle(), doubling, sample_trace, seed=4, lags=12
    )
    assert set(out) == {"series", "fit"}
    assert out["series"].values.shape == (13,)


def test_bridge_clt(sample_trace, doubling):
    rep = tracial_statistics_bridge(
        "clt", O.cos_angle(), doubling, sample_trace, n=200, trials=400, seed=5
    )
    assert rep.n == 200 and rep.trials == 400


def test_bridge_asclt_starts_from_heaviest_atom(doubling):
    mu = EmpiricalMeasure(
        space="circle",
        points=np.array([0.1, 0.7]),
        weights=np.array([0.2, 0.8]),
    )
    tr = Trace(mu)
    rep = tracial_statistics_bridge(
        "asclt", O.cos_angle(), doubling, tr, n=500, seed=6
    )
    assert rep.n == 500


def test_bridge_deviation_requires_ladder(sample_trace, doubling):
    rep = tracial_statistics_bridge(
        "deviation",
        O.cos_angle(),
        doubling,
        sample_trace,
        eps=0.1,
        ns=[10, 20],
        trials=400,
        seed=7,
    )
    assert rep.probs.shape == (2,)
    with pytest.raises(KeyError):
        tracial_statistics_bridge(
            "deviation", O.cos_angle(), doubling, sample_trace, trials=10
        )


def test_bridge_rejects_unknown_kind(sample_trace, doubling):
    with pytest.raises(ValueError):
        tracial_statistics_bridge("edge", O.cos_angle(), doubling, sample_trace)


def test_mix_traces_weight_validation(sample_trace):
    with pytest.raises(ValueError):
        mix_traces([sample_trace, sample_trace], [0.5, 0.6])
    with pytest.raises(ValueError):
        mix_traces([], None)
    with pytest.raises(ValueError):
        mix_traces([sample_trace], [0.5, 0.5])


def test_mix_traces_uniform_default(sample_trace, doubling):
    other = trace_pushforward(sample_trace, doubling)
    mixed = mix_traces([sample_trace, other])
    assert mixed.size == 2 * sample_trace.size
    assert mixed.measure.weights.sum() == pytest.approx(1.0)
    assert mixed.measure.meta["mixture_weights"] == [0.5, 0.5]


def test_mix_traces_symbolic_keeps_tail_seed():
    sh = S.full_shift(2, window=8)
    a = Trace(S.sample_invariant(sh, 30, seed=3))
    b = Trace(S.sample_invariant(sh, 30, seed=4))
    mixed = mix_traces([a, b])
    assert mixed.measure.meta["tail_seed"] == int(a.measure.meta.get("tail_seed", 0))


def test_symbolic_trace_eval(doubling):
    sh = S.full_shift(2, window=8)
    tr = Trace(S.sample_invariant(sh, 200, seed=5))
    f = O.cylinder_indicator([0])
    val = tr(f)
    assert 0.3 < val < 0.7
    direct = float(
        (tr.measure.points[:, 0] == 0).astype(float) @ tr.measure.weights
    )
    assert val == pytest.approx(direct, abs=1e-12)
