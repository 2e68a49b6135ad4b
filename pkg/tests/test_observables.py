"""Observable evaluation, cylinder duality, coboundaries, regularity probes."""

import math

import numpy as np
import pytest

from tracelab import observables as O
from tracelab import systems as S


def test_cos_angle_values():
    f = O.cos_angle()
    assert f(0.0) == pytest.approx(1.0)
    assert f(0.25) == pytest.approx(0.0, abs=1e-15)
    assert f(0.5) == pytest.approx(-1.0)
    xs = np.linspace(0, 1, 9)
    assert np.allclose(f.values(xs), np.cos(2 * np.pi * xs))


def test_cos_angle_harmonic_and_regularity():
    f = O.cos_angle(3)
    assert f(1 / 6) == pytest.approx(-1.0)
    kind, const = f.regularity
    assert kind == "lipschitz"
    assert const == pytest.approx(2 * math.pi * 3)


def test_sin_and_coordinate():
    g = O.sin_angle()
    assert g(0.25) == pytest.approx(1.0)
    c = O.coordinate()
    assert c(0.7) == pytest.approx(0.7)
    assert np.allclose(c.values(np.array([0.1, 0.9])), [0.1, 0.9])


def test_torus_observables():
    f = O.torus_cos(axis=1, harmonic=2)
    pts = np.array([[0.3, 0.25], [0.9, 0.5]])
    assert np.allclose(f.values(pts), np.cos(4 * np.pi * pts[:, 1]))
    g = O.torus_coordinate(axis=0)
    assert np.allclose(g.values(pts), pts[:, 0])
    assert g((0.3, 0.25)) == pytest.approx(0.3)


def test_interval_indicator_edges():
    f = O.interval_indicator(0.25, 0.75)
    assert f(0.25) == 1.0 and f(0.5) == 1.0
    assert f(0.75) == 0.0 and f(0.1) == 0.0
    xs = np.array([0.0, 0.25, 0.5, 0.74999, 0.75, 1.0])
    assert np.allclose(f.values(xs), [0, 1, 1, 1, 0, 0])


def test_cylinder_indicator_scalar_batch_duality():
    """The scalar path on SymbolPoints agrees with the batch path on
    window matrices for every depth-2 word."""
    sys = S.full_shift(2, window=8)
    windows = S.sample_invariant(sys, 100, seed=3).points
    for word in [(0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]:
        f = O.cylinder_indicator(list(word))
        batch_vals = f.values(windows)
        pts = [
            S.SymbolPoint(word=tuple(int(v) for v in row), tail=("periodic",))
            for row in windows
        ]
        scalar_vals = np.array([f.fn(p) for p in pts], dtype=float)
        assert np.array_equal(batch_vals, scalar_vals)
        direct = np.ones(len(windows))
        for j, s in enumerate(word):
            direct *= windows[:, j] == s
        assert np.array_equal(batch_vals, direct)


def test_cylinder_indicator_metadata():
    f = O.cylinder_indicator([0, 1, 1])
    assert f.depth == 3
    assert f.word == (0, 1, 1)


def test_shifted_observable():
    f = O.shifted(O.cylinder_indicator([0]), -0.5)
    sys = S.full_shift(2, window=4)
    w = S.sample_invariant(sys, 50, seed=1).points
    vals = f.values(w)
    assert set(np.round(vals, 6)) <= {-0.5, 0.5}
    assert f.word is None or f.word == (0,)


def test_coboundary_telescopes():
    """Ergodic sums of g(hx) - g(x) collapse to two boundary terms."""
    sys = S.doubling()
    g = O.cos_angle()
    cob = O.coboundary(g, sys)
    x = 0.1234567
    n = 12
    total = 0.0
    y = x
    for _ in range(n):
        total += cob.fn(y)
        y = S.step(sys, y)
    assert total == pytest.approx(g.fn(y) - g.fn(x), abs=1e-9)


def test_coboundary_batch_matches_scalar():
    sys = S.doubling()
    cob = O.coboundary(O.cos_angle(), sys)
    xs = np.array([0.05, 0.3, 0.62, 0.9])
    batch = cob.values(xs)
    scalar = np.array([cob.fn(float(v)) for v in xs])
    assert np.allclose(batch, scalar, atol=1e-12)


def test_coboundary_rejects_symbolic():
    with pytest.raises(ValueError):
        O.coboundary(O.cylinder_indicator([0]), S.full_shift(2))


def test_validate_regularity_accepts_true_claim():
    sys = S.doubling()
    rep = O.validate_regularity(O.cos_angle(), sys, pairs=300, seed=2)
    assert rep["ok"]
    assert rep["violations"] == 0
    assert rep["max_ratio"] <= 1.0 + 1e-6
    assert rep["checked"] > 0


def test_validate_regularity_rejects_false_claim():
    sys = S.doubling()
    rep = O.validate_regularity(
        O.cos_angle(), sys, claim=("lipschitz", 0.5), pairs=300, seed=2
    )
    assert not rep["ok"]
    assert rep["violations"] > 0


def test_validate_regularity_holder_claim():
    sys = S.full_shift(2, window=16)
    f = O.cylinder_indicator([0, 1])
    # a depth-2 cylinder is locally constant: Holder for any eta with a
    # constant covering the worst jump at the observed separations
    rep = O.validate_regularity(f, sys, claim=("holder", 0.5, 4.0), pairs=200, seed=5)
    assert rep["ok"]


def test_validate_regularity_continuous_vacuous():
    rep = O.validate_regularity(O.coordinate(), S.doubling(), claim=("continuous",))
    assert rep == {"ok": True, "violations": 0, "max_ratio": 0.0, "checked": 0}
