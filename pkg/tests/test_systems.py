"""Map definitions, exact arithmetic paths, and batch kernel consistency."""

import math
from fractions import Fraction

import numpy as np
import pytest

from tracelab import systems as S
from tracelab.rng import substream

# Reference values for the neutral-fixed-point interval map
# x -> x + 2**alpha * x**(1 + alpha) on [0, 1/2), recomputed below with
# mpmath at 50 digits and frozen here.
INTERMITTENT_CASES = [
    (0.25, 0.25, 0.46022410381342863576),
    (0.50, 0.30, 0.53237900077244501311),
    (0.75, 0.10, 0.12990697562442441084),
]


def test_intermittent_oracle_values():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    for alpha, x, frozen in INTERMITTENT_CASES:
        expect = mp.mpf(x) + mp.mpf(2) ** alpha * mp.mpf(x) ** (1 + alpha)
        assert abs(float(expect) - frozen) < 1e-18
        sys = S.intermittent(alpha)
        got = S.step(sys, x)
        assert got == pytest.approx(frozen, abs=1e-15)


def test_intermittent_right_branch_is_doubling():
    sys = S.intermittent(0.25)
    assert S.step(sys, 0.75) == pytest.approx(0.5, abs=1e-15)
    assert S.step(sys, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_intermittent_alpha_range():
    with pytest.raises(ValueError):
        S.intermittent(1.5)
    with pytest.raises(ValueError):
        S.intermittent(0.0)


def test_doubling_exact_fraction_step():
    sys = S.doubling()
    assert S.step(sys, Fraction(1, 3)) == Fraction(2, 3)
    assert S.step(sys, Fraction(2, 3)) == Fraction(1, 3)
    x = Fraction(5, 31)
    for _ in range(5):
        x = S.step(sys, x)
    assert x == Fraction(5, 31)


def test_rotation_rational_is_periodic():
    sys = S.rotation(Fraction(1, 4))
    x = Fraction(1, 8)
    seen = [x]
    for _ in range(4):
        x = S.step(sys, x)
        seen.append(x)
    assert seen[-1] == seen[0]
    assert len(set(seen[:-1])) == 4


def test_toral_step_wraps_mod_one():
    sys = S.toral()
    x = (Fraction(1, 3), Fraction(1, 2))
    y = S.step(sys, x)
    assert y == (Fraction(2 * 1, 3 * 1) + Fraction(1, 2) - 1, Fraction(1, 3) + Fraction(1, 2))
    # matrix (2,1),(1,1): (2/3 + 1/2, 1/3 + 1/2) mod 1 = (1/6, 5/6)
    assert y == (Fraction(1, 6), Fraction(5, 6))


def test_dyadic_rank3_period_eight():
    """The rank-3 cell permutation returns every point in exactly 8 steps."""
    sys = S.dyadic_permutation(3)
    for x0 in (0.07, 0.33, 0.61, 0.94):
        x = x0
        periods = []
        for k in range(1, 17):
            x = S.step(sys, x)
            if abs(x - x0) < 1e-12:
                periods.append(k)
        assert periods and periods[0] == 8


def test_subshift_step_shifts_window():
    trans = [[1, 1], [1, 0]]
    sys = S.subshift(trans, window=8)
    p = S.SymbolPoint(word=(0, 1, 0, 1, 0, 1, 0, 1), tail=("periodic",))
    q = S._step_symbol(sys, p)
    assert q.word[: len(q.word) - 1] == p.word[1:] or q.word == p.word[1:] + q.word[-1:]


def test_symbol_point_expand_tiles_periodic_words():
    p = S.SymbolPoint(word=(0, 1, 1), tail=("periodic",))
    assert p.expand(7) == (0, 1, 1, 0, 1, 1, 0)


def test_full_shift_stationary_matches_probs():
    sys = S.full_shift(2, probs=[0.25, 0.75])
    assert np.allclose(sys.stationary, [0.25, 0.75])


def test_subshift_rejects_bad_matrix():
    with pytest.raises(ValueError):
        S.subshift([[0, 0], [0, 0]])


def test_primitivity_check_golden_mean_shift():
    ok, power = S.primitivity_check([[1, 1], [1, 0]])
    assert ok and power >= 1


def test_distance_circle_wraps():
    sys = S.doubling()
    assert S.distance(sys, 0.1, 0.9) == pytest.approx(0.2, abs=1e-15)
    assert S.distance(sys, 0.0, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_distance_symbolic_first_disagreement():
    sys = S.full_shift(2, window=16)
    a = S.SymbolPoint(word=(0,) * 16, tail=("periodic",))
    b = S.SymbolPoint(word=(0, 0, 0, 1) + (0,) * 12, tail=("periodic",))
    assert S.distance(sys, a, b) == pytest.approx(2.0 ** -3)
    assert S.distance(sys, a, a) == 0.0
    # distinct points whose visible windows agree hit the resolution floor
    c = S.SymbolPoint(word=(0,) * 8, tail=("periodic",))
    assert S.distance(sys, a, c) == pytest.approx(2.0 ** -16)


def test_orbit_length_and_start():
    sys = S.doubling()
    o = S.orbit(sys, Fraction(1, 5), 6)
    assert len(o) == 6 and o[0] == Fraction(1, 5)
    assert o[1] == Fraction(2, 5)
    assert o[4] == o[0]


def test_periodic_points_doubling_exact():
    sys = S.doubling()
    pts = S.periodic_points(sys, 4)
    assert len(pts) == 2 ** 4 - 1
    for x in pts:
        assert isinstance(x, Fraction)
        assert (2 ** 4 - 1) % x.denominator == 0
        y = x
        for _ in range(4):
            y = S.step(sys, y)
        assert y == x


def test_periodic_points_irrational_rotation_empty():
    sys = S.rotation((5 ** 0.5 - 1) / 2)
    assert S.periodic_points(sys, 3) == []


def test_periodic_points_period_cap():
    sys = S.doubling()
    with pytest.raises(ValueError):
        S.periodic_points(sys, 25)
    with pytest.raises(ValueError):
        S.periodic_points(sys, 10, max_points=10)


def test_periodic_points_toral_count():
    """det(A^p - I) counts fixed points of the p-th power exactly."""
    sys = S.toral()
    a = np.array([[2, 1], [1, 1]], dtype=object)
    for p in (1, 2, 3):
        ap = np.linalg.matrix_power(a, p)
        count = abs(int(round(np.linalg.det((ap - np.eye(2, dtype=object)).astype(float)))))
        pts = S.periodic_points(sys, p)
        assert len(pts) == count
        for x in pts:
            y = x
            for _ in range(p):
                y = S.step(sys, y)
            assert y == x


def test_sample_invariant_uniform_cdf():
    """Invariant samples for doubling look uniform at the 1e5 scale."""
    sys = S.doubling()
    mu = S.sample_invariant(sys, 100000, seed=11)
    xs = np.sort(np.asarray(mu.points, dtype=float))
    grid = (np.arange(xs.size) + 1) / xs.size
    ks = np.abs(xs - grid).max()
    assert ks < 0.006


def test_sample_invariant_deterministic():
    sys = S.doubling()
    a = S.sample_invariant(sys, 500, seed=3)
    b = S.sample_invariant(sys, 500, seed=3)
    assert np.array_equal(a.points, b.points)
    c = S.sample_invariant(sys, 500, seed=4)
    assert not np.array_equal(a.points, c.points)


def test_make_batch_matches_scalar_step_doubling():
    sys = S.doubling()
    gen = substream(0, 0xBEEF)
    init = np.array([0.15, 0.35, 0.85])
    batch = S.make_batch(sys, init, 20, gen)
    xs = init.copy()
    for _ in range(12):
        got = batch.coords()
        assert np.allclose(got, xs, atol=1e-12)
        batch.advance()
        xs = S.step_coords(sys, xs)


def test_make_batch_fresh_draws_deterministic():
    sys = S.doubling()
    a = S.make_batch(sys, 64, 5, substream(9, 0xF00D))
    b = S.make_batch(sys, 64, 5, substream(9, 0xF00D))
    assert np.array_equal(a.coords(), b.coords())


def test_bit_kernel_survives_float_collapse():
    """After 60 steps a float64 orbit of the doubling map collapses to 0;
    the integer bit-stream kernel keeps mixing."""
    sys = S.doubling()
    batch = S.make_batch(sys, 256, 80, substream(1, 0xC0))
    for _ in range(79):
        batch.advance()
    final = batch.coords()
    assert np.std(final) > 0.1


def test_step_coords_rejects_symbolic():
    sys = S.full_shift(2)
    with pytest.raises((ValueError, TypeError)):
        S.step_coords(sys, np.zeros(4))


def test_orbit_coord_series_shape_and_determinism():
    sys = S.doubling()
    a = S.orbit_coord_series(sys, 100, seed=21)
    b = S.orbit_coord_series(sys, 100, seed=21)
    assert a.shape[0] >= 100
    assert np.array_equal(a, b)


def test_toral_batch_matches_scalar():
    sys = S.toral()
    gen = substream(0, 0xAB)
    init = np.array([[0.2, 0.7], [0.9, 0.1]])
    batch = S.make_batch(sys, init, 6, gen)
    xs = init.copy()
    for _ in range(5):
        assert np.allclose(batch.coords(), xs, atol=1e-12)
        batch.advance()
        xs = S.step_coords(sys, xs)


def test_markov_batch_respects_transitions():
    trans = [[0, 1], [1, 1]]
    sys = S.subshift(trans, window=12)
    batch = S.make_batch(sys, 64, 30, substream(5, 0x12))
    t = np.asarray(trans)
    for _ in range(29):
        w = batch.coords()
        heads = w[:, :-1].astype(int)
        tails = w[:, 1:].astype(int)
        assert t[heads, tails].all()
        batch.advance()
