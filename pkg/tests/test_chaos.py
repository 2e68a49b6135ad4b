"""Finite-resolution chaos certificates and their replayable witnesses."""

from fractions import Fraction

import numpy as np
import pytest

from tracelab import chaos as C
from tracelab import systems as S


@pytest.fixture
def doubling():
    return S.doubling()


@pytest.fixture
def golden_rotation():
    return S.rotation((5 ** 0.5 - 1) / 2)


class TestGrid:
    def test_cells_partition_circle(self, doubling):
        cells = C.cells_of(doubling, Fraction(1, 8))
        assert len(cells) == 8
        for j, cell in enumerate(cells):
            assert cell.index == (j,)
            center = j / 8 + 1 / 16
            assert C.cell_contains(doubling, cell, center)
            assert not C.cell_contains(doubling, cell, (j + 1) % 8 / 8 + 1 / 16)

    def test_cell_of_inverts_membership(self, doubling):
        for x in (0.0, 0.124999, 0.5, 0.93):
            cell = C.cell_of(doubling, Fraction(1, 8), x)
            assert C.cell_contains(doubling, cell, x)

    def test_eps_must_divide_one(self, doubling):
        with pytest.raises(ValueError):
            C.cells_of(doubling, 0.3)

    def test_torus_grid(self):
        sys = S.toral()
        cells = C.cells_of(sys, Fraction(1, 4))
        assert len(cells) == 16
        assert C.cell_contains(sys, cells[0], (0.1, 0.1))

    def test_symbolic_grid_is_admissible_words(self):
        trans = [[1, 1], [1, 0]]
        sys = S.subshift(trans, window=16)
        cells = C.cells_of(sys, 2 ** -2)
        words = {c.index for c in cells}
        # depth-2 admissible words of the golden mean shift: no "11"
        assert words == {(0, 0), (0, 1), (1, 0)}


class TestTransitivity:
    def test_doubling_witnesses_replay_exactly(self, doubling):
        rep = C.transitivity_check(doubling, eps=Fraction(1, 16), horizon=64)
        assert rep.ok
        assert rep.method == "dyadic-address"
        assert rep.covered_pairs == rep.total_pairs == 256
        # spot-replay a few witnesses through the exact scalar map
        items = sorted(rep.witnesses.items())[:: max(1, len(rep.witnesses) // 10)]
        for (u, v), (x0, steps) in items:
            x = Fraction(x0) if not isinstance(x0, Fraction) else x0
            for _ in range(steps):
                x = S.step(doubling, x)
            target = C.cells_of(doubling, Fraction(1, 16))[v[0]]
            assert C.cell_contains(doubling, target, x)

    def test_doubling_deep_grid_uses_fractions(self, doubling):
        rep = C.transitivity_check(doubling, eps=Fraction(1, 2 ** 5), horizon=80)
        assert rep.ok

    def test_subshift_bridge_words(self):
        sys = S.subshift([[1, 1], [1, 0]], window=16)
        rep = C.transitivity_check(sys, eps=2 ** -3, horizon=64)
        assert rep.ok
        assert rep.method == "bridge-words"

    def test_sampled_route_for_toral(self):
        sys = S.toral()
        rep = C.transitivity_check(sys, eps=Fraction(1, 4), horizon=256, seed=3)
        assert rep.method == "sampled-orbits"
        assert rep.ok

    def test_rotation_transitive_sampled(self, golden_rotation):
        rep = C.transitivity_check(
            golden_rotation, eps=Fraction(1, 8), horizon=256, seed=1
        )
        assert rep.ok

    def test_report_serializes(self, doubling):
        rep = C.transitivity_check(doubling, eps=Fraction(1, 4), horizon=16)
        d = rep.to_dict()
        assert d["ok"] and "(0,)->(3,)" in d["witnesses"]


class TestPeriodicDensity:
    def test_doubling_every_cell_covered(self, doubling):
        rep = C.periodic_density_check(doubling, eps=Fraction(1, 64), max_period=10)
        assert rep.ok
        assert len(rep.witnesses) == 64
        assert rep.uncovered == []
        for idx, (x, p) in rep.witnesses.items():
            assert isinstance(x, Fraction)
            assert (2 ** p - 1) % x.denominator == 0
            y = x
            for _ in range(p):
                y = S.step(doubling, y)
            assert y == x

    def test_rotation_has_no_periodic_points(self, golden_rotation):
        rep = C.periodic_density_check(
            golden_rotation, eps=Fraction(1, 64), max_period=10
        )
        assert not rep.ok
        assert len(rep.uncovered) == 64

    def test_subshift_periodic_density(self):
        sys = S.subshift([[1, 1], [1, 0]], window=16)
        rep = C.periodic_density_check(sys, eps=2 ** -3, max_period=10)
        assert rep.ok


class TestSensitivity:
    def test_doubling_sensitive(self, doubling):
        rep = C.sensitivity_estimate(
            doubling, probe_eps=1e-6, trials=300, horizon=40, seed=2
        )
        assert rep.sensitive
        assert rep.delta_hat >= 0.25
        assert rep.witness

    def test_rotation_isometric(self, golden_rotation):
        rep = C.sensitivity_estimate(
            golden_rotation, probe_eps=1e-6, trials=300, horizon=40, seed=2
        )
        assert not rep.sensitive
        assert rep.delta_hat <= 10 * rep.probe_eps

    def test_doubling_exact_horizon_guard(self, doubling):
        with pytest.raises(ValueError):
            C.sensitivity_estimate(doubling, probe_eps=1e-6, horizon=60)

    def test_symbolic_sensitivity(self):
        sys = S.subshift([[1, 1], [1, 0]], window=24)
        rep = C.sensitivity_estimate(sys, probe_eps=2 ** -6, trials=40, horizon=16, seed=4)
        assert rep.sensitive

    def test_determinism(self, doubling):
        a = C.sensitivity_estimate(doubling, trials=100, seed=5)
        b = C.sensitivity_estimate(doubling, trials=100, seed=5)
        assert a.delta_hat == b.delta_hat


class TestTouheyWitness:
    def test_frozen_small_case(self, doubling):
        """Cells [0, 1/8) and [1/2, 5/8): address words 000 and 100 give
        the exact rational 4/63 with visit phases 0 and 3."""
        cells = C.cells_of(doubling, Fraction(1, 8))
        w = C.touhey_witness(doubling, cells[0], cells[4])
        assert w.point == Fraction(4, 63)
        assert w.period == 6
        assert (w.u_phase, w.v_phase) == (0, 3)

    def test_all_pairs_at_depth_three(self, doubling):
        cells = C.cells_of(doubling, Fraction(1, 8))
        for u in cells:
            for v in cells:
                w = C.touhey_witness(doubling, u, v)
                assert w is not None
                x = w.point
                orbit = [x]
                for _ in range(w.period):
                    x = S.step(doubling, x)
                    orbit.append(x)
                assert orbit[-1] == orbit[0]
                assert C.cell_contains(doubling, u, orbit[w.u_phase])
                assert C.cell_contains(doubling, v, orbit[w.v_phase])

    def test_subshift_witness(self):
        sys = S.subshift([[1, 1], [1, 0]], window=16)
        cells = C.cells_of(sys, 2 ** -2)
        by_word = {c.index: c for c in cells}
        w = C.touhey_witness(sys, by_word[(0, 1)], by_word[(1, 0)])
        assert w is not None
        word = w.point.word
        # the witness cycle is admissible, including the wraparound edge
        t = np.asarray([[1, 1], [1, 0]])
        for j in range(len(word)):
            assert t[word[j], word[(j + 1) % len(word)]]

    def test_rotation_has_none(self, golden_rotation):
        cells = C.cells_of(golden_rotation, Fraction(1, 4))
        assert C.touhey_witness(golden_rotation, cells[0], cells[1]) is None


class TestCertificate:
    def test_doubling_certified(self, doubling):
        cert = C.chaos_certificate(
            doubling, eps=Fraction(1, 16), horizon=64, trials=300, seed=1
        )
        assert cert.chaotic
        assert cert.transitivity.ok
        assert cert.periodic_density.ok
        assert cert.sensitivity.sensitive

    def test_rotation_rejected(self, golden_rotation):
        cert = C.chaos_certificate(
            golden_rotation, eps=Fraction(1, 16), horizon=128, trials=200, seed=1
        )
        assert not cert.chaotic
        assert not cert.periodic_density.ok
        assert not cert.sensitivity.sensitive

    def test_to_dict_shape(self, doubling):
        cert = C.chaos_certificate(
            doubling, eps=Fraction(1, 8), horizon=32, trials=100, seed=0
        )
        d = cert.to_dict()
        assert d["chaotic"] is True
        assert d["transitivity"]["ok"] is True
        assert d["periodic_density"]["ok"] is True
        assert d["sensitivity"]["sensitive"] is True
