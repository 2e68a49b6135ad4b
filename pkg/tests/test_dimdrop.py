"""Stage parameter generation, mesh functions, the explicit connecting map,
and its boundary verification."""

import math
from fractions import Fraction

import numpy as np
import pytest

from tracelab import dimdrop as D
from tracelab.measures import EmpiricalMeasure

# Budget ceiling exp(pi**2 / 6), frozen from mpmath at 50 digits.
BUDGET_BOUND = 5.1806683178971157484


def _is_prime(n):
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % k == 0:
            return False
        k += 1
    return True


class TestGenerateParameters:
    def test_frozen_two_stage_table(self):
        table = D.generate_parameters(2, start=(2, 3), K=1.0)
        assert [(s.p, s.q, s.next_p, s.next_q, s.N) for s in table] == [
            (2, 3, 7, 12, 14),
            (7, 12, 337, 420, 1685),
        ]

    def test_stage_invariants_hold(self):
        table = D.generate_parameters(4, start=(2, 3), K=1.0)
        for s in table:
            assert _is_prime(s.next_p)
            assert math.gcd(s.next_p, s.next_q) == 1
            assert s.next_p < s.next_q
            # dimension bookkeeping is exact
            assert s.p * s.q * s.N == s.next_p * s.next_q
            assert s.N == s.next_p * s.s
            assert s.next_q == s.p * s.q * s.s
            # admissibility: the non-identity fraction drops below 1/m^2
            m = s.index
            assert s.ratio == Fraction(s.next_q, s.N)
            assert s.ratio < Fraction(1, m * m) or m == 1
            assert float(s.ratio) < s.bound

    def test_identity_band_grows_with_stage(self):
        table = D.generate_parameters(3, start=(2, 3), K=1.0)
        fractions = [1 - Fraction(s.next_q, s.N) for s in table]
        for m, frac in enumerate(fractions, start=1):
            assert frac > 1 - Fraction(1, m * m) or m == 1
        assert fractions[1] == Fraction(1265, 1685)

    def test_per_stage_constants(self):
        table = D.generate_parameters(2, start=(2, 3), K=[1.0, 3.0])
        assert table[0].K == 1.0 and table[1].K == 3.0

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            D.generate_parameters(1, start=(4, 6))
        with pytest.raises(ValueError):
            D.generate_parameters(1, start=(3, 2))
        with pytest.raises(ValueError):
            D.generate_parameters(1, K=-2.0)

    def test_runs_fast(self):
        import time

        t0 = time.perf_counter()
        D.generate_parameters(2, start=(2, 3), K=1.0)
        assert time.perf_counter() - t0 < 1.0


class TestLipschitzBudget:
    def test_frozen_factors(self):
        table = D.generate_parameters(2)
        bud = D.lipschitz_budget(table)
        assert bud["factors"][0] == pytest.approx(0.5)
        assert bud["factors"][1] == pytest.approx(0.8)
        assert bud["product"] == pytest.approx(0.4)
        assert bud["ok"]
        assert bud["bound"] == pytest.approx(BUDGET_BOUND, abs=1e-12)

    def test_each_factor_under_stage_ceiling(self):
        table = D.generate_parameters(4)
        bud = D.lipschitz_budget(table)
        for s, factor in zip(table, bud["factors"]):
            assert factor <= math.exp(1.0 / s.index ** 2) + 1e-12


class TestSchedulesAndMeshes:
    def test_xi_schedule_low_discrepancy(self):
        xs = D.xi_schedule(7)
        assert xs.shape == (7,)
        assert ((0 < xs) & (xs < 1)).all()
        assert len(np.unique(np.round(xs, 12))) == 7
        # bit-reversed dyadics: the first three are 1/2, 1/4, 3/4
        assert np.allclose(xs[:3], [0.5, 0.25, 0.75])

    def test_xi_schedule_affine_range(self):
        xs = D.xi_schedule(5, 0.25, 0.75)
        assert ((0.25 < xs) & (xs < 0.75)).all()

    def test_fold_retract_reflects(self):
        assert D.fold_retract(1.3) == pytest.approx(0.7)
        assert D.fold_retract(-0.2) == pytest.approx(0.2)
        assert D.fold_retract(0.4) == pytest.approx(0.4)
        arr = D.fold_retract(np.array([-0.5, 0.5, 1.5, 2.5]))
        assert np.allclose(arr, [0.5, 0.5, 0.5, 0.5])

    def test_fold_retract_one_lipschitz(self):
        rng = np.random.default_rng(3)
        xs = rng.normal(scale=2.0, size=400)
        ys = xs + rng.normal(scale=0.1, size=400)
        fx, fy = D.fold_retract(xs), D.fold_retract(ys)
        assert (np.abs(fx - fy) <= np.abs(xs - ys) + 1e-12).all()

    def test_mesh_function_interpolates(self):
        f = D.MeshFunction(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 0.0]))
        assert f(0.25) == pytest.approx(0.5)
        assert f.lipschitz() == pytest.approx(2.0)
        with pytest.raises(ValueError):
            D.MeshFunction(np.array([0.0, 0.5]), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            D.MeshFunction(np.array([0.2, 1.0]), np.array([0.0, 1.0]))

    def test_sample_mesh_function_respects_budget(self):
        for seed in range(5):
            f = D.sample_mesh_function(knots=33, lip=4.0, seed=seed)
            assert f.lipschitz() <= 4.0 + 1e-9
            ts = np.linspace(0, 1, 200)
            vals = f(ts)
            assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12

    def test_sample_mesh_function_pinned_endpoints(self):
        f = D.sample_mesh_function(knots=17, lip=4.0, seed=2, endpoints=(0.3, 0.8))
        assert f(0.0) == pytest.approx(0.3, abs=1e-12)
        assert f(1.0) == pytest.approx(0.8, abs=1e-12)
        assert f.lipschitz() <= 4.0 + 1e-9

    def test_sample_mesh_function_deterministic(self):
        a = D.sample_mesh_function(seed=9)
        b = D.sample_mesh_function(seed=9)
        assert np.array_equal(a.values, b.values)


class TestConnectingMap:
    @pytest.fixture(scope="class")
    def conn(self):
        return D.demo_connecting_map()

    @pytest.fixture(scope="class")
    def element(self, conn):
        return D.sample_element(conn.p, conn.q, seed=1)

    def test_shape_and_bands(self, conn):
        assert (conn.p, conn.q, conn.next_p, conn.next_q) == (2, 3, 8, 9)
        assert conn.N == 12
        assert conn.bands == (3, 8, 1)
        assert len(conn.paths) == 12

    def test_paths_hit_declared_endpoints(self, conn):
        starts = [p(0.0) for p in conn.paths]
        ends = [p(1.0) for p in conn.paths]
        n_id, n_pin, n_ret = conn.bands
        assert np.allclose(starts[:n_id], 0.0) and np.allclose(ends[:n_id], 1.0)
        assert np.allclose(starts[n_id : n_id + 1], conn.z0)
        assert np.allclose(ends[n_id + n_pin :], [conn.z1] * 0 + [1.0])

    def test_unitary_path_is_unitary(self, conn):
        for x in (0.0, 0.2, 0.5, 0.8, 1.0):
            u = conn.unitary(x)
            assert np.abs(u @ u.conj().T - np.eye(72)).max() < 1e-12

    def test_endpoint_unitaries_are_permutations(self, conn):
        for x in (0.0, 1.0):
            u = conn.unitary(x)
            assert np.abs(np.abs(u) - np.round(np.abs(u))).max() < 1e-12
            assert set(np.round(np.abs(u)).astype(int).sum(axis=0)) == {1}

    def test_fractional_power_matches_at_one(self, conn):
        rho = conn._rho
        p1 = D._perm_fractional_power(rho, 1.0)
        direct = D._perm_matrix(rho)
        assert np.abs(p1 - direct).max() < 1e-12
        p0 = D._perm_fractional_power(rho, 0.0)
        assert np.abs(p0 - np.eye(rho.size)).max() < 1e-12

    def test_unital(self, conn):
        one = conn.evaluate(lambda t: np.eye(6), 0.37)
        assert np.abs(one - np.eye(72)).max() < 1e-12

    def test_multiplicative_on_samples(self, conn, element):
        other = D.sample_element(conn.p, conn.q, seed=8)
        for x in (0.0, 0.41, 1.0):
            lhs = conn.evaluate(lambda t: element(t) @ other(t), x)
            rhs = conn.evaluate(element, x) @ conn.evaluate(other, x)
            assert np.abs(lhs - rhs).max() < 1e-9

    def test_boundary_check_dual_routes(self, conn):
        out = D.boundary_check(conn, seed=0)
        assert out["ok"]
        for side in ("at0", "at1"):
            assert out[side]["expectation_residual"] < 1e-9
            assert max(out[side]["commutator_norms"]) < 1e-9
            assert out[side]["corner_residual"] < 1e-9

    def test_boundary_check_rejects_non_member(self, conn):
        bad = lambda t: np.diag(np.arange(6, dtype=float) + t)
        out = D.boundary_check(conn, f=bad, seed=0)
        assert not out["ok"]

    def test_trace_of_image_matches_band_average(self, conn, element):
        """tr(image(x)) / 72 equals the band-weighted average of
        tr(element(path(x))) / 6: the unitary conjugation drops out."""
        for x in (0.0, 0.3, 0.77, 1.0):
            img = conn.evaluate(element, x)
            lhs = np.trace(img).real / 72
            rhs = np.mean(
                [np.trace(element(p(x))).real / 6 for p in conn.paths]
            )
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestTracePushforward:
    def test_mass_split_matches_bands(self):
        stage = D.generate_parameters(1)[0]
        mu = EmpiricalMeasure(
            space="interval", points=np.array([0.2, 0.6]), weights=None
        )
        out = D.connecting_trace_pushforward(stage, mu, z=0.5)
        assert out.size == 5
        # (N - q') tau + p' delta + (q' - p') tau with N = 14, q' = 12, p' = 7
        assert out.weights[:2] == pytest.approx([1 / 14, 1 / 14])
        assert out.weights[2] == pytest.approx(7 / 14)
        assert out.weights[3:] == pytest.approx([5 / 28, 5 / 28])
        assert out.weights.sum() == pytest.approx(1.0)

    def test_wraps_traces(self):
        from tracelab.traces import Trace

        stage = D.generate_parameters(1)[0]
        mu = EmpiricalMeasure(space="interval", points=np.array([0.1]), weights=None)
        tr = Trace(mu, label="tau")
        out = D.connecting_trace_pushforward(stage, tr, z=0.25)
        assert isinstance(out, Trace)
        assert out.label == "tau.conn"

    def test_retraction_applied_to_third_band(self):
        stage = D.generate_parameters(1)[0]
        mu = EmpiricalMeasure(
            space="interval", points=np.array([0.8]), weights=None
        )
        out = D.connecting_trace_pushforward(
            stage, mu, z=0.5, retraction=lambda t: t / 2
        )
        assert out.points[-1] == pytest.approx(0.4)

    def test_z_range_checked(self):
        stage = D.generate_parameters(1)[0]
        mu = EmpiricalMeasure(space="interval", points=np.array([0.5]), weights=None)
        with pytest.raises(ValueError):
            D.connecting_trace_pushforward(stage, mu, z=1.5)
