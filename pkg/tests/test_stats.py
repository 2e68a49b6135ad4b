"""Correlation series, decay fits, limit theorems, deviation profiles,
and the mixing classifier."""

import math

import numpy as np
import pytest

from tracelab import observables as O
from tracelab import stats as T
from tracelab import systems as S

# Normal cumulative value Phi(1.0) for sigma = 0.5, frozen from
# 0.5 * (1 + erf(1 / (0.5 * sqrt(2)))) evaluated with mpmath at 50 digits.
PHI_1_SIGMA_HALF = 0.9772498680518207928


def test_normal_cdf_matches_erf_oracle():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    got = T._normal_cdf(np.array([1.0]), 0.5)[0]
    expect = float(mp.mpf(1) / 2 * (1 + mp.erf(1 / (mp.mpf("0.5") * mp.sqrt(2)))))
    assert expect == pytest.approx(PHI_1_SIGMA_HALF, abs=1e-16)
    assert got == pytest.approx(PHI_1_SIGMA_HALF, abs=1e-12)


def test_ergodic_sum_and_birkhoff_average():
    sys = S.doubling()
    f = O.coordinate()
    from fractions import Fraction

    x = Fraction(1, 3)
    # orbit 1/3 -> 2/3 -> 1/3 ...
    assert T.ergodic_sum(f, sys, x, 4) == pytest.approx(2.0)
    assert T.birkhoff_average(f, sys, x, 4) == pytest.approx(0.5)


class TestCorrelationSeries:
    def test_lag_zero_is_variance(self):
        sys = S.doubling()
        mu = S.sample_invariant(sys, 60000, seed=3)
        f = O.cos_angle()
        series = T.correlation_series(f, f, sys, mu, lags=8, seed=5)
        assert series.values[0] == pytest.approx(0.5, abs=0.01)

    def test_positive_lags_vanish_for_doubling_cos(self):
        sys = S.doubling()
        mu = S.sample_invariant(sys, 60000, seed=3)
        f = O.cos_angle()
        series = T.correlation_series(f, f, sys, mu, lags=12, seed=5)
        for k in range(1, 13):
            assert abs(series.values[k]) <= 4 * series.stderr[k]

    def test_determinism(self):
        sys = S.doubling()
        mu = S.sample_invariant(sys, 2000, seed=1)
        f = O.cos_angle()
        a = T.correlation_series(f, f, sys, mu, lags=6, seed=9)
        b = T.correlation_series(f, f, sys, mu, lags=6, seed=9)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.stderr, b.stderr)

    def test_rotation_cosine_series_is_cosine(self):
        """For the rotation by theta, the cosine autocorrelation is
        cos(2 pi k theta) / 2 exactly."""
        theta = (5 ** 0.5 - 1) / 2
        sys = S.rotation(theta)
        mu = S.sample_invariant(sys, 60000, seed=11)
        f = O.cos_angle()
        series = T.correlation_series(f, f, sys, mu, lags=10, seed=2)
        for k in range(11):
            expect = math.cos(2 * math.pi * k * theta) / 2
            assert series.values[k] == pytest.approx(expect, abs=0.02)


class TestEDCFit:
    def _series(self, values, stderr=1e-4):
        vals = np.asarray(values, dtype=float)
        return T.CorrelationSeries(
            values=vals,
            stderr=np.full(vals.size, stderr),
            nsamples=10 ** 6,
            seed=0,
        )

    def test_recovers_synthetic_exponential(self):
        gamma = 0.6
        series = self._series([0.8 * gamma ** k for k in range(12)])
        fit = T.edc_fit(series)
        assert fit.verdict == "exponential"
        assert fit.gamma == pytest.approx(gamma, abs=0.01)
        assert fit.c == pytest.approx(0.8, rel=0.05)

    def test_flat_series_not_decaying(self):
        series = self._series([0.5] + [0.3] * 11)
        fit = T.edc_fit(series)
        assert fit.verdict == "non-decaying"

    def test_noise_floor_gives_no_signal(self):
        rng = np.random.default_rng(4)
        vals = np.concatenate([[0.5], 1e-5 * rng.standard_normal(11)])
        series = self._series(vals, stderr=1e-4)
        fit = T.edc_fit(series)
        assert fit.verdict == "no-signal"

    def test_alternating_decay_uses_magnitudes(self):
        gamma = 0.5
        series = self._series([0.9 * (-gamma) ** k for k in range(10)])
        fit = T.edc_fit(series)
        assert fit.verdict == "exponential"
        assert fit.gamma == pytest.approx(gamma, abs=0.01)


class TestVarianceEstimate:
    def test_doubling_cos_both_routes_near_half(self):
        sys = S.doubling()
        rep = T.variance_estimate(
            O.cos_angle(), sys, None, n=800, trials=3000, seed=7
        )
        assert rep.direct == pytest.approx(0.5, abs=0.06)
        assert rep.green_kubo == pytest.approx(0.5, abs=0.06)
        assert rep.agree
        assert not rep.degenerate

    def test_coboundary_degenerate(self):
        sys = S.doubling()
        cob = O.coboundary(O.cos_angle(), sys)
        rep = T.variance_estimate(cob, sys, None, n=800, trials=1500, seed=3)
        assert rep.degenerate
        assert rep.direct < 1e-2

    def test_requires_two_trials(self):
        with pytest.raises(ValueError):
            T.variance_estimate(O.cos_angle(), S.doubling(), None, trials=1)


class TestCLT:
    def test_doubling_cos_gaussian(self):
        rep = T.clt_test(
            O.cos_angle(), S.doubling(), None, n=1000, trials=4000, seed=2
        )
        assert rep.gaussian_pass
        assert rep.sigma2 == pytest.approx(0.5, abs=0.06)
        assert rep.ks <= rep.ks_threshold

    def test_coboundary_degenerate_branch(self):
        sys = S.doubling()
        cob = O.coboundary(O.cos_angle(), sys)
        rep = T.clt_test(cob, sys, None, n=500, trials=500, seed=6)
        assert rep.degenerate
        assert not rep.gaussian_pass

    def test_reference_sigma_reported(self):
        rep = T.clt_test(
            O.cos_angle(),
            S.doubling(),
            None,
            n=400,
            trials=800,
            reference_sigma2=0.5,
            seed=1,
        )
        assert rep.ks_reference is not None
        assert rep.ks_reference < 0.1

    def test_sqrt_n_log_n_normalization_shrinks(self):
        rep = T.clt_test(
            O.cos_angle(),
            S.doubling(),
            None,
            n=1000,
            trials=400,
            normalization="sqrt_n_log_n",
            seed=8,
        )
        # the extra sqrt(log n) factor deflates the variance estimate
        assert rep.sigma2 < 0.15
        assert rep.normalization == "sqrt_n_log_n"

    def test_trials_floor(self):
        with pytest.raises(ValueError):
            T.clt_test(O.cos_angle(), S.doubling(), None, trials=10)

    def test_determinism_across_threads(self):
        kw = dict(n=300, trials=600, seed=12)
        a = T.clt_test(O.cos_angle(), S.doubling(), None, threads=1, **kw)
        b = T.clt_test(O.cos_angle(), S.doubling(), None, threads=4, **kw)
        assert np.array_equal(a.samples, b.samples)
        assert a.ks == b.ks


class TestASCLT:
    def test_harmonic_normalizer_exact(self):
        rep = T.asclt_test(O.cos_angle(), S.doubling(), n=500, seed=4)
        assert rep.dn == pytest.approx(
            math.fsum(1.0 / k for k in range(1, 501)), abs=1e-12
        )

    def test_determinism(self):
        a = T.asclt_test(O.cos_angle(), S.doubling(), n=2000, seed=9)
        b = T.asclt_test(O.cos_angle(), S.doubling(), n=2000, seed=9)
        assert a.ks == b.ks and a.sigma2 == b.sigma2

    def test_reference_variance_branch(self):
        rep = T.asclt_test(
            O.cos_angle(), S.doubling(), n=5000, seed=1, reference_sigma2=0.5
        )
        assert rep.ks_reference is not None

    def test_minimum_length(self):
        with pytest.raises(ValueError):
            T.asclt_test(O.cos_angle(), S.doubling(), n=2)


class TestDeviationProfile:
    def test_doubling_profile_decays(self):
        rep = T.deviation_profile(
            O.cos_angle(),
            S.doubling(),
            None,
            eps=0.1,
            ns=[10, 20, 40, 80, 160],
            trials=4000,
            seed=5,
        )
        assert rep.exponential
        assert rep.c2 is not None and rep.c2 > 0
        slack = 2 / math.sqrt(rep.trials)
        diffs = np.diff(rep.probs)
        assert (diffs <= slack).all()

    def test_censoring_marks_zero_counts(self):
        rep = T.deviation_profile(
            O.cos_angle(),
            S.doubling(),
            None,
            eps=0.45,
            ns=[50, 400, 2000],
            trials=300,
            seed=2,
        )
        assert rep.censored[-1]
        assert rep.probs[rep.censored].max(initial=0.0) == 0.0

    def test_determinism(self):
        kw = dict(eps=0.1, ns=[10, 30], trials=500, seed=3)
        a = T.deviation_profile(O.cos_angle(), S.doubling(), None, **kw)
        b = T.deviation_profile(O.cos_angle(), S.doubling(), None, **kw)
        assert np.array_equal(a.probs, b.probs)


class TestMixingClassifier:
    def test_doubling_strong(self):
        rep = T.mixing_classifier(S.doubling(), seed=0)
        assert rep.label == "strong-mixing"
        assert rep.strong_mixing and rep.weak_mixing and rep.ergodic

    def test_rotation_ergodic_only(self):
        rep = T.mixing_classifier(S.rotation((5 ** 0.5 - 1) / 2), seed=0)
        assert rep.label == "ergodic-only"
        assert rep.ergodic and not rep.weak_mixing and not rep.strong_mixing

    def test_dyadic_periodic(self):
        rep = T.mixing_classifier(S.dyadic_permutation(3), seed=0)
        assert rep.label == "periodic"
        assert not rep.antiperiodic and not rep.ergodic
        assert rep.near_periodic_fraction > 0.9

    def test_implication_chain_seeded_runs(self):
        """strong implies weak implies ergodic, whatever the verdicts."""
        systems = [
            S.doubling(),
            S.rotation((5 ** 0.5 - 1) / 2),
            S.dyadic_permutation(2),
        ]
        for seed in range(6):
            for sys in systems:
                rep = T.mixing_classifier(
                    sys, lags=64, trials=2000, cells=4, seed=seed
                )
                if rep.strong_mixing:
                    assert rep.weak_mixing
                if rep.weak_mixing:
                    assert rep.ergodic
                if rep.ergodic:
                    assert rep.antiperiodic

    def test_product_check_runs_for_doubling(self):
        rep = T.mixing_classifier(
            S.doubling(), lags=64, trials=4000, cells=4, seed=1, product_check=True
        )
        assert rep.product_check is not None
        assert rep.product_check["pass"]
        assert rep.product_check["t_ergodic"] <= rep.product_check["tolerance"]

    def test_report_round_trip(self):
        rep = T.mixing_classifier(S.doubling(), lags=32, trials=1000, cells=4, seed=0)
        d = rep.to_dict()
        assert d["label"] == rep.label
        assert set(d["statistics"]) == set(rep.statistics)
