import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from oracles import coverage_by_law_sampling, grid_points_in_interval, sample_truncated_exponential
from v2vnet import analytic as A
from v2vnet.model import MultilaneSpec, SingleLaneSpec

BASE = SingleLaneSpec(lambda_v=0.02, gamma=1.0, d=150.0, rsu_spacing=1000.0)


class TestClusterLaw:
    def test_phi_edges(self):
        assert A.phi(0.0, 0.02, 150.0) == 1.0
        assert A.phi(0.7, 0.02, 0.0) == 1.0

    def test_phi_value(self):
        assert A.phi(0.5, 0.01, 100.0) == pytest.approx(0.683940, abs=1e-6)

    def test_phi_matches_next_vehicle_frequency(self):
        rng = np.random.default_rng(0)
        gaps = rng.exponential(100.0, 200_000)
        v2v_next = rng.random(gaps.size) < 0.5
        freq = 1 - np.mean(v2v_next & (gaps <= 100.0))
        assert freq == pytest.approx(A.phi(0.5, 0.01, 100.0), abs=4e-3)

    def test_pmf_values(self):
        assert A.cluster_size_pmf(0.5, 1) == 0.5
        assert A.cluster_size_pmf(0.5, 1, size_biased=True) == 0.25

    @pytest.mark.parametrize("ph", [0.05, 0.3, 0.9])
    @pytest.mark.parametrize("biased", [False, True])
    def test_pmf_normalizes(self, ph, biased):
        n = np.arange(1, 2000)
        assert A.cluster_size_pmf(ph, n, biased).sum() == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("ph", [0.05, 0.5])
    def test_size_biased_tail_and_mean(self, ph):
        n = np.arange(1, 5000)
        p = A.cluster_size_pmf(ph, n, True)
        for k in (0, 3, 10):
            assert A.size_biased_tail(ph, k) == pytest.approx(p[k:].sum(), rel=1e-9)
        assert A.mean_cluster_size(ph, True) == pytest.approx((n * p).sum(), rel=1e-9)
        q = A.cluster_size_pmf(ph, n)
        assert A.mean_cluster_size(ph, True) == pytest.approx((n**2 * q).sum() / (n * q).sum(), rel=1e-9)


class TestSpan:
    def test_truncated_gap_mean_against_quadrature(self):
        lam, d = 0.01, 100.0
        num = integrate.quad(lambda x: x * lam * math.exp(-lam * x), 0, d)[0]
        den = integrate.quad(lambda x: lam * math.exp(-lam * x), 0, d)[0]
        assert A.truncated_gap_mean(lam, d) == pytest.approx(num / den, rel=1e-10)
        assert A.truncated_gap_mean(lam, d) == pytest.approx(41.802, abs=1e-3)

    def test_n1_point_mass(self):
        g = A.span_density_given_n(1, 0.01, 100.0)
        assert g.is_point_mass
        assert g.mean() == 200.0

    def test_n2_is_shifted_truncated_exponential(self):
        lam, d = 0.01, 100.0
        g = A.span_density_given_n(2, lam, d)
        x = g.nodes - 2 * d
        expected = lam * np.exp(-lam * x) / -math.expm1(-lam * d)
        np.testing.assert_allclose(g.values[1:-1], expected[1:-1], rtol=1e-4)

    def test_n4_mean(self):
        g = A.span_density_given_n(4, 0.01, 100.0)
        assert g.integral() == pytest.approx(1.0, abs=1e-9)
        assert g.mean() == pytest.approx(325.407, abs=1e-2)

    def test_n4_against_sampled_sums(self):
        rng = np.random.default_rng(1)
        sums = 200.0 + sample_truncated_exponential(rng, 0.01, 100.0, (400_000, 3)).sum(axis=1)
        g = A.span_density_given_n(4, 0.01, 100.0)
        for q in (250.0, 300.0, 350.0, 400.0):
            cdf = g.expect(lambda l, q=q: (l <= q).astype(float))
            assert cdf == pytest.approx(np.mean(sums <= q), abs=4e-3)

    def test_mean_span_conventions(self):
        lam, d = 0.02, 150.0
        closed = (math.exp(lam * d) - lam * d - 1) / lam
        assert A.mean_span(BASE, include_footprint=False) == pytest.approx(closed, rel=1e-12)
        assert A.mean_span(BASE) == pytest.approx(closed + 2 * d, rel=1e-12)

    def test_grid_refinement_is_stable(self):
        # halving the lattice step moves coverage by far less than 0.1%
        spec = BASE.replace(gamma=0.9, lambda_v=0.015)
        a = A.coverage_v2v(spec)
        b = A.coverage_v2v(spec, step=spec.d / 800)
        assert abs(a - b) / b < 1e-3


class TestRsuLaw:
    def test_examples(self):
        assert A.rsu_ccdf_given_span(1, 300.0, 1000.0) == pytest.approx(0.3)
        assert A.rsu_ccdf_given_span(2, 1700.0, 1000.0) == pytest.approx(0.7)
        for mode in A.RsuLawMode:
            assert A.rsu_ccdf_given_span(0, 1234.0, 1000.0, mode) == 1.0

    def test_matches_phase_scan(self):
        u = (np.arange(200_000) + 0.5) / 200_000 * 1000.0
        for l in (0.0, 150.0, 300.0, 999.0, 1000.0, 1700.0, 2500.0, 4321.0):
            counts = grid_points_in_interval(l, 1000.0, u)
            for m in range(1, 6):
                assert A.rsu_ccdf_given_span(m, l, 1000.0) == pytest.approx(np.mean(counts >= m), abs=1e-5)

    def test_tabulated_table_disagrees(self):
        # the table claims M <= m whenever l > m s
        assert A.rsu_ccdf_given_span(2, 2500.0, 1000.0, A.RsuLawMode.TABULATED) == 0.0
        assert A.rsu_ccdf_given_span(2, 2500.0, 1000.0) == 1.0

    def test_given_n(self):
        assert A.rsu_ccdf_given_n(0, 3, BASE) == pytest.approx(1.0, abs=1e-12)
        assert A.rsu_ccdf_given_n(1, 1, BASE) == pytest.approx(A.rsu_ccdf_given_span(1, 300.0, 1000.0))

    def test_given_n_against_conditional_sampling(self):
        # clusters of exactly five vehicles: 2d plus four truncated gaps, random grid offset
        rng = np.random.default_rng(2)
        spans = 300.0 + sample_truncated_exponential(rng, 0.02, 150.0, (1_000_000, 4)).sum(axis=1)
        hit = np.mean(rng.random(spans.size) * 1000.0 <= spans)
        assert A.rsu_ccdf_given_n(1, 5, BASE) == pytest.approx(hit, rel=5e-3)


class TestCoverage:
    def test_v2i(self):
        assert A.coverage_v2i(BASE) == pytest.approx(0.3)
        assert A.coverage_v2i(BASE.replace(d=500.0)) == 1.0
        assert A.coverage_v2i(BASE.replace(lambda_v=0.001, gamma=0.2)) == pytest.approx(0.3)

    def test_limits(self):
        assert A.coverage_v2v(BASE.replace(gamma=0.0)) == pytest.approx(0.3)
        assert A.coverage_v2v(BASE.replace(lambda_v=1e-7)) == pytest.approx(0.3, abs=1e-5)

    # analytic values frozen after checking them against law sampling below
    FROZEN = {5: 0.4457368, 10: 0.6487630, 15: 0.8272817, 20: 0.9304038,
              25: 0.9755592, 30: 0.9921754, 35: 0.9976480, 40: 0.9993236}

    @pytest.mark.parametrize("lam_km", sorted(FROZEN))
    def test_frozen_values(self, lam_km):
        assert A.coverage_v2v(BASE.replace(lambda_v=lam_km / 1000)) == pytest.approx(self.FROZEN[lam_km], abs=2e-6)

    @pytest.mark.parametrize("lam_km,gamma", [(5, 1.0), (10, 1.0), (20, 1.0), (20, 0.7), (30, 0.9)])
    def test_against_law_sampling(self, lam_km, gamma):
        mean, se = coverage_by_law_sampling(gamma, lam_km / 1000, 150.0, 1000.0, 200_000, seed=lam_km)
        spec = BASE.replace(lambda_v=lam_km / 1000, gamma=gamma)
        assert abs(A.coverage_v2v(spec) - mean) < 5 * se + 1e-4

    def test_interior_maximum_below_full_penetration(self):
        lams = np.arange(5, 81, 5)
        cov = [A.coverage_v2v(BASE.replace(lambda_v=x / 1000, gamma=0.9)) for x in lams]
        assert 15 <= lams[int(np.argmax(cov))] <= 35
        assert cov[-1] < max(cov)
        # dense traffic: spans stay below s, so coverage is E[2d + (N_v - 1) gap] / s
        ph = A.phi(0.9, 0.5, 150.0)
        expected = (300.0 + (A.mean_cluster_size(ph, True) - 1) * A.truncated_gap_mean(0.5, 150.0)) / 1000.0
        assert A.coverage_v2v(BASE.replace(lambda_v=0.5, gamma=0.9)) == pytest.approx(expected, abs=1e-4)

    def test_tabulated_mode_runs(self):
        c = A.coverage_v2v(BASE.replace(lambda_v=0.01), mode=A.RsuLawMode.TABULATED)
        assert 0 <= c <= 1

    def test_truncation_cap(self):
        with pytest.raises(A.NumericalError):
            A.coverage_v2v(BASE.replace(lambda_v=0.001, gamma=1.0, d=1.0), policy=A.PmfTruncationPolicy(1e-9, 1))


class TestRates:
    def test_mean_rate_value(self):
        assert A.mean_shared_rate(BASE) == pytest.approx(0.0498761, abs=1e-7)

    def test_mean_rate_busy_fraction(self):
        spec = BASE.replace(gamma=0.6, lambda_v=0.013)
        x = 0.6 * 0.013
        assert A.mean_shared_rate(spec) == pytest.approx((1 - math.exp(-2 * x * 150)) / (x * 1000), rel=1e-12)

    def test_mean_rate_saturation(self):
        spec = BASE.replace(lambda_v=10.0)
        assert A.mean_shared_rate(spec) == pytest.approx(1 / (10.0 * 1000), rel=1e-9)

    def test_v2i_cdf_examples(self):
        assert A.rate_cdf_v2i(0.5, BASE) == pytest.approx(1 - 0.3 * math.exp(-6) * 7, abs=1e-9)
        assert A.rate_cdf_v2i(0.5, BASE) == pytest.approx(0.994795, abs=1e-6)
        assert A.rate_cdf_v2i(1.0, BASE) == pytest.approx(1 - 0.3 * math.exp(-6), abs=1e-12)
        assert A.rate_cdf_v2i(1e-9, BASE) == pytest.approx(0.7, abs=1e-9)
        assert A.rate_cdf_v2i(1.5, BASE) == 1.0

    def test_v2i_cdf_against_poisson_sampling(self):
        rng = np.random.default_rng(3)
        covered = rng.random(500_000) < 0.3
        rate = np.where(covered, 1.0 / (rng.poisson(6.0, covered.size) + 1), 0.0)
        for r in (0.05, 0.1, 0.2, 1 / 3, 0.5):
            assert A.rate_cdf_v2i(r, BASE) == pytest.approx(np.mean(rate < r), abs=3e-3)

    def test_v2v_bound_small_rate(self):
        f = A.rate_cdf_v2v_bound(1e-6, BASE)
        assert f == pytest.approx(1 - A.coverage_v2v(BASE), abs=1e-5)

    def test_v2v_bound_large_rate(self):
        assert A.rate_cdf_v2v_bound(50.0, BASE.replace(lambda_v=0.005)) == pytest.approx(1.0, abs=1e-9)

    def test_v2v_bound_monotone(self):
        r = np.linspace(0.01, 1.0, 25)
        f = A.rate_cdf_v2v_bound(r, BASE.replace(lambda_v=0.01))
        assert np.all(np.diff(f) >= -1e-12)

    def test_multihoming_bound(self):
        assert A.multihoming_lower_bound(BASE) == pytest.approx(2 * math.sinh(3) / 20, rel=1e-12)
        assert A.multihoming_lower_bound(BASE) == pytest.approx(1.00179, abs=1e-5)

    @pytest.mark.parametrize("gamma", [0.3, 0.8, 1.0])
    def test_multihoming_bound_below_mean(self, gamma):
        for lam in (0.005, 0.02, 0.04):
            spec = BASE.replace(gamma=gamma, lambda_v=lam)
            assert A.multihoming_lower_bound(spec) <= A.expected_rsus_per_cluster(spec)


class TestTradeoff:
    def test_examples(self):
        assert A.tradeoff_point(3, 0.001, 150.0, 1000.0)[0] == pytest.approx(0.6)
        assert A.tradeoff_point(3, 0.003, 150.0, 1000.0)[1] == pytest.approx(0.6)
        assert A.tradeoff_point(3, 1 / 150, 150.0, 1000.0) == (1.0, 1.0)

    def test_monotone_in_n(self):
        pts = np.array([A.tradeoff_point(n, 0.004, 60.0, 1000.0) for n in range(1, 25)])
        assert np.all(np.diff(pts[:, 0]) >= 0)
        assert np.all(np.diff(pts[:, 1]) <= 0)

    def test_mixture_and_best_sizes(self):
        assert A.best_mixing_sizes(150.0, 1000.0) == (1, 7)
        a = A.tradeoff_point(1, 0.004, 150.0, 1000.0)
        b = A.tradeoff_point(7, 0.004, 150.0, 1000.0)
        mix = A.tradeoff_mixture(1, 7, 0.25, 0.004, 150.0, 1000.0)
        assert mix == pytest.approx(tuple(0.25 * x + 0.75 * y for x, y in zip(a, b)))


class TestReduction:
    def test_four_lanes(self):
        m = MultilaneSpec(4, (0.001,) * 4, (0.002, 0.003, 0.004, 0.005), 150.0, 1000.0)
        red = A.reduce_multilane(m)
        assert red.lambda_b_eff == pytest.approx(0.007)
        single = red.single_lane(150.0, 1000.0)
        assert single.lambda_v2v == pytest.approx(0.004)
        assert single.lambda_blockers == pytest.approx(0.007)

    def test_one_lane_identity(self):
        spec = SingleLaneSpec(0.02, 0.4, 150.0, 1000.0)
        single = A.reduce_multilane(spec.as_multilane()).single_lane(150.0, 1000.0)
        assert single.lambda_v == pytest.approx(spec.lambda_v)
        assert single.gamma == pytest.approx(spec.gamma)

    def test_full_penetration(self):
        m = MultilaneSpec(3, (0.004, 0.004, 0.004), (0.0, 0.0, 0.0), 150.0, 1000.0)
        red = A.reduce_multilane(m)
        assert red.lambda_b_eff == 0.0
        assert red.single_lane(150.0, 1000.0).gamma == 1.0


@settings(max_examples=25, deadline=None)
@given(
    lam=st.floats(0.001, 0.04),
    gamma=st.floats(0.05, 1.0),
    d=st.floats(20.0, 400.0),
)
def test_coverage_ordering_properties(lam, gamma, d):
    spec = SingleLaneSpec(lam, gamma, d, 1000.0)
    c = A.coverage_v2v(spec)
    assert A.coverage_v2i(spec) - 1e-9 <= c <= 1 + 1e-12
    # more range and denser RSUs can only help
    assert A.coverage_v2v(spec.replace(d=min(d * 1.2, 500.0))) >= c - 1e-6
    assert A.coverage_v2v(spec.replace(rsu_spacing=900.0)) >= c - 1e-6 if 2 * d <= 900 else True


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.001, 0.03))
def test_full_penetration_coverage_increasing(lam):
    a = A.coverage_v2v(BASE.replace(lambda_v=lam))
    b = A.coverage_v2v(BASE.replace(lambda_v=lam * 1.1))
    assert b >= a - 1e-7
