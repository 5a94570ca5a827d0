import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import improvement_exists, lp_max_min, max_flow_feasible
from v2vnet.allocation import SharingGraph, is_feasible, max_min_allocate, v2i_rates, verify_bottleneck
from v2vnet.clustering import attach_rsus, form_clusters
from v2vnet.model import SingleLaneSpec, Snapshot, sample_single_lane


def graph(sizes, sets, caps=None):
    n_rsu = 1 + max((max(s) for s in sets if s), default=-1)
    caps = np.ones(n_rsu) if caps is None else caps
    return SharingGraph.from_sets(sizes, sets, caps)


class TestExamples:
    def test_single_bottleneck(self):
        a = max_min_allocate(graph([4], [[0]]))
        np.testing.assert_allclose(a.vehicle_rates, 0.25)

    def test_shared_and_private(self):
        a = max_min_allocate(graph([1, 3], [[0, 1], [1]]))
        np.testing.assert_allclose(a.vehicle_rates, [1.0, 1 / 3, 1 / 3, 1 / 3])
        np.testing.assert_allclose(a.rsu_loads, [1.0, 1.0])

    @pytest.mark.parametrize("m,n,rho", [(1, 1, 1.0), (3, 7, 2.0), (5, 2, 0.5)])
    def test_no_sharing(self, m, n, rho):
        a = max_min_allocate(graph([n], [list(range(m))], np.full(m, rho)))
        np.testing.assert_allclose(a.vehicle_rates, m * rho / n)

    def test_empty(self):
        a = max_min_allocate(SharingGraph.from_sets([], [], []))
        assert a.vehicle_rates.size == 0

    def test_unreachable_cluster_gets_zero(self):
        a = max_min_allocate(graph([2, 1], [[], [0]]))
        np.testing.assert_allclose(a.vehicle_rates, [0.0, 0.0, 1.0])
        assert verify_bottleneck(graph([2, 1], [[], [0]]), a)

    def test_chain_is_levelled(self):
        # chain 0 - RSU 0 - 1 - RSU 1 - 2: the whole chain is the bottleneck, 2 / 5
        a = max_min_allocate(graph([2, 1, 2], [[0], [0, 1], [1]]))
        np.testing.assert_allclose(a.cluster_rates, 0.4)

    def test_duplicate_edges_collapse(self):
        g = SharingGraph.from_sets([2], [[0, 0, 0]], [1.0])
        assert g.edge_rsu.tolist() == [0]


class TestValidation:
    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            SharingGraph.from_sets([0], [[0]], [1.0])
        with pytest.raises(ValueError):
            SharingGraph.from_sets([1], [[3]], [1.0])
        with pytest.raises(ValueError):
            SharingGraph.from_sets([1], [[0]], [0.0])

    def test_dimension_mismatch(self):
        g = graph([2], [[0]])
        with pytest.raises(ValueError):
            verify_bottleneck(g, np.ones(3))
        with pytest.raises(ValueError):
            is_feasible(g, np.ones(1))


class TestVerifier:
    def test_slack_rsu_named(self):
        g = graph([1, 3], [[0, 1], [1]])
        check = verify_bottleneck(g, np.full(4, 0.25))
        assert not check
        assert any("RSU 0" in v for v in check.violations)

    def test_all_zero_fails(self):
        assert not verify_bottleneck(graph([2, 1], [[0], [0]]), np.zeros(3))

    def test_richer_cluster_named(self):
        # feasible, saturates the RSU, but cluster 0 is starved in favour of cluster 1
        g = graph([1, 1], [[0], [0]])
        check = verify_bottleneck(g, np.array([0.2, 0.8]))
        assert not check
        assert any("richer cluster 1" in v for v in check.violations)

    def test_uneven_cluster(self):
        assert not verify_bottleneck(graph([2], [[0]]), np.array([0.3, 0.7]))

    def test_infeasible(self):
        check = verify_bottleneck(graph([2], [[0]]), np.array([0.6, 0.6]))
        assert not check
        assert "infeasible" in check.violations[0]

    def test_accepts_allocation_object(self):
        g = graph([1, 3], [[0, 1], [1]])
        assert verify_bottleneck(g, max_min_allocate(g)).ok


@st.composite
def small_graphs(draw, max_clusters=6, max_rsus=4):
    C = draw(st.integers(1, max_clusters))
    G = draw(st.integers(1, max_rsus))
    sizes = draw(st.lists(st.integers(1, 5), min_size=C, max_size=C))
    sets = [draw(st.lists(st.integers(0, G - 1), max_size=G, unique=True)) for _ in range(C)]
    caps = draw(st.lists(st.sampled_from([0.5, 1.0, 2.0, 3.0]), min_size=G, max_size=G))
    return sizes, sets, np.array(caps)


@settings(max_examples=150, deadline=None)
@given(small_graphs())
def test_matches_lp_progressive_filling(case):
    sizes, sets, caps = case
    g = SharingGraph.from_sets(sizes, sets, caps)
    a = max_min_allocate(g)
    np.testing.assert_allclose(a.cluster_rates, lp_max_min(sizes, sets, caps), atol=1e-7)
    assert max_flow_feasible(sizes, sets, caps, a.cluster_rates)
    assert verify_bottleneck(g, a).ok


@settings(max_examples=100, deadline=None)
@given(small_graphs(max_clusters=8))
def test_flow_path_matches_subset_path(case):
    sizes, sets, caps = case
    g = SharingGraph.from_sets(sizes, sets, caps)
    np.testing.assert_allclose(
        max_min_allocate(g, exact_limit=0).cluster_rates, max_min_allocate(g).cluster_rates, rtol=1e-9, atol=1e-12
    )


@settings(max_examples=60, deadline=None)
@given(small_graphs(max_clusters=4, max_rsus=3))
def test_no_local_improvement(case):
    sizes, sets, caps = case
    a = max_min_allocate(SharingGraph.from_sets(sizes, sets, caps))
    assert improvement_exists(sizes, sets, caps, a.vehicle_rates) is None


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_total_rate_equals_reachable_capacity(case):
    sizes, sets, caps = case
    a = max_min_allocate(SharingGraph.from_sets(sizes, sets, caps))
    reachable = sorted({u for s in sets for u in s})
    assert a.vehicle_rates.sum() == pytest.approx(caps[reachable].sum(), abs=1e-9)


def test_large_component_uses_flow_path():
    # 30 clusters on a ring of 30 RSUs, each cluster reaching two neighbours
    rng = np.random.default_rng(5)
    sizes = rng.integers(1, 6, 30)
    sets = [[i, (i + 1) % 30] for i in range(30)]
    caps = rng.choice([1.0, 2.0], 30)
    g = SharingGraph.from_sets(sizes, sets, caps)
    a = max_min_allocate(g)
    assert verify_bottleneck(g, a).ok
    np.testing.assert_allclose(a.cluster_rates, lp_max_min(sizes, sets, caps), atol=1e-7)


def test_csv(tmp_path):
    a = max_min_allocate(graph([1, 3], [[0, 1], [1]]))
    a.write_csv(tmp_path / "rates.csv", vehicle_ids=[10, 11, 12, 13])
    with open(tmp_path / "rates.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["vehicle_id", "cluster_id", "rate"]
    assert rows[1] == ["10", "0", "1.0"]
    assert float(rows[2][2]) == pytest.approx(1 / 3)


class TestFromSnapshots:
    def test_simulated_snapshot(self):
        spec = SingleLaneSpec(0.03, 0.8, 150.0, 1000.0)
        s = sample_single_lane(spec, window=50_000.0, seed=11)
        cl = attach_rsus(form_clusters(s, 150.0), 1000.0, s.rsu_phase)
        g = SharingGraph.from_clusters(cl, 1.0)
        a = max_min_allocate(g)
        assert verify_bottleneck(g, a).ok
        assert a.vehicle_rates.sum() == pytest.approx(np.unique(g.edge_rsu).size)

    def test_v2i_rates(self):
        W = 10_000.0
        pos = np.array([100.0, 900.0, 1100.0, 1500.0, 5_000.0, 9_950.0])
        v2v = np.array([True, True, True, True, False, True])
        s = Snapshot(W, pos, v2v, np.ones(pos.size, int), 0.0, 1)
        rates, idx = v2i_rates(s, 150.0, 1000.0, 1.0)
        assert idx.tolist() == [0, 1, 1, -1, 0]
        np.testing.assert_allclose(rates, [0.5, 0.5, 0.5, 0.0, 0.5])

    def test_v2i_matches_singleton_allocation(self):
        # without relaying, every vehicle is its own cluster reaching at most its nearest RSU
        s = sample_single_lane(SingleLaneSpec(0.02, 1.0, 150.0, 1000.0), window=20_000.0, seed=2)
        rates, idx = v2i_rates(s, 150.0, 1000.0, 1.0)
        sets = [[int(i)] if i >= 0 else [] for i in idx]
        a = max_min_allocate(SharingGraph.from_sets(np.ones(idx.size, int), sets, np.ones(20)))
        np.testing.assert_allclose(a.vehicle_rates, rates)


def test_perturbation_oracle_detects_unfair_allocation():
    assert improvement_exists([1, 3], [[0, 1], [1]], np.ones(2), np.full(4, 0.25)) is not None
