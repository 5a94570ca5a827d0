"""Max-min fair sharing of RSU capacity among clusters and their vehicles.

V2V links are never the bottleneck, so a cluster pools the capacity of every
RSU it reaches and all of its vehicles end up with the same rate. The problem
then lives on the bipartite cluster/RSU graph: the poorest clusters form the
subset S minimizing capacity(N(S)) / vehicles(S). That subset is frozen at the
ratio, its RSUs are removed, and the procedure repeats on what remains.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .clustering import ClusterSet
from .model import Snapshot

__all__ = [
    "Allocation",
    "BottleneckCheck",
    "SharingGraph",
    "is_feasible",
    "max_min_allocate",
    "v2i_rates",
    "verify_bottleneck",
]

EXACT_SUBSET_LIMIT = 12
REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SharingGraph:
    """Clusters (vehicle counts) linked to the RSUs they can reach.

    Edges are stored as parallel arrays ``edge_cluster`` / ``edge_rsu``.
    """

    sizes: np.ndarray
    edge_cluster: np.ndarray
    edge_rsu: np.ndarray
    capacities: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        ec = np.asarray(self.edge_cluster, dtype=np.int64)
        er = np.asarray(self.edge_rsu, dtype=np.int64)
        caps = np.asarray(self.capacities, dtype=float)
        if np.any(sizes < 1):
            raise ValueError("every cluster needs at least one vehicle")
        if ec.shape != er.shape:
            raise ValueError("edge arrays differ in length")
        if ec.size and (ec.min() < 0 or ec.max() >= sizes.size or er.min() < 0 or er.max() >= caps.size):
            raise ValueError("edge endpoint out of range")
        if np.any(caps <= 0):
            raise ValueError("RSU capacities must be > 0")
        # one edge per (cluster, rsu) pair
        if ec.size:
            key = np.unique(ec * caps.size + er)
            ec, er = key // caps.size, key % caps.size
        for name, arr in (("sizes", sizes), ("edge_cluster", ec), ("edge_rsu", er), ("capacities", caps)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_sets(cls, sizes, rsu_sets, capacities) -> "SharingGraph":
        ec = np.concatenate([np.full(len(s), i, dtype=np.int64) for i, s in enumerate(rsu_sets)] or [np.zeros(0, np.int64)])
        er = np.concatenate([np.asarray(list(s), dtype=np.int64) for s in rsu_sets] or [np.zeros(0, np.int64)])
        return cls(np.asarray(sizes), ec, er, np.asarray(capacities, dtype=float))

    @classmethod
    def from_clusters(cls, clusters: ClusterSet, rho_rsu: float) -> "SharingGraph":
        if not clusters.attached:
            raise ValueError("attach RSUs to the clusters first")
        m = clusters.m
        ec = np.repeat(np.arange(len(clusters)), m)
        offs = np.arange(m.sum()) - np.repeat(np.cumsum(m) - m, m)
        er = (np.repeat(clusters.rsu_first, m) + offs) % clusters.n_rsus
        return cls(clusters.n, ec, er, np.full(clusters.n_rsus, float(rho_rsu)))

    @property
    def n_clusters(self) -> int:
        return self.sizes.size

    @property
    def n_rsus(self) -> int:
        return self.capacities.size

    @property
    def n_vehicles(self) -> int:
        return int(self.sizes.sum())

    @property
    def vehicle_cluster(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_clusters), self.sizes)

    def rsu_sets(self) -> list[np.ndarray]:
        order = np.argsort(self.edge_cluster, kind="stable")
        splits = np.cumsum(np.bincount(self.edge_cluster, minlength=self.n_clusters))[:-1]
        return np.split(self.edge_rsu[order], splits)


@dataclass(frozen=True, eq=False)
class Allocation:
    vehicle_rates: np.ndarray
    vehicle_cluster: np.ndarray
    cluster_rates: np.ndarray
    rsu_loads: np.ndarray
    rsu_saturated: np.ndarray

    def write_csv(self, path, vehicle_ids=None) -> None:
        ids = np.arange(self.vehicle_rates.size) if vehicle_ids is None else vehicle_ids
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["vehicle_id", "cluster_id", "rate"])
            for v, c, r in zip(ids, self.vehicle_cluster, self.vehicle_rates):
                writer.writerow([int(v), int(c), repr(float(r))])


def _min_ratio_subsets(sizes, adj, caps, uniform):
    """Exhaustive search for the largest subset minimizing cap(N(S)) / n(S)."""
    k = sizes.size
    masks = ((np.arange(1, 2**k)[:, None] >> np.arange(k)) & 1).astype(bool)
    reach = (masks.astype(np.int64) @ adj.astype(np.int64)) > 0
    n = masks @ sizes
    if uniform:
        cnt = reach.sum(axis=1)
        best = np.argmin(cnt / n)
        tie = cnt * n[best] == cnt[best] * n
        level = caps[0] * cnt[best] / n[best] if caps.size else 0.0
    else:
        cap = reach @ caps
        ratio = cap / n
        level = ratio.min()
        tie = ratio <= level + REL_TOL * max(level, caps.max(initial=0.0))
    return float(level), masks[tie].any(axis=0)


def _min_ratio_flow(sizes, adj, caps):
    """Same search via parametric min cuts (Dinkelbach iterations)."""
    k, m = adj.shape
    scale = max(caps.max(initial=1.0), 1.0)
    tol = 1e-10 * scale

    def network(level):
        g = nx.DiGraph()
        g.add_node("s")
        g.add_node("t")
        for i in range(k):
            g.add_edge("s", ("c", i), capacity=level * sizes[i])
            for j in np.flatnonzero(adj[i]):
                g.add_edge(("c", i), ("r", int(j)))
        for j in range(m):
            g.add_edge(("r", j), "t", capacity=float(caps[j]))
        return g

    def ratio(subset):
        return caps[adj[subset].any(axis=0)].sum() / sizes[subset].sum()

    subset = np.ones(k, dtype=bool)
    level = ratio(subset)
    while True:
        g = network(level)
        cut, (src_side, _) = nx.minimum_cut(g, "s", "t")
        if cut >= level * sizes.sum() - tol:
            break
        picked = np.zeros(k, dtype=bool)
        for node in src_side:
            if isinstance(node, tuple) and node[0] == "c":
                picked[node[1]] = True
        new_level = ratio(picked)
        if new_level >= level:
            break
        level = new_level

    # largest minimizer: everything that cannot reach the sink in the residual graph
    residual = nx.algorithms.flow.preflow_push(g, "s", "t")
    reaches_sink = {"t"}
    queue = deque(["t"])
    while queue:
        v = queue.popleft()
        for u in residual.predecessors(v):
            e = residual[u][v]
            if u not in reaches_sink and e["capacity"] - e["flow"] > tol:
                reaches_sink.add(u)
                queue.append(u)
    picked = np.array([("c", i) not in reaches_sink for i in range(k)])
    if not picked.any():
        picked = subset
    return float(level), picked


def _solve_component(sizes, adj, caps, exact_limit):
    k = sizes.size
    levels = np.zeros(k)
    remaining = np.ones(k, dtype=bool)
    avail = np.ones(caps.size, dtype=bool)
    uniform = bool(np.all(caps == caps[0])) if caps.size else True
    while remaining.any():
        idx = np.flatnonzero(remaining)
        sub = adj[np.ix_(idx, avail)]
        sub_caps = caps[avail]
        if idx.size <= exact_limit:
            level, picked = _min_ratio_subsets(sizes[idx], sub, sub_caps, uniform)
        else:
            level, picked = _min_ratio_flow(sizes[idx], sub, sub_caps)
        chosen = idx[picked]
        levels[chosen] = level
        avail &= ~adj[chosen].any(axis=0)
        remaining[chosen] = False
    return levels


def max_min_allocate(graph: SharingGraph, exact_limit: int = EXACT_SUBSET_LIMIT) -> Allocation:
    """Max-min fair per-vehicle rates by progressive filling.

    Components of the cluster/RSU graph are solved independently. A lone
    cluster simply splits its RSUs' capacity evenly; larger components use an
    exhaustive subset search up to ``exact_limit`` clusters and parametric
    min cuts beyond that. Clusters reaching no RSU get rate 0.
    """
    C, G = graph.n_clusters, graph.n_rsus
    ec, er, caps = graph.edge_cluster, graph.edge_rsu, graph.capacities
    cluster_rates = np.zeros(C)
    if C:
        adj = sparse.coo_matrix((np.ones(ec.size), (ec, C + er)), shape=(C + G, C + G))
        _, comp = connected_components(adj, directed=False)
        comp_c = comp[:C]
        clusters_per_comp = np.bincount(comp_c, minlength=comp.max() + 1)
        pooled = np.bincount(ec, weights=caps[er], minlength=C)
        lone = clusters_per_comp[comp_c] == 1
        cluster_rates[lone] = pooled[lone] / graph.sizes[lone]

        shared = np.flatnonzero(clusters_per_comp > 1)
        if shared.size:
            edge_comp = comp_c[ec]
            order = np.argsort(comp_c, kind="stable")
            bounds = np.searchsorted(comp_c[order], shared)
            counts = clusters_per_comp[shared]
            e_order = np.argsort(edge_comp, kind="stable")
            e_lo = np.searchsorted(edge_comp[e_order], shared, side="left")
            e_hi = np.searchsorted(edge_comp[e_order], shared, side="right")
            for b, cnt, lo, hi in zip(bounds, counts, e_lo, e_hi):
                members = order[b : b + cnt]
                edges = e_order[lo:hi]
                rsus, local_r = np.unique(er[edges], return_inverse=True)
                local_c = np.searchsorted(members, ec[edges]) if np.all(np.diff(members) > 0) else \
                    np.array([np.flatnonzero(members == c)[0] for c in ec[edges]])
                a = np.zeros((cnt, rsus.size), dtype=bool)
                a[local_c, local_r] = True
                cluster_rates[members] = _solve_component(graph.sizes[members], a, caps[rsus], exact_limit)

    used = np.zeros(G, dtype=bool)
    used[er] = True
    loads = np.where(used, caps, 0.0)
    vc = graph.vehicle_cluster
    return Allocation(cluster_rates[vc], vc, cluster_rates, loads, used.copy())


@dataclass(frozen=True)
class BottleneckCheck:
    ok: bool
    violations: tuple

    def __bool__(self) -> bool:
        return self.ok


def _cluster_flow(graph: SharingGraph, demand: np.ndarray):
    """Max flow from clusters (capped at ``demand``) through edges to RSUs."""
    g = nx.DiGraph()
    g.add_node("s")
    g.add_node("t")
    for i in range(graph.n_clusters):
        if demand[i] > 0:
            g.add_edge("s", ("c", i), capacity=float(demand[i]))
    for c, r in zip(graph.edge_cluster, graph.edge_rsu):
        g.add_edge(("c", int(c)), ("r", int(r)))
    for j in range(graph.n_rsus):
        g.add_edge(("r", j), "t", capacity=float(graph.capacities[j]))
    value, flow = nx.maximum_flow(g, "s", "t")
    return value, flow


def is_feasible(graph: SharingGraph, vehicle_rates, tol: float = 1e-9) -> bool:
    """Whether per-vehicle rates can be served within RSU capacities."""
    rates = np.asarray(vehicle_rates, dtype=float)
    if rates.size != graph.n_vehicles:
        raise ValueError("one rate per vehicle expected")
    if np.any(rates < -tol):
        return False
    demand = np.bincount(graph.vehicle_cluster, weights=rates, minlength=graph.n_clusters)
    reach = np.bincount(graph.edge_cluster, minlength=graph.n_clusters) > 0
    if np.any(demand[~reach] > tol):
        return False
    value, _ = _cluster_flow(graph, demand)
    return value >= demand.sum() - tol * max(1.0, graph.capacities.max(initial=1.0))


def verify_bottleneck(graph: SharingGraph, allocation, tol: float = 1e-9) -> BottleneckCheck:
    """Check that no vehicle can gain without taking from an equal-or-poorer one.

    Looks for augmenting paths in the residual of a feasible flow: from a
    vehicle's cluster through its RSUs and on through clusters no richer than
    it. Reaching an RSU with spare capacity, or a strictly richer cluster
    drawing on a reachable RSU, is a violation.
    """
    rates = np.asarray(getattr(allocation, "vehicle_rates", allocation), dtype=float)
    if rates.size != graph.n_vehicles:
        raise ValueError(f"allocation has {rates.size} vehicle rates, graph has {graph.n_vehicles} vehicles")
    scale = max(1.0, graph.capacities.max(initial=1.0))
    atol = tol * scale
    problems = []
    vc = graph.vehicle_cluster
    deg = np.bincount(graph.edge_cluster, minlength=graph.n_clusters)

    if np.any(rates < -atol):
        problems.append(f"negative rates for vehicles {np.flatnonzero(rates < -atol).tolist()}")
    for c in range(graph.n_clusters):
        r = rates[vc == c]
        if deg[c] == 0 and np.any(r > atol):
            problems.append(f"cluster {c} reaches no RSU but has positive rates")
        elif deg[c] > 0 and r.max() - r.min() > atol:
            problems.append(f"cluster {c} splits its capacity unevenly ({r.min():.6g} vs {r.max():.6g})")
        elif deg[c] > 0 and r.max() <= atol:
            problems.append(f"cluster {c} reaches RSUs but its vehicles get rate 0")
    if problems:
        return BottleneckCheck(False, tuple(problems))

    demand = np.bincount(vc, weights=rates, minlength=graph.n_clusters)
    level = demand / graph.sizes
    value, flow = _cluster_flow(graph, demand)
    if value < demand.sum() - atol:
        return BottleneckCheck(False, (f"infeasible: {demand.sum():.6g} requested, {value:.6g} servable",))

    load = np.array([flow[("r", j)]["t"] for j in range(graph.n_rsus)])
    slack = graph.capacities - load
    rsus_of = graph.rsu_sets()
    users_of = [[] for _ in range(graph.n_rsus)]
    for c, r in zip(graph.edge_cluster, graph.edge_rsu):
        if flow[("c", int(c))][("r", int(r))] > atol:
            users_of[r].append(int(c))

    for c in np.flatnonzero(deg > 0):
        seen_c, seen_r = {int(c)}, set()
        queue = deque([int(c)])
        found = None
        while queue and found is None:
            x = queue.popleft()
            for u in rsus_of[x]:
                u = int(u)
                if u in seen_r:
                    continue
                seen_r.add(u)
                if slack[u] > atol:
                    found = f"cluster {c} (rate {level[c]:.6g}) can use spare capacity {slack[u]:.6g} on RSU {u}"
                    break
                for y in users_of[u]:
                    if level[y] > level[c] + atol:
                        found = (f"cluster {c} (rate {level[c]:.6g}) can take capacity on RSU {u} "
                                 f"from richer cluster {y} (rate {level[y]:.6g})")
                        break
                    if y not in seen_c:
                        seen_c.add(y)
                        queue.append(y)
                if found:
                    break
        if found:
            problems.append(found)
    return BottleneckCheck(not problems, tuple(problems))


def v2i_rates(snapshot: Snapshot, d: float, rsu_spacing: float, rho_rsu: float) -> tuple[np.ndarray, np.ndarray]:
    """Rates without relaying for the V2V vehicles of ``snapshot``.

    Each vehicle within ``d`` of an RSU shares it equally with the other
    vehicles in range. Returns ``(rates, rsu_index)`` per V2V vehicle in
    snapshot order; ``rsu_index`` is -1 when out of range.
    """
    W = snapshot.window
    G = int(round(W / rsu_spacing))
    x = snapshot.positions[snapshot.is_v2v]
    g = np.round((x - snapshot.rsu_phase) / rsu_spacing).astype(np.int64)
    dist = np.abs(x - (g * rsu_spacing + snapshot.rsu_phase))
    g = np.mod(g, G)
    covered = dist <= d
    idx = np.where(covered, g, -1)
    counts = np.bincount(g[covered], minlength=G)
    rates = np.zeros(x.size)
    rates[covered] = rho_rsu / counts[g[covered]]
    return rates, idx
