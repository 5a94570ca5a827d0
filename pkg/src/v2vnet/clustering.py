"""V2V relay clusters under unit-disk connectivity with line-of-sight blocking."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .model import Snapshot, Vehicle, blocking_lanes

__all__ = [
    "Cluster",
    "ClusterSet",
    "attach_rsus",
    "form_clusters",
    "form_clusters_multilane",
    "form_clusters_single",
    "is_link_blocked",
]


@dataclass(frozen=True)
class Cluster:
    member_indices: tuple
    n: int
    first: float
    last: float
    span: float
    footprint: tuple
    rsus: tuple = ()

    @property
    def m(self) -> int:
        return len(self.rsus)


@dataclass(frozen=True, eq=False)
class ClusterSet(Sequence):
    """All clusters of one snapshot, stored column-wise.

    ``labels[i]`` is the cluster of snapshot vehicle ``i`` (-1 for blockers).
    Clusters are numbered in order of their first vehicle. ``rsu_first`` and
    ``m`` stay ``None`` until :func:`attach_rsus` fills them; attached RSUs
    are the grid indices ``rsu_first, ..., rsu_first + m - 1`` modulo
    ``n_rsus``.
    """

    labels: np.ndarray
    n: np.ndarray
    first: np.ndarray
    last: np.ndarray
    span: np.ndarray
    window: float
    d: float
    rsu_first: np.ndarray | None = None
    m: np.ndarray | None = None
    n_rsus: int = 0

    def __len__(self) -> int:
        return self.n.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        rsus = ()
        if self.m is not None:
            rsus = tuple(int(g) for g in (self.rsu_first[i] + np.arange(self.m[i])) % self.n_rsus)
        start = (self.first[i] - self.d) % self.window
        return Cluster(
            member_indices=tuple(int(j) for j in self.members(i)),
            n=int(self.n[i]),
            first=float(self.first[i]),
            last=float(self.last[i]),
            span=float(self.span[i]),
            footprint=(float(start), float((start + self.span[i]) % self.window)),
            rsus=rsus,
        )

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == i)

    @property
    def attached(self) -> bool:
        return self.m is not None

    def rsu_sets(self) -> list[np.ndarray]:
        if self.m is None:
            raise ValueError("attach_rsus has not been run on these clusters")
        return [(f + np.arange(k)) % self.n_rsus for f, k in zip(self.rsu_first, self.m)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cluster_id", "n", "first", "last", "span", "m"])
            m = self.m if self.m is not None else np.full(len(self), -1)
            for i in range(len(self)):
                writer.writerow(
                    [i, int(self.n[i]), repr(float(self.first[i])), repr(float(self.last[i])),
                     repr(float(self.span[i])), int(m[i])]
                )


def _build(snapshot: Snapshot, v2v_idx: np.ndarray, comp: np.ndarray, d: float) -> ClusterSet:
    """Summarize components ``comp`` (one label per V2V vehicle in ``v2v_idx``)."""
    W = snapshot.window
    labels = np.full(len(snapshot), -1, dtype=np.int64)
    if v2v_idx.size == 0:
        empty = np.zeros(0)
        return ClusterSet(labels, np.zeros(0, np.int64), empty, empty, empty, W, d)

    p = snapshot.positions[v2v_idx]
    order = np.lexsort((p, comp))
    ps, cs = p[order], comp[order]
    is_start = np.r_[True, cs[1:] != cs[:-1]]
    starts = np.flatnonzero(is_start)
    group = np.cumsum(is_start) - 1
    sizes = np.diff(np.r_[starts, ps.size])

    # gap from each member to the next one in its cluster, cyclically
    nxt = np.arange(ps.size) + 1
    ends = np.r_[starts[1:], ps.size] - 1
    nxt[ends] = starts
    gap = ps[nxt] - ps
    gap[ends] += W

    # the largest cyclic gap separates the last member from the first
    by_gap = np.lexsort((-gap, group))
    j_star = by_gap[np.r_[True, group[by_gap][1:] != group[by_gap][:-1]]]
    last = ps[j_star]
    first = ps[nxt[j_star]]
    extent = W - gap[j_star]
    span = np.minimum(extent + 2 * d, W)

    # renumber clusters by first position for a stable ordering
    rank = np.empty(sizes.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(sizes.size)
    labels[v2v_idx[order]] = rank[group]
    inv = np.argsort(rank)
    return ClusterSet(labels, sizes[inv], first[inv], last[inv], span[inv], W, d)


def form_clusters_single(snapshot: Snapshot, d: float) -> ClusterSet:
    """Clusters on a single lane: a link needs the very next vehicle to be V2V and within ``d``."""
    if snapshot.eta != 1:
        raise ValueError("form_clusters_single needs a single-lane snapshot; use form_clusters_multilane")
    v2v = snapshot.is_v2v
    n = v2v.size
    v2v_idx = np.flatnonzero(v2v)
    if v2v_idx.size == 0:
        return _build(snapshot, v2v_idx, np.zeros(0, np.int64), d)
    pos = snapshot.positions
    gap = np.diff(np.r_[pos, pos[0] + snapshot.window])
    link = v2v & np.roll(v2v, -1) & (gap <= d)
    if n == 1:
        link[:] = False
    start = v2v & ~np.roll(link, 1)
    if not start.any():
        comp = np.zeros(v2v_idx.size, np.int64)
    else:
        comp = np.cumsum(start) - 1
        comp[: np.argmax(start)] = comp[-1]
        comp = comp[v2v_idx]
    return _build(snapshot, v2v_idx, comp, d)


def is_link_blocked(
    tx: Vehicle,
    rx: Vehicle,
    blockers: Sequence[Vehicle],
    blocker_length: float = 0.0,
    window: float | None = None,
) -> bool:
    """True iff a blocker in a qualifying lane overlaps the gap between ``tx`` and ``rx``.

    Qualifying lanes are the shared lane when tx and rx are in the same lane,
    otherwise the lanes strictly between them. A blocker at ``x`` occupies
    ``(x - blocker_length/2, x + blocker_length/2)``. With ``window`` given,
    positions are on a torus and the gap is the shorter arc.
    """
    a, b = float(tx.position), float(rx.position)
    if a > b:
        a, b = b, a
    if window is not None and b - a > window / 2:
        a, b = b, a + window
    if b <= a:
        return False
    lanes = set(blocking_lanes(tx.lane, rx.lane, max(tx.lane, rx.lane)))
    half = blocker_length / 2
    shifts = (0.0,) if window is None else (-window, 0.0, window)
    for blk in blockers:
        if blk.lane not in lanes or blk.kind == 0:
            continue
        for s in shifts:
            x = blk.position + s
            if x - half < b and x + half > a:
                return True
    return False


def form_clusters_multilane(snapshot: Snapshot, d: float, blocker_length: float = 0.0) -> ClusterSet:
    """Connected components of the V2V graph with lane-aware LoS blocking.

    Every V2V pair within longitudinal distance ``d`` is examined, not only
    neighbours in position order, since cross-lane links can jump over
    same-lane blockers.
    """
    W = snapshot.window
    v2v_idx = np.flatnonzero(snapshot.is_v2v)
    V = v2v_idx.size
    if V == 0:
        return _build(snapshot, v2v_idx, np.zeros(0, np.int64), d)
    p = snapshot.positions[v2v_idx]
    k = snapshot.lanes[v2v_idx]

    # candidate pairs (i, j) with j ahead of i by at most d, at most one lap
    p_ext = np.r_[p, p + W]
    hi = np.minimum(np.searchsorted(p_ext, p + d, side="right"), np.arange(V) + V)
    counts = np.maximum(hi - np.arange(V) - 1, 0)
    ii = np.repeat(np.arange(V), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    jj_ext = ii + 1 + offs
    a = p[ii]
    b = p_ext[jj_ext]
    jj = jj_ext % V
    ki, kj = k[ii], k[jj]

    blocked = np.zeros(ii.size, dtype=bool)
    half = blocker_length / 2
    bx_all = snapshot.positions[~snapshot.is_v2v]
    bk_all = snapshot.lanes[~snapshot.is_v2v]
    lo_lane, hi_lane = np.minimum(ki, kj), np.maximum(ki, kj)
    for lane in range(1, snapshot.eta + 1):
        x = bx_all[bk_all == lane]
        if x.size == 0:
            continue
        relevant = ((ki == kj) & (ki == lane)) | ((lo_lane < lane) & (lane < hi_lane))
        relevant &= b > a
        if not relevant.any():
            continue
        x = np.sort(np.r_[x - W, x, x + W])
        ra, rb = a[relevant], b[relevant]
        inside = np.searchsorted(x, rb + half, side="left") - np.searchsorted(x, ra - half, side="right")
        blocked[np.flatnonzero(relevant)[inside > 0]] = True

    ok = ~blocked
    graph = sparse.coo_matrix((np.ones(ok.sum()), (ii[ok], jj[ok])), shape=(V, V))
    _, comp = connected_components(graph, directed=False)
    return _build(snapshot, v2v_idx, comp.astype(np.int64), d)


def form_clusters(snapshot: Snapshot, d: float, blocker_length: float = 0.0) -> ClusterSet:
    if snapshot.eta == 1 and blocker_length == 0:
        return form_clusters_single(snapshot, d)
    return form_clusters_multilane(snapshot, d, blocker_length)


def attach_rsus(clusters: ClusterSet, rsu_spacing: float, rsu_phase: float, window: float | None = None) -> ClusterSet:
    """Attach every RSU grid point that falls in a cluster's footprint [first - d, last + d]."""
    W = clusters.window if window is None else window
    G = int(round(W / rsu_spacing))
    a = clusters.first - clusters.d
    b = a + clusters.span
    lo = np.ceil((a - rsu_phase) / rsu_spacing).astype(np.int64)
    hi = np.floor((b - rsu_phase) / rsu_spacing).astype(np.int64)
    m = np.clip(hi - lo + 1, 0, G)
    m[clusters.span >= W] = G
    return replace(clusters, rsu_first=np.mod(lo, G), m=m, n_rsus=G)
