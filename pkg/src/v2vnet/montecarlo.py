"""Replication engine, typical-vehicle estimators and distributional tests.

Every replication draws its own generator from ``SeedSequence(seed,
spawn_key=(rep,))``, so a replication's snapshot depends only on the seed and
its index. Runs that share a seed therefore share snapshots, which is what the
paired comparisons between the two network modes rely on.

Typical-vehicle quantities are averaged per vehicle, which weights each cluster
by its size without any explicit reweighting.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from . import analytic
from .allocation import SharingGraph, max_min_allocate, v2i_rates
from .clustering import attach_rsus, form_clusters
from .model import (
    MultilaneSpec,
    SingleLaneSpec,
    Snapshot,
    _check_window,
    platoon_snapshot,
    sample_coupled_pair,
    sample_multilane,
    sample_single_lane,
)

__all__ = [
    "ClusterSample",
    "CoupledExperiment",
    "DominanceVerdict",
    "Estimate",
    "EstimateReport",
    "KSResult",
    "Network",
    "RsuLawComparison",
    "coupled_experiment",
    "dkw_band",
    "estimate_metrics",
    "icx_dominance_test",
    "ks_exponential_test",
    "paired_estimates",
    "replication_rng",
    "rsu_law_comparison",
    "run_until_ci",
    "sample_cluster_statistics",
    "simulate_tradeoff",
    "st_dominance_test",
]

Z95 = 1.959963984540054


class Network(str, Enum):
    V2V_V2I = "v2v+v2i"
    V2I = "v2i"


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def _sample(spec, window, rng) -> Snapshot:
    if isinstance(spec, MultilaneSpec):
        return sample_multilane(spec, window, rng)
    return sample_single_lane(spec, window, rng)


def _blocker_length(spec) -> float:
    return float(getattr(spec, "blocker_length", 0.0))


# ---------------------------------------------------------------------------
# per-replication statistics


@dataclass
class _RepStats:
    """Sums over one snapshot; everything the estimators need."""

    vehicles: int
    covered: float
    rate: float
    rate_sq: float
    rsus: float
    multihomed: float
    size_v: float
    clusters: int
    cluster_n: float
    cluster_m: float
    cluster_span: float
    rates: np.ndarray


def _stats_from(rates, covered, m_v, n_v, cl_n, cl_m, cl_span) -> _RepStats:
    return _RepStats(
        vehicles=int(rates.size),
        covered=float(covered.sum()),
        rate=float(rates.sum()),
        rate_sq=float((rates**2).sum()),
        rsus=float(m_v.sum()),
        multihomed=float((m_v >= 2).sum()),
        size_v=float(n_v.sum()),
        clusters=int(cl_n.size),
        cluster_n=float(cl_n.sum()),
        cluster_m=float(cl_m.sum()),
        cluster_span=float(cl_span.sum()),
        rates=rates,
    )


def _one_replication(args) -> dict:
    spec, window, seed, rep, networks = args
    rng = replication_rng(seed, rep)
    snap = _sample(spec, window, rng)
    out = {}
    if Network.V2V_V2I in networks:
        cl = attach_rsus(form_clusters(snap, spec.d, _blocker_length(spec)), spec.rsu_spacing, snap.rsu_phase)
        alloc = max_min_allocate(SharingGraph.from_clusters(cl, spec.rho_rsu))
        lab = cl.labels[snap.is_v2v]
        rates = alloc.cluster_rates[lab]
        m_v = cl.m[lab]
        out[Network.V2V_V2I] = _stats_from(rates, m_v >= 1, m_v, cl.n[lab], cl.n, cl.m, cl.span)
    if Network.V2I in networks:
        rates, idx = v2i_rates(snap, spec.d, spec.rsu_spacing, spec.rho_rsu)
        m_v = (idx >= 0).astype(np.int64)
        ones = np.ones(rates.size)
        out[Network.V2I] = _stats_from(rates, m_v >= 1, m_v, ones, ones, m_v, np.full(rates.size, 2 * spec.d))
    return out


def _run(spec, window, seed, reps, networks, workers) -> list[dict]:
    jobs = [(spec, window, seed, r, networks) for r in reps]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one_replication, jobs))
    return [_one_replication(j) for j in jobs]


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class Estimate:
    """Point estimate with a 95% normal-approximation half-width."""

    value: float
    half_width: float

    @property
    def interval(self) -> tuple[float, float]:
        return self.value - self.half_width, self.value + self.half_width

    def brackets(self, x: float) -> bool:
        lo, hi = self.interval
        return lo <= x <= hi

    @property
    def relative_half_width(self) -> float:
        return self.half_width / abs(self.value) if self.value else math.inf


def _jackknife(totals: dict[str, np.ndarray], fn) -> Estimate:
    """Estimate ``fn(pooled sums)`` with a delete-one-replication jackknife CI."""
    full = {k: v.sum() for k, v in totals.items()}
    with np.errstate(invalid="ignore", divide="ignore"):
        value = fn(full)
        B = next(iter(totals.values())).size
        loo = np.array([fn({k: full[k] - v[i] for k, v in totals.items()}) for i in range(B)])
    if B < 2 or not np.all(np.isfinite(loo)):
        return Estimate(float(value), math.nan)
    var = (B - 1) / B * ((loo - loo.mean()) ** 2).sum()
    return Estimate(float(value), float(Z95 * math.sqrt(var)))


@dataclass
class EstimateReport:
    """Typical-vehicle estimates for one network mode.

    ``rate_samples`` holds every V2V-capable vehicle's rate, replication by
    replication, and ``replication_mean_rate`` the per-replication means.
    Neither is written to JSON.
    """

    network: str
    replications: int
    seed: int
    window: float
    spec: dict
    n_vehicles: int
    n_clusters: int
    empty: bool
    coverage: Estimate
    mean_rate: Estimate
    rate_variance: Estimate
    dispersion: Estimate
    mean_rsus_per_vehicle: Estimate
    prob_multihomed: Estimate
    mean_cluster_size: Estimate
    mean_cluster_size_vehicle: Estimate
    mean_rsus_per_cluster: Estimate
    mean_span: Estimate
    empirical_rate_cdf: np.ndarray
    converged: bool | None = None
    rate_samples: np.ndarray = field(default=None, repr=False)
    replication_mean_rate: np.ndarray = field(default=None, repr=False)

    def metric(self, name: str) -> Estimate:
        est = getattr(self, name, None)
        if not isinstance(est, Estimate):
            raise KeyError(f"unknown metric {name!r}")
        return est

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if k in ("rate_samples", "replication_mean_rate"):
                continue
            if k == "empirical_rate_cdf":
                v = [[float(r), float(f)] for r, f in self.empirical_rate_cdf]
            out[k] = v
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), allow_nan=True, **kw)

    def write_cdf_csv(self, path) -> None:
        from .cli import emit_csv

        emit_csv([{"r": float(r), "F": float(f)} for r, f in self.empirical_rate_cdf], path, columns=["r", "F"])


def _ratio(num, den):
    return lambda t: t[num] / t[den]


def _report(spec, window, seed, network, reps: list[_RepStats], cdf_points: int) -> EstimateReport:
    keys = [k for k in _RepStats.__dataclass_fields__ if k != "rates"]
    totals = {k: np.array([getattr(r, k) for r in reps], dtype=float) for k in keys}
    V = int(totals["vehicles"].sum())
    rates = np.concatenate([r.rates for r in reps]) if reps else np.zeros(0)

    def var(t):
        mu = t["rate"] / t["vehicles"]
        return t["rate_sq"] / t["vehicles"] - mu**2

    def disp(t):
        mu = t["rate"] / t["vehicles"]
        return math.sqrt(max(var(t), 0.0)) / mu if mu > 0 else math.nan

    nan = Estimate(math.nan, math.nan)
    if V == 0:
        zero = Estimate(0.0, 0.0)
        est = dict(coverage=zero, mean_rate=nan, rate_variance=nan, dispersion=nan,
                   mean_rsus_per_vehicle=nan, prob_multihomed=nan, mean_cluster_size=nan,
                   mean_cluster_size_vehicle=nan, mean_rsus_per_cluster=nan, mean_span=nan)
        cdf = np.zeros((0, 2))
    else:
        est = dict(
            coverage=_jackknife(totals, _ratio("covered", "vehicles")),
            mean_rate=_jackknife(totals, _ratio("rate", "vehicles")),
            rate_variance=_jackknife(totals, var),
            dispersion=_jackknife(totals, disp) if rates.sum() > 0 else nan,
            mean_rsus_per_vehicle=_jackknife(totals, _ratio("rsus", "vehicles")),
            prob_multihomed=_jackknife(totals, _ratio("multihomed", "vehicles")),
            mean_cluster_size=_jackknife(totals, _ratio("cluster_n", "clusters")),
            mean_cluster_size_vehicle=_jackknife(totals, _ratio("size_v", "vehicles")),
            mean_rsus_per_cluster=_jackknife(totals, _ratio("cluster_m", "clusters")),
            mean_span=_jackknife(totals, _ratio("cluster_span", "clusters")),
        )
        grid = np.linspace(0.0, max(spec.rho_rsu, rates.max()), cdf_points)
        srt = np.sort(rates)
        cdf = np.column_stack([grid, np.searchsorted(srt, grid, side="right") / srt.size])
    with np.errstate(invalid="ignore", divide="ignore"):
        per_rep = totals["rate"] / totals["vehicles"]
    return EstimateReport(
        network=Network(network).value,
        replications=len(reps),
        seed=int(seed),
        window=float(window),
        spec=spec.to_dict(),
        n_vehicles=V,
        n_clusters=int(totals["clusters"].sum()),
        empty=V == 0,
        empirical_rate_cdf=cdf,
        rate_samples=rates,
        replication_mean_rate=per_rep,
        **est,
    )


def paired_estimates(
    spec: SingleLaneSpec | MultilaneSpec,
    window: float | None = None,
    replications: int = 10,
    seed: int = 0,
    networks=(Network.V2V_V2I, Network.V2I),
    cdf_points: int = 201,
    workers: int = 1,
) -> dict[str, EstimateReport]:
    """Estimate several network modes on the very same snapshots."""
    if replications < 2:
        raise ValueError("need at least 2 replications for a confidence interval")
    window = _check_window(spec, window)
    networks = tuple(Network(n) for n in networks)
    runs = _run(spec, window, seed, range(replications), networks, workers)
    return {n.value: _report(spec, window, seed, n, [r[n] for r in runs], cdf_points) for n in networks}


def estimate_metrics(
    spec: SingleLaneSpec | MultilaneSpec,
    window: float | None = None,
    replications: int = 10,
    seed: int = 0,
    network: Network | str = Network.V2V_V2I,
    cdf_points: int = 201,
    workers: int = 1,
) -> EstimateReport:
    """Typical-vehicle coverage, rate and multihoming estimates with 95% CIs.

    A snapshot with no V2V-capable vehicle contributes nothing; if no
    replication has any, the report comes back with ``empty=True``, coverage
    0 and every other metric NaN.
    """
    net = Network(network)
    return paired_estimates(spec, window, replications, seed, (net,), cdf_points, workers)[net.value]


def run_until_ci(
    spec,
    target_relative_halfwidth: float,
    metric: str = "coverage",
    max_replications: int = 512,
    seed: int = 0,
    network: Network | str = Network.V2V_V2I,
    window: float | None = None,
    min_replications: int = 4,
    workers: int = 1,
) -> EstimateReport:
    """Double the replication count until ``metric`` is estimated precisely enough.

    Earlier replications are reused, so the final report equals
    ``estimate_metrics`` at the final count. ``converged`` records whether the
    target was met before the cap.
    """
    if not 0 < target_relative_halfwidth < 1:
        raise ValueError("target relative half-width must lie in (0, 1)")
    if max_replications < 2:
        raise ValueError("max_replications must be >= 2")
    net = Network(network)
    window = _check_window(spec, window)
    reps: list[_RepStats] = []
    n = max(2, min(min_replications, max_replications))
    while True:
        runs = _run(spec, window, seed, range(len(reps), n), (net,), workers)
        reps.extend(r[net] for r in runs)
        report = _report(spec, window, seed, net, reps, 201)
        est = report.metric(metric)
        ok = np.isfinite(est.half_width) and est.half_width <= target_relative_halfwidth * abs(est.value)
        if ok or n >= max_replications:
            report.converged = bool(ok)
            return report
        n = min(2 * n, max_replications)


# ---------------------------------------------------------------------------
# cluster-level samples


@dataclass(frozen=True)
class ClusterSample:
    """Per-cluster statistics pooled over replications."""

    n: np.ndarray
    span: np.ndarray
    m: np.ndarray
    replication: np.ndarray

    def __len__(self) -> int:
        return self.n.size

    def size_pmf(self, n_max: int) -> np.ndarray:
        """Empirical P(N = 1..n_max); the last entry also holds everything larger."""
        counts = np.bincount(np.minimum(self.n, n_max), minlength=n_max + 1)[1:]
        return counts / self.n.size


def sample_cluster_statistics(spec, window=None, replications: int = 10, seed: int = 0, min_clusters: int = 0) -> ClusterSample:
    """Cluster sizes, spans and RSU counts from independent snapshots.

    Runs ``replications`` snapshots, continuing past that until at least
    ``min_clusters`` clusters have been collected.
    """
    window = _check_window(spec, window)
    parts = []
    total = 0
    rep = 0
    while rep < replications or total < min_clusters:
        snap = _sample(spec, window, replication_rng(seed, rep))
        cl = attach_rsus(form_clusters(snap, spec.d, _blocker_length(spec)), spec.rsu_spacing, snap.rsu_phase)
        parts.append((cl.n, cl.span, cl.m, np.full(len(cl), rep)))
        total += len(cl)
        rep += 1
        if rep > 10 * max(replications, 1) + 10_000 and total == 0:
            raise RuntimeError("no clusters produced; the highway has no V2V-capable vehicles")
    cols = [np.concatenate(c) for c in zip(*parts)]
    return ClusterSample(*cols)


@dataclass(frozen=True)
class CoupledExperiment:
    """Outcome of the coupled multilane / single-lane construction.

    ``refines[i]`` says whether in realization ``i`` every single-lane cluster
    sits inside one multilane cluster. Per-vehicle samples are pooled.
    """

    refines: np.ndarray
    n_multi: np.ndarray
    n_single: np.ndarray
    span_multi: np.ndarray
    span_single: np.ndarray
    m_multi: np.ndarray
    m_single: np.ndarray


def coupled_experiment(spec: MultilaneSpec, window=None, realizations: int = 1000, seed: int = 0) -> CoupledExperiment:
    window = _check_window(spec, window)
    refines = np.zeros(realizations, dtype=bool)
    cols = {k: [] for k in ("n_multi", "n_single", "span_multi", "span_single", "m_multi", "m_single")}
    for i in range(realizations):
        multi, single = sample_coupled_pair(spec, window, replication_rng(seed, i))
        cm = attach_rsus(form_clusters(multi, spec.d, spec.blocker_length), spec.rsu_spacing, multi.rsu_phase)
        cs = attach_rsus(form_clusters(single, spec.d), spec.rsu_spacing, single.rsu_phase)
        # line the V2V vehicles of both snapshots up by position
        im = np.flatnonzero(multi.is_v2v)
        im = im[np.argsort(multi.positions[im], kind="stable")]
        is_ = np.flatnonzero(single.is_v2v)
        is_ = is_[np.argsort(single.positions[is_], kind="stable")]
        lm, ls = cm.labels[im], cs.labels[is_]
        pairs = np.unique(np.column_stack([ls, lm]), axis=0)
        refines[i] = pairs.shape[0] == np.unique(ls).size
        cols["n_multi"].append(cm.n[lm])
        cols["n_single"].append(cs.n[ls])
        cols["span_multi"].append(cm.span[lm])
        cols["span_single"].append(cs.span[ls])
        cols["m_multi"].append(cm.m[lm])
        cols["m_single"].append(cs.m[ls])
    return CoupledExperiment(refines, **{k: np.concatenate(v) if v else np.zeros(0) for k, v in cols.items()})


# ---------------------------------------------------------------------------
# distributional tests


@dataclass(frozen=True)
class DominanceVerdict:
    relation: str
    holds: bool
    max_violation: float
    tolerance: float

    def __bool__(self) -> bool:
        return self.holds


def dkw_band(n: int, alpha: float = 0.05) -> float:
    """Uniform CDF band half-width sqrt(ln(2/alpha) / (2n))."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def _prep(a, b):
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both sample sets must be nonempty")
    return a, b


def st_dominance_test(samples_a, samples_b, tolerance: float | None = None, alpha: float = 0.05) -> DominanceVerdict:
    """Test ``b <=st a``: P(A > x) >= P(B > x) - tolerance at every sample point.

    The default tolerance adds the DKW bands of both sample sets.
    """
    a, b = _prep(samples_a, samples_b)
    tol = dkw_band(a.size, alpha) + dkw_band(b.size, alpha) if tolerance is None else float(tolerance)
    x = np.union1d(a, b)
    ccdf_a = 1.0 - np.searchsorted(a, x, side="right") / a.size
    ccdf_b = 1.0 - np.searchsorted(b, x, side="right") / b.size
    gap = float(max((ccdf_b - ccdf_a).max(), 0.0))
    return DominanceVerdict("st", gap <= tol, gap, tol)


def _stop_loss(srt: np.ndarray, t: np.ndarray) -> np.ndarray:
    """E[(X - t)+] for the empirical law of sorted samples ``srt``."""
    suffix = np.r_[np.cumsum(srt[::-1])[::-1], 0.0]
    k = np.searchsorted(srt, t, side="right")
    return (suffix[k] - (srt.size - k) * t) / srt.size


def icx_dominance_test(samples_a, samples_b, tolerance: float | None = None, alpha: float = 0.05) -> DominanceVerdict:
    """Test ``a <=icx b``: E[(A - t)+] <= E[(B - t)+] + slack at every sample point.

    ``tolerance`` is a CDF band (DKW at ``alpha`` for both sets by default).
    Integrating a CDF error of ``tolerance`` over ``[t, x_max]`` gives the
    stop-loss slack ``tolerance * (x_max - t)``.
    """
    a, b = _prep(samples_a, samples_b)
    tol = dkw_band(a.size, alpha) + dkw_band(b.size, alpha) if tolerance is None else float(tolerance)
    x = np.union1d(a, b)
    diff = _stop_loss(a, x) - _stop_loss(b, x)
    slack = tol * (x[-1] - x) + 1e-12 * max(1.0, abs(x[-1]))
    worst = float(max(diff.max(), 0.0))
    return DominanceVerdict("icx", bool(np.all(diff <= slack)), worst, tol)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    critical_value: float
    n_gaps: int

    @property
    def passes(self) -> bool:
        return self.statistic < self.critical_value


def ks_exponential_test(positions, rate: float, window: float | None = None, level: float = 0.05) -> KSResult:
    """Kolmogorov-Smirnov test of inter-arrival gaps against Exponential(rate).

    With ``window`` the positions are on a torus and the wrap-around gap is
    included.
    """
    x = np.sort(np.asarray(positions, dtype=float).ravel())
    gaps = np.diff(x)
    if window is not None and x.size:
        gaps = np.r_[gaps, x[0] + window - x[-1]]
    if gaps.size < 100:
        raise ValueError(f"need at least 100 gaps, got {gaps.size}")
    if rate <= 0:
        raise ValueError("rate must be > 0")
    res = stats.kstest(gaps, "expon", args=(0.0, 1.0 / rate))
    crit = float(stats.kstwo.ppf(1 - level, gaps.size))
    return KSResult(float(res.statistic), float(res.pvalue), crit, int(gaps.size))


# ---------------------------------------------------------------------------
# deterministic placement and the RSU-count law


TRADEOFF_WINDOW = 2_520_000.0  # lcm(1..10) km: whole number of platoons for n <= 10 at integer veh/km


def simulate_tradeoff(
    n: int, lambda_v: float, d: float, rsu_spacing: float, window: float = TRADEOFF_WINDOW, phases: int = 4096
) -> tuple[float, float]:
    """Coverage and RSU utilization of evenly spaced platoons of ``n`` vehicles.

    Averages over ``phases`` evenly spread RSU grid offsets. Coverage is the
    share of vehicles whose platoon reaches an RSU, utilization the share of
    RSUs inside some platoon footprint.
    """
    snap = platoon_snapshot(n, lambda_v, d, window)
    cl = form_clusters(snap, d)
    G = int(round(window / rsu_spacing))
    if abs(G * rsu_spacing - window) > 1e-6 * rsu_spacing:
        raise ValueError("window must hold a whole number of RSU cells")
    offsets = (np.arange(phases) + 0.5) / phases * rsu_spacing
    a = cl.first - d
    b = a + cl.span
    lo = np.ceil((a[None, :] - offsets[:, None]) / rsu_spacing)
    hi = np.floor((b[None, :] - offsets[:, None]) / rsu_spacing)
    reach = hi >= lo
    coverage = float((reach * cl.n[None, :]).sum() / (phases * cl.n.sum()))

    # share of grid points inside the union of footprints, per phase
    starts = np.mod(a, window)
    order = np.argsort(starts)
    starts, spans = starts[order], cl.span[order]
    grid = (np.arange(G)[None, :] * rsu_spacing + offsets[:, None]).ravel()
    k = np.searchsorted(starts, grid, side="right") - 1
    prev_start = np.where(k >= 0, starts[k], starts[-1] - window)
    prev_span = spans[k]
    inside = grid - prev_start <= prev_span
    # a footprint can wrap past the window end into the first cells
    inside |= (grid + window - starts[-1]) <= spans[-1]
    utilization = float(inside.mean())
    return coverage, utilization


@dataclass(frozen=True)
class RsuLawComparison:
    """P(M >= m | L = l) under the tabulated law, the grid-derived law and a phase oracle."""

    spans: np.ndarray
    m: np.ndarray
    tabulated: np.ndarray
    derived: np.ndarray
    oracle: np.ndarray
    phases: int

    @property
    def max_error_derived(self) -> float:
        return float(np.abs(self.derived - self.oracle).max())

    @property
    def max_error_tabulated(self) -> float:
        return float(np.abs(self.tabulated - self.oracle).max())

    def rows(self) -> list[dict]:
        out = []
        for i, l in enumerate(self.spans):
            for j, m in enumerate(self.m):
                out.append({
                    "span": float(l), "m": int(m),
                    "tabulated": float(self.tabulated[i, j]),
                    "grid_derived": float(self.derived[i, j]),
                    "phase_oracle": float(self.oracle[i, j]),
                })
        return out

    def summary(self) -> dict:
        return {
            "phases": self.phases,
            "max_abs_error_grid_derived": self.max_error_derived,
            "max_abs_error_tabulated": self.max_error_tabulated,
            "spans": [float(self.spans.min()), float(self.spans.max()), int(self.spans.size)],
            "m": [int(x) for x in self.m],
        }


def rsu_law_comparison(rsu_spacing: float, spans=None, m_values=range(1, 7), phases: int = 100_000, seed: int = 0) -> RsuLawComparison:
    """Check the RSU-count law against an interval dropped at a random grid offset.

    The oracle places ``[0, l]`` against a grid shifted by stratified uniform
    offsets (one jittered draw per stratum) and counts grid points inside.
    """
    s = float(rsu_spacing)
    spans = np.linspace(0.0, 5.0 * s, 501) if spans is None else np.asarray(spans, dtype=float)
    m = np.asarray(list(m_values), dtype=np.int64)
    rng = np.random.default_rng(seed)
    u = (np.arange(phases) + rng.random(phases)) / phases * s
    tabulated = np.empty((spans.size, m.size))
    derived = np.empty_like(tabulated)
    oracle = np.empty_like(tabulated)
    for i, l in enumerate(spans):
        count = np.floor((l - u) / s) + 1  # grid points u, u + s, ... inside [0, l]
        count = np.where(u <= l, count, 0)
        for j, mm in enumerate(m):
            oracle[i, j] = np.mean(count >= mm)
        tabulated[i] = analytic.rsu_ccdf_given_span(m, l, s, analytic.RsuLawMode.TABULATED)
        derived[i] = analytic.rsu_ccdf_given_span(m, l, s, analytic.RsuLawMode.GRID_DERIVED)
    return RsuLawComparison(spans, m, tabulated, derived, oracle, phases)
