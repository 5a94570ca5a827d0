"""Closed-form and numerically evaluated single-lane performance formulas.

Cluster spans are handled on a lattice: the within-cluster gap (an exponential
conditioned to be at most ``d``) is discretized with hat-function masses, which
preserve total mass exactly and give O(step**2) errors under convolution. Sums
over cluster sizes are truncated once the remaining size-biased mass drops
below the policy's ``epsilon``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal
from scipy.stats import poisson

from .model import MultilaneSpec, SingleLaneSpec, effective_blocker_intensity

__all__ = [
    "DensityGrid",
    "NumericalError",
    "PmfTruncationPolicy",
    "ReducedHighway",
    "RsuLawMode",
    "best_mixing_sizes",
    "cluster_size_pmf",
    "coverage_v2i",
    "coverage_v2v",
    "expected_rsus_per_cluster",
    "mean_cluster_size",
    "mean_shared_rate",
    "mean_span",
    "multihoming_lower_bound",
    "phi",
    "rate_cdf_v2i",
    "rate_cdf_v2v_bound",
    "reduce_multilane",
    "rsu_ccdf_given_n",
    "rsu_ccdf_given_span",
    "size_biased_tail",
    "span_density_given_n",
    "tradeoff_mixture",
    "tradeoff_point",
    "truncated_gap_mean",
]


class NumericalError(ArithmeticError):
    pass


class RsuLawMode(str, Enum):
    """How P(M >= m | L = l) is evaluated.

    GRID_DERIVED integrates over a uniform RSU grid phase.
    TABULATED applies a closed piecewise table in l / s; it disagrees with the grid
    phase law and is kept only for the comparison report.
    """

    GRID_DERIVED = "grid_derived"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class PmfTruncationPolicy:
    epsilon: float = 1e-9
    n_max: int = 100_000

    def __post_init__(self):
        if not 0 < self.epsilon <= 1e-6:
            raise ValueError("epsilon must lie in (0, 1e-6]")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


DEFAULT_POLICY = PmfTruncationPolicy()
DEFAULT_STEPS_PER_RANGE = 400


@dataclass(frozen=True)
class DensityGrid:
    """Density samples on ``l_min + step * k``.

    A point mass is stored as a single value 1.0 with ``step == 0``.
    """

    l_min: float
    step: float
    values: np.ndarray

    @property
    def is_point_mass(self) -> bool:
        return self.step == 0

    @property
    def nodes(self) -> np.ndarray:
        return self.l_min + self.step * np.arange(self.values.size)

    @property
    def support(self) -> tuple[float, float]:
        return self.l_min, self.l_min + self.step * (self.values.size - 1)

    def _weights(self) -> np.ndarray:
        if self.is_point_mass:
            return np.ones(1)
        w = np.full(self.values.size, self.step)
        w[0] = w[-1] = self.step / 2
        return w

    def masses(self) -> np.ndarray:
        return self.values * self._weights()

    def integral(self) -> float:
        return float(self.masses().sum())

    def expect(self, fn) -> float:
        """Trapezoid integral of ``fn(l) * density(l)``."""
        return float(np.dot(self.masses(), fn(self.nodes)))

    def mean(self) -> float:
        return self.expect(lambda x: x)


def phi(gamma: float, lambda_v: float, d: float) -> float:
    """Probability that a V2V vehicle has no linked V2V successor: 1 - gamma (1 - e^{-lambda d})."""
    return 1.0 + gamma * math.expm1(-lambda_v * d)


def cluster_size_pmf(phi_, n, size_biased: bool = False):
    """Geometric cluster-size pmf, or its size-biased version n phi^2 (1 - phi)^(n-1)."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise ValueError("cluster size n must be >= 1")
    q = 1.0 - phi_
    base = phi_ * np.power(q, n_arr - 1.0)
    out = n_arr * phi_ * base if size_biased else base
    return float(out) if np.ndim(out) == 0 else out


def size_biased_tail(phi_: float, k: int) -> float:
    """Sum over n > k of the size-biased pmf, (1 - phi)^k (1 + k phi)."""
    return (1.0 - phi_) ** k * (1.0 + k * phi_)


def mean_cluster_size(phi_: float, size_biased: bool = False) -> float:
    return (2.0 - phi_) / phi_ if size_biased else 1.0 / phi_


def truncated_gap_mean(lambda_v: float, d: float) -> float:
    """Mean of an exponential(lambda_v) gap conditioned to be at most d."""
    x = lambda_v * d
    if x < 1e-8:
        return d / 2
    return 1.0 / lambda_v - d * math.exp(-x) / -math.expm1(-x)


def mean_span(spec: SingleLaneSpec, include_footprint: bool = True) -> float:
    """Mean span of a typical cluster.

    With ``include_footprint`` the 2d footprint extension is added; without
    it this is the first-to-last distance, which at gamma = 1 equals
    (e^{lambda d} - lambda d - 1) / lambda.
    """
    ph = phi(spec.gamma, spec.lambda_v, spec.d)
    extent = (1.0 / ph - 1.0) * truncated_gap_mean(spec.lambda_v, spec.d)
    return extent + 2 * spec.d if include_footprint else extent


def expected_rsus_per_cluster(spec: SingleLaneSpec) -> float:
    """E[M] for a typical cluster under a uniform grid phase: E[L] / rsu_spacing."""
    return mean_span(spec) / spec.rsu_spacing


def _gap_masses(lambda_v: float, d: float, step: float) -> tuple[np.ndarray, float]:
    """Hat-function masses of the truncated exponential gap on nodes 0, h, ..., d."""
    K = max(1, int(round(d / step)))
    h = d / K
    x = lambda_v * h
    if x < 1e-3:
        left = h * (0.5 - x / 6 + x * x / 24)
        right = h * (0.5 + x / 6 + x * x / 24)
        mid = h * (1 + x * x / 12)
    else:
        left = h * (x - 1 + math.exp(-x)) / (x * x)
        right = h * (math.expm1(x) - x) / (x * x)
        mid = h * (math.sinh(x / 2) / (x / 2)) ** 2
    dens = np.exp(-lambda_v * h * np.arange(K + 1))
    w = np.full(K + 1, mid)
    w[0], w[-1] = left, right
    masses = dens * w
    total = masses.sum()
    if abs(total * (lambda_v / -math.expm1(-lambda_v * d) if lambda_v * d > 1e-12 else 1 / d) - 1) > 1e-6:
        raise NumericalError("gap discretization lost mass; use a finer step")
    return masses / total, h


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size * b.size < 4_000_000:
        return np.convolve(a, b)
    out = signal.oaconvolve(a, b)
    np.clip(out, 0.0, None, out=out)
    return out


def _default_step(d: float) -> float:
    return d / DEFAULT_STEPS_PER_RANGE


def span_density_given_n(n: int, lambda_v: float, d: float, step: float | None = None) -> DensityGrid:
    """Density of L | N = n, i.e. 2d plus n - 1 truncated-exponential gaps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return DensityGrid(2 * d, 0.0, np.ones(1))
    gap, h = _gap_masses(lambda_v, d, step or _default_step(d))
    masses = gap
    for _ in range(n - 2):
        masses = _convolve(masses, gap)
    values = masses / h
    values[0] *= 2
    values[-1] *= 2
    grid = DensityGrid(2 * d, h, values)
    if abs(grid.integral() - 1) > 1e-6:
        raise NumericalError("span density does not normalize; the grid step is too coarse")
    return grid


def rsu_ccdf_given_span(m, l, rsu_spacing: float, mode: RsuLawMode = RsuLawMode.GRID_DERIVED):
    """P(M >= m | L = l) for a cluster footprint of length l."""
    mode = RsuLawMode(mode)
    m_arr = np.asarray(m, dtype=float)
    l_arr = np.asarray(l, dtype=float)
    if mode is RsuLawMode.GRID_DERIVED:
        out = np.clip(l_arr / rsu_spacing - m_arr + 1.0, 0.0, 1.0)
    else:
        out = 1.0 - _tabulated_cdf(m_arr - 1.0, l_arr, rsu_spacing)
    out = np.where(m_arr <= 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def _tabulated_cdf(m, l, s):
    """Piecewise closed-form table for F_{M|L}(m | l)."""
    m, l = np.broadcast_arrays(np.asarray(m, float), np.asarray(l, float))
    out = np.zeros(m.shape)
    full = m * s < l
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = ((m - 1) * s < l) & (l <= m * s)
        ratio = np.where(m > 0, l / (m * s), 0.0)
    out[mid] = 1.0 - ratio[mid]
    out[full] = 1.0
    out[(m == 0) & (l <= 0)] = 1.0
    return out


class _SpanLattice:
    """Iterates the lattice law of L | N = n for n = 1, 2, ...

    Masses above ``cap`` (meters of L) are folded into ``beyond``; gaps are
    nonnegative so the law below the cap stays exact.
    """

    def __init__(self, lambda_v: float, d: float, step: float | None, cap: float = math.inf):
        self.d = d
        self.gap, self.h = _gap_masses(lambda_v, d, step or _default_step(d))
        self.cap_index = math.inf if math.isinf(cap) else max(0, int((cap - 2 * d) / self.h) + 1)

    def __iter__(self):
        masses = np.ones(1)
        beyond = 0.0
        while True:
            yield masses, beyond
            masses = _convolve(masses, self.gap)
            if masses.size > self.cap_index + 1:
                beyond += float(masses[self.cap_index + 1:].sum())
                masses = masses[: self.cap_index + 1]

    def nodes(self, size: int) -> np.ndarray:
        return 2 * self.d + self.h * np.arange(size)


def _grid_ccdf_from_lattice(masses, beyond, nodes, m, s):
    """P(M >= m) under the grid law, vectorized over m, using stop-loss sums.

    P(M >= m) = SL(m - 1) - SL(m) with SL(c) = E[max(L / s - c, 0)].
    ``beyond`` mass is assumed to lie at L >= max(m) * s.
    """
    u = nodes / s
    tail_w = np.cumsum(masses[::-1])[::-1]
    tail_wu = np.cumsum((masses * u)[::-1])[::-1]
    tail_w = np.r_[tail_w, 0.0]
    tail_wu = np.r_[tail_wu, 0.0]

    def stop_loss(c):
        k = np.searchsorted(u, c, side="right")
        return tail_wu[k] - c * tail_w[k]

    m = np.asarray(m, dtype=float)
    out = stop_loss(m - 1.0) - stop_loss(m) + beyond
    return np.where(m <= 0, 1.0, np.clip(out, 0.0, 1.0))


def rsu_ccdf_given_n(
    m,
    n: int,
    spec: SingleLaneSpec,
    mode: RsuLawMode = RsuLawMode.GRID_DERIVED,
    step: float | None = None,
):
    """P(M >= m | N = n), integrating the span law over its density grid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = span_density_given_n(n, spec.lambda_v, spec.d, step)
    m_arr = np.asarray(m, dtype=float)
    out = np.array(
        [grid.expect(lambda l, mm=mm: rsu_ccdf_given_span(mm, l, spec.rsu_spacing, mode)) for mm in m_arr.ravel()]
    ).reshape(m_arr.shape)
    return float(out) if out.ndim == 0 else out


def coverage_v2v(
    spec: SingleLaneSpec,
    policy: PmfTruncationPolicy = DEFAULT_POLICY,
    mode: RsuLawMode = RsuLawMode.GRID_DERIVED,
    step: float | None = None,
) -> float:
    """Coverage probability of a typical V2V vehicle with relaying and multihoming."""
    _require_half_cell(spec)
    s, d = spec.rsu_spacing, spec.d
    ph = phi(spec.gamma, spec.lambda_v, d)
    if ph >= 1.0:
        return float(rsu_ccdf_given_span(1, 2 * d, s, mode))
    lattice = _SpanLattice(spec.lambda_v, d, step, cap=s if mode is RsuLawMode.GRID_DERIVED else math.inf)
    total = 0.0
    for n, (masses, beyond) in enumerate(lattice, start=1):
        if mode is RsuLawMode.GRID_DERIVED:
            if masses.sum() < 1e-14:
                # every larger cluster surely reaches an RSU
                return total + size_biased_tail(ph, n - 1)
            c = float(_grid_ccdf_from_lattice(masses, beyond, lattice.nodes(masses.size), 1, s))
        else:
            c = float(np.dot(masses, rsu_ccdf_given_span(1, lattice.nodes(masses.size), s, mode)))
        total += cluster_size_pmf(ph, n, size_biased=True) * c
        if size_biased_tail(ph, n) < policy.epsilon:
            return total
        if n >= policy.n_max:
            raise NumericalError(f"cluster-size sum not converged at n_max = {policy.n_max}")
    raise AssertionError("unreachable")


def coverage_v2i(spec: SingleLaneSpec) -> float:
    """Fraction of the road within range of an RSU: 2d / rsu_spacing."""
    _require_half_cell(spec)
    return 2 * spec.d / spec.rsu_spacing


def _require_half_cell(spec):
    if 2 * spec.d > spec.rsu_spacing * (1 + 1e-12):
        raise ValueError("formula only valid for 2d <= rsu_spacing")


def mean_shared_rate(spec: SingleLaneSpec) -> float:
    """Mean per-vehicle shared rate, identical with and without V2V relaying."""
    x = spec.gamma * spec.lambda_v
    if x <= 0:
        raise ValueError("mean shared rate needs gamma * lambda_v > 0 (limit is 2 d rho / rsu_spacing)")
    return spec.rho_rsu / (x * spec.rsu_spacing) * -math.expm1(-2 * x * spec.d)


def rate_cdf_v2v_bound(
    r,
    spec: SingleLaneSpec,
    policy: PmfTruncationPolicy = DEFAULT_POLICY,
    mode: RsuLawMode = RsuLawMode.GRID_DERIVED,
    step: float | None = None,
):
    """Lower bound on P(R_v <= r) with relaying; ignores RSUs shared between clusters.

    ``r`` may be an array; every entry must be > 0.
    """
    _require_half_cell(spec)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise ValueError("rate must be > 0")
    rho, s, d = spec.rho_rsu, spec.rsu_spacing, spec.d
    ph = phi(spec.gamma, spec.lambda_v, d)
    lattice = _SpanLattice(spec.lambda_v, d, step)
    acc = np.zeros_like(r_arr)
    for n, (masses, beyond) in enumerate(lattice, start=1):
        x = r_arr * n / rho
        m = np.ceil(x - 1e-12 * np.maximum(x, 1.0))
        nodes = lattice.nodes(masses.size)
        if mode is RsuLawMode.GRID_DERIVED:
            c = _grid_ccdf_from_lattice(masses, beyond, nodes, m, s)
        else:
            c = np.array([np.dot(masses, rsu_ccdf_given_span(mm, nodes, s, mode)) for mm in m])
        acc += cluster_size_pmf(ph, n, size_biased=True) * c
        if ph >= 1.0 or size_biased_tail(ph, n) < policy.epsilon:
            break
        if n >= policy.n_max:
            raise NumericalError(f"cluster-size sum not converged at n_max = {policy.n_max}")
    out = 1.0 - acc
    return float(out[0]) if np.ndim(r) == 0 else out


def rate_cdf_v2i(r, spec: SingleLaneSpec):
    """P(R* < r) without relaying: 1 - (2d / s) P(Poisson(2 gamma lambda d) <= floor((rho - r) / r)).

    The covered vehicle shares its RSU equally with the other V2V vehicles in
    range, so R* = rho / (N* + 1). The value returned is the left limit of the
    CDF at the atoms rho / k; for r > rho it is 1.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise ValueError("rate must be > 0")
    rho = spec.rho_rsu
    mu = 2 * spec.gamma * spec.lambda_v * spec.d
    with np.errstate(divide="ignore"):
        x = (rho - r_arr) / r_arr
    k = np.floor(x + 1e-12 * np.maximum(np.abs(x), 1.0))
    ccdf = np.where(k >= 0, coverage_v2i(spec) * poisson.cdf(k, mu), 0.0)
    out = 1.0 - ccdf
    return float(out[0]) if np.ndim(r) == 0 else out


def multihoming_lower_bound(spec: SingleLaneSpec) -> float:
    """Lower bound on the mean number of RSUs per cluster."""
    g, lam, d, s = spec.gamma, spec.lambda_v, spec.d, spec.rsu_spacing
    x = g * lam
    denom = x * s * (1 - g + g * math.exp(-x * d))
    if x <= 0 or denom <= 0:
        raise ValueError("bound undefined for gamma * lambda_v = 0")
    return -math.expm1(-2 * x * d) / denom


def tradeoff_point(n: int, lambda_v: float, d: float, rsu_spacing: float) -> tuple[float, float]:
    """(coverage, RSU utilization) for equal clusters of n vehicles spaced d apart, 2d between clusters."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if lambda_v * d >= 1:
        return 1.0, 1.0
    coverage = min((n + 1) * d / rsu_spacing, 1.0)
    utilization = min((n + 1) / n * d * lambda_v, 1.0)
    return coverage, utilization


def tradeoff_mixture(n_a: int, n_b: int, weight: float, lambda_v: float, d: float, rsu_spacing: float):
    """Convex combination of two tradeoff points; ``weight`` is the share of the ``n_a`` point."""
    if not 0 <= weight <= 1:
        raise ValueError("weight must lie in [0, 1]")
    pa = tradeoff_point(n_a, lambda_v, d, rsu_spacing)
    pb = tradeoff_point(n_b, lambda_v, d, rsu_spacing)
    return tuple(weight * a + (1 - weight) * b for a, b in zip(pa, pb))


def best_mixing_sizes(d: float, rsu_spacing: float) -> tuple[int, int]:
    """Isolated vehicles mixed with the largest useful cluster, floor(s / d + 1)."""
    return 1, int(math.floor(rsu_spacing / d + 1))


@dataclass(frozen=True)
class ReducedHighway:
    """Single-lane system whose performance lower-bounds a multilane one.

    ``lambda_total`` and ``gamma`` follow the multilane totals (all V2V plus
    all blockers); the single lane itself carries V2V intensity
    ``lambda_v2v`` and blocker intensity ``lambda_b_eff``.
    """

    lambda_total: float
    gamma: float
    lambda_v2v: float
    lambda_b_eff: float

    def single_lane(self, d: float, rsu_spacing: float, rho_rsu: float = 1.0) -> SingleLaneSpec:
        lam = self.lambda_v2v + self.lambda_b_eff
        gamma = self.lambda_v2v / lam if lam > 0 else 1.0
        return SingleLaneSpec(lam, gamma, d, rsu_spacing, rho_rsu)


def reduce_multilane(spec: MultilaneSpec) -> ReducedHighway:
    lam = spec.total_intensity
    return ReducedHighway(
        lambda_total=lam,
        gamma=spec.total_v2v / lam if lam > 0 else 1.0,
        lambda_v2v=spec.total_v2v,
        lambda_b_eff=effective_blocker_intensity(spec.lambda_b),
    )
