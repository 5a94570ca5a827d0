"""Highway parameterizations and Poisson snapshot samplers.

Positions live on a torus of length ``window`` (meters). RSUs sit on a regular
grid ``phase + g * rsu_spacing`` for ``g = 0 .. window / rsu_spacing - 1``, so
the window must hold a whole number of RSU cells.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from enum import Enum, IntEnum
from typing import Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "Kind",
    "LanePreset",
    "MultilaneSpec",
    "SingleLaneSpec",
    "Snapshot",
    "Vehicle",
    "default_window",
    "effective_blocker_intensity",
    "lane_preset",
    "multilane_from_preset",
    "platoon_snapshot",
    "sample_coupled_pair",
    "sample_multilane",
    "sample_single_lane",
    "segregated_multilane",
    "spec_from_dict",
    "spec_from_json",
]

MIN_WINDOW_CELLS = 10
DEFAULT_WINDOW_CELLS = 1000


class ConfigurationError(ValueError):
    """Invalid highway parameters or sampling request.

    ``errors`` holds every problem found, not just the first one.
    """

    def __init__(self, errors: str | Sequence[str]):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class Kind(IntEnum):
    V2V = 0
    BLOCKER = 1


class LanePreset(str, Enum):
    HOMOGENEOUS = "homogeneous"
    V = "V"
    C = "C"
    I = "I"  # noqa: E741
    L = "L"


def _check_common(d, rsu_spacing, rho_rsu) -> list[str]:
    errors = []
    if not d > 0:
        errors.append(f"d must be > 0 (got {d})")
    if not rsu_spacing > 0:
        errors.append(f"rsu_spacing must be > 0 (got {rsu_spacing})")
    elif d > 0 and 2 * d > rsu_spacing * (1 + 1e-12):
        errors.append(
            f"2*d = {2 * d} exceeds rsu_spacing = {rsu_spacing}; the model "
            "requires the communication range to be at most half the "
            "inter-RSU distance (half-spacing range condition)"
        )
    if not rho_rsu > 0:
        errors.append(f"rho_rsu must be > 0 (got {rho_rsu})")
    return errors


@dataclass(frozen=True)
class SingleLaneSpec:
    """One lane: PPP of intensity ``lambda_v``, a fraction ``gamma`` V2V capable."""

    lambda_v: float
    gamma: float
    d: float
    rsu_spacing: float
    rho_rsu: float = 1.0

    def __post_init__(self):
        errors = []
        if not self.lambda_v >= 0:
            errors.append(f"lambda_v must be >= 0 (got {self.lambda_v})")
        if not 0 <= self.gamma <= 1:
            errors.append(f"gamma must lie in [0, 1] (got {self.gamma})")
        errors += _check_common(self.d, self.rsu_spacing, self.rho_rsu)
        if errors:
            raise ConfigurationError(errors)

    @property
    def lambda_v2v(self) -> float:
        return self.gamma * self.lambda_v

    @property
    def lambda_blockers(self) -> float:
        return (1.0 - self.gamma) * self.lambda_v

    def as_multilane(self, blocker_length: float = 0.0) -> "MultilaneSpec":
        return MultilaneSpec(
            eta=1,
            lambda_v2v=(self.lambda_v2v,),
            lambda_b=(self.lambda_blockers,),
            d=self.d,
            rsu_spacing=self.rsu_spacing,
            rho_rsu=self.rho_rsu,
            blocker_length=blocker_length,
        )

    def replace(self, **changes) -> "SingleLaneSpec":
        return SingleLaneSpec(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class MultilaneSpec:
    """``eta`` lanes, each with independent V2V and blocker PPPs."""

    eta: int
    lambda_v2v: tuple
    lambda_b: tuple
    d: float
    rsu_spacing: float
    rho_rsu: float = 1.0
    blocker_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lambda_v2v", tuple(float(x) for x in self.lambda_v2v))
        object.__setattr__(self, "lambda_b", tuple(float(x) for x in self.lambda_b))
        errors = []
        if not (isinstance(self.eta, (int, np.integer)) and self.eta >= 1):
            errors.append(f"eta must be an integer >= 1 (got {self.eta})")
        for name in ("lambda_v2v", "lambda_b"):
            vec = getattr(self, name)
            if len(vec) != self.eta:
                errors.append(f"{name} has length {len(vec)}, expected eta = {self.eta}")
            if any(not x >= 0 for x in vec):
                errors.append(f"{name} entries must be >= 0 (got {list(vec)})")
        if not self.blocker_length >= 0:
            errors.append(f"blocker_length must be >= 0 (got {self.blocker_length})")
        errors += _check_common(self.d, self.rsu_spacing, self.rho_rsu)
        if errors:
            raise ConfigurationError(errors)

    @property
    def total_v2v(self) -> float:
        return float(sum(self.lambda_v2v))

    @property
    def total_blockers(self) -> float:
        return float(sum(self.lambda_b))

    @property
    def total_intensity(self) -> float:
        return self.total_v2v + self.total_blockers

    def replace(self, **changes) -> "MultilaneSpec":
        return MultilaneSpec(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda_v2v"] = list(self.lambda_v2v)
        out["lambda_b"] = list(self.lambda_b)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def spec_from_dict(doc: dict) -> SingleLaneSpec | MultilaneSpec:
    """Build a spec from a mapping whose keys match the dataclass fields."""
    if "eta" in doc:
        cls = MultilaneSpec
    else:
        cls = SingleLaneSpec
    names = set(cls.__dataclass_fields__)
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} field(s): {', '.join(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def spec_from_json(text: str) -> SingleLaneSpec | MultilaneSpec:
    return spec_from_dict(json.loads(text))


@dataclass(frozen=True)
class Vehicle:
    position: float
    kind: Kind
    lane: int = 1


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One realization of the vehicle process plus the RSU grid offset.

    Vehicles are stored column-wise and sorted by position, ties broken by lane
    then kind. ``is_v2v`` is a boolean mask; lanes are 1-based.
    """

    window: float
    positions: np.ndarray
    is_v2v: np.ndarray
    lanes: np.ndarray
    rsu_phase: float = 0.0
    eta: int = 1

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        v2v = np.asarray(self.is_v2v, dtype=bool).ravel()
        lanes = np.asarray(self.lanes, dtype=np.int64).ravel()
        if lanes.size == 0 and pos.size:
            lanes = np.ones(pos.size, dtype=np.int64)
        if not (pos.size == v2v.size == lanes.size):
            raise ValueError("positions, is_v2v and lanes must have equal length")
        if pos.size and (lanes.min() < 1 or lanes.max() > self.eta):
            raise ValueError(f"lane indices must lie in 1..{self.eta}")
        pos = np.mod(pos, self.window)
        order = np.lexsort((~v2v, lanes, pos))
        for name, arr in (("positions", pos[order]), ("is_v2v", v2v[order]), ("lanes", lanes[order])):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.positions.size

    @property
    def vehicles(self) -> list[Vehicle]:
        return [
            Vehicle(float(p), Kind.V2V if v else Kind.BLOCKER, int(k))
            for p, v, k in zip(self.positions, self.is_v2v, self.lanes)
        ]

    @property
    def n_v2v(self) -> int:
        return int(self.is_v2v.sum())

    def rsu_count(self, rsu_spacing: float) -> int:
        return _cells(self.window, rsu_spacing)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position", "kind", "lane"])
            for p, v, k in zip(self.positions, self.is_v2v, self.lanes):
                writer.writerow([repr(float(p)), "V2V" if v else "blocker", int(k)])

    @classmethod
    def read_csv(cls, path, window: float, rsu_phase: float = 0.0, eta: int | None = None) -> "Snapshot":
        pos, v2v, lanes = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                pos.append(float(row["position"]))
                v2v.append(row["kind"] == "V2V")
                lanes.append(int(row["lane"]))
        eta = eta or (max(lanes) if lanes else 1)
        return cls(window, np.array(pos), np.array(v2v, dtype=bool), np.array(lanes), rsu_phase, eta)


def _cells(window: float, rsu_spacing: float) -> int:
    cells = window / rsu_spacing
    n = int(round(cells))
    if abs(cells - n) > 1e-9 * max(1.0, cells):
        raise ConfigurationError(
            f"window {window} is not a whole multiple of rsu_spacing {rsu_spacing}"
        )
    return n


def default_window(spec) -> float:
    return DEFAULT_WINDOW_CELLS * spec.rsu_spacing


def _check_window(spec, window):
    if window is None:
        return default_window(spec)
    if window < MIN_WINDOW_CELLS * spec.rsu_spacing:
        raise ConfigurationError(
            f"window {window} m is shorter than {MIN_WINDOW_CELLS} RSU cells "
            f"({MIN_WINDOW_CELLS * spec.rsu_spacing} m)"
        )
    _cells(window, spec.rsu_spacing)
    return float(window)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ppp(rng, intensity, length):
    n = rng.poisson(intensity * length) if intensity > 0 else 0
    return rng.uniform(0.0, length, size=n)


def sample_single_lane(spec: SingleLaneSpec, window: float | None = None, seed=None) -> Snapshot:
    """Poisson vehicles on a torus, independently thinned into V2V / blocker."""
    window = _check_window(spec, window)
    rng = _rng(seed)
    pos = _ppp(rng, spec.lambda_v, window)
    v2v = rng.random(pos.size) < spec.gamma
    phase = rng.uniform(0.0, spec.rsu_spacing)
    return Snapshot(window, pos, v2v, np.ones(pos.size, dtype=np.int64), phase, 1)


def sample_multilane(spec: MultilaneSpec, window: float | None = None, seed=None) -> Snapshot:
    window = _check_window(spec, window)
    rng = _rng(seed)
    pos, v2v, lanes = [], [], []
    for k in range(spec.eta):
        for intensity, capable in ((spec.lambda_v2v[k], True), (spec.lambda_b[k], False)):
            p = _ppp(rng, intensity, window)
            pos.append(p)
            v2v.append(np.full(p.size, capable))
            lanes.append(np.full(p.size, k + 1, dtype=np.int64))
    phase = rng.uniform(0.0, spec.rsu_spacing)
    return Snapshot(
        window, np.concatenate(pos), np.concatenate(v2v), np.concatenate(lanes), phase, spec.eta
    )


def blocking_lanes(k_tx: int, k_rx: int, eta: int) -> list[int]:
    """Lanes whose blockers can obstruct a link between lanes ``k_tx`` and ``k_rx``."""
    if k_tx == k_rx:
        return [k_tx]
    lo, hi = sorted((k_tx, k_rx))
    return list(range(lo + 1, hi))


def effective_blocker_intensity(lambda_b: Sequence[float]) -> float:
    """max(first lane, last lane, sum of the middle lanes)."""
    lam = [float(x) for x in lambda_b]
    if len(lam) == 1:
        return lam[0]
    return max(lam[0], lam[-1], sum(lam[1:-1]))


def _pair_intensity_matrix(lambda_b: Sequence[float]) -> np.ndarray:
    eta = len(lambda_b)
    out = np.zeros((eta + 1, eta + 1))
    for a in range(1, eta + 1):
        for b in range(1, eta + 1):
            out[a, b] = sum(lambda_b[j - 1] for j in blocking_lanes(a, b, eta))
    return out


def _qualifies(k_tx, k_rx, k_b):
    return (k_tx == k_rx) & (k_b == k_tx) | (np.minimum(k_tx, k_rx) < k_b) & (k_b < np.maximum(k_tx, k_rx))


def sample_coupled_pair(
    spec: MultilaneSpec, window: float | None = None, seed=None
) -> tuple[Snapshot, Snapshot]:
    """Jointly sample a multilane snapshot and a single-lane snapshot that share V2V positions.

    Between consecutive V2V vehicles the single-lane road receives the multilane
    blockers able to obstruct that pair, topped up with an independent PPP so
    the single-lane blockers form a PPP of intensity
    ``effective_blocker_intensity(spec.lambda_b)``. With point blockers every
    obstructed multilane link is obstructed on the single lane as well, so
    single-lane clusters refine multilane clusters.
    """
    window = _check_window(spec, window)
    rng = _rng(seed)
    multi = sample_multilane(spec, window, rng)
    lam_eff = effective_blocker_intensity(spec.lambda_b)

    t = multi.positions[multi.is_v2v]
    k = multi.lanes[multi.is_v2v]
    bx = multi.positions[~multi.is_v2v]
    bk = multi.lanes[~multi.is_v2v]

    if t.size == 0:
        blockers = _ppp(rng, lam_eff, window)
    else:
        # interval i is (t[i], t[i+1]], the last one wraps to t[0] + window
        nxt = np.roll(np.arange(t.size), -1)
        gaps = np.diff(np.append(t, t[0] + window))
        idx = np.searchsorted(t, bx, side="left") - 1
        idx[idx < 0] = t.size - 1
        keep = _qualifies(k[idx], k[nxt[idx]], bk)
        shared = bx[keep]

        q = _pair_intensity_matrix(spec.lambda_b)[k, k[nxt]]
        extra = np.clip(lam_eff - q, 0.0, None)
        counts = rng.poisson(extra * gaps)
        owner = np.repeat(np.arange(t.size), counts)
        top_up = t[owner] + rng.uniform(0.0, 1.0, size=owner.size) * gaps[owner]
        blockers = np.concatenate([shared, top_up])

    single = Snapshot(
        window,
        np.concatenate([t, blockers]),
        np.concatenate([np.ones(t.size, bool), np.zeros(blockers.size, bool)]),
        np.ones(t.size + blockers.size, dtype=np.int64),
        multi.rsu_phase,
        1,
    )
    return multi, single


def lane_preset(kind: LanePreset | str, eta: int, lambda_v: float) -> np.ndarray:
    """Per-lane intensities for a lane-distribution preset.

    ``lambda_v`` is the mean per-lane intensity; the returned vector is
    ``lambda_v * eta * weights`` with weights summing to one.
    """
    kind = LanePreset(kind)
    if not (isinstance(eta, (int, np.integer)) and eta >= 1):
        raise ConfigurationError(f"eta must be an integer >= 1 (got {eta})")
    if kind is LanePreset.HOMOGENEOUS:
        w = np.full(eta, 1.0 / eta)
    elif kind is LanePreset.I:
        w = np.zeros(eta)
        w[0] = 1.0
    elif kind is LanePreset.C:
        if eta < 2:
            raise ConfigurationError("preset C splits traffic over the two outer lanes and needs eta >= 2")
        w = np.zeros(eta)
        w[0] = w[-1] = 0.5
    elif kind is LanePreset.L:
        if eta < 2:
            raise ConfigurationError("preset L spreads 10% of traffic over the other lanes and needs eta >= 2")
        w = np.full(eta, 0.1 / (eta - 1))
        w[0] = 0.9
    else:
        # quadratic V profile: weight 1 + (k - centre)^2, eg [5, 2, 1, 2, 5] / 15 for 5 lanes
        centre = (eta + 1) / 2
        w = 1.0 + (np.arange(1, eta + 1) - centre) ** 2
        w /= w.sum()
    return lambda_v * eta * w


def multilane_from_preset(
    kind: LanePreset | str,
    eta: int,
    lambda_v: float,
    gamma: float,
    d: float,
    rsu_spacing: float,
    rho_rsu: float = 1.0,
    blocker_length: float = 0.0,
) -> MultilaneSpec:
    vec = lane_preset(kind, eta, lambda_v)
    return MultilaneSpec(
        eta, tuple(gamma * vec), tuple((1 - gamma) * vec), d, rsu_spacing, rho_rsu, blocker_length
    )


def segregated_multilane(
    base: SingleLaneSpec, eta: int, alpha: float, blocker_length: float = 0.0
) -> MultilaneSpec:
    """Reserve lane 1 for a fraction ``alpha`` of the V2V vehicles.

    Everything else (the remaining V2V vehicles and all blockers) is spread
    evenly over lanes 2..eta. ``base`` carries the road totals.
    """
    errors = []
    if eta < 2:
        errors.append("segregation needs a dedicated lane plus at least one mixed lane (eta >= 2)")
    if not 0 <= alpha <= 1:
        errors.append(f"alpha must lie in [0, 1] (got {alpha})")
    if errors:
        raise ConfigurationError(errors)
    lam, g = base.lambda_v, base.gamma
    rest = eta - 1
    v2v = [alpha * g * lam] + [(1 - alpha) * g * lam / rest] * rest
    blk = [0.0] + [(1 - g) * lam / rest] * rest
    return MultilaneSpec(eta, tuple(v2v), tuple(blk), base.d, base.rsu_spacing, base.rho_rsu, blocker_length)


def platoon_snapshot(n: int, lambda_v: float, d: float, window: float, rsu_phase: float = 0.0) -> Snapshot:
    """Deterministic layout: clusters of ``n`` V2V vehicles spaced ``d`` apart.

    Clusters repeat with a common period chosen so the torus holds a whole
    number of them at (as close as possible to) intensity ``lambda_v``; the
    realized intensity is ``len(snapshot) / window``.
    """
    if n < 1:
        raise ConfigurationError("cluster size must be >= 1")
    clusters = max(1, int(round(lambda_v * window / n)))
    period = window / clusters
    if period - (n - 1) * d <= d:
        raise ConfigurationError("clusters of this size do not fit at this intensity")
    starts = np.arange(clusters) * period
    pos = (starts[:, None] + d * np.arange(n)[None, :]).ravel()
    return Snapshot(window, pos, np.ones(pos.size, bool), np.ones(pos.size, np.int64), rsu_phase, 1)

