"""Scenario configs, figure-data presets and the ``v2vnet`` command line.

Configs are JSON. Quantities are SI (meters, vehicles per meter) but strings
with a unit suffix are accepted: ``"20/km"``, ``"0.02/m"``, ``"1km"``,
``"150m"``.

Exit codes: 0 success, 2 invalid configuration or usage, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import analytic, montecarlo
from .model import (
    ConfigurationError,
    LanePreset,
    MultilaneSpec,
    SingleLaneSpec,
    multilane_from_preset,
    segregated_multilane,
)

__all__ = [
    "Engine",
    "ScenarioConfig",
    "ScenarioResult",
    "Sweep",
    "emit_csv",
    "main",
    "parse_config",
    "parse_quantity",
    "run_scenario",
]

PRESETS = (
    "coverage-vs-lambda",
    "rate-cdf",
    "dispersion",
    "multihoming",
    "multilane-dof",
    "lane-configs",
    "segregation",
    "tradeoff",
    "rsu-law",
)


class Engine(str, Enum):
    ANALYTIC = "analytic"
    SIMULATE = "simulate"
    BOTH = "both"

    @property
    def analytic(self) -> bool:
        return self in (Engine.ANALYTIC, Engine.BOTH)

    @property
    def simulate(self) -> bool:
        return self in (Engine.SIMULATE, Engine.BOTH)


# ---------------------------------------------------------------------------
# units

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(/km|/m|km|m)?\s*$")
INTENSITY_FIELDS = {"lambda_v", "lambda_v2v", "lambda_b"}
LENGTH_FIELDS = {"d", "rsu_spacing", "window", "blocker_length"}


def parse_quantity(value, kind: str = "plain") -> float:
    """Normalize a number or a string with a unit suffix to SI.

    ``kind`` is ``"intensity"`` (per meter), ``"length"`` (meters) or
    ``"plain"`` (no unit allowed).
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number, got {value!r}")
    m = _QTY.match(value)
    if not m:
        raise ValueError(f"cannot read {value!r} as a quantity")
    x, unit = float(m.group(1)), m.group(2)
    if unit is None:
        return x
    if kind == "intensity" and unit in ("/km", "/m"):
        return x / 1000.0 if unit == "/km" else x
    if kind == "length" and unit in ("km", "m"):
        return x * 1000.0 if unit == "km" else x
    expected = {"intensity": "a per-length unit (/km, /m)", "length": "a length unit (km, m)"}.get(kind, "no unit")
    raise ValueError(f"{value!r} has unit {unit!r} but {expected} is expected")


def _kind(name: str) -> str:
    if name in INTENSITY_FIELDS:
        return "intensity"
    if name in LENGTH_FIELDS:
        return "length"
    return "plain"


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class Sweep:
    parameter: str
    grid: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    spec: SingleLaneSpec | MultilaneSpec
    sweep: Sweep | None = None
    engines: Engine = Engine.BOTH
    output: str = "out"
    ci_target: float | None = None
    seed: int = 0
    replications: int = 8
    window: float | None = None
    preset: str | None = None
    options: dict = field(default_factory=dict)


DEFAULT_HIGHWAY = {"lambda_v": 0.02, "gamma": 1.0, "d": 150.0, "rsu_spacing": 1000.0, "rho_rsu": 1.0}

# preset -> (sweep parameter, default grid)
PRESET_SWEEPS = {
    "coverage-vs-lambda": ("lambda_v", tuple(np.arange(1, 9) * 0.005)),
    "rate-cdf": ("rsu_spacing", (500.0, 1000.0, 2000.0)),
    "dispersion": ("lambda_v", tuple(np.arange(1, 9) * 0.005)),
    "multihoming": ("lambda_v", tuple(np.arange(1, 9) * 0.005)),
    "multilane-dof": ("eta", (1, 2, 3, 4, 5)),
    "lane-configs": ("lambda_v", tuple(np.arange(1, 7) * 0.005)),
    "segregation": ("alpha", (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)),
    "tradeoff": ("lambda_v", (0.005, 0.010, 0.015, 0.020)),
    "rsu-law": ("span", tuple(np.linspace(0.0, 5000.0, 201))),
}

PRESET_OPTIONS = {
    "coverage-vs-lambda": {"gammas": [0.5, 0.7, 0.9, 1.0]},
    "rate-cdf": {"points": 201},
    "dispersion": {"gammas": [1.0]},
    "multihoming": {},
    "multilane-dof": {"gammas": [0.3, 0.5, 0.8, 1.0], "lambda_total": 0.02, "blocker_length": 5.0},
    "lane-configs": {"eta": 3, "gamma": 0.8, "configs": ["homogeneous", "V", "C", "I", "L"], "blocker_length": 5.0},
    "segregation": {"eta": 3, "gammas": [0.3, 0.5, 0.7], "lambda_total": 0.03, "blocker_length": 5.0},
    "tradeoff": {"d": 40.0, "n_max": 10, "phases": 4096},
    "rsu-law": {"m_max": 6, "phases": 100000},
}

TOP_FIELDS = {"scenario", "preset", "highway", "sweep", "engines", "output", "ci_target", "seed",
              "replications", "window", "options"}


def _build_spec(doc: dict, errors: list) -> SingleLaneSpec | MultilaneSpec | None:
    multi = "eta" in doc
    allowed = set(MultilaneSpec.__dataclass_fields__) if multi else set(SingleLaneSpec.__dataclass_fields__)
    values = {} if multi else dict(DEFAULT_HIGHWAY)
    for key, raw in doc.items():
        if key not in allowed:
            errors.append(f"highway: unknown field {key!r}")
            continue
        try:
            if isinstance(raw, list):
                values[key] = tuple(parse_quantity(x, _kind(key)) for x in raw)
            elif key == "eta":
                if not isinstance(raw, int) or isinstance(raw, bool):
                    raise ValueError(f"eta must be an integer, got {raw!r}")
                values[key] = raw
            else:
                values[key] = parse_quantity(raw, _kind(key))
        except ValueError as exc:
            errors.append(f"highway.{key}: {exc}")
    if any(e.startswith("highway") for e in errors):
        return None
    try:
        return (MultilaneSpec if multi else SingleLaneSpec)(**values)
    except ConfigurationError as exc:
        errors.extend(f"highway: {e}" for e in exc.errors)
    except TypeError as exc:
        errors.append(f"highway: {exc}")
    return None


def parse_config(document: str | dict) -> ScenarioConfig:
    """Validate a JSON scenario config, collecting every problem before failing.

    Raises :class:`ConfigurationError` listing all errors.
    """
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed JSON: {exc}") from None
    else:
        doc = dict(document)
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")

    errors: list[str] = []
    for key in doc:
        if key not in TOP_FIELDS:
            errors.append(f"unknown field {key!r}")

    preset = doc.get("preset")
    if preset is not None and preset not in PRESETS:
        errors.append(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        preset = None

    highway = doc.get("highway", {})
    spec = None
    if not isinstance(highway, dict):
        errors.append("highway must be an object")
    else:
        spec = _build_spec(highway, errors)

    engines = Engine.BOTH
    try:
        engines = Engine(doc.get("engines", "both"))
    except ValueError:
        errors.append(f"engines must be one of analytic, simulate, both (got {doc.get('engines')!r})")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        errors.append(f"seed must be an integer in [0, 2^64) (got {seed!r})")
        seed = 0
    reps = doc.get("replications", 8)
    if not isinstance(reps, int) or isinstance(reps, bool) or reps < 2:
        errors.append(f"replications must be an integer >= 2 (got {reps!r})")
        reps = 8
    ci = doc.get("ci_target")
    if ci is not None and not (isinstance(ci, (int, float)) and 0 < ci < 1):
        errors.append(f"ci_target must lie in (0, 1) (got {ci!r})")
        ci = None

    window = doc.get("window")
    if window is not None:
        try:
            window = parse_quantity(window, "length")
        except ValueError as exc:
            errors.append(f"window: {exc}")
            window = None
        if window is not None and spec is not None:
            try:
                montecarlo._check_window(spec, window)
            except ConfigurationError as exc:
                errors.extend(f"window: {e}" for e in exc.errors)

    options = doc.get("options", {})
    if not isinstance(options, dict):
        errors.append("options must be an object")
        options = {}
    if preset is not None:
        unknown = set(options) - set(PRESET_OPTIONS[preset])
        errors.extend(f"options: {k!r} is not an option of preset {preset}" for k in sorted(unknown))
        options = {**PRESET_OPTIONS[preset], **options}

    sweep = None
    if "sweep" in doc:
        sweep = _parse_sweep(doc["sweep"], spec, preset, errors)
    elif preset is not None:
        p, g = PRESET_SWEEPS[preset]
        sweep = Sweep(p, tuple(float(x) if p != "eta" else int(x) for x in g))

    name = doc.get("scenario", preset or "scenario")
    if not isinstance(name, str) or not name:
        errors.append("scenario must be a nonempty string")
        name = "scenario"
    output = doc.get("output", "out")
    if not isinstance(output, str):
        errors.append("output must be a path string")
        output = "out"

    if errors:
        raise ConfigurationError(errors)
    return ScenarioConfig(name, spec, sweep, engines, output, ci, seed, reps, window, preset, options)


def _parse_sweep(raw, spec, preset, errors) -> Sweep | None:
    if not isinstance(raw, dict) or set(raw) - {"parameter", "grid"} or "parameter" not in raw:
        errors.append("sweep must be an object with 'parameter' and 'grid'")
        return None
    param = raw["parameter"]
    if preset is not None:
        expected = PRESET_SWEEPS[preset][0]
        if param != expected:
            errors.append(f"sweep: preset {preset} sweeps {expected!r}, not {param!r}")
            return None
    elif spec is not None:
        scalar = [k for k, v in spec.to_dict().items() if isinstance(v, (int, float)) and k != "eta"]
        if param not in scalar:
            errors.append(f"sweep: {param!r} is not a scalar parameter of the highway ({', '.join(scalar)})")
            return None
    grid_raw = raw.get("grid")
    if not isinstance(grid_raw, list) or not grid_raw:
        errors.append("sweep: grid must be a nonempty list")
        return None
    try:
        grid = tuple(parse_quantity(x, _kind(param) if param != "span" else "length") for x in grid_raw)
    except ValueError as exc:
        errors.append(f"sweep.grid: {exc}")
        return None
    if any(b < a for a, b in zip(grid, grid[1:])):
        errors.append("sweep: grid must be sorted ascending")
        return None
    if param == "eta":
        if not all(float(x).is_integer() and x >= 1 for x in grid):
            errors.append("sweep: eta grid must hold integers >= 1")
            return None
        grid = tuple(int(x) for x in grid)
    if preset is None and spec is not None:
        for x in grid:
            try:
                spec.replace(**{param: x})
            except ConfigurationError as exc:
                errors.extend(f"sweep point {param}={x:g}: {e}" for e in exc.errors)
    return Sweep(param, grid)


# ---------------------------------------------------------------------------
# CSV


def emit_csv(rows, path, columns=None) -> Path:
    """Write homogeneous dict rows as RFC 4180 CSV with a header row.

    Floats are written with ``repr`` so values read back exactly.
    """
    rows = list(rows)
    if columns is None:
        if not rows:
            raise ValueError("an empty row set needs explicit columns")
        columns = list(rows[0])
    columns = list(columns)
    for i, row in enumerate(rows):
        if list(row) != columns and set(row) != set(columns):
            raise ValueError(f"row {i} has columns {sorted(row)}, expected {columns}")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class ScenarioResult:
    out_dir: Path
    files: list
    manifest: dict


class _Bundle:
    """Collects curves (one CSV each) and per-point failures for the manifest."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.curves = []
        self.errors = []

    def add(self, name: str, figure: str, columns: dict, rows: list):
        self.curves.append((name, figure, columns, rows))

    def guard(self, curve: str, point, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except Exception as exc:  # noqa: BLE001 - recorded, the run goes on
            self.errors.append({"curve": curve, "point": point, "error": f"{type(exc).__name__}: {exc}"})
            return None


def _simulate(cfg: ScenarioConfig, spec, networks=("v2v+v2i", "v2i"), metric="coverage", seed_offset=0):
    seed = cfg.seed + seed_offset
    if cfg.ci_target is None:
        return montecarlo.paired_estimates(spec, cfg.window, cfg.replications, seed, networks)
    return {n: montecarlo.run_until_ci(spec, cfg.ci_target, metric, max_replications=max(cfg.replications, 256),
                                       seed=seed, network=n, window=cfg.window, min_replications=cfg.replications)
            for n in networks}


def _nan(x):
    return math.nan if x is None else x


def _km(x):
    return x * 1000.0


def _single_spec(cfg: ScenarioConfig) -> SingleLaneSpec:
    if not isinstance(cfg.spec, SingleLaneSpec):
        raise ConfigurationError(f"preset {cfg.preset} needs a single-lane highway")
    return cfg.spec


def _q(col, fn, sim, op):
    return (col, fn, sim, op)


def _run_coverage(cfg, b):
    qs = [
        _q("analytic_v2v", lambda s, _: analytic.coverage_v2v(s), False, "analytic.coverage_v2v"),
        _q("analytic_v2i", lambda s, _: analytic.coverage_v2i(s), False, "analytic.coverage_v2i"),
        _q("sim_v2v", lambda s, r: r["v2v+v2i"].coverage.value, True, "montecarlo.estimate_metrics[v2v+v2i].coverage"),
        _q("sim_v2v_ci", lambda s, r: r["v2v+v2i"].coverage.half_width, True, "95% half-width"),
        _q("sim_v2i", lambda s, r: r["v2i"].coverage.value, True, "montecarlo.estimate_metrics[v2i].coverage"),
        _q("sim_v2i_ci", lambda s, r: r["v2i"].coverage.half_width, True, "95% half-width"),
    ]
    _lambda_curves(cfg, b, cfg.options["gammas"], "coverage vs vehicle intensity", qs)


def _run_dispersion(cfg, b):
    qs = [
        _q("sim_v2v", lambda s, r: r["v2v+v2i"].dispersion.value, True, "montecarlo.estimate_metrics[v2v+v2i].dispersion"),
        _q("sim_v2v_ci", lambda s, r: r["v2v+v2i"].dispersion.half_width, True, "95% half-width"),
        _q("sim_v2i", lambda s, r: r["v2i"].dispersion.value, True, "montecarlo.estimate_metrics[v2i].dispersion"),
        _q("sim_v2i_ci", lambda s, r: r["v2i"].dispersion.half_width, True, "95% half-width"),
        _q("analytic_mean_rate", lambda s, _: analytic.mean_shared_rate(s), False, "analytic.mean_shared_rate"),
    ]
    _lambda_curves(cfg, b, cfg.options["gammas"], "shared-rate dispersion vs vehicle intensity", qs)


def _run_multihoming(cfg, b):
    qs = [
        _q("bound", lambda s, _: analytic.multihoming_lower_bound(s), False, "analytic.multihoming_lower_bound"),
        _q("analytic_rsus_per_cluster", lambda s, _: analytic.expected_rsus_per_cluster(s), False,
           "analytic.expected_rsus_per_cluster"),
        _q("sim_rsus_per_cluster", lambda s, r: r["v2v+v2i"].mean_rsus_per_cluster.value, True,
           "montecarlo.estimate_metrics.mean_rsus_per_cluster"),
        _q("sim_rsus_per_vehicle", lambda s, r: r["v2v+v2i"].mean_rsus_per_vehicle.value, True,
           "montecarlo.estimate_metrics.mean_rsus_per_vehicle"),
        _q("sim_prob_multihomed", lambda s, r: r["v2v+v2i"].prob_multihomed.value, True,
           "montecarlo.estimate_metrics.prob_multihomed"),
    ]
    _lambda_curves(cfg, b, [_single_spec(cfg).gamma], "RSUs per cluster and multihoming vs vehicle intensity", qs)


def _lambda_curves(cfg, b, gammas, figure, qs):
    base = _single_spec(cfg)
    for gamma in gammas:
        curve = f"gamma_{gamma:g}"
        rows = []
        for i, lam in enumerate(cfg.sweep.grid):
            row = {"lambda_per_km": _km(lam), **{q[0]: math.nan for q in qs}}
            spec = b.guard(curve, lam, base.replace, lambda_v=lam, gamma=gamma)
            sims = None
            if spec is not None and cfg.engines.simulate and any(q[2] for q in qs):
                sims = b.guard(curve, lam, _simulate, cfg, spec, seed_offset=i)
            for col, fn, needs_sim, _ in qs:
                if spec is None:
                    continue
                if needs_sim and sims is None:
                    continue
                if not needs_sim and not cfg.engines.analytic:
                    continue
                row[col] = _nan(b.guard(curve, lam, fn, spec, sims))
            rows.append(row)
        b.add(curve, figure, {"lambda_per_km": "sweep grid", **{q[0]: q[3] for q in qs}}, rows)


def _run_rate_cdf(cfg, b):
    base = _single_spec(cfg)
    points = int(cfg.options["points"])
    for i, s in enumerate(cfg.sweep.grid):
        curve = f"rsu_spacing_{s:g}m"
        spec = b.guard(curve, s, base.replace, rsu_spacing=s)
        if spec is None:
            continue
        r = np.linspace(spec.rho_rsu / points, spec.rho_rsu, points)
        cols = {"r": "rate grid"}
        data = {"r": r}
        if cfg.engines.analytic:
            cols["analytic_v2i"] = "analytic.rate_cdf_v2i"
            cols["analytic_v2v_bound"] = "analytic.rate_cdf_v2v_bound"
            data["analytic_v2i"] = b.guard(curve, s, analytic.rate_cdf_v2i, r, spec)
            data["analytic_v2v_bound"] = b.guard(curve, s, analytic.rate_cdf_v2v_bound, r, spec)
        if cfg.engines.simulate:
            sims = b.guard(curve, s, _simulate, cfg, spec, seed_offset=i)
            for net in ("v2v+v2i", "v2i"):
                col = "sim_" + net.replace("+", "_")
                cols[col] = f"montecarlo.estimate_metrics[{net}] empirical CDF"
                if sims is not None:
                    srt = np.sort(sims[net].rate_samples)
                    data[col] = np.searchsorted(srt, r, side="right") / max(srt.size, 1)
        rows = []
        for k in range(points):
            rows.append({c: (float(data[c][k]) if data.get(c) is not None else math.nan) for c in cols})
        b.add(curve, "shared-rate CDF", cols, rows)


def _run_dof(cfg, b):
    base = _single_spec(cfg)
    lam_total = float(cfg.options["lambda_total"])
    blen = float(cfg.options["blocker_length"])
    for gamma in cfg.options["gammas"]:
        curve = f"gamma_{gamma:g}"
        rows = []
        for i, eta in enumerate(cfg.sweep.grid):
            row = {"eta": int(eta), "sim_coverage": math.nan, "sim_coverage_ci": math.nan, "reduced_bound": math.nan}
            spec = b.guard(curve, eta, multilane_from_preset, "homogeneous", int(eta), lam_total / eta, gamma,
                           base.d, base.rsu_spacing, base.rho_rsu, blen)
            if spec is None:
                rows.append(row)
                continue
            if cfg.engines.analytic:
                red = analytic.reduce_multilane(spec).single_lane(base.d, base.rsu_spacing, base.rho_rsu)
                row["reduced_bound"] = _nan(b.guard(curve, eta, analytic.coverage_v2v, red))
            if cfg.engines.simulate:
                sims = b.guard(curve, eta, _simulate, cfg, spec, ("v2v+v2i",), seed_offset=i)
                if sims is not None:
                    row["sim_coverage"] = sims["v2v+v2i"].coverage.value
                    row["sim_coverage_ci"] = sims["v2v+v2i"].coverage.half_width
            rows.append(row)
        b.add(curve, "coverage vs number of lanes at fixed total intensity",
              {"eta": "sweep grid", "sim_coverage": "montecarlo.estimate_metrics.coverage",
               "sim_coverage_ci": "95% half-width",
               "reduced_bound": "analytic.coverage_v2v on analytic.reduce_multilane"}, rows)


def _run_lane_configs(cfg, b):
    base = _single_spec(cfg)
    eta = int(cfg.options["eta"])
    gamma = float(cfg.options["gamma"])
    blen = float(cfg.options["blocker_length"])
    for kind in cfg.options["configs"]:
        curve = f"config_{LanePreset(kind).value}"
        rows = []
        for i, lam in enumerate(cfg.sweep.grid):
            row = {"lambda_per_km_per_lane": _km(lam), "sim_coverage": math.nan, "sim_coverage_ci": math.nan,
                   "reduced_bound": math.nan}
            spec = b.guard(curve, lam, multilane_from_preset, kind, eta, lam, gamma, base.d, base.rsu_spacing,
                           base.rho_rsu, blen)
            if spec is not None and cfg.engines.analytic:
                red = analytic.reduce_multilane(spec).single_lane(base.d, base.rsu_spacing, base.rho_rsu)
                row["reduced_bound"] = _nan(b.guard(curve, lam, analytic.coverage_v2v, red))
            if spec is not None and cfg.engines.simulate:
                sims = b.guard(curve, lam, _simulate, cfg, spec, ("v2v+v2i",), seed_offset=i)
                if sims is not None:
                    row["sim_coverage"] = sims["v2v+v2i"].coverage.value
                    row["sim_coverage_ci"] = sims["v2v+v2i"].coverage.half_width
            rows.append(row)
        b.add(curve, "coverage by lane configuration",
              {"lambda_per_km_per_lane": "sweep grid", "sim_coverage": "montecarlo.estimate_metrics.coverage",
               "sim_coverage_ci": "95% half-width",
               "reduced_bound": "analytic.coverage_v2v on analytic.reduce_multilane"}, rows)


def _run_segregation(cfg, b):
    base = _single_spec(cfg)
    eta = int(cfg.options["eta"])
    lam = float(cfg.options["lambda_total"])
    blen = float(cfg.options["blocker_length"])
    for gamma in cfg.options["gammas"]:
        curve = f"gamma_{gamma:g}"
        rows = []
        road = base.replace(lambda_v=lam, gamma=gamma)
        for i, alpha in enumerate(cfg.sweep.grid):
            row = {"alpha": float(alpha), "sim_coverage": math.nan, "sim_coverage_ci": math.nan}
            spec = b.guard(curve, alpha, segregated_multilane, road, eta, alpha, blen)
            if spec is not None and cfg.engines.simulate:
                sims = b.guard(curve, alpha, _simulate, cfg, spec, ("v2v+v2i",), seed_offset=i)
                if sims is not None:
                    row["sim_coverage"] = sims["v2v+v2i"].coverage.value
                    row["sim_coverage_ci"] = sims["v2v+v2i"].coverage.half_width
            rows.append(row)
        b.add(curve, "coverage vs share of V2V vehicles in a reserved lane",
              {"alpha": "sweep grid", "sim_coverage": "montecarlo.estimate_metrics.coverage",
               "sim_coverage_ci": "95% half-width"}, rows)


def _run_tradeoff(cfg, b):
    base = _single_spec(cfg)
    d = float(cfg.options["d"])
    s = base.rsu_spacing
    n_max = int(cfg.options["n_max"])
    phases = int(cfg.options["phases"])
    n_a, n_b = analytic.best_mixing_sizes(d, s)
    chords = []
    for lam in cfg.sweep.grid:
        curve = f"lambda_{_km(lam):g}_per_km"
        rows = []
        for n in range(1, n_max + 1):
            row = {"n": n, "coverage": math.nan, "utilization": math.nan,
                   "sim_coverage": math.nan, "sim_utilization": math.nan}
            if cfg.engines.analytic:
                pt = b.guard(curve, n, analytic.tradeoff_point, n, lam, d, s)
                if pt is not None:
                    row["coverage"], row["utilization"] = pt
            if cfg.engines.simulate:
                pt = b.guard(curve, n, montecarlo.simulate_tradeoff, n, lam, d, s, phases=phases)
                if pt is not None:
                    row["sim_coverage"], row["sim_utilization"] = pt
            rows.append(row)
        b.add(curve, "coverage/utilization tradeoff",
              {"n": "cluster size", "coverage": "analytic.tradeoff_point", "utilization": "analytic.tradeoff_point",
               "sim_coverage": "montecarlo.simulate_tradeoff", "sim_utilization": "montecarlo.simulate_tradeoff"},
              rows)
        if cfg.engines.analytic:
            pa = analytic.tradeoff_point(n_a, lam, d, s)
            pb = analytic.tradeoff_point(n_b, lam, d, s)
            chords.append({"lambda_per_km": _km(lam), "n_a": n_a, "coverage_a": pa[0], "utilization_a": pa[1],
                           "n_b": n_b, "coverage_b": pb[0], "utilization_b": pb[1]})
    if chords:
        b.add("mixing", "coverage/utilization tradeoff",
              {k: "analytic.best_mixing_sizes + analytic.tradeoff_point" for k in chords[0]}, chords)


def _run_rsu_law(cfg, b):
    s = _single_spec(cfg).rsu_spacing
    cmp = montecarlo.rsu_law_comparison(
        s, spans=np.asarray(cfg.sweep.grid), m_values=range(1, int(cfg.options["m_max"]) + 1),
        phases=int(cfg.options["phases"]), seed=cfg.seed,
    )
    b.add("rsu_law", "RSU-count law given footprint length",
          {"span": "sweep grid", "m": "RSU count threshold",
           "tabulated": "analytic.rsu_ccdf_given_span[tabulated]",
           "grid_derived": "analytic.rsu_ccdf_given_span[grid-derived]",
           "phase_oracle": "montecarlo.rsu_law_comparison"}, cmp.rows())
    b.summary = cmp.summary()


def _run_generic(cfg, b):
    spec0 = cfg.spec
    sweep = cfg.sweep or Sweep("none", (None,))
    single = isinstance(spec0, SingleLaneSpec)
    rows = []
    cols = {sweep.parameter: "sweep grid"}
    if cfg.engines.analytic and single:
        cols.update({"analytic_v2v": "analytic.coverage_v2v", "analytic_v2i": "analytic.coverage_v2i",
                     "analytic_mean_rate": "analytic.mean_shared_rate",
                     "analytic_rsus_per_cluster": "analytic.expected_rsus_per_cluster"})
    if cfg.engines.analytic and not single:
        cols["reduced_bound"] = "analytic.coverage_v2v on analytic.reduce_multilane"
    if cfg.engines.simulate:
        for net in ("v2v+v2i", "v2i"):
            tag = net.replace("+", "_")
            for metric in ("coverage", "mean_rate", "dispersion", "mean_rsus_per_cluster"):
                cols[f"sim_{tag}_{metric}"] = f"montecarlo.estimate_metrics[{net}].{metric}"
                cols[f"sim_{tag}_{metric}_ci"] = "95% half-width"
    if cfg.engines is Engine.BOTH and single:
        cols["relative_difference_v2v"] = "(sim_v2v_v2i_coverage - analytic_v2v) / analytic_v2v"
    for i, x in enumerate(sweep.grid):
        row = {c: math.nan for c in cols}
        row[sweep.parameter] = x if x is not None else math.nan
        spec = spec0 if x is None else b.guard("sweep", x, spec0.replace, **{sweep.parameter: x})
        if spec is None:
            rows.append(row)
            continue
        if cfg.engines.analytic and single:
            row["analytic_v2v"] = _nan(b.guard("sweep", x, analytic.coverage_v2v, spec))
            row["analytic_v2i"] = _nan(b.guard("sweep", x, analytic.coverage_v2i, spec))
            row["analytic_mean_rate"] = _nan(b.guard("sweep", x, analytic.mean_shared_rate, spec))
            row["analytic_rsus_per_cluster"] = _nan(b.guard("sweep", x, analytic.expected_rsus_per_cluster, spec))
        if cfg.engines.analytic and not single:
            red = analytic.reduce_multilane(spec).single_lane(spec.d, spec.rsu_spacing, spec.rho_rsu)
            row["reduced_bound"] = _nan(b.guard("sweep", x, analytic.coverage_v2v, red))
        if cfg.engines.simulate:
            sims = b.guard("sweep", x, _simulate, cfg, spec, seed_offset=i)
            if sims is not None:
                for net, rep in sims.items():
                    tag = net.replace("+", "_")
                    for metric in ("coverage", "mean_rate", "dispersion", "mean_rsus_per_cluster"):
                        est = rep.metric(metric)
                        row[f"sim_{tag}_{metric}"] = est.value
                        row[f"sim_{tag}_{metric}_ci"] = est.half_width
        if "relative_difference_v2v" in cols:
            row["relative_difference_v2v"] = (row["sim_v2v_v2i_coverage"] - row["analytic_v2v"]) / row["analytic_v2v"]
        rows.append(row)
    b.add("sweep", "parameter sweep", cols, rows)


_RUNNERS = {
    "coverage-vs-lambda": _run_coverage,
    "rate-cdf": _run_rate_cdf,
    "dispersion": _run_dispersion,
    "multihoming": _run_multihoming,
    "multilane-dof": _run_dof,
    "lane-configs": _run_lane_configs,
    "segregation": _run_segregation,
    "tradeoff": _run_tradeoff,
    "rsu-law": _run_rsu_law,
}


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "curve"


def run_scenario(config: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Run a preset (or a plain sweep) and write one CSV per curve plus ``manifest.json``."""
    out = Path(out_dir if out_dir is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _Bundle(config)
    bundle.summary = None
    _RUNNERS.get(config.preset, _run_generic)(config, bundle)

    files = []
    entries = []
    for name, figure, columns, rows in bundle.curves:
        fname = f"{_slug(config.scenario)}__{_slug(name)}.csv"
        emit_csv(rows, out / fname, columns=list(columns))
        files.append(out / fname)
        entries.append({
            "file": fname,
            "curve": name,
            "figure": figure,
            "rows": len(rows),
            "columns": {c: {"operation": op, "figure": figure} for c, op in columns.items()},
        })
    manifest = {
        "scenario": config.scenario,
        "preset": config.preset,
        "engines": config.engines.value,
        "seed": config.seed,
        "replications": config.replications,
        "ci_target": config.ci_target,
        "window": config.window,
        "highway": config.spec.to_dict(),
        "sweep": None if config.sweep is None else {"parameter": config.sweep.parameter,
                                                     "grid": list(config.sweep.grid)},
        "options": config.options,
        "outputs": entries,
        "errors": bundle.errors,
    }
    if bundle.summary is not None:
        manifest["summary"] = bundle.summary
    text = json.dumps(manifest, indent=2, sort_keys=True, default=float)
    (out / "manifest.json").write_text(text + "\n", encoding="utf-8")
    files.append(out / "manifest.json")
    return ScenarioResult(out, files, manifest)


# ---------------------------------------------------------------------------
# command line


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="v2vnet", description="V2V relay cluster coverage and rate scenarios.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required):
        sp.add_argument("--config", required=config_required, help="scenario JSON file")
        sp.add_argument("--seed", type=int, help="base RNG seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--ci", type=float, help="target relative CI half-width")
        sp.add_argument("--reps", type=int, help="replications per grid point")

    common(sub.add_parser("analytic", help="evaluate the closed forms over the sweep"), True)
    common(sub.add_parser("simulate", help="Monte Carlo over the sweep"), True)
    common(sub.add_parser("compare", help="closed forms and Monte Carlo side by side"), True)
    pre = sub.add_parser("preset", help="regenerate a figure-data preset")
    pre.add_argument("name", choices=PRESETS)
    common(pre, False)
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    return p


def _load(args, preset=None, engines=None) -> ScenarioConfig:
    doc = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{args.config}: malformed JSON: {exc}") from None
        except OSError as exc:
            raise ConfigurationError(f"cannot read {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object")
    if preset is not None:
        if doc.get("preset", preset) != preset:
            raise ConfigurationError(f"config names preset {doc['preset']!r} but {preset!r} was requested")
        doc["preset"] = preset
    if engines is not None:
        doc["engines"] = engines
    for flag, key in (("seed", "seed"), ("reps", "replications"), ("ci", "ci_target"), ("out", "output")):
        v = getattr(args, flag, None)
        if v is not None:
            doc[key] = v
    return parse_config(doc)


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "validate":
            cfg = _load(args)
            print(f"ok: {cfg.scenario}")
            return 0
        engines = {"analytic": "analytic", "simulate": "simulate", "compare": "both"}.get(args.command)
        cfg = _load(args, preset=getattr(args, "name", None), engines=engines)
        result = run_scenario(cfg)
        for f in result.files:
            print(f)
        if result.manifest["errors"]:
            print(f"{len(result.manifest['errors'])} grid point(s) failed; see manifest.json", file=sys.stderr)
        return 0
    except ConfigurationError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
