"""Scenario generation, benchmark schemes, parameter sweeps and reports."""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .ao import AoConfig, ao_solve, sepm_solve
from .capacity import capacity_given_orientations, max_capacity_batch
from .channel import GainPattern, Scatterer, Scenario, assemble_channel_batch
from .fw import FwConfig
from .geometry import E_Z, SphericalCap, build_upa, rotation_to, sample_cap

SCHEMES = ("proposed", "foa", "sepm", "rfoa", "tfoa", "random_orientation", "isotropic")
AXES = ("antennas", "theta_max", "directivity_p", "power_dbm", "iterations")
RANDOM_DRAWS = 1000
CSV_COLUMNS = ("scheme", "seed", "axis_value", "capacity_bps_hz", "iterations", "wall_ms")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioParams:
    """Physical set-up; defaults reproduce the reference simulation."""

    n_tx_x: int = 4
    n_tx_y: int = 4
    n_rx_x: int = 4
    n_rx_y: int = 4
    wavelength_m: float = 0.0857
    spacing_m: float | None = None  # half a wavelength when unset
    tx_center_m: tuple = (0.0, 0.0, 0.0)
    rx_center_m: tuple = (6.0, 6.0, 30.0)
    tx_pose: str = "identity"  # "identity" or "facing" (local z towards the other panel)
    rx_pose: str = "facing"
    noise_dbm: float = -80.0
    power_dbm: float = 10.0
    theta_max_rad: float = math.pi / 6
    tx_theta_max_rad: float | None = None
    rx_theta_max_rad: float | None = None
    num_scatterers: int = 6
    rcs: float = 5.0
    directivity_p: float = 1.0
    box_min_m: tuple | None = None  # scatterer box; bounding box of the centres when unset
    box_max_m: tuple | None = None

    def with_axis(self, axis: str, value) -> "ScenarioParams":
        if axis == "antennas":
            side = int(round(math.sqrt(value)))
            if side * side != int(value):
                raise ValueError(f"antenna count {value} is not a perfect square")
            return replace(self, n_tx_x=side, n_tx_y=side, n_rx_x=side, n_rx_y=side)
        if axis == "theta_max":
            return replace(self, theta_max_rad=float(value), tx_theta_max_rad=None, rx_theta_max_rad=None)
        if axis == "directivity_p":
            return replace(self, directivity_p=float(value))
        if axis == "power_dbm":
            return replace(self, power_dbm=float(value))
        if axis == "iterations":
            return self
        raise ValueError(f"unknown sweep axis {axis!r}")


def _pose(kind: str, own, other) -> np.ndarray:
    if kind == "identity":
        return np.eye(3)
    if kind == "facing":
        return rotation_to(np.asarray(other, float) - np.asarray(own, float))
    raise ValueError(f"unknown panel pose {kind!r}")


def generate_scenario(params: ScenarioParams = ScenarioParams(), seed: int = 0) -> Scenario:
    """Deterministic scenario; the seed drives scatterer positions and phases."""
    if params.num_scatterers < 0 or params.rcs < 0:
        raise ValueError("scatterer count and cross section must be nonnegative")
    lam = params.wavelength_m
    spacing = lam / 2 if params.spacing_m is None else params.spacing_m
    t0, r0 = np.asarray(params.tx_center_m, float), np.asarray(params.rx_center_m, float)
    tx = build_upa(params.n_tx_x, params.n_tx_y, spacing, t0, _pose(params.tx_pose, t0, r0))
    rx = build_upa(params.n_rx_x, params.n_rx_y, spacing, r0, _pose(params.rx_pose, r0, t0))

    pos_seq, phase_seq, _ = np.random.SeedSequence(seed).spawn(3)
    lo = np.minimum(t0, r0) if params.box_min_m is None else np.asarray(params.box_min_m, float)
    hi = np.maximum(t0, r0) if params.box_max_m is None else np.asarray(params.box_max_m, float)
    D = params.num_scatterers
    positions = np.random.default_rng(pos_seq).uniform(lo, hi, (D, 3))
    phases = np.random.default_rng(phase_seq).uniform(0.0, 2 * np.pi, D)
    scat = tuple(Scatterer(positions[d], params.rcs, float(phases[d])) for d in range(D))

    th_t = params.theta_max_rad if params.tx_theta_max_rad is None else params.tx_theta_max_rad
    th_r = params.theta_max_rad if params.rx_theta_max_rad is None else params.rx_theta_max_rad
    return Scenario(
        wavelength=lam, tx=tx, rx=rx, scatterers=scat,
        pattern=GainPattern(params.directivity_p),
        noise_power=dbm_to_watts(params.noise_dbm),
        power_budget=dbm_to_watts(params.power_dbm),
        tx_cap=SphericalCap(th_t), rx_cap=SphericalCap(th_r),
    )


@dataclass
class RunReport:
    scheme: str
    seed: int
    digest: str
    capacity: float
    trace: list
    wall_ms: float
    converged: bool = True
    axis_value: float | None = None
    f_t: list | None = None
    f_r: list | None = None

    @property
    def iterations(self) -> int:
        return max(len(self.trace) - 1, 0)

    def as_row(self) -> dict:
        return {
            "scheme": self.scheme, "seed": self.seed, "axis_value": self.axis_value,
            "capacity_bps_hz": self.capacity, "iterations": self.iterations, "wall_ms": self.wall_ms,
        }


def random_orientation_search(scenario: Scenario, seed: int, draws: int = RANDOM_DRAWS, chunk: int = 250):
    """Best of ``draws`` cap-uniform orientation sets, each with optimal covariance."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    best = (-1.0, None, None)
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        f_t = sample_cap(scenario.tx_cap, rng, b * scenario.n_tx).reshape(b, scenario.n_tx, 3)
        f_r = sample_cap(scenario.rx_cap, rng, b * scenario.n_rx).reshape(b, scenario.n_rx, 3)
        caps = max_capacity_batch(assemble_channel_batch(scenario, f_t, f_r),
                                  scenario.power_budget, scenario.noise_power)
        i = int(np.argmax(caps))
        if caps[i] > best[0]:
            best = (float(caps[i]), f_t[i], f_r[i])
        done += b
    return best


def run_scheme(scenario: Scenario, scheme: str, cfg: AoConfig | None = None, seed: int = 0,
               keep_orientations: bool = False) -> RunReport:
    cfg = cfg or AoConfig()
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    start = time.perf_counter()
    N, M = scenario.n_tx, scenario.n_rx
    f_t = f_r = None
    converged = True
    if scheme in ("proposed", "rfoa", "tfoa"):
        run_cfg = replace(cfg, mode="full",
                          optimize_rx=scheme in ("proposed", "tfoa"),
                          optimize_tx=scheme in ("proposed", "rfoa"))
        sol = ao_solve(scenario, run_cfg)
        trace, f_t, f_r, converged = sol.trace, sol.f_t, sol.f_r, sol.converged
    elif scheme == "sepm":
        sol = sepm_solve(scenario, replace(cfg, mode="sepm"))
        trace, f_t, f_r, converged = sol.trace, sol.f_t, sol.f_r, sol.converged
    elif scheme == "foa":
        f_t, f_r = np.tile(E_Z, (N, 1)), np.tile(E_Z, (M, 1))
        trace = [capacity_given_orientations(scenario, f_t, f_r).capacity]
    elif scheme == "isotropic":
        iso = scenario.with_(pattern=GainPattern(0.0))
        f_t, f_r = np.tile(E_Z, (N, 1)), np.tile(E_Z, (M, 1))
        trace = [capacity_given_orientations(iso, f_t, f_r).capacity]
    else:
        cap, f_t, f_r = random_orientation_search(scenario, seed)
        trace = [cap]
    wall = (time.perf_counter() - start) * 1e3
    rep = RunReport(scheme, int(seed), scenario.digest(), float(trace[-1]), [float(c) for c in trace],
                    wall, bool(converged))
    if keep_orientations:
        rep.f_t, rep.f_r = np.asarray(f_t).tolist(), np.asarray(f_r).tolist()
    return rep


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    seeds: tuple
    schemes: tuple = ("proposed",)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.values or not self.seeds:
            raise ValueError("sweep needs at least one value and one seed")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ValueError(f"unknown schemes {sorted(bad)}")


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    summary: list = field(default_factory=list)

    def mean(self, scheme: str, value) -> float:
        for s in self.summary:
            if s["scheme"] == scheme and s["axis_value"] == value:
                return s["mean"]
        raise KeyError((scheme, value))


def _sweep_point(args):
    axis, value, seed, schemes, params, cfg = args
    if axis == "iterations":
        return []  # handled per seed in run_sweep
    scenario = generate_scenario(params.with_axis(axis, value), seed)
    out = []
    for scheme in schemes:
        rep = run_scheme(scenario, scheme, cfg, seed)
        rep.axis_value = value
        out.append(rep)
    return out


def _iteration_rows(args):
    values, seed, schemes, params, cfg = args
    scenario = generate_scenario(params, seed)
    out = []
    for scheme in schemes:
        rep = run_scheme(scenario, scheme, cfg, seed)
        for v in values:
            idx = min(int(v), len(rep.trace) - 1)
            out.append(RunReport(scheme, seed, rep.digest, rep.trace[idx], rep.trace[: idx + 1],
                                 rep.wall_ms, rep.converged, v))
    return out


def run_sweep(spec: SweepSpec, base_params: ScenarioParams = ScenarioParams(), cfg: AoConfig | None = None,
              workers: int = 1) -> SweepResult:
    """Every (axis value, seed, scheme) combination, plus per-point mean and std."""
    cfg = cfg or AoConfig()
    if spec.axis == "iterations":
        fn = _iteration_rows
        tasks = [(spec.values, s, spec.schemes, base_params, cfg) for s in spec.seeds]
    else:
        fn = _sweep_point
        tasks = [(spec.axis, v, s, spec.schemes, base_params, cfg)
                 for v, s in itertools.product(spec.values, spec.seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(fn, tasks))
    else:
        chunks = [fn(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    v_idx = {v: i for i, v in enumerate(spec.values)}
    s_idx = {s: i for i, s in enumerate(spec.schemes)}
    rows.sort(key=lambda r: (v_idx[r.axis_value], s_idx[r.scheme], r.seed))
    return SweepResult(spec, rows, summarize(rows, spec))


def summarize(rows, spec: SweepSpec) -> list:
    out = []
    for v in spec.values:
        for scheme in spec.schemes:
            caps = np.array([r.capacity for r in rows if r.axis_value == v and r.scheme == scheme])
            if caps.size:
                out.append({"axis": spec.axis, "axis_value": v, "scheme": scheme, "mean": float(caps.mean()),
                            "std": float(caps.std(ddof=0)), "n": int(caps.size)})
    return out


def emit_report(reports, fmt: str, path) -> None:
    """Write run reports as CSV (one row per report) or JSON (with traces)."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in reports:
                w.writerow(r.as_row())
    elif fmt == "json":
        payload = []
        for r in reports:
            d = asdict(r)
            d["capacity_bps_hz"] = d.pop("capacity")
            d["iterations"] = r.iterations
            payload.append(d)
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def emit_summary(summary, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=("axis", "axis_value", "scheme", "mean", "std", "n"), lineterminator="\n")
        w.writeheader()
        w.writerows(summary)


def emit_trace(reports, path) -> None:
    """Per-iteration convergence rows: scheme, seed, iteration, capacity."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scheme", "seed", "iteration", "capacity_bps_hz"))
        for r in reports:
            for i, c in enumerate(r.trace):
                w.writerow((r.scheme, r.seed, i, c))


def read_csv_report(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"] = int(r["seed"])
        r["capacity_bps_hz"] = float(r["capacity_bps_hz"])
        r["iterations"] = int(r["iterations"])
        r["wall_ms"] = float(r["wall_ms"])
        r["axis_value"] = float(r["axis_value"]) if r["axis_value"] else None
    return rows


# configuration files -------------------------------------------------------

_AO_KEYS = {
    "ao_max_outer": ("max_outer", int),
    "ao_tol_bps_hz": ("tol", float),
    "use_p1_closed_form": ("use_p1_closed_form", bool),
}
_FW_KEYS = {
    "fw_max_iters": ("max_iters", int),
    "fw_tol": ("tol", float),
    "fw_armijo_c": ("armijo_c", float),
    "fw_armijo_beta": ("armijo_beta", float),
}


def parse_config(data: dict) -> tuple[ScenarioParams, AoConfig]:
    """Split a flat key/value mapping into scenario parameters and solver settings."""
    names = {f.name for f in fields(ScenarioParams)}
    sp, ao, fw = {}, {}, {}
    for key, value in data.items():
        if key in names:
            sp[key] = tuple(value) if isinstance(value, list) else value
        elif key in _AO_KEYS:
            name, typ = _AO_KEYS[key]
            ao[name] = typ(value)
        elif key in _FW_KEYS:
            name, typ = _FW_KEYS[key]
            fw[name] = typ(value)
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    return ScenarioParams(**sp), AoConfig(fw=FwConfig(**fw), **ao)


def load_toml(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with Path(path).open("rb") as fh:
        return tomllib.load(fh)


def load_config(path) -> tuple[ScenarioParams, AoConfig]:
    return parse_config(load_toml(path))


def load_sweep_spec(path) -> tuple[SweepSpec, ScenarioParams, AoConfig]:
    data = dict(load_toml(path))
    axis = data.pop("axis")
    values = tuple(data.pop("values"))
    if "seeds" in data:
        seeds = tuple(int(s) for s in data.pop("seeds"))
    else:
        start = int(data.pop("seed_start", 0))
        seeds = tuple(range(start, start + int(data.pop("num_seeds", 20))))
    schemes = tuple(data.pop("schemes", ["proposed"]))
    params, cfg = parse_config(data)
    return SweepSpec(axis, values, seeds, schemes), params, cfg
