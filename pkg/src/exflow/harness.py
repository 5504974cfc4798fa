"""Config files, scenario presets, CSV output and the scenario runner.

Config files are flat ``key = value`` documents.  Keys use dotted sections
and indexed patches::

    # comment
    map.preset = disk                 # or "ellipse:0.5"
    map.beta = 1.0                    # explicit map instead of a preset
    map.inverse_coeffs = [[0, 0], [0.5, 0]]
    map.newton_tol = 1e-12
    map.newton_max_iter = 50
    patch[0].center = [2.5, 0.0]
    patch[0].radius = 0.8
    patch[0].profile = cosine-bump    # or uniform
    patch[0].total_mass = 6.283185307179586
    patch[0].grid_n = 36
    boundary_circulation = 0.0
    dt = 0.005
    t_end = 20.0
    diagnostic_stride = 10
    blob_delta = 0.08                 # default: 2 grid spacings, mapped
    even_symmetric = false
    seed = 0

Values are JSON; anything that fails to parse as JSON is read as a bare
string.  Unknown and duplicate keys are rejected.
"""
from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticRecord, FitError, GrowthFit, fit_growth_exponent
from .dynamics import PatchSpec, SimulationConfig, SimulationError, check_patch, run
from .geometry import ExteriorMapSpec, GeometryError

CSV_COLUMNS = (
    "t", "mass", "alpha", "energy", "log_moment", "j_theta1", "j_theta2",
    "inertia", "center_x", "center_y", "r_support_phys", "r_support_mapped",
    "f_2", "f_4", "f_8", "f_16", "theta",
)

_TOP_KEYS = {
    "boundary_circulation": float,
    "dt": float,
    "t_end": float,
    "diagnostic_stride": int,
    "blob_delta": float,
    "even_symmetric": bool,
    "seed": int,
}
_MAP_KEYS = {"preset", "beta", "inverse_coeffs", "newton_tol", "newton_max_iter"}
_PATCH_KEYS = {"center", "radius", "profile", "total_mass", "grid_n"}
_PATCH_RE = re.compile(r"^patch\[(\d+)\]\.(\w+)$")


class ConfigError(ValueError):
    """Malformed config document; ``key`` names the offending key path."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class ConfigValidationError(ValueError):
    """Well-formed config describing a physically invalid setup."""


# -- parsing ----------------------------------------------------------------

def parse_pairs(text: str) -> dict[str, object]:
    """Read ``key = value`` lines into a dict, rejecting duplicates."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError("duplicate key", key)
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _strip_comment(line: str) -> str:
    in_str = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
    return line


def _coerce(key: str, value, kind):
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"expected true/false, got {value!r}", key)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key)
    return float(value)


def _vector(key, value, n=2):
    if not (isinstance(value, list) and len(value) == n
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"expected a list of {n} numbers, got {value!r}", key)
    return tuple(float(v) for v in value)


def config_from_pairs(pairs: dict[str, object]) -> SimulationConfig:
    top: dict[str, object] = {}
    map_kv: dict[str, object] = {}
    patch_kv: dict[int, dict[str, object]] = {}
    for key, value in pairs.items():
        if key in _TOP_KEYS:
            top[key] = _coerce(key, value, _TOP_KEYS[key])
        elif key.startswith("map."):
            sub = key[4:]
            if sub not in _MAP_KEYS:
                raise ConfigError("unknown key", key)
            map_kv[sub] = value
        elif (m := _PATCH_RE.match(key)):
            idx, sub = int(m.group(1)), m.group(2)
            if sub not in _PATCH_KEYS:
                raise ConfigError("unknown key", key)
            patch_kv.setdefault(idx, {})[sub] = value
        else:
            raise ConfigError("unknown key", key)

    for req in ("dt", "t_end"):
        if req not in top:
            raise ConfigError("missing required key", req)
    spec = _map_from(map_kv)
    if not patch_kv:
        raise ConfigError("missing required key", "patch[0].center")
    if sorted(patch_kv) != list(range(len(patch_kv))):
        raise ConfigError("patch indices must be 0, 1, 2, ... without gaps", "patch")
    patches = tuple(_patch_from(i, patch_kv[i]) for i in range(len(patch_kv)))
    for p in patches:
        try:
            check_patch(spec, p)
        except GeometryError as exc:
            raise ConfigValidationError(str(exc)) from None
    try:
        return SimulationConfig(map=spec, patches=patches, **top)
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from None


def _map_from(kv: dict[str, object]) -> ExteriorMapSpec:
    extra = {}
    if "newton_tol" in kv:
        extra["newton_tol"] = _coerce("map.newton_tol", kv["newton_tol"], float)
    if "newton_max_iter" in kv:
        extra["newton_max_iter"] = _coerce("map.newton_max_iter", kv["newton_max_iter"], int)
    try:
        if "preset" in kv:
            if "beta" in kv or "inverse_coeffs" in kv:
                raise ConfigError("give either map.preset or map.beta/map.inverse_coeffs", "map.preset")
            if not isinstance(kv["preset"], str):
                raise ConfigError("expected a preset name", "map.preset")
            return ExteriorMapSpec.from_preset(kv["preset"], **extra)
        if "beta" not in kv:
            raise ConfigError("missing required key", "map.preset")
        beta = _coerce("map.beta", kv["beta"], float)
        raw = kv.get("inverse_coeffs", [])
        if not isinstance(raw, list):
            raise ConfigError("expected a list of [re, im] pairs", "map.inverse_coeffs")
        coeffs = tuple(complex(*_vector(f"map.inverse_coeffs[{i}]", c)) for i, c in enumerate(raw))
        return ExteriorMapSpec(beta=beta, inverse_coeffs=coeffs, **extra)
    except GeometryError as exc:
        raise ConfigValidationError(str(exc)) from None


def _patch_from(i: int, kv: dict[str, object]) -> PatchSpec:
    key = f"patch[{i}]"
    for req in ("center", "radius"):
        if req not in kv:
            raise ConfigError("missing required key", f"{key}.{req}")
    args = {
        "center": _vector(f"{key}.center", kv["center"]),
        "radius": _coerce(f"{key}.radius", kv["radius"], float),
    }
    if "profile" in kv:
        if kv["profile"] not in ("uniform", "cosine-bump"):
            raise ConfigError(f"unknown profile {kv['profile']!r}", f"{key}.profile")
        args["profile"] = kv["profile"]
    if "total_mass" in kv:
        args["total_mass"] = _coerce(f"{key}.total_mass", kv["total_mass"], float)
    if "grid_n" in kv:
        args["grid_n"] = _coerce(f"{key}.grid_n", kv["grid_n"], int)
    try:
        return PatchSpec(**args)
    except ValueError as exc:
        raise ConfigValidationError(f"{key}: {exc}") from None


def parse_config(source: str | os.PathLike) -> SimulationConfig:
    """Parse a config from a path or from inline text (anything containing '=')."""
    text = str(source) if isinstance(source, str) and "=" in source else Path(source).read_text()
    return config_from_pairs(parse_pairs(text))


def config_to_pairs(config: SimulationConfig) -> dict[str, object]:
    """Fully resolved key/value form; parsing it back gives an equal config."""
    spec = config.map
    out: dict[str, object] = {
        "map.beta": spec.beta,
        "map.inverse_coeffs": [[c.real, c.imag] for c in spec.inverse_coeffs],
        "map.newton_tol": spec.newton_tol,
        "map.newton_max_iter": spec.newton_max_iter,
    }
    for i, p in enumerate(config.patches):
        out[f"patch[{i}].center"] = list(p.center)
        out[f"patch[{i}].radius"] = p.radius
        out[f"patch[{i}].profile"] = p.profile
        out[f"patch[{i}].total_mass"] = p.total_mass
        out[f"patch[{i}].grid_n"] = p.grid_n
    for key in _TOP_KEYS:
        out[key] = getattr(config, key)
    return out


def format_config(config: SimulationConfig) -> str:
    lines = [f"{k} = {json.dumps(v)}" for k, v in config_to_pairs(config).items()]
    return "\n".join(lines) + "\n"


# -- scenarios ----------------------------------------------------------------

TWO_PI = 2.0 * math.pi

# Each preset is a flat key/value dict in the config-file vocabulary.
SCENARIOS: dict[str, dict[str, object]] = {
    "orbit-regression": {
        "map.preset": "disk",
        "patch[0].center": [2.0, 0.0], "patch[0].radius": 0.1,
        "patch[0].profile": "uniform", "patch[0].total_mass": TWO_PI, "patch[0].grid_n": 1,
        "boundary_circulation": -TWO_PI,  # alpha = 0
        "blob_delta": 0.0, "dt": 1e-3, "t_end": 20.0, "diagnostic_stride": 100,
    },
    "disk-generic": {
        "map.preset": "disk",
        "patch[0].center": [2.5, 0.0], "patch[0].radius": 0.8,
        "patch[0].profile": "cosine-bump", "patch[0].total_mass": TWO_PI, "patch[0].grid_n": 36,
        "boundary_circulation": 0.0,  # alpha = m
        "dt": 5e-3, "t_end": 20.0, "diagnostic_stride": 20,
    },
    "disk-even": {
        "map.preset": "disk",
        "patch[0].center": [2.5, 0.0], "patch[0].radius": 0.8,
        "patch[0].profile": "cosine-bump", "patch[0].total_mass": math.pi, "patch[0].grid_n": 36,
        "patch[1].center": [-2.5, 0.0], "patch[1].radius": 0.8,
        "patch[1].profile": "cosine-bump", "patch[1].total_mass": math.pi, "patch[1].grid_n": 36,
        "boundary_circulation": 0.0,  # alpha = m
        "even_symmetric": True,
        "dt": 5e-3, "t_end": 20.0, "diagnostic_stride": 20,
    },
    "ellipse-theta1": {
        "map.preset": "ellipse:0.5",
        "patch[0].center": [0.0, 2.0], "patch[0].radius": 0.7,
        "patch[0].profile": "cosine-bump", "patch[0].total_mass": TWO_PI, "patch[0].grid_n": 28,
        "boundary_circulation": 0.0,  # 0 < alpha = m
        "dt": 5e-3, "t_end": 20.0, "diagnostic_stride": 20,
    },
    "ellipse-theta2-negative-alpha": {
        "map.preset": "ellipse:0.5",
        "patch[0].center": [0.0, 2.0], "patch[0].radius": 0.7,
        "patch[0].profile": "cosine-bump", "patch[0].total_mass": TWO_PI, "patch[0].grid_n": 28,
        "boundary_circulation": -2.0 * TWO_PI,  # alpha = -m
        "dt": 5e-3, "t_end": 20.0, "diagnostic_stride": 20,
    },
    "ellipse-theta2-large-alpha": {
        "map.preset": "ellipse:0.5",
        "patch[0].center": [0.0, 2.0], "patch[0].radius": 0.7,
        "patch[0].profile": "cosine-bump", "patch[0].total_mass": TWO_PI, "patch[0].grid_n": 28,
        "boundary_circulation": TWO_PI,  # alpha = 2m
        "dt": 5e-3, "t_end": 20.0, "diagnostic_stride": 20,
    },
}


@dataclass(frozen=True)
class Scenario:
    name: str
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario (choose from {', '.join(SCENARIOS)})", "scenario")

    def pairs(self) -> dict[str, object]:
        base = dict(SCENARIOS[self.name])
        over = dict(self.overrides)
        if any(k.startswith("map.") for k in over):
            base = {k: v for k, v in base.items() if not k.startswith("map.")}
        base.update(over)
        return base

    def config(self) -> SimulationConfig:
        return config_from_pairs(self.pairs())


def cli_overrides(dt=None, t_end=None, grid_n=None, seed=None, n_patches=None) -> dict[str, object]:
    over: dict[str, object] = {}
    if dt is not None:
        over["dt"] = dt
    if t_end is not None:
        over["t_end"] = t_end
    if seed is not None:
        over["seed"] = seed
    if grid_n is not None:
        for i in range(n_patches or 1):
            over[f"patch[{i}].grid_n"] = grid_n
    return over


# -- output -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def record_row(rec: DiagnosticRecord) -> list:
    tail = dict(rec.tail_mass)
    return [
        rec.t, rec.mass, rec.alpha, rec.energy, rec.log_moment, rec.j_theta1, rec.j_theta2,
        rec.inertia, rec.center[0], rec.center[1], rec.r_support_phys, rec.r_support_mapped,
        tail.get(2.0, float("nan")), tail.get(4.0, float("nan")),
        tail.get(8.0, float("nan")), tail.get(16.0, float("nan")), int(rec.theta),
    ]


def format_csv(records, aborted_at: float | None = None) -> str:
    lines = ["#" + ",".join(CSV_COLUMNS)]
    lines += [",".join(_fmt(v) for v in record_row(r)) for r in records]
    if aborted_at is not None:
        lines.append(f"# ABORTED t={aborted_at!r}")
    return "\n".join(lines) + "\n"


def read_csv(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Load a diagnostics CSV into column arrays (comment lines after the header skipped)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '#' header")
    names = lines[0][1:].split(",")
    try:
        rows = [list(map(float, ln.split(","))) for ln in lines[1:] if ln and not ln.startswith("#")]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    data = np.array(rows, dtype=np.float64).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


FIT_COLUMNS = {"r_phys": "r_support_phys", "r_mapped": "r_support_mapped"}


def fit_column(cols: dict[str, np.ndarray], col: str, t_lo: float, t_hi: float) -> GrowthFit:
    name = FIT_COLUMNS.get(col, col)
    return fit_growth_exponent(np.column_stack([cols["t"], cols[name]]), t_lo, t_hi)


def format_fit(label: str, fit: GrowthFit) -> str:
    lo, hi = fit.fit_window
    return (f"{label}: exponent={fit.exponent!r} prefactor={fit.prefactor!r} "
            f"residual={fit.residual!r} window={lo!r}:{hi!r} n={fit.n_samples}")


def orbit_angular_velocity(gamma: float, rho: float, alpha: float) -> float:
    """Angular velocity of a single point vortex outside the unit disk.

    The vortex is carried by its image at rho* = 1/rho and the harmonic field:
    Omega = -gamma / (2 pi rho (rho - 1/rho)) + alpha / (2 pi rho^2).
    """
    return -gamma / (TWO_PI * rho * (rho - 1.0 / rho)) + alpha / (TWO_PI * rho * rho)


class OrbitTracker:
    """Observer that measures the first full revolution of particle 0."""

    def __init__(self, x0):
        self.theta0 = math.atan2(x0[1], x0[0])
        self.prev = (0.0, 0.0)  # (t, unwrapped angle change)
        self.period: float | None = None

    def __call__(self, step, t, ensemble):
        if self.period is not None:
            return
        x, y = ensemble.positions[0]
        t0, a0 = self.prev
        raw = math.atan2(y, x) - self.theta0
        a1 = a0 + math.remainder(raw - a0, TWO_PI)
        if abs(a1) >= TWO_PI:
            target = math.copysign(TWO_PI, a1)
            self.period = t0 + (t - t0) * (target - a0) / (a1 - a0)
        self.prev = (t, a1)


@dataclass
class ScenarioResult:
    status: int
    records: list
    config: SimulationConfig
    csv_path: Path
    fits: dict[str, GrowthFit | None]
    orbit_rel_error: float | None = None
    error: str | None = None


def run_scenario(scenario: Scenario | str, out_dir: str | os.PathLike = ".",
                 config: SimulationConfig | None = None, fit_window: tuple[float, float] | None = None) -> ScenarioResult:
    """Run a preset and write diagnostics.csv, fit.txt and config.resolved.

    Returns a result whose ``status`` is 0 on success and 1 if the simulation
    aborted (the partial CSV then ends with '# ABORTED t=<t>').
    """
    if isinstance(scenario, str):
        scenario = Scenario(scenario)
    if config is None:
        config = scenario.config()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(format_config(config))

    tracker = None
    if scenario.name == "orbit-regression":
        p = config.patches[0]
        tracker = OrbitTracker(p.center)

    status, error, aborted = 0, None, None
    try:
        records, _ = run(config, observer=tracker)
    except SimulationError as exc:
        records, status, error, aborted = exc.records, 1, str(exc), exc.t
    csv_path = out / "diagnostics.csv"
    csv_path.write_text(format_csv(records, aborted))

    lo, hi = fit_window if fit_window is not None else (1.0, config.t_end)
    series = {
        "r_support_phys": [(r.t, r.r_support_phys) for r in records],
        "r_support_mapped": [(r.t, r.r_support_mapped) for r in records],
    }
    fits: dict[str, GrowthFit | None] = {}
    lines = [f"# growth fits, log r = log M + p log(1+t), t in [{lo!r}, {hi!r}]"]
    for col, s in series.items():
        try:
            fits[col] = fit_growth_exponent(s, lo, hi)
            lines.append(format_fit(col, fits[col]))
        except FitError as exc:
            fits[col] = None
            lines.append(f"{col}: no fit ({exc})")

    orbit_err = None
    if tracker is not None:
        p = config.patches[0]
        rho = math.hypot(*p.center)
        omega = orbit_angular_velocity(p.total_mass, rho, p.total_mass + config.boundary_circulation)
        expected = TWO_PI / abs(omega)
        lines.append(f"orbit_period_expected={expected!r}")
        if tracker.period is None:
            lines.append("orbit_period_measured=none (run shorter than one revolution)")
        else:
            orbit_err = abs(tracker.period - expected) / expected
            lines.append(f"orbit_period_measured={tracker.period!r}")
            lines.append(f"orbit_period_rel_error={orbit_err!r}")
    if error is not None:
        lines.append(f"# ABORTED: {error}")
    (out / "fit.txt").write_text("\n".join(lines) + "\n")
    return ScenarioResult(status, records, config, csv_path, fits, orbit_err, error)
