"""
Run configuration.

Flat ``key=value`` files, one setting per line, ``#`` comments. Keys are
namespaced with dots::

    # reference operating point
    lattice.r=19.0
    lattice.s=2.86
    drive.omega_hz=4990
    drive.n=2
    drive.a_pm_deg=8.0
    drive.a_am=0.10

Unknown keys, duplicate keys, missing required keys and values that fail a
type invariant raise ConfigError naming the key and line.
"""

import math
import os
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy import constants

from errors import ConfigError
from lattice_model import DepthDistribution, DriveSchedule, LatticeParams, degrees_to_radians
from propagator import PropagationConfig
from spectral_grid import SpectralGrid, make_grid
from stationary_states import DEFAULT_CLUSTER_GAP, DEFAULT_LOCALIZATION_THRESHOLD

REQUIRED_KEYS = ("lattice.r", "lattice.s", "drive.omega_hz")

DEFAULT_SWEEP_A_AM = [round(0.02 * i, 2) for i in range(11)]
DEFAULT_VISIBILITY_A_PM_DEG = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0]


def _float_list(text: str) -> List[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def _int_list(text: str) -> List[int]:
    return [int(item) for item in text.split(",") if item.strip()]


# key -> value parser
KEYS: Dict[str, Callable[[str], object]] = {
    "lattice.r": float,
    "lattice.s": float,
    "lattice.omega_r_hz": float,
    "lattice.a_m": float,
    "lattice.mass_amu": float,
    "drive.omega_hz": float,
    "drive.n": int,
    "drive.a_pm_deg": float,
    "drive.a_pm_rad": float,
    "drive.a_am": float,
    "drive.delta_tau_us": float,
    "grid.n_wells": int,
    "grid.points_per_well": int,
    "grid.rounding": str,
    "propagation.dt_us": float,
    "propagation.steps_per_period": int,
    "propagation.absorber_width": float,
    "propagation.absorber_strength": float,
    "propagation.record_stride": int,
    "basis.method": str,
    "basis.localization_threshold": float,
    "basis.cluster_gap": float,
    "depth.mode": str,
    "depth.file": str,
    "depth.mean": float,
    "depth.rel_sigma": float,
    "depth.lower": float,
    "depth.upper": float,
    "depth.nodes": int,
    "sweep.a_pm_deg": _float_list,
    "sweep.a_am": _float_list,
    "sweep.n": _int_list,
    "scan.tau_points": int,
    "visibility.a_pm_deg": _float_list,
    "output.dir": str,
}


class GridSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_wells: int = Field(17, description="Odd number of wells")
    points_per_well: int = Field(64, description="Requested resolution per well")
    rounding: Literal["strict", "auto"] = "auto"

    def build(self) -> SpectralGrid:
        return make_grid(self.n_wells, self.points_per_well, rounding=self.rounding)


class BasisSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: Literal["fourier", "finite_difference"] = "fourier"
    localization_threshold: float = Field(DEFAULT_LOCALIZATION_THRESHOLD, gt=0, le=1)
    cluster_gap: float = Field(DEFAULT_CLUSTER_GAP, ge=0)


class DepthSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["single", "gaussian", "file"] = "single"
    file: Optional[str] = Field(None, description="Two columns r, weight; resolved against the config file")
    mean: Optional[float] = Field(None, gt=0, description="Defaults to lattice.r")
    rel_sigma: float = Field(0.15, gt=0)
    lower: float = Field(10.0, gt=0)
    upper: float = Field(30.0, gt=0)
    nodes: int = Field(9, ge=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lattice: LatticeParams
    drive: DriveSchedule
    grid: GridSettings = GridSettings()
    propagation: PropagationConfig = PropagationConfig()
    basis: BasisSettings = BasisSettings()
    depth: DepthSettings = DepthSettings()
    depth_table: Optional[List[Tuple[float, float]]] = Field(None, description="Loaded depth.file entries")
    sweep_a_pm: List[float] = Field(default_factory=lambda: [degrees_to_radians(8.0)], min_length=1)
    sweep_a_am: List[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP_A_AM), min_length=1)
    sweep_n: List[int] = Field(default_factory=lambda: [2], min_length=1)
    tau_points: int = Field(16, ge=4, description="Δτ samples per fringe period")
    visibility_a_pm: List[float] = Field(
        default_factory=lambda: [degrees_to_radians(d) for d in DEFAULT_VISIBILITY_A_PM_DEG], min_length=1
    )
    output_dir: Optional[str] = None
    source: Dict[str, str] = Field(default_factory=dict, description="Raw key=value pairs as read")

    def depth_distribution(self, mode: Optional[str] = None) -> Optional[DepthDistribution]:
        """Configured distribution; None means a single-depth run"""
        mode = mode or self.depth.mode
        if mode == "single":
            return None
        if mode == "file":
            if self.depth_table is None:
                raise ConfigError("depth.mode=file needs depth.file", key="depth.file")
            return DepthDistribution.from_weights([r for r, _ in self.depth_table], [w for _, w in self.depth_table])
        return DepthDistribution.truncated_gaussian(
            mean=self.depth.mean or self.lattice.r, rel_sigma=self.depth.rel_sigma,
            lower=self.depth.lower, upper=self.depth.upper, nodes=self.depth.nodes,
        )


def read_config_lines(text: str) -> Dict[str, Tuple[str, int]]:
    """key -> (raw value, line number); comments and blank lines skipped"""
    entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got '{line}'", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError("unknown key", key=key, line=number)
        if key in entries:
            raise ConfigError(f"duplicate key, first set on line {entries[key][1]}", key=key, line=number)
        entries[key] = (value, number)
    return entries


def load_depth_table(path: Path) -> List[Tuple[float, float]]:
    """Whitespace- or comma-separated (r, weight) rows"""
    table = []
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}: expected 'r weight'", key="depth.file", line=number)
        try:
            table.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ConfigError(f"{path}: unparsable row '{raw.strip()}'", key="depth.file", line=number)
    if not table:
        raise ConfigError(f"{path}: no depth entries", key="depth.file")
    return table


class _Builder:
    """Typed access to parsed entries, remembering which key fed each model field"""

    def __init__(self, entries: Dict[str, Tuple[str, int]]):
        self.entries = entries
        self.values = {}
        for key, (raw, line) in entries.items():
            try:
                self.values[key] = KEYS[key](raw)
            except ValueError:
                raise ConfigError(f"cannot parse value '{raw}'", key=key, line=line)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def line(self, key: str) -> Optional[int]:
        return self.entries[key][1] if key in self.entries else None

    def build(self, model, fields: Dict[str, object], origin: Dict[str, str]):
        """Construct a model; validation errors are reported against the config key"""
        payload = {name: value for name, value in fields.items() if value is not None}
        try:
            return model(**payload)
        except ValidationError as exc:
            detail = exc.errors()[0]
            field = str(detail["loc"][0]) if detail["loc"] else None
            key = origin.get(field, next(iter(origin.values()), None))
            raise ConfigError(detail["msg"], key=key, line=self.line(key)) from exc


def parse_config_text(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    entries = read_config_lines(text)
    for key in REQUIRED_KEYS:
        if key not in entries:
            raise ConfigError("missing required key", key=key)
    b = _Builder(entries)

    omega_r_hz = b.get("lattice.omega_r_hz")
    mass_amu = b.get("lattice.mass_amu")
    lattice = b.build(LatticeParams, {
        "r": b.get("lattice.r"),
        "s": b.get("lattice.s"),
        "omega_r": 2.0 * math.pi * omega_r_hz if omega_r_hz is not None else None,
        "a": b.get("lattice.a_m"),
        "mass": mass_amu * constants.atomic_mass if mass_amu is not None else None,
    }, {"r": "lattice.r", "s": "lattice.s", "omega_r": "lattice.omega_r_hz",
        "a": "lattice.a_m", "mass": "lattice.mass_amu"})

    if "drive.a_pm_deg" in entries and "drive.a_pm_rad" in entries:
        raise ConfigError("set only one of drive.a_pm_deg and drive.a_pm_rad",
                          key="drive.a_pm_rad", line=b.line("drive.a_pm_rad"))
    if "drive.a_pm_rad" in entries:
        a_pm, a_pm_key = b.get("drive.a_pm_rad"), "drive.a_pm_rad"
    else:
        a_pm, a_pm_key = degrees_to_radians(b.get("drive.a_pm_deg", 8.0)), "drive.a_pm_deg"
    delta_tau_us = b.get("drive.delta_tau_us", 0.0)
    drive = b.build(DriveSchedule, {
        "a_pm": a_pm,
        "a_am": b.get("drive.a_am", 0.10),
        "omega": 2.0 * math.pi * b.get("drive.omega_hz"),
        "n": b.get("drive.n", 2),
        "delta_tau": delta_tau_us * 1e-6,
    }, {"a_pm": a_pm_key, "a_am": "drive.a_am", "omega": "drive.omega_hz",
        "n": "drive.n", "delta_tau": "drive.delta_tau_us"})

    grid = b.build(GridSettings, {
        "n_wells": b.get("grid.n_wells"),
        "points_per_well": b.get("grid.points_per_well"),
        "rounding": b.get("grid.rounding"),
    }, {"n_wells": "grid.n_wells", "points_per_well": "grid.points_per_well", "rounding": "grid.rounding"})

    dt_us = b.get("propagation.dt_us")
    propagation = b.build(PropagationConfig, {
        "dt": dt_us * 1e-6 if dt_us is not None else None,
        "steps_per_period": b.get("propagation.steps_per_period"),
        "absorber_width": b.get("propagation.absorber_width"),
        "absorber_strength": b.get("propagation.absorber_strength"),
        "record_stride": b.get("propagation.record_stride"),
    }, {"dt": "propagation.dt_us", "steps_per_period": "propagation.steps_per_period",
        "absorber_width": "propagation.absorber_width", "absorber_strength": "propagation.absorber_strength",
        "record_stride": "propagation.record_stride"})

    basis = b.build(BasisSettings, {
        "method": b.get("basis.method"),
        "localization_threshold": b.get("basis.localization_threshold"),
        "cluster_gap": b.get("basis.cluster_gap"),
    }, {"method": "basis.method", "localization_threshold": "basis.localization_threshold",
        "cluster_gap": "basis.cluster_gap"})

    depth_fields = ("mode", "file", "mean", "rel_sigma", "lower", "upper", "nodes")
    depth = b.build(DepthSettings, {name: b.get(f"depth.{name}") for name in depth_fields},
                    {name: f"depth.{name}" for name in depth_fields})

    depth_table = None
    if depth.file is not None:
        path = Path(depth.file)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"depth file '{path}' does not exist", key="depth.file", line=b.line("depth.file"))
        depth_table = load_depth_table(path)

    sweep_a_pm_deg = b.get("sweep.a_pm_deg")
    visibility_deg = b.get("visibility.a_pm_deg")
    config = b.build(RunConfig, {
        "lattice": lattice,
        "drive": drive,
        "grid": grid,
        "propagation": propagation,
        "basis": basis,
        "depth": depth,
        "depth_table": depth_table,
        "sweep_a_pm": [degrees_to_radians(d) for d in sweep_a_pm_deg] if sweep_a_pm_deg is not None else None,
        "sweep_a_am": b.get("sweep.a_am"),
        "sweep_n": b.get("sweep.n"),
        "tau_points": b.get("scan.tau_points"),
        "visibility_a_pm": [degrees_to_radians(d) for d in visibility_deg] if visibility_deg is not None else None,
        "output_dir": b.get("output.dir"),
        "source": {key: raw for key, (raw, _) in entries.items()},
    }, {"sweep_a_pm": "sweep.a_pm_deg", "sweep_a_am": "sweep.a_am", "sweep_n": "sweep.n",
        "tau_points": "scan.tau_points", "visibility_a_pm": "visibility.a_pm_deg", "output_dir": "output.dir"})

    if depth.mode == "file" and depth_table is None:
        raise ConfigError("depth.mode=file needs depth.file", key="depth.mode", line=b.line("depth.mode"))
    return config


def parse_config(path) -> RunConfig:
    """Read and validate a run configuration file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file '{path}' not found")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config file '{path}': {exc}")
    return parse_config_text(text, base_dir=path.parent)


def default_output_dir(config: Optional[RunConfig] = None) -> str:
    """output.dir, else LEAKCTL_OUTPUT_DIR, else ./results"""
    if config is not None and config.output_dir:
        return config.output_dir
    return os.getenv("LEAKCTL_OUTPUT_DIR", "results")
