"""Scenario configuration files (TOML), the scenario catalog and its validation.

One file describes one scenario.  Every section maps onto a frozen
dataclass; unknown keys are rejected, defaults are filled in, and
:func:`echo_config` writes back a file that parses to an equal config.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import OfdmGrid, make_mask
from .fisher import MODES, DmimoLayout
from .geometry import SPEED_OF_LIGHT, ArrayGeometry, Region2D, TrajectorySpec, build_ula


class ConfigError(ValueError):
    """Invalid configuration: syntax, unknown key, bad value or unsupported scenario."""


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    title: str
    commands: tuple[str, ...] = ()

    @property
    def supported(self) -> bool:
        return bool(self.commands)


CATALOG = (
    CatalogEntry("E-L1", "D-MIMO localization, phase-coherent vs TDOA", ("peb", "localize")),
    CatalogEntry("E-L2", "single-BS ELAA localization, narrowband", ("beamfocus", "peb", "localize")),
    CatalogEntry("E-L3", "6D localization (position and orientation)"),
    CatalogEntry("E-S1", "ELAA / D-MIMO bistatic sensing", ("sense",)),
    CatalogEntry("E-J1", "joint localization and sensing"),
    CatalogEntry("R-L1", "RIS-aided localization under LOS blockage", ("ris-track",)),
    CatalogEntry("R-L2", "sidelink localization via RIS"),
    CatalogEntry("R-L3", "full-duplex self-localization with RIS"),
    CatalogEntry("R-S1", "RIS-aided monostatic / bistatic sensing"),
    CatalogEntry("R-S2", "multi-static sensing of a RIS-equipped target"),
    CatalogEntry("R-J1", "joint UE positioning and RIS calibration"),
)
_CATALOG = {e.id: e for e in CATALOG}


# Field converters --------------------------------------------------------------

def _float(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    return float(v)


def _int(v, name):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    return int(v)


def _str(v, name):
    if not isinstance(v, str):
        raise ConfigError(f"{name}: expected a string, got {v!r}")
    return v


def _bool(v, name):
    if not isinstance(v, bool):
        raise ConfigError(f"{name}: expected true/false, got {v!r}")
    return v


def _floats(n=None):
    def conv(v, name):
        if not isinstance(v, (list, tuple)) or (n is not None and len(v) != n):
            size = f"{n} numbers" if n else "a list of numbers"
            raise ConfigError(f"{name}: expected {size}")
        return tuple(_float(x, name) for x in v)
    return conv


def _point(v, name):
    """2- or 3-vector; 2D points get z = 0."""
    if not isinstance(v, (list, tuple)) or len(v) not in (2, 3):
        raise ConfigError(f"{name}: expected [x, y] or [x, y, z]")
    p = tuple(_float(x, name) for x in v)
    return p if len(p) == 3 else p + (0.0,)


def _list_of(conv):
    def inner(v, name):
        if not isinstance(v, (list, tuple)):
            raise ConfigError(f"{name}: expected a list")
        return tuple(conv(x, f"{name}[{i}]") for i, x in enumerate(v))
    return inner


def _ints(v, name):
    return _list_of(_int)(v, name)


def _strs(v, name):
    return _list_of(_str)(v, name)


def _range(v, name):
    lo, hi = _floats(2)(v, name)
    if not hi > lo:
        raise ConfigError(f"{name}: need max > min")
    return (lo, hi)


def _opt(conv):
    def inner(v, name):
        return None if v is None else conv(v, name)
    return inner


def _f(default=dataclasses.MISSING, conv=None):
    kw = {} if default is dataclasses.MISSING else {"default": default}
    return field(metadata={"conv": conv}, **kw)


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


# Sections ----------------------------------------------------------------------

@dataclass(frozen=True, kw_only=True)
class OfdmConfig:
    fc: float = _f(conv=_float)
    bandwidth: float = _f(0.0, _float)
    n_subcarriers: int = _f(1, _int)

    def __post_init__(self):
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError(f"ofdm: {exc}") from None

    def grid(self) -> OfdmGrid:
        return OfdmGrid(self.fc, self.bandwidth, self.n_subcarriers)


ROLES = ("bs", "ris", "tx", "rx")


@dataclass(frozen=True, kw_only=True)
class ArrayConfig:
    """A ULA.  ``spacing`` defaults to half a wavelength at the carrier."""

    name: str = _f(conv=_str)
    role: str = _f("bs", _str)
    n_elements: int = _f(conv=_int)
    spacing: float | None = _f(None, _opt(_float))
    center: tuple = _f((0.0, 0.0, 0.0), _point)
    axis: tuple = _f((0.0, 1.0, 0.0), _point)
    normal: tuple | None = _f(None, _opt(_point))
    blocked: tuple = _f((), _list_of(_ints))

    def __post_init__(self):
        _check(self.role in ROLES, f"arrays.{self.name}.role: must be one of {ROLES}")
        _check(self.n_elements >= 1, f"arrays.{self.name}.n_elements: must be >= 1")
        _check(self.spacing is None or self.spacing > 0, f"arrays.{self.name}.spacing: must be > 0")
        for r in self.blocked:
            _check(len(r) == 2 and 0 <= r[0] <= r[1] <= self.n_elements,
                   f"arrays.{self.name}.blocked: ranges are [start, stop) within the array")

    def build(self, fc: float) -> ArrayGeometry:
        lam = SPEED_OF_LIGHT / fc
        try:
            return build_ula(self.n_elements, self.spacing or lam / 2, self.center, self.axis,
                             normal=self.normal, wavelength=lam)
        except ValueError as exc:
            raise ConfigError(f"arrays.{self.name}: {exc}") from None

    def mask(self) -> np.ndarray | None:
        return make_mask(self.n_elements, self.blocked) if self.blocked else None


@dataclass(frozen=True, kw_only=True)
class RegionConfig:
    x: tuple = _f(conv=_range)
    y: tuple = _f(conv=_range)
    cell: float = _f(conv=_float)
    z: float = _f(0.0, _float)

    def __post_init__(self):
        _check(self.cell > 0, "region.cell: must be > 0")
        _check(self.x[1] - self.x[0] >= self.cell and self.y[1] - self.y[0] >= self.cell,
               "region: extent must cover at least one cell")

    def build(self) -> Region2D:
        return Region2D.from_cell(self.x, self.y, self.cell, self.z)


@dataclass(frozen=True, kw_only=True)
class UeConfig:
    position: tuple = _f(conv=_point)


@dataclass(frozen=True, kw_only=True)
class TrajectoryConfig:
    start: tuple = _f(conv=_point)
    end: tuple = _f(conv=_point)
    n_points: int = _f(conv=_int)

    def __post_init__(self):
        _check(self.n_points >= 2, "trajectory.n_points: must be >= 2")

    def build(self) -> TrajectorySpec:
        return TrajectorySpec(self.start, self.end, self.n_points)


@dataclass(frozen=True, kw_only=True)
class TargetConfig:
    position: tuple = _f(conv=_point)
    reflectivity: tuple = _f((1.0, 0.0), _floats(2))

    @property
    def complex_reflectivity(self) -> complex:
        return complex(*self.reflectivity)


@dataclass(frozen=True, kw_only=True)
class NoiseConfig:
    """Noise level, given directly or through a one-point PEB calibration.

    ``snr_db`` is the reference SNR (1 m free-space link, one antenna, unit
    noise variance).  ``calibrate_peb`` instead picks the SNR for which the
    noncoherent PEB at ``calibration_bandwidth`` with ``calibration_m``
    antennas per BS equals the given value; ``snr_offset_db`` is added on top.
    """

    snr_db: float | None = _f(None, _opt(_float))
    noise_std: float | None = _f(None, _opt(_float))
    calibrate_peb: float | None = _f(None, _opt(_float))
    calibration_bandwidth: float = _f(1e5, _float)
    calibration_m: int = _f(4, _int)
    snr_offset_db: float = _f(0.0, _float)
    delay_std: float | None = _f(None, _opt(_float))

    def __post_init__(self):
        _check(self.noise_std is None or self.noise_std >= 0, "noise.noise_std: must be >= 0")
        _check(self.calibrate_peb is None or self.calibrate_peb > 0, "noise.calibrate_peb: must be > 0")
        _check(self.delay_std is None or self.delay_std > 0, "noise.delay_std: must be > 0")
        _check(self.calibration_bandwidth > 0, "noise.calibration_bandwidth: must be > 0")


@dataclass(frozen=True, kw_only=True)
class DmimoConfig:
    """Distributed BSs with M-element ULAs facing the area center."""

    bs_centers: tuple = _f(DmimoLayout.bs_centers, _list_of(_point))
    area_center: tuple = _f((5.0, 5.0), _floats(2))
    m: int = _f(4, _int)
    power_normalization: str = _f("total", _str)

    def __post_init__(self):
        _check(len(self.bs_centers) >= 1, "dmimo.bs_centers: need at least one BS")
        _check(self.m >= 1, "dmimo.m: must be >= 1")
        _check(self.power_normalization in ("total", "per_antenna"),
               "dmimo.power_normalization: 'total' or 'per_antenna'")

    def layout(self, ue, ofdm: OfdmConfig) -> DmimoLayout:
        return DmimoLayout(self.bs_centers, tuple(ue), ofdm.fc, self.area_center,
                           ofdm.n_subcarriers, self.power_normalization)


@dataclass(frozen=True, kw_only=True)
class SweepConfig:
    bandwidths: tuple = _f(conv=_floats())
    m_values: tuple = _f((4,), _ints)
    modes: tuple = _f(MODES, _strs)

    def __post_init__(self):
        b = self.bandwidths
        _check(len(b) >= 1 and all(x > 0 for x in b) and list(b) == sorted(b),
               "sweep.bandwidths: positive and ascending")
        _check(all(m >= 1 for m in self.m_values), "sweep.m_values: must be >= 1")
        _check(all(m in MODES for m in self.modes), f"sweep.modes: each one of {MODES}")


@dataclass(frozen=True, kw_only=True)
class BeamConfig:
    targets: tuple = _f(conv=_list_of(_point))
    anchor_region: bool = _f(True, _bool)

    def __post_init__(self):
        _check(len(self.targets) >= 1, "beam.targets: need at least one target")


@dataclass(frozen=True, kw_only=True)
class EstimatorConfig:
    method: str = _f("ml", _str)
    mode: str = _f("coherent", _str)
    refine: bool = _f(True, _bool)
    fine_step: float | None = _f(None, _opt(_float))
    fine_half_width: float | None = _f(None, _opt(_float))
    n_subarrays: int = _f(16, _int)
    threshold: float = _f(0.5, _float)
    min_separation: float = _f(0.0, _float)

    def __post_init__(self):
        _check(self.method in ("ml", "tdoa"), "estimator.method: 'ml' or 'tdoa'")
        _check(self.mode in MODES, f"estimator.mode: one of {MODES}")
        _check(0 < self.threshold < 1, "estimator.threshold: must lie in (0, 1)")
        _check(self.n_subarrays >= 1, "estimator.n_subarrays: must be >= 1")


@dataclass(frozen=True, kw_only=True)
class RisConfig:
    bs_position: tuple = _f(conv=_point)
    mask_known: bool = _f(False, _bool)


@dataclass(frozen=True, kw_only=True)
class OutputConfig:
    heatmap_formats: tuple = _f(("csv",), _strs)

    def __post_init__(self):
        _check(all(f in ("csv", "pgm") for f in self.heatmap_formats),
               "output.heatmap_formats: entries 'csv' or 'pgm'")


_SECTIONS = {
    "ofdm": OfdmConfig, "region": RegionConfig, "ue": UeConfig, "trajectory": TrajectoryConfig,
    "noise": NoiseConfig, "dmimo": DmimoConfig, "sweep": SweepConfig, "beam": BeamConfig,
    "estimator": EstimatorConfig, "ris": RisConfig, "output": OutputConfig,
}
_LISTS = {"arrays": ArrayConfig, "targets": TargetConfig}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    ofdm: OfdmConfig
    description: str = ""
    n_trials: int = 1
    seeds: tuple = ()
    arrays: tuple = ()
    targets: tuple = ()
    region: RegionConfig | None = None
    ue: UeConfig | None = None
    trajectory: TrajectoryConfig | None = None
    noise: NoiseConfig = NoiseConfig()
    dmimo: DmimoConfig | None = None
    sweep: SweepConfig | None = None
    beam: BeamConfig | None = None
    estimator: EstimatorConfig = EstimatorConfig()
    ris: RisConfig | None = None
    output: OutputConfig = OutputConfig()

    def arrays_with_role(self, role: str) -> list[ArrayConfig]:
        return [a for a in self.arrays if a.role == role]

    def require(self, *names: str):
        for n in names:
            if getattr(self, n) in (None, ()):
                raise ConfigError(f"scenario {self.scenario}: missing section [{n}]")


def _section(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key '{unknown[0]}'")
    kwargs = {}
    for name, f in fields.items():
        if name in data:
            kwargs[name] = f.metadata["conv"](data[name], f"{where}.{name}")
        elif f.default is dataclasses.MISSING:
            raise ConfigError(f"{where}: missing required key '{name}'")
    return cls(**kwargs)


def config_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    top = {"scenario", "description", "n_trials", "seeds"} | set(_SECTIONS) | set(_LISTS)
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    if "scenario" not in data:
        raise ConfigError("missing required key 'scenario'")
    sid = _str(data["scenario"], "scenario")
    entry = _CATALOG.get(sid)
    if entry is None:
        raise ConfigError(f"scenario: unknown id {sid!r}; known ids: {', '.join(_CATALOG)}")
    if not entry.supported:
        raise ConfigError(f"scenario {sid} ({entry.title}) is declared out of scope")
    if "ofdm" not in data:
        raise ConfigError("missing required section [ofdm]")
    kwargs: dict[str, Any] = {"scenario": sid}
    if "description" in data:
        kwargs["description"] = _str(data["description"], "description")
    n_trials = _int(data.get("n_trials", 1), "n_trials")
    _check(n_trials >= 1, "n_trials: must be >= 1")
    seeds = _ints(data["seeds"], "seeds") if "seeds" in data else tuple(range(1, n_trials + 1))
    _check(len(seeds) == n_trials, f"seeds: expected {n_trials} seeds, got {len(seeds)}")
    kwargs.update(n_trials=n_trials, seeds=seeds)
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _section(cls, data[name], name)
    for name, cls in _LISTS.items():
        if name in data:
            items = data[name]
            if not isinstance(items, list):
                raise ConfigError(f"{name}: expected an array of tables")
            kwargs[name] = tuple(_section(cls, d, f"{name}[{i}]") for i, d in enumerate(items))
    names = [a.name for a in kwargs.get("arrays", ())]
    _check(len(set(names)) == len(names), "arrays: names must be unique")
    return ScenarioConfig(**kwargs)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a TOML scenario file."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    return config_from_dict(data)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully expanded plain-data form; ``None`` entries are omitted."""
    out: dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if dataclasses.is_dataclass(value):
            out[f.name] = {k: _plain(v) for k, v in dataclasses.asdict(value).items() if v is not None}
        elif f.name in _LISTS:
            if value:
                out[f.name] = [{k: _plain(v) for k, v in dataclasses.asdict(x).items() if v is not None}
                               for x in value]
        else:
            out[f.name] = _plain(value)
    return out


def echo_config(cfg: ScenarioConfig) -> str:
    """TOML text with every default filled in; ``parse_config(echo) == cfg``."""
    return tomli_w.dumps(config_to_dict(cfg))
