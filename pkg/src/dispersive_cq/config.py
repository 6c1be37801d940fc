"""YAML run configuration.

A complete annotated example lives in ``presets/tissue-interface.yaml``.
Errors name the offending field, e.g. ``time.cfl_fraction: must lie in (0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .discretization import MaterialLayout, Segment
from .material import DebyePole, MaterialModel

SCHEMES = ("ade", "cq-direct", "cq-focq")
WEIGHT_METHODS = ("recurrence", "fft")
PRESETS = ("tissue-interface",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianPulse:
    """``h_y(z, 0) = amplitude * exp(-width * (z - center)**2)``."""

    amplitude: float = 0.0
    width: float = 1.0
    center: float = 0.0

    def __call__(self, z):
        return self.amplitude * np.exp(-self.width * (np.asarray(z) - self.center) ** 2)


@dataclass(frozen=True)
class FocqSettings:
    base: int = 2
    contour_nodes: int = 24
    tolerance: float = 1e-6


@dataclass(frozen=True)
class WeightSettings:
    method: str = "recurrence"
    rho: float | None = None
    fft_length: int | None = None
    dump_path: str | None = None


@dataclass(frozen=True)
class OutputSettings:
    snapshot_stride: int = 100
    snapshot_dir: str = "out/snapshots"
    energy_path: str = "out/energy.csv"
    comparison_path: str | None = "out/comparison.csv"
    plot_script: str = "out/plot.gp"


@dataclass(frozen=True)
class SimConfig:
    z_min: float
    z_max: float
    n_cells: int
    n_steps: int
    materials: dict[str, MaterialModel]
    layout: MaterialLayout
    dt: float | None = None
    cfl_fraction: float | None = None
    scheme: str = "ade"
    initial_condition: GaussianPulse = GaussianPulse()
    focq: FocqSettings = FocqSettings()
    weights: WeightSettings = WeightSettings()
    outputs: OutputSettings = OutputSettings()
    shadow_ade: bool = False
    compare_tolerance: float = 1e-10
    base_dir: Path = field(default=Path("."), compare=False)

    def resolve(self, path: str | None) -> Path | None:
        """Output paths are relative to the directory of the config file."""
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _get(data: Mapping, key: str, path: str, kind, default=..., check=None):
    where = f"{path}.{key}" if path else key
    if key not in data or data[key] is None:
        if default is ...:
            raise ConfigError(f"{where}: required field is missing")
        return default
    value = data[key]
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            value = int(value)
        elif kind is float:
            if isinstance(value, bool):
                raise ValueError
            value = float(value)
        elif kind is bool:
            if not isinstance(value, bool):
                raise ValueError
        else:
            value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}") from None
    if kind is float and not np.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    if check is not None:
        msg = check(value)
        if msg:
            raise ConfigError(f"{where}: {msg}")
    return value


def _section(data: Mapping, key: str, required: bool = False) -> Mapping:
    value = data.get(key)
    if value is None:
        if required:
            raise ConfigError(f"{key}: required section is missing")
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{key}: expected a mapping")
    return value


def _positive(v):
    return None if v > 0 else "must be positive"


def _parse_pole(item, where: str) -> DebyePole:
    if not isinstance(item, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    deps = _get(item, "delta_eps", where, float, check=_positive)
    given = [k for k in ("tau", "omega_corner", "omega_corner_over_pi") if item.get(k) is not None]
    if len(given) != 1:
        raise ConfigError(f"{where}: give exactly one of tau, omega_corner, omega_corner_over_pi")
    value = _get(item, given[0], where, float, check=_positive)
    if given[0] == "tau":
        return DebyePole(deps, value)
    if given[0] == "omega_corner_over_pi":
        value *= np.pi
    return DebyePole.from_corner(deps, value)


def _parse_materials(data: Mapping) -> dict[str, MaterialModel]:
    raw = _section(data, "materials", required=True)
    materials = {}
    for name, entry in raw.items():
        where = f"materials.{name}"
        if not isinstance(entry, Mapping):
            raise ConfigError(f"{where}: expected a mapping")
        eps = _get(entry, "eps_inf_prime", where, float, 0.0,
                   lambda v: None if v >= 0 else "must be non-negative")
        poles = entry.get("poles") or []
        if not isinstance(poles, list):
            raise ConfigError(f"{where}.poles: expected a list")
        parsed = tuple(_parse_pole(p, f"{where}.poles[{i}]") for i, p in enumerate(poles))
        materials[str(name)] = MaterialModel(str(name), eps, parsed)
    return materials


def _parse_layout(data: Mapping, z_min: float, z_max: float, materials) -> MaterialLayout:
    raw = data.get("layout")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("layout: expected a non-empty list of intervals")
    segs = []
    for i, item in enumerate(raw):
        where = f"layout[{i}]"
        if not isinstance(item, Mapping):
            raise ConfigError(f"{where}: expected a mapping with start, end, material")
        name = _get(item, "material", where, str)
        if name not in materials:
            raise ConfigError(f"{where}.material: unknown material {name!r}")
        segs.append(Segment(_get(item, "start", where, float), _get(item, "end", where, float), name))
    layout = MaterialLayout.from_list(segs)
    try:
        layout.validate(z_min, z_max)
    except ValueError as exc:
        raise ConfigError(f"layout: {exc}") from None
    return layout


def parse_config(data: Any, base_dir: Path | str = ".") -> SimConfig:
    """Validate a parsed YAML document and build a :class:`SimConfig`."""
    if not isinstance(data, Mapping):
        raise ConfigError("top level: expected a mapping")
    domain = _section(data, "domain", required=True)
    z_min = _get(domain, "z_min", "domain", float)
    z_max = _get(domain, "z_max", "domain", float)
    if z_max <= z_min:
        raise ConfigError("domain: z_max must exceed z_min")
    n_cells = _get(data, "n_cells", "", int, check=lambda v: None if v >= 2 else "must be >= 2")
    n_steps = _get(data, "n_steps", "", int, check=lambda v: None if v >= 0 else "must be >= 0")

    time = _section(data, "time", required=True)
    dt = _get(time, "dt", "time", float, None, _positive)
    cfl = _get(time, "cfl_fraction", "time", float, None,
               lambda v: None if 0 < v <= 1 else "must lie in (0, 1]")
    if (dt is None) == (cfl is None):
        raise ConfigError("time: exactly one of dt, cfl_fraction is required")

    scheme = _get(data, "scheme", "", str, "ade",
                  lambda v: None if v in SCHEMES else f"unknown scheme, expected one of {SCHEMES}")
    materials = _parse_materials(data)
    layout = _parse_layout(data, z_min, z_max, materials)

    ic = _section(data, "initial_condition")
    if ic and set(ic) != {"gaussian"}:
        raise ConfigError("initial_condition: only 'gaussian' is supported")
    g = _section(ic, "gaussian") if ic else {}
    pulse = GaussianPulse(
        _get(g, "amplitude", "initial_condition.gaussian", float, 0.0),
        _get(g, "width", "initial_condition.gaussian", float, 1.0, _positive),
        _get(g, "center", "initial_condition.gaussian", float, 0.0),
    )

    f = _section(data, "focq")
    focq = FocqSettings(
        _get(f, "base", "focq", int, 2, lambda v: None if v >= 2 else "must be >= 2"),
        _get(f, "contour_nodes", "focq", int, 24, _positive),
        _get(f, "tolerance", "focq", float, 1e-6, _positive),
    )

    w = _section(data, "weights")
    weights = WeightSettings(
        _get(w, "method", "weights", str, "recurrence",
             lambda v: None if v in WEIGHT_METHODS else f"expected one of {WEIGHT_METHODS}"),
        _get(w, "rho", "weights", float, None, lambda v: None if 0 < v < 1 else "must lie in (0, 1)"),
        _get(w, "fft_length", "weights", int, None, _positive),
        _get(w, "dump_path", "weights", str, None),
    )

    o = _section(data, "outputs")
    d = OutputSettings()
    outputs = OutputSettings(
        _get(o, "snapshot_stride", "outputs", int, d.snapshot_stride,
             lambda v: None if v >= 1 else "must be >= 1"),
        _get(o, "snapshot_dir", "outputs", str, d.snapshot_dir),
        _get(o, "energy_path", "outputs", str, d.energy_path),
        _get(o, "comparison_path", "outputs", str, d.comparison_path),
        _get(o, "plot_script", "outputs", str, d.plot_script),
    )
    return SimConfig(
        z_min=z_min,
        z_max=z_max,
        n_cells=n_cells,
        n_steps=n_steps,
        materials=materials,
        layout=layout,
        dt=dt,
        cfl_fraction=cfl,
        scheme=scheme,
        initial_condition=pulse,
        focq=focq,
        weights=weights,
        outputs=outputs,
        shadow_ade=_get(data, "shadow_ade", "", bool, False),
        compare_tolerance=_get(data, "compare_tolerance", "", float, 1e-10, _positive),
        base_dir=Path(base_dir),
    )


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(data, path.parent)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, expected one of {PRESETS}")
    return resources.files(__package__).joinpath("presets", f"{name}.yaml").read_text()


def load_preset(name: str, base_dir: Path | str = ".") -> SimConfig:
    """Packaged preset; its relative output paths resolve against ``base_dir``."""
    return parse_config(yaml.safe_load(preset_text(name)), base_dir)
