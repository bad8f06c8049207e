""" Run configuration: one YAML document with a section per module """

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterable,
    Mapping,
    Optional,
    Tuple,
    Union,
    get_args,
    get_origin,
    get_type_hints,
)

import yaml

from .fit import FitConfig
from .lockacq import (
    DisturbanceSpec,
    LoopConfig,
    Plant,
    PlantConfig,
    ScanConfig,
    ServoConfig,
)
from .model import (
    DerivedRates,
    MainCavityParams,
    PccParams,
    PhysicalConstants,
    derive_rates,
)
from .noise import SpectrumConfig
from .synth import (
    AsdSegment,
    FrequencyGrid,
    MeasurementNoiseModel,
    scale_segments,
)

logger = logging.getLogger(__name__)

FIXTURES_PATH = Path(__file__).parent / "fixtures"


class ConfigError(ValueError):
    """Raised for unreadable, unknown or invalid configuration entries."""


@dataclass(frozen=True)
class LockRunConfig:
    """Length [s] and sampling [s] of an acquisition run."""

    duration: float = 6.0
    dt: float = 2e-4
    settle_time: float = 0.2

    def __post_init__(self):
        if not (self.duration > 0 and self.dt > 0):
            raise ValueError("`duration` and `dt` must be positive")
        if self.settle_time < 0:
            raise ValueError("`settle_time` must be non-negative")


@dataclass(frozen=True)
class SeriesConfig:
    """Synthetic PCC length series analysed when no data file is given."""

    duration: float = 512.0
    rate: float = 256.0
    target_rms: Optional[float] = 1e-10
    segments: Tuple[AsdSegment, ...] = (AsdSegment(0.0, 128.0, 1.0),)

    def scaled_segments(self) -> Tuple[AsdSegment, ...]:
        if self.target_rms is None:
            return tuple(self.segments)
        return scale_segments(self.segments, self.target_rms)


@dataclass(frozen=True)
class Seeds:
    """Seeds of the random generators, one per workflow."""

    synth: int = 42
    lock: int = 0
    series: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Every setting of the toolkit in one document."""

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    main_cavity: MainCavityParams = field(default_factory=MainCavityParams)
    pcc: PccParams = field(default_factory=PccParams)
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)
    measurement_noise: MeasurementNoiseModel = field(
        default_factory=MeasurementNoiseModel
    )
    fit: FitConfig = field(default_factory=FitConfig)
    plant: PlantConfig = field(default_factory=PlantConfig)
    servo: ServoConfig = field(default_factory=ServoConfig)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    lock: LockRunConfig = field(default_factory=LockRunConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    series: SeriesConfig = field(default_factory=SeriesConfig)
    seeds: Seeds = field(default_factory=Seeds)

    def rates(self) -> DerivedRates:
        return derive_rates(self.constants, self.main_cavity, self.pcc)

    def lock_plant(self) -> Plant:
        return Plant.from_config(self.plant, self.constants, self.main_cavity, self.pcc)

    def noise_model(self) -> MeasurementNoiseModel:
        """Measurement noise seeded from ``seeds.synth``."""
        return replace(self.measurement_noise, seed=self.seeds.synth)

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        """Copy with every seed replaced by ``seed``; ``None`` keeps them."""
        if seed is None:
            return self
        return replace(self, seeds=Seeds(synth=seed, lock=seed, series=seed))

    @classmethod
    def from_mapping(cls, raw: Optional[Mapping[str, Any]]) -> "RunConfig":
        """
        Build a configuration from a parsed document.

        Args:
            raw: Parsed YAML document; missing sections and keys take
                their defaults.

        Raises:
            ConfigError: If a section or key is unknown or a value is
                invalid. The message names the offending key.

        Returns:
            The configuration.
        """
        raw = _as_mapping(raw or {}, "")
        builders = {
            "constants": lambda v: _build(PhysicalConstants, "constants", v),
            "main_cavity": lambda v: _build(MainCavityParams, "main_cavity", v),
            "pcc": lambda v: _build(PccParams, "pcc", v),
            "grid": lambda v: _build(FrequencyGrid, "grid", v),
            "measurement_noise": lambda v: _build(
                MeasurementNoiseModel, "measurement_noise", v, exclude=("seed",)
            ),
            "fit": lambda v: _build(FitConfig, "fit", v),
            "plant": lambda v: _build(PlantConfig, "plant", v),
            "servo": _build_servo,
            "disturbance": lambda v: _build(DisturbanceSpec, "disturbance", v),
            "lock": lambda v: _build(LockRunConfig, "lock", v),
            "spectrum": lambda v: _build(SpectrumConfig, "spectrum", v),
            "series": _build_series,
            "seeds": lambda v: _build(Seeds, "seeds", v),
        }
        unknown = sorted(set(raw) - set(builders))
        if unknown:
            raise ConfigError("Unknown configuration section `{0}`".format(unknown[0]))
        return cls(**{name: builders[name](value) for name, value in raw.items()})

    @classmethod
    def load(cls, paths: Iterable[Union[str, Path]]) -> "RunConfig":
        """Read and deep-merge YAML files; later files win."""
        merged: Dict[str, Any] = {}
        for path in paths:
            merged = deep_merge(merged, read_yaml(Path(path)))
            logger.info("Loaded configuration from %s", path)
        return cls.from_mapping(merged)


def read_yaml(path: Path) -> Dict[str, Any]:
    """
    Parse a YAML configuration file.

    Args:
        path: File to read.

    Raises:
        ConfigError: If the file cannot be read or is not a YAML mapping.

    Returns:
        Parsed document, empty for an empty file.
    """
    try:
        with path.open("r", encoding="utf-8") as config_file:
            document = yaml.safe_load(config_file)
    except OSError as exc:
        raise ConfigError(
            "Cannot read configuration `{0}`: {1}".format(path, exc)
        ) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(
            "Cannot parse configuration `{0}`: {1}".format(path, exc)
        ) from exc
    if document is None:
        return {}
    return dict(_as_mapping(document, str(path)))


def resolve_config_path(value: str) -> Path:
    """Path of a configuration file; bare fixture names such as
    ``table1`` resolve to the packaged fixtures."""
    path = Path(value)
    if not path.exists():
        fixture = FIXTURES_PATH / "{0}.yml".format(value)
        if fixture.exists():
            return fixture
    return path


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge nested mappings; non-mapping values in ``override`` win."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _as_mapping(value: Any, where: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(
            "`{0}` must be a mapping, got {1}".format(
                where or "<root>", type(value).__name__
            )
        )
    return value


def _coerce(key: str, value: Any, hint: Any) -> Any:
    origin, args = get_origin(hint), get_args(hint)
    if origin is Union and type(None) in args:
        if value is None:
            return None
        hint = next(arg for arg in args if arg is not type(None))
        origin, args = get_origin(hint), get_args(hint)

    if hint is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            # YAML reads exponents without a dot, e.g. `1e-3`, as strings
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError("`{0}` must be a number, got {1!r}".format(key, value))
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("`{0}` must be an integer, got {1!r}".format(key, value))
        if int(value) != value:
            raise ConfigError("`{0}` must be an integer, got {1!r}".format(key, value))
        return int(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(
                "`{0}` must be true or false, got {1!r}".format(key, value)
            )
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError("`{0}` must be a string, got {1!r}".format(key, value))
        return value
    if origin is tuple and args and args[-1] is not Ellipsis:
        if not isinstance(value, (list, tuple)) or len(value) != len(args):
            raise ConfigError(
                "`{0}` must be a list of {1} values, got {2!r}".format(
                    key, len(args), value
                )
            )
        return tuple(
            _coerce("{0}[{1}]".format(key, index), item, arg)
            for index, (item, arg) in enumerate(zip(value, args))
        )
    return value


def _build(cls, section: str, raw: Any, exclude: Tuple[str, ...] = ()):
    raw = _as_mapping(raw if raw is not None else {}, section)
    hints = get_type_hints(cls)
    allowed = [f.name for f in fields(cls) if f.name not in exclude]
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(
            "Unknown configuration key `{0}.{1}`".format(section, unknown[0])
        )
    kwargs = {
        key: _coerce("{0}.{1}".format(section, key), value, hints[key])
        for key, value in raw.items()
    }
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("Invalid `{0}` settings: {1}".format(section, exc)) from exc


def _build_servo(raw: Any) -> ServoConfig:
    raw = _as_mapping(raw if raw is not None else {}, "servo")
    defaults = ServoConfig()
    parts = {}
    for name in ("main", "gr", "ir"):
        loop = getattr(defaults, name)
        section = _as_mapping(raw.get(name) or {}, "servo." + name)
        merged = {f.name: getattr(loop, f.name) for f in fields(LoopConfig)}
        merged.update(section)
        parts[name] = _build(LoopConfig, "servo." + name, merged)
    parts["scan"] = _build(ScanConfig, "servo.scan", raw.get("scan"))
    unknown = sorted(set(raw) - set(parts))
    if unknown:
        raise ConfigError("Unknown configuration key `servo.{0}`".format(unknown[0]))
    return ServoConfig(**parts)


def _build_series(raw: Any) -> SeriesConfig:
    raw = dict(_as_mapping(raw if raw is not None else {}, "series"))
    segments = raw.pop("segments", None)
    series = _build(SeriesConfig, "series", raw, exclude=("segments",))
    if segments is None:
        return series
    if not isinstance(segments, list) or not segments:
        raise ConfigError("`series.segments` must be a non-empty list")
    built = tuple(
        _build(AsdSegment, "series.segments[{0}]".format(index), segment)
        for index, segment in enumerate(segments)
    )
    return replace(series, segments=built)

