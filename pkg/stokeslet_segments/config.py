"""Experiment configuration: built-in defaults, YAML/JSON files and CLI overrides."""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml
from jsonschema import Draft202012Validator

from .errors import ConfigError
from .flagellum import PlanarParams, TargetCurvature
from .rod import RodParams

logger = logging.getLogger(__name__)

SCHEMA_DIR = Path(__file__).resolve().parent / "schema"
CONFIG_SCHEMA_PATH = SCHEMA_DIR / "config.schema.yaml"

EXPERIMENTS = ("leak", "drag", "swim-planar", "swim-wall", "swim-rod")
SWIM_EXPERIMENTS = ("swim-planar", "swim-wall", "swim-rod")

_COMMON_DEFAULTS: Dict[str, Any] = {
    "method": "segments",
    "mu": 1.0,
    "seed": 0,
    "out": "results",
    "deterministic": False,
    "integrator": "euler",
    "snapshot_stride": 0.01,
    "check_points": 1505,
    "direction": "transverse",
    "wall_height": 0.1,
    "speed_limit": 1000.0,
    "condition_warning": 1e10,
    "workers": 1,
    "eps_grid": [0.002, 0.004, 0.006, 0.01, 0.015, 0.02, 0.03, 0.04],
    "eps_over_h_grid": [0.2, 0.282, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
    "node_counts": [48, 72, 96],
    "model": {
        "length": 1.0,
        "tension_stiffness": 2.950,
        "bending_stiffness": 0.0221,
        "amplitude": 0.075,
        "wavenumber": 9.0 * 3.141592653589793 / 4.0,
        "frequency": 2.0 * 3.141592653589793,
        "offset": 0.0,
    },
    "rod": {
        "bending": [4.9587, 4.9587, 4.9587],
        "shear": [0.8264, 0.8264, 0.8264],
        "amplitude": 3.5,
        "wavenumber": 9.0 * 3.141592653589793 / 160.0,
        "frequency": 550.0,
        "length": 40.0,
        "viscosity": 1e-6,
        "turning_fraction": 0.4,
        "turning_interval": 15.0,
        "turning": True,
    },
}

_EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "leak": {"nodes": 48, "eps": 1.0 / 47.0, "dt": 2.5e-7, "t_final": 70.0},
    "drag": {"nodes": 48, "eps": 0.01, "dt": 2.5e-7, "t_final": 70.0},
    "swim-planar": {"nodes": 24, "eps": 1.0 / 300.0, "dt": 2.5e-7, "t_final": 70.0},
    "swim-wall": {"nodes": 12, "eps": 0.004, "dt": 2.5e-7, "t_final": 70.0, "model": {"offset": 0.6}},
    "swim-rod": {"nodes": 20, "eps": 0.005, "dt": 1e-5, "t_final": 45.0},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    method: str
    nodes: int
    eps: float
    mu: float
    dt: float
    t_final: float
    seed: int
    out: Path
    deterministic: bool
    integrator: str
    snapshot_stride: float
    check_points: int
    direction: str
    wall_height: float
    speed_limit: float
    condition_warning: float
    workers: int
    eps_grid: Tuple[float, ...]
    eps_over_h_grid: Tuple[float, ...]
    node_counts: Tuple[int, ...]
    model: PlanarParams = field(default_factory=PlanarParams)
    rod: RodParams = field(default_factory=RodParams)
    turning: bool = True

    @property
    def effective_workers(self) -> int:
        return 1 if self.deterministic else self.workers

    def to_document(self) -> Dict[str, Any]:
        """Plain mapping that :func:`load_config` turns back into an equal config."""
        curvature = self.model.curvature
        return {
            "experiment": self.experiment,
            "method": self.method,
            "nodes": self.nodes,
            "eps": self.eps,
            "mu": self.mu,
            "dt": self.dt,
            "t_final": self.t_final,
            "seed": self.seed,
            "out": str(self.out),
            "deterministic": self.deterministic,
            "integrator": self.integrator,
            "snapshot_stride": self.snapshot_stride,
            "check_points": self.check_points,
            "direction": self.direction,
            "wall_height": self.wall_height,
            "speed_limit": self.speed_limit,
            "condition_warning": self.condition_warning,
            "workers": self.workers,
            "eps_grid": list(self.eps_grid),
            "eps_over_h_grid": list(self.eps_over_h_grid),
            "node_counts": list(self.node_counts),
            "model": {
                "length": self.model.length,
                "tension_stiffness": self.model.tension_stiffness,
                "bending_stiffness": self.model.bending_stiffness,
                "amplitude": curvature.amplitude,
                "wavenumber": curvature.wavenumber,
                "frequency": curvature.frequency,
                "offset": curvature.offset,
            },
            "rod": {
                "bending": list(self.rod.bending),
                "shear": list(self.rod.shear),
                "amplitude": self.rod.amplitude,
                "wavenumber": self.rod.wavenumber,
                "frequency": self.rod.frequency,
                "length": self.rod.length,
                "viscosity": self.rod.viscosity,
                "turning_fraction": self.rod.turning_fraction,
                "turning_interval": self.rod.turning_interval,
                "turning": self.turning,
            },
        }


def merge_documents(base: Mapping[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive merge; nested mappings are merged, everything else replaced."""
    merged = copy.deepcopy(dict(base))
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_documents(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def default_document(experiment: str) -> Dict[str, Any]:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment '{experiment}'. Expected one of {', '.join(EXPERIMENTS)}.")
    document = merge_documents(_COMMON_DEFAULTS, _EXPERIMENT_DEFAULTS[experiment])
    document["experiment"] = experiment
    return document


def schema_errors(document: Any, schema_path: Path) -> list[str]:
    schema = yaml.safe_load(schema_path.read_text(encoding="utf-8"))
    validator = Draft202012Validator(schema)
    details = []
    for error in sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path)):
        path = "$" + "".join(f"/{segment}" for segment in error.absolute_path)
        details.append(f"- {path}: {error.message}")
        for sub_error in error.context or ():
            sub_path = "$" + "".join(f"/{segment}" for segment in sub_error.absolute_path)
            details.append(f"    * {sub_path}: {sub_error.message}")
    return details


def validate_against_schema(document: Any, schema_path: Path = CONFIG_SCHEMA_PATH) -> None:
    details = schema_errors(document, schema_path)
    if details:
        raise ConfigError("Schema validation failed:\n" + "\n".join(details))


class ConfigLoader:
    """Resolve an :class:`ExperimentConfig` from defaults, an optional file and overrides."""

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path is not None else None

    def load(self, experiment: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        from_file = self._read_document() if self.path is not None else {}
        name = experiment or from_file.get("experiment")
        if name is None:
            raise ConfigError("No experiment given on the command line or in the configuration file.")
        if experiment and from_file.get("experiment", experiment) != experiment:
            raise ConfigError(
                f"Configuration file is for '{from_file['experiment']}' but '{experiment}' was requested."
            )
        document = merge_documents(default_document(str(name)), from_file)
        document = merge_documents(document, {k: v for k, v in (overrides or {}).items() if v is not None})
        validate_against_schema(document)
        logger.debug("Resolved configuration: %s", document)
        return self._parse(document)

    def _read_document(self) -> Dict[str, Any]:
        assert self.path is not None
        if not self.path.exists():
            raise ConfigError(f"Configuration file not found: {self.path}")
        try:
            with self.path.open("r", encoding="utf-8") as handle:
                data = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Failed to parse configuration: {exc}") from exc
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError("Top level configuration structure must be a mapping/object.")
        return data

    def _parse(self, document: Dict[str, Any]) -> ExperimentConfig:
        return ExperimentConfig(
            experiment=document["experiment"],
            method=document["method"],
            nodes=int(document["nodes"]),
            eps=float(document["eps"]),
            mu=float(document["mu"]),
            dt=float(document["dt"]),
            t_final=float(document["t_final"]),
            seed=int(document["seed"]),
            out=Path(document["out"]),
            deterministic=bool(document["deterministic"]),
            integrator=document["integrator"],
            snapshot_stride=float(document["snapshot_stride"]),
            check_points=int(document["check_points"]),
            direction=document["direction"],
            wall_height=float(document["wall_height"]),
            speed_limit=float(document["speed_limit"]),
            condition_warning=float(document["condition_warning"]),
            workers=int(document["workers"]),
            eps_grid=tuple(float(v) for v in document["eps_grid"]),
            eps_over_h_grid=tuple(float(v) for v in document["eps_over_h_grid"]),
            node_counts=tuple(int(v) for v in document["node_counts"]),
            model=self._parse_model(document["model"]),
            rod=self._parse_rod(document["rod"]),
            turning=bool(document["rod"]["turning"]),
        )

    def _parse_model(self, item: Dict[str, Any]) -> PlanarParams:
        try:
            curvature = TargetCurvature(
                amplitude=float(item["amplitude"]),
                wavenumber=float(item["wavenumber"]),
                frequency=float(item["frequency"]),
                offset=float(item["offset"]),
            )
        except ValueError as exc:
            raise ConfigError(f"Invalid model waveform: {exc}") from exc
        return PlanarParams(
            curvature=curvature,
            length=float(item["length"]),
            tension_stiffness=float(item["tension_stiffness"]),
            bending_stiffness=float(item["bending_stiffness"]),
        )

    def _parse_rod(self, item: Dict[str, Any]) -> RodParams:
        params = RodParams(
            bending=tuple(float(v) for v in item["bending"]),
            shear=tuple(float(v) for v in item["shear"]),
            amplitude=float(item["amplitude"]),
            wavenumber=float(item["wavenumber"]),
            frequency=float(item["frequency"]),
            length=float(item["length"]),
            viscosity=float(item["viscosity"]),
            turning_fraction=float(item["turning_fraction"]),
            turning_interval=float(item["turning_interval"]),
        )
        try:
            params.nondimensional()
        except ValueError as exc:
            raise ConfigError(f"Invalid rod waveform: {exc}") from exc
        return params


def load_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None, experiment: Optional[str] = None
) -> ExperimentConfig:
    return ConfigLoader(path).load(experiment, overrides)
