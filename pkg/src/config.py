"""Experiment configuration for treeirs."""

import copy
import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.boundary import ClosedSetApprox
from src.errors import ConfigError, TreeIRSError
from src.groups import DEFAULT_ORDER_CAP
from src.tree import MAX_ARITY
from src.utils import parse_fraction

logger = logging.getLogger(__name__)

STDIN = "-"

DEFAULT_CONFIG = {
    "d": 2,
    "n": 3,
    "flavor": "symmetric",
    "sampler": {"kind": "uniform_conjugate", "generators": []},
    "trials": 1000,
    "seed": 0,
    "depth": None,
    "format": "json",
    "order_cap": DEFAULT_ORDER_CAP,
    "checks": ["all"],
    "check_params": {},
}

Portrait = dict[str, list[int]]


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ClosedSetSpec(_Spec):
    """Exactly one of leaves, shadows, ray, measure or levels."""

    depth: int | None = Field(default=None, ge=0)
    leaves: list[str] | None = None
    shadows: list[str] | None = None
    ray: str | None = None
    measure: str | None = None
    levels: list[list[str]] | None = None

    @model_validator(mode="after")
    def one_source(self) -> "ClosedSetSpec":
        given = [k for k in ("leaves", "shadows", "ray", "measure", "levels") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"closed set needs exactly one of leaves/shadows/ray/measure/levels, got {given}")
        if given[0] in ("leaves", "shadows", "measure") and self.depth is None:
            raise ValueError(f"closed set given by {given[0]} needs a depth")
        return self

    def resolved_depth(self) -> int:
        if self.ray is not None:
            return len(self.ray)
        if self.levels is not None:
            return len(self.levels) - 1
        return self.depth


def closed_set_from_spec(spec: ClosedSetSpec, d: int) -> ClosedSetApprox:
    """Build the closed set a config entry describes."""
    try:
        if spec.ray is not None:
            return ClosedSetApprox.ray(d, spec.ray)
        if spec.levels is not None:
            return ClosedSetApprox.from_json({"d": d, "depth": len(spec.levels) - 1, "levels": spec.levels})
        if spec.leaves is not None:
            return ClosedSetApprox.from_leaves(d, spec.depth, spec.leaves)
        if spec.shadows is not None:
            return ClosedSetApprox.from_shadows(d, spec.depth, spec.shadows)
        return ClosedSetApprox.initial_segment(d, spec.depth, parse_fraction(spec.measure))
    except (TreeIRSError, ValueError) as e:
        raise ConfigError(f"Invalid closed set: {e}") from e


class UniformConjugateSpec(_Spec):
    kind: Literal["uniform_conjugate"]
    generators: list[Portrait] = []


class DiracSpec(_Spec):
    kind: Literal["dirac"]
    generators: list[Portrait] = []


class StabilizerSpec(_Spec):
    kind: Literal["stabilizer_of_random_set"]
    set: ClosedSetSpec
    mode: Literal["pointwise", "setwise"] = "pointwise"


class LevelSpec(_Spec):
    kind: Literal["level"]
    level: int = Field(ge=0)
    generators: list[Portrait] = []


class PieceSpec(_Spec):
    """Top depth and top generators of one hanging tree, relative to its root."""

    level: int = Field(default=0, ge=0)
    generators: list[Portrait] = []


class FixedRaySpec(_Spec):
    kind: Literal["fixed_ray"]
    pieces: dict[int, PieceSpec] = {}


class CoupledSpec(_Spec):
    kind: Literal["coupled"]
    coupled: PieceSpec = PieceSpec(level=1)
    coupling: Portrait = {}
    pieces: dict[int, PieceSpec] = {}


SamplerSpec = Annotated[
    Union[UniformConjugateSpec, DiracSpec, StabilizerSpec, LevelSpec, FixedRaySpec, CoupledSpec],
    Field(discriminator="kind"),
]


class ExperimentConfig(_Spec):
    """Validated experiment: ambient group, sampler, trial budget and checks."""

    d: int = Field(ge=2, le=MAX_ARITY)
    n: int = Field(ge=0)
    flavor: Literal["symmetric", "alternating"] = "symmetric"
    sampler: SamplerSpec
    trials: int = Field(ge=1)
    seed: int = Field(ge=0)
    depth: int | None = Field(default=None, ge=0)
    format: Literal["json", "csv"] = "json"
    order_cap: int = Field(default=DEFAULT_ORDER_CAP, ge=1)
    checks: list[str] = ["all"]
    check_params: dict[str, dict[str, Any]] = {}

    @field_validator("seed", mode="before")
    @classmethod
    def seed_required(cls, value):
        if value is None:
            raise ValueError("a seed is required")
        return value

    @model_validator(mode="after")
    def depths_fit(self) -> "ExperimentConfig":
        if self.depth is not None and self.depth > self.n:
            raise ValueError(f"fingerprint depth {self.depth} exceeds n={self.n}")
        s = self.sampler
        if isinstance(s, LevelSpec) and s.level > self.n:
            raise ValueError(f"level {s.level} exceeds n={self.n}")
        if isinstance(s, StabilizerSpec) and s.set.resolved_depth() > self.n:
            raise ValueError(f"closed set depth {s.set.resolved_depth()} exceeds n={self.n}")
        if isinstance(s, (FixedRaySpec, CoupledSpec)):
            bad = [i for i in s.pieces if not 0 <= i < self.n]
            if bad:
                raise ValueError(f"hanging trees {bad} do not exist at n={self.n}")
        return self

    @property
    def fingerprint_depth(self) -> int:
        return self.n if self.depth is None else self.depth


def _merge(base: dict, loaded: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in loaded.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "sampler":
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """Loads an experiment document, merges it over the defaults and validates it."""

    def __init__(self, config_path: Path | str | None = None, overrides: dict[str, Any] | None = None):
        """
        Initialize configuration manager.

        Args:
            config_path: JSON file, "-" for stdin, or None for the defaults only
            overrides: Values that win over the document (command line flags)
        """
        self.config_path = config_path
        self.config: dict[str, Any] = self._load()
        for key, value in (overrides or {}).items():
            if value is not None:
                self.config[key] = value
        self.experiment = self.validate()

    def _read(self) -> str:
        if str(self.config_path) == STDIN:
            return sys.stdin.read()
        path = Path(self.config_path)
        try:
            return path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e

    def _load(self) -> dict[str, Any]:
        """Load the document, merging with defaults."""
        if self.config_path is None:
            logger.info("No config file given, using defaults")
            return copy.deepcopy(DEFAULT_CONFIG)
        try:
            loaded = json.loads(self._read())
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config is not valid JSON: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError("Config must be a JSON object")
        logger.info(f"Loaded config from {self.config_path}")
        return _merge(DEFAULT_CONFIG, loaded)

    def validate(self) -> ExperimentConfig:
        try:
            return ExperimentConfig.model_validate(self.config)
        except ValidationError as e:
            raise ConfigError(f"Invalid config: {e}") from e

    def save(self, path: Path) -> bool:
        """
        Write the merged configuration to a file.

        Returns:
            True if save was successful, False otherwise.
        """
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.config, indent=2, sort_keys=True), encoding="utf-8")
            logger.info(f"Saved config to {path}")
            return True
        except OSError as e:
            logger.error(f"Failed to save config: {e}")
            return False

    def echo(self) -> dict[str, Any]:
        """The validated config as plain JSON, embedded in every report."""
        return self.experiment.model_dump(mode="json")

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """Set a value and revalidate."""
        self.config[key] = value
        self.experiment = self.validate()

    def __getitem__(self, key: str) -> Any:
        return self.config[key]

    def __setitem__(self, key: str, value: Any) -> None:
        self.set(key, value)

    def __contains__(self, key: str) -> bool:
        return key in self.config
