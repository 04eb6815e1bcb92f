"""Scenario configuration and report containers."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .. import __version__
from ..errors import ConfigError, DomainError
from ..kernel import KernelSpec

SCHEMA_VERSION = 1
REPORT_SCHEMA = "gsqg.report/1"
SCENARIOS = (
    "two_vortex",
    "conservation_suite",
    "blob_to_point",
    "approximation",
    "localization",
    "collision_statistics",
    "wasserstein_stability",
)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    scenario: str
    kernel: KernelSpec
    params: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version!r}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not isinstance(self.kernel, KernelSpec):
            raise ConfigError("kernel must be a KernelSpec")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be a mapping")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "kernel": self.kernel.to_dict(),
            "seed": self.seed,
            "params": self.params,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(data) - {"schema_version", "scenario", "kernel", "seed", "params", "output_dir"}
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        for key in ("schema_version", "scenario", "kernel"):
            if key not in data:
                raise ConfigError(f"missing required key {key!r}")
        try:
            kernel = KernelSpec.from_dict(dict(data["kernel"]))
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"invalid kernel: {exc}") from exc
        return cls(
            scenario=data["scenario"],
            kernel=kernel,
            params=dict(data.get("params") or {}),
            seed=data.get("seed", 0),
            output_dir=data.get("output_dir"),
            schema_version=data["schema_version"],
        )

    def replace(self, **changes) -> "ScenarioConfig":
        d = {
            "scenario": self.scenario,
            "kernel": self.kernel,
            "params": self.params,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "schema_version": self.schema_version,
        }
        d.update(changes)
        return ScenarioConfig(**d)

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical JSON form; the output directory is not part of it."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ScenarioConfig.from_dict(data)


def dump_config(config: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


@dataclass
class ScenarioReport:
    scenario: str
    config_hash: str
    version: str = __version__
    metrics: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    envelopes: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    wall_clock: float = 0.0
    csv: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def verdict(self, clause: str, ok, envelope: Optional[str] = None) -> bool:
        self.verdicts[clause] = bool(ok)
        if envelope is not None:
            self.envelopes[clause] = envelope
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "version": self.version,
            "passed": self.passed,
            "verdicts": self.verdicts,
            "envelopes": self.envelopes,
            "metrics": self.metrics,
            "notes": self.notes,
            "wall_clock_s": self.wall_clock,
            "csv_files": sorted(self.csv),
        }

    def write(self, out_dir) -> str:
        os.makedirs(out_dir, exist_ok=True)
        for name, text in self.csv.items():
            with open(os.path.join(out_dir, name), "w", newline="") as fh:
                fh.write(text)
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_json_default)
            fh.write("\n")
        return path


def _json_default(obj):
    try:
        return float(obj)
    except (TypeError, ValueError):
        return str(obj)


def read_report(out_dir) -> dict:
    with open(os.path.join(out_dir, "report.json")) as fh:
        data = json.load(fh)
    if data.get("schema") != REPORT_SCHEMA:
        raise ConfigError(f"unsupported report schema {data.get('schema')!r}")
    return data
