"""Experiment configuration: a commented YAML mapping with a closed key set."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..ensembles import EnsembleSpec, GaussianDivisibleSpec
from ..entry_dist import EntryDistribution
from ..estimator import DEFAULT_QUANTILES
from ..spectra import STATISTIC_KINDS


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


TOP_LEVEL_KEYS = {
    "master_seed", "replicates", "n_list", "statistic", "ensembles", "grid", "output_dir",
    "threads", "bulk_center", "bulk_width", "theory_x", "bootstrap",
}
ENSEMBLE_KEYS = {"name", "kind", "t", "entry", "diagonal_variance"}
REQUIRED = ("master_seed", "replicates", "n_list", "statistic", "ensembles")


@dataclass(frozen=True)
class EnsembleConfig:
    name: str
    kind: str
    entry: EntryDistribution
    t: float = 0.0
    diagonal_variance: float = 1.0

    @property
    def effective_kappa4(self) -> float:
        return self.entry.kappa4 / (1.0 + self.t) ** 2

    def spec(self, n: int) -> EnsembleSpec | GaussianDivisibleSpec:
        base = EnsembleSpec(self.kind, n, self.entry, diagonal_variance=self.diagonal_variance)
        return GaussianDivisibleSpec(base, self.t) if self.t > 0 else base

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "t": self.t,
            "entry": self.entry.to_dict(),
            "diagonal_variance": self.diagonal_variance,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    replicates: int
    n_list: tuple[int, ...]
    statistic: str
    ensembles: tuple[EnsembleConfig, ...]
    grid: tuple[float, ...] = DEFAULT_QUANTILES
    output_dir: str = "rmt_output"
    threads: int | str = 1
    bulk_center: float = 0.0
    bulk_width: float = 1.0
    theory_x: tuple[float, float, int] | None = None
    bootstrap: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.replicates < 100:
            raise ConfigError(f"replicates must be at least 100, got {self.replicates}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("n_list must hold positive integers")
        if self.statistic not in STATISTIC_KINDS:
            raise ConfigError(f"statistic must be one of {STATISTIC_KINDS}, got {self.statistic!r}")
        if not self.ensembles:
            raise ConfigError("at least one ensemble is required")
        want = "covariance_factor" if self.statistic == "hard_edge_min" else "wigner"
        for e in self.ensembles:
            if e.kind != want:
                raise ConfigError(f"statistic {self.statistic} needs {want} ensembles; {e.name} is {e.kind}")
        names = [e.name for e in self.ensembles]
        if len(set(names)) != len(names):
            raise ConfigError(f"ensemble names must be unique: {names}")
        if not all(0.0 < q < 1.0 for q in self.grid):
            raise ConfigError("grid quantile levels must lie in (0, 1)")
        if not -2.0 < self.bulk_center < 2.0:
            raise ConfigError("bulk_center must lie inside the semicircle support (-2, 2)")
        if self.bulk_width <= 0:
            raise ConfigError("bulk_width must be positive")
        if self.threads != "auto" and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError("threads must be a positive integer or 'auto'")

    def resolved_threads(self) -> int:
        env = os.environ.get("RMT_THREADS")
        value: int | str = self.threads
        if env:
            value = env if env == "auto" else _as_int("RMT_THREADS", env)
        if value == "auto":
            return os.cpu_count() or 1
        if int(value) < 1:
            raise ConfigError("thread count must be positive")
        return int(value)

    def sampling_dict(self) -> dict[str, Any]:
        """Everything that determines samples.csv, and nothing else."""
        return {
            "master_seed": self.master_seed,
            "replicates": self.replicates,
            "n_list": list(self.n_list),
            "statistic": self.statistic,
            "ensembles": [e.to_dict() for e in self.ensembles],
            "bulk_center": self.bulk_center,
            "bulk_width": self.bulk_width,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.sampling_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        d = self.sampling_dict()
        d.update(grid=list(self.grid), output_dir=self.output_dir, threads=self.threads,
                 bootstrap=self.bootstrap)
        if self.theory_x is not None:
            d["theory_x"] = {"start": self.theory_x[0], "stop": self.theory_x[1], "num": self.theory_x[2]}
        return d


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer")
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None
    if out != value and not isinstance(value, str):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return out


def _ensemble_from_dict(i: int, d: Any) -> EnsembleConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"ensembles[{i}] must be a mapping")
    unknown = set(d) - ENSEMBLE_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in ensembles[{i}]: {sorted(unknown)}")
    if "kind" not in d or "entry" not in d:
        raise ConfigError(f"ensembles[{i}] needs 'kind' and 'entry'")
    try:
        entry = EntryDistribution.from_dict(dict(d["entry"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"ensembles[{i}].entry: {exc}") from None
    t = float(d.get("t", 0.0))
    if t < 0:
        raise ConfigError(f"ensembles[{i}].t must be nonnegative")
    return EnsembleConfig(
        name=str(d.get("name", f"ens{i}")),
        kind=str(d["kind"]),
        entry=entry,
        t=t,
        diagonal_variance=float(d.get("diagonal_variance", 1.0)),
    )


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    ensembles = raw["ensembles"]
    if not isinstance(ensembles, list):
        raise ConfigError("ensembles must be a list")
    theory_x = raw.get("theory_x")
    if theory_x is not None:
        if not isinstance(theory_x, dict) or set(theory_x) != {"start", "stop", "num"}:
            raise ConfigError("theory_x must be a mapping with start, stop and num")
        theory_x = (float(theory_x["start"]), float(theory_x["stop"]), _as_int("theory_x.num", theory_x["num"]))
    threads = raw.get("threads", 1)
    if threads != "auto":
        threads = _as_int("threads", threads)
    n_list = raw["n_list"]
    if not isinstance(n_list, list):
        raise ConfigError("n_list must be a list")
    return ExperimentConfig(
        master_seed=_as_int("master_seed", raw["master_seed"]),
        replicates=_as_int("replicates", raw["replicates"]),
        n_list=tuple(_as_int("n_list", n) for n in n_list),
        statistic=str(raw["statistic"]),
        ensembles=tuple(_ensemble_from_dict(i, e) for i, e in enumerate(ensembles)),
        grid=tuple(float(q) for q in raw.get("grid", DEFAULT_QUANTILES)),
        output_dir=str(raw.get("output_dir", "rmt_output")),
        threads=threads,
        bulk_center=float(raw.get("bulk_center", 0.0)),
        bulk_width=float(raw.get("bulk_width", 1.0)),
        theory_x=theory_x,
        bootstrap=_as_int("bootstrap", raw.get("bootstrap", 0)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return config_from_dict(raw)
