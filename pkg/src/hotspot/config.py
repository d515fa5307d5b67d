"""Pipeline configuration: one YAML file with a section per stage.

Top level keys: ``seed``, ``threads``, ``output`` and the sections
``generator`` (with nested ``missingness``), ``imputation``, ``analysis``,
``grid`` and ``report``. Every key is optional; unknown keys are errors.
Stage seeds left unset are derived from ``seed``.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .autoencoder import AutoencoderSpec
from .evaluation import ExperimentGrid
from .synthgen import GeneratorConfig, MissingnessConfig, default_pattern_mix

CONFIG_DIR = Path(__file__).parent / "configs"
DEFAULT_ROOT = "hotspot_out"
STAGES = ("generator", "imputation", "grid")


class ConfigError(ValueError):
    pass


@dataclass
class ImputationConfig:
    method: str = "autoencoder"
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-4
    max_corruption: float = 0.5
    n_encoder_layers: int = 4
    dtype: str = "float32"
    seed: int | None = None

    def spec(self, l_kpis: int) -> AutoencoderSpec:
        return dataclasses.replace(
            AutoencoderSpec.for_kpis(l_kpis),
            n_encoder_layers=self.n_encoder_layers,
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            max_corruption=self.max_corruption,
            dtype=self.dtype,
        )


@dataclass
class AnalysisConfig:
    n_nearest: int = 500
    n_top: int = 100
    spatial_modes: tuple[str, ...] = ("avg-nearest", "max-nearest", "max-top")
    bucket_low_km: float = 0.05
    bucket_high_km: float = 50.0
    n_buckets: int = 10
    exclude_never_hot: bool = True


@dataclass
class ReportConfig:
    reference_w: int = 7
    reference_h: int = 7


@dataclass
class PipelineConfig:
    seed: int = 0
    threads: int = 1
    output: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    imputation: ImputationConfig = field(default_factory=ImputationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    grid: ExperimentGrid = field(default_factory=ExperimentGrid)
    report: ReportConfig = field(default_factory=ReportConfig)

    def output_root(self, override: str | None = None) -> Path:
        root = override or self.output or os.environ.get("HOTSPOT_HOME") or DEFAULT_ROOT
        return Path(root)


def derive_seed(seed: int, stage: str) -> int:
    return int(np.random.SeedSequence([int(seed), STAGES.index(stage)]).generate_state(1)[0])


def _build(cls, raw, where: str, convert=None):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    for key, fn in (convert or {}).items():
        if key in kwargs:
            kwargs[key] = fn(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _int_list(value, where):
    """A list of ints or an inclusive ``{start, stop, step}`` range."""
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "step"}
        if extra or "start" not in value or "stop" not in value:
            raise ConfigError(f"{where}: a range needs start and stop (optional step)")
        return tuple(range(int(value["start"]), int(value["stop"]) + 1, int(value.get("step", 1))))
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, int) for v in value):
        raise ConfigError(f"{where}: expected a list of integers or a range mapping")
    return tuple(value)


def _generator(raw) -> GeneratorConfig:
    raw = dict(raw or {})
    never_hot = raw.pop("never_hot_share", None)
    miss = raw.pop("missingness", None)
    conv = {
        "missingness": lambda v: v,
        "start": lambda v: v if isinstance(v, dt.datetime) else dt.datetime.fromisoformat(str(v)),
        "holidays": lambda v: tuple(str(h) for h in v),
        "daily_shape": lambda v: np.asarray(v, dtype=float),
    }
    if miss is not None:
        raw["missingness"] = _build(MissingnessConfig, miss, "generator.missingness")
    if never_hot is not None:
        if "weekly_pattern_mix" in raw:
            raise ConfigError("generator: give weekly_pattern_mix or never_hot_share, not both")
        raw["weekly_pattern_mix"] = default_pattern_mix(float(never_hot))
    cfg = _build(GeneratorConfig, raw, "generator", conv)
    try:
        cfg.validate()
    except ValueError as e:
        raise ConfigError(f"generator: {e}") from e
    return cfg


def _grid(raw) -> ExperimentGrid:
    conv = {
        "t_values": lambda v: _int_list(v, "grid.t_values"),
        "h_values": lambda v: _int_list(v, "grid.h_values"),
        "w_values": lambda v: _int_list(v, "grid.w_values"),
        "models": tuple,
        "targets": tuple,
        "importance_cells": lambda v: tuple(tuple(int(a) for a in c) for c in v),
    }
    return _build(ExperimentGrid, raw, "grid", conv)


def parse_config(raw: dict | None) -> PipelineConfig:
    raw = dict(raw or {})
    top = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    seed = raw.get("seed", 0)
    threads = raw.get("threads", 1)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError("threads must be a positive integer")
    imputation = _build(ImputationConfig, raw.get("imputation"), "imputation")
    if imputation.method not in ("autoencoder", "carry-forward"):
        raise ConfigError("imputation.method must be 'autoencoder' or 'carry-forward'")
    analysis = _build(AnalysisConfig, raw.get("analysis"), "analysis", {"spatial_modes": tuple})
    cfg = PipelineConfig(
        seed=seed,
        threads=threads,
        output=raw.get("output"),
        generator=_generator(raw.get("generator")),
        imputation=imputation,
        analysis=analysis,
        grid=_grid(raw.get("grid")),
        report=_build(ReportConfig, raw.get("report"), "report"),
    )
    return resolve_seeds(cfg, explicit=raw)


def resolve_seeds(cfg: PipelineConfig, explicit: dict | None = None, override: int | None = None):
    """Fill stage seeds not given explicitly; ``override`` replaces the global
    seed and re-derives every stage seed."""
    explicit = explicit or {}
    if override is not None:
        cfg.seed = int(override)
        explicit = {}

    def given(section):
        return isinstance(explicit.get(section), dict) and "seed" in explicit[section]

    if not given("generator"):
        cfg.generator.seed = derive_seed(cfg.seed, "generator")
    if not given("imputation"):
        cfg.imputation.seed = derive_seed(cfg.seed, "imputation")
    if not given("grid"):
        cfg.grid.seed = derive_seed(cfg.seed, "grid")
    cfg.grid.threads = cfg.threads
    return cfg


def load_config(path=None) -> PipelineConfig:
    """Load a YAML file, or the bundled default when ``path`` is None.

    ``path`` may also name a bundled config (``tiny`` or ``default``).
    """
    if path is None:
        path = CONFIG_DIR / "default.yaml"
    p = Path(path)
    if not p.exists() and (CONFIG_DIR / f"{path}.yaml").exists():
        p = CONFIG_DIR / f"{path}.yaml"
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{p}: {e}") from e
    return parse_config(raw)


def config_to_dict(cfg: PipelineConfig, exclude=("threads",)) -> dict:
    """Plain-data view of the resolved configuration, for provenance files.

    Thread counts are left out by default: they never change results, and
    provenance files must stay byte-identical across them.
    """

    def plain(v):
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v) if f.name not in exclude}
        if isinstance(v, dict):
            return {str(k): plain(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [plain(x) for x in v]
        if isinstance(v, np.ndarray):
            return [plain(x) for x in v.tolist()]
        if isinstance(v, (dt.datetime, dt.date)):
            return v.isoformat()
        if isinstance(v, np.generic):
            return v.item()
        return v

    return plain(cfg)
