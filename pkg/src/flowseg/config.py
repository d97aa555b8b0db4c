"""Configuration dataclasses, validation, presets and YAML round-trip.

Three config families:

* :class:`ModelConfig`  -- architecture of the velocity network and feature
  encoder (patching, level depths/widths, attention kernels, mapping network,
  channel counts).
* :class:`TrainConfig`  -- optimization schedule and augmentation toggles.
* :class:`InferConfig`  -- sampling steps and threshold calibration grid.

Configs are plain frozen-ish dataclasses: validate once with
:func:`validate`, then treat as immutable.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "InferConfig",
    "ExperimentConfig",
    "ConfigError",
    "validate",
    "preset",
    "PRESET_NAMES",
    "save_config",
    "load_config",
]


class ConfigError(ValueError):
    """Raised for unparseable or structurally invalid config files."""


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``depths``/``widths`` have one entry per hierarchy level (the last level
    is the global-attention bottleneck); ``neighborhood_kernels`` has one
    entry per non-bottleneck level.
    """

    patch_size: tuple[int, int] = (4, 4)
    depths: list[int] = field(default_factory=lambda: [2, 2, 2])
    widths: list[int] = field(default_factory=lambda: [128, 256, 384])
    neighborhood_kernels: list[int] = field(default_factory=lambda: [9, 13])
    mapping_depth: int = 1
    mapping_width: int = 256
    mapping_hidden: int = 784
    num_heads_per_level: list[int] = field(default_factory=lambda: [2, 4, 6])
    seg_channels: int = 4
    image_channels: int = 1
    input_size: tuple[int, int] = (224, 224)
    # Gaps the source architecture table leaves open.
    ffn_expansion: int = 3
    hfe_enabled: bool = True
    fusion_mode: str = "lerp"  # "lerp" | "add"
    fuse_bottleneck: bool = True

    def __post_init__(self) -> None:
        self.patch_size = tuple(int(v) for v in self.patch_size)  # type: ignore[assignment]
        self.input_size = tuple(int(v) for v in self.input_size)  # type: ignore[assignment]
        self.depths = [int(v) for v in self.depths]
        self.widths = [int(v) for v in self.widths]
        self.neighborhood_kernels = [int(v) for v in self.neighborhood_kernels]
        self.num_heads_per_level = [int(v) for v in self.num_heads_per_level]

    @property
    def num_levels(self) -> int:
        return len(self.depths)

    def token_grid(self, level: int) -> tuple[int, int]:
        """Token-grid resolution (rows, cols) at a hierarchy level."""
        h, w = self.input_size
        ph, pw = self.patch_size
        return h // (ph * 2**level), w // (pw * 2**level)

    def head_dim(self, level: int) -> int:
        return self.widths[level] // self.num_heads_per_level[level]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    warmup_fraction: float = 0.01
    seed: int = 0
    grad_clip: float | None = 1.0
    # Augmentation toggles
    aug_flips: bool = True
    aug_rotate_scale: bool = True
    aug_intensity: bool = True
    aug_gamma: bool = True
    aug_noise: bool = True

    def augmentations_off(self) -> "TrainConfig":
        return dataclasses.replace(
            self,
            aug_flips=False,
            aug_rotate_scale=False,
            aug_intensity=False,
            aug_gamma=False,
            aug_noise=False,
        )


@dataclass
class InferConfig:
    euler_steps: int = 3
    thresholds: list[float] | None = None
    grid_count: int = 100
    grid_lo: float = 0.2
    grid_hi: float = 0.8


@dataclass
class ExperimentConfig:
    """Bundle written to / read from one YAML document."""

    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    infer: InferConfig = field(default_factory=InferConfig)


def validate(config: ModelConfig) -> list[str]:
    """Return every invariant violation; an empty list means valid."""
    v: list[str] = []
    nl = len(config.depths)
    if len(config.widths) != nl:
        v.append(f"widths has {len(config.widths)} entries, expected {nl} (one per level)")
    if len(config.neighborhood_kernels) != nl - 1:
        v.append(
            f"neighborhood_kernels has {len(config.neighborhood_kernels)} entries, "
            f"expected {nl - 1} (one per non-bottleneck level)"
        )
    if len(config.num_heads_per_level) != nl:
        v.append(
            f"num_heads_per_level has {len(config.num_heads_per_level)} entries, expected {nl}"
        )
    for k in config.neighborhood_kernels:
        if k % 2 == 0:
            v.append(f"kernel must be odd, got {k}")
        if k < 3:
            v.append(f"kernel must be >= 3, got {k}")
    ph, pw = config.patch_size
    if ph < 1 or pw < 1:
        v.append(f"patch_size entries must be positive, got {config.patch_size}")
    else:
        div_h = ph * 2 ** (nl - 1)
        div_w = pw * 2 ** (nl - 1)
        h, w = config.input_size
        if h % div_h != 0 or w % div_w != 0:
            v.append(
                f"input_size {h}x{w} not divisible by {div_h}"
                + (f"x{div_w}" if div_w != div_h else "")
                + " (patch_size * 2^(levels-1))"
            )
    for width, heads in zip(config.widths, config.num_heads_per_level):
        if heads < 1:
            v.append(f"head count must be >= 1, got {heads}")
            continue
        if width % heads != 0:
            v.append(f"width {width} not divisible by head count {heads}")
        elif (width // heads) % 4 != 0:
            v.append(
                f"head dim {width // heads} (width {width} / heads {heads}) "
                "must be divisible by 4 for axial rotary embeddings"
            )
    for d in config.depths:
        if d < 1:
            v.append(f"depth must be >= 1, got {d}")
    if config.mapping_depth < 1 or config.mapping_width < 1 or config.mapping_hidden < 1:
        v.append("mapping_depth/width/hidden must be positive")
    if config.seg_channels < 1 or config.image_channels < 1:
        v.append("seg_channels and image_channels must be >= 1")
    if config.fusion_mode not in ("lerp", "add"):
        v.append(f"fusion_mode must be 'lerp' or 'add', got {config.fusion_mode!r}")
    return v


def validate_train(config: TrainConfig) -> list[str]:
    v: list[str] = []
    if config.learning_rate <= 0:
        v.append(f"learning_rate must be > 0, got {config.learning_rate}")
    if not (0 <= config.warmup_fraction < 1):
        v.append(f"warmup_fraction must be in [0, 1), got {config.warmup_fraction}")
    if config.batch_size < 1:
        v.append(f"batch_size must be >= 1, got {config.batch_size}")
    if config.weight_decay < 0:
        v.append(f"weight_decay must be >= 0, got {config.weight_decay}")
    return v


def validate_infer(config: InferConfig) -> list[str]:
    v: list[str] = []
    if config.euler_steps < 1:
        v.append(f"euler_steps must be >= 1, got {config.euler_steps}")
    if not (0 < config.grid_lo < config.grid_hi < 1):
        v.append(f"threshold grid must satisfy 0 < lo < hi < 1, got ({config.grid_lo}, {config.grid_hi})")
    if config.grid_count < 2:
        v.append(f"grid_count must be >= 2, got {config.grid_count}")
    return v


PRESET_NAMES = ("paper", "tiny", "unit")


def preset(name: str) -> ModelConfig:
    """Named architecture presets.

    ``paper``: the published configuration at 224x224.
    ``tiny``: desk-scale 64x64 for fast CPU experiments.
    ``unit``: smallest valid network, for gradient and counting tests.
    """
    if name == "paper":
        return ModelConfig()
    if name == "tiny":
        return ModelConfig(
            patch_size=(4, 4),
            depths=[1, 1, 1],
            widths=[32, 64, 96],
            neighborhood_kernels=[5, 7],
            mapping_depth=1,
            mapping_width=128,
            mapping_hidden=256,
            num_heads_per_level=[1, 2, 3],
            seg_channels=4,
            image_channels=1,
            input_size=(64, 64),
        )
    if name == "unit":
        return ModelConfig(
            patch_size=(2, 2),
            depths=[1, 1],
            widths=[8, 16],
            neighborhood_kernels=[3],
            mapping_depth=1,
            mapping_width=16,
            mapping_hidden=32,
            num_heads_per_level=[1, 2],
            seg_channels=2,
            image_channels=1,
            input_size=(8, 8),
        )
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


# --- YAML round trip ---------------------------------------------------------

_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "infer": InferConfig}


def _to_plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, list):
        return [_to_plain(v) for v in obj]
    return obj


def _from_mapping(cls: type, data: dict, section: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        warnings.warn(
            f"ignoring unknown config keys in {section!r}: {', '.join(unknown)}",
            stacklevel=3,
        )
    kwargs = {k: v for k, v in data.items() if k in names}
    # Fields without defaults must be present; all our fields have defaults, so
    # instead require the full architecture section explicitly.
    if cls is ModelConfig:
        required = {
            "patch_size",
            "depths",
            "widths",
            "neighborhood_kernels",
            "num_heads_per_level",
            "seg_channels",
            "image_channels",
            "input_size",
        }
        missing = sorted(required - set(kwargs))
        if missing:
            raise ConfigError(f"config section {section!r} is missing field(s): {', '.join(missing)}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in config section {section!r}: {exc}") from exc


def save_config(config: ExperimentConfig | ModelConfig, path: str | Path) -> None:
    """Write a config (or full experiment bundle) as a YAML document."""
    if isinstance(config, ModelConfig):
        config = ExperimentConfig(model=config)
    doc = {name: _to_plain(getattr(config, name)) for name in _SECTIONS}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a YAML config; unknown keys warn, missing model fields error."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if raw is None:
        raise ConfigError(f"{path} is empty")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "model" not in raw:
        raise ConfigError(f"{path}: missing required section 'model'")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        warnings.warn(f"ignoring unknown config sections: {', '.join(unknown)}", stacklevel=2)
    sections = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            sections[name] = _from_mapping(cls, raw[name], name)
        else:
            sections[name] = cls()
    return ExperimentConfig(**sections)
