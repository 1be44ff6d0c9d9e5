"""Architecture configuration: canonical variants, validation, strict JSON I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

from .schedules import LAMBDA_MODES, PHASE_KINDS

VARIANTS = ("tiny", "base", "custom")
FUSION_MODES = ("eq5", "normalized")

TINY_PATTERN = (2, 2, 2, 2)
BASE_PATTERN = (2, 4, 6, 8)


class ConfigError(ValueError):
    """Raised for structurally or semantically invalid architecture configs."""


@dataclass(frozen=True)
class ArchConfig:
    """Complete static description of a network variant."""

    variant: str = "tiny"
    stem_out: int = 32
    stage_channels: tuple[int, ...] = (64, 128, 256)
    expansions: tuple[tuple[int, ...], ...] = (TINY_PATTERN,) * 3
    layers_per_block: int = 4
    channel_dropout_p: float = 0.1
    classifier_hidden: int = 128
    classifier_dropout: float = 0.2
    num_classes: int = 10
    fusion_mode: str = "eq5"
    beta_schedule: tuple[float, float] = (0.4, 0.1)
    phase_schedule: str = "linear"
    lambda_mode: str = "scheduled"


def tiny_config(num_classes: int = 10) -> ArchConfig:
    cfg = ArchConfig(variant="tiny", num_classes=num_classes)
    validate_config(cfg)
    return cfg


def base_config(num_classes: int = 10) -> ArchConfig:
    cfg = ArchConfig(
        variant="base",
        expansions=(BASE_PATTERN,) * 3,
        num_classes=num_classes,
    )
    validate_config(cfg)
    return cfg


def block_channel_progression(c_out: int, layers: int) -> tuple[int, ...]:
    """Per-layer output channels inside a block: halving chain ending at c_out."""
    if c_out % (1 << (layers - 1)):
        raise ConfigError(
            f"stage channels {c_out} not divisible by {1 << (layers - 1)} "
            f"as required by {layers} halving layers"
        )
    return tuple(c_out >> (layers - 1 - i) for i in range(layers))


def validate_config(cfg: ArchConfig) -> None:
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {cfg.variant!r}")
    if cfg.stem_out < 1:
        raise ConfigError(f"stem_out must be >= 1, got {cfg.stem_out}")
    if not 1 <= cfg.layers_per_block <= 8:
        raise ConfigError(f"layers_per_block must be in [1, 8], got {cfg.layers_per_block}")
    if not cfg.stage_channels:
        raise ConfigError("stage_channels must not be empty")
    for c in cfg.stage_channels:
        if c < 1:
            raise ConfigError(f"stage channel must be >= 1, got {c}")
        block_channel_progression(c, cfg.layers_per_block)
    if len(cfg.expansions) != len(cfg.stage_channels):
        raise ConfigError(
            f"expansions has {len(cfg.expansions)} stages but stage_channels has "
            f"{len(cfg.stage_channels)}"
        )
    for stage in cfg.expansions:
        if len(stage) != cfg.layers_per_block:
            raise ConfigError(
                f"expansion list {list(stage)} does not match layers_per_block="
                f"{cfg.layers_per_block}"
            )
        for e in stage:
            if e < 1:
                raise ConfigError(f"expansion ratios must be >= 1, got {e}")
    if cfg.variant == "tiny" and any(s != TINY_PATTERN[: cfg.layers_per_block] for s in cfg.expansions):
        raise ConfigError("tiny variant requires expansions [2,2,2,2] in every stage")
    if cfg.variant == "base" and any(s != BASE_PATTERN[: cfg.layers_per_block] for s in cfg.expansions):
        raise ConfigError("base variant requires expansions [2,4,6,8] in every stage")
    if not 0.0 <= cfg.channel_dropout_p < 1.0:
        raise ConfigError(f"channel_dropout_p must be in [0, 1), got {cfg.channel_dropout_p}")
    if not 0.0 <= cfg.classifier_dropout < 1.0:
        raise ConfigError(f"classifier_dropout must be in [0, 1), got {cfg.classifier_dropout}")
    if cfg.classifier_hidden < 1:
        raise ConfigError(f"classifier_hidden must be >= 1, got {cfg.classifier_hidden}")
    if cfg.num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {cfg.num_classes}")
    if cfg.fusion_mode not in FUSION_MODES:
        raise ConfigError(f"fusion_mode must be one of {FUSION_MODES}, got {cfg.fusion_mode!r}")
    if cfg.phase_schedule not in PHASE_KINDS:
        raise ConfigError(f"phase_schedule must be one of {PHASE_KINDS}, got {cfg.phase_schedule!r}")
    if cfg.lambda_mode not in LAMBDA_MODES:
        raise ConfigError(f"lambda_mode must be one of {LAMBDA_MODES}, got {cfg.lambda_mode!r}")
    base, ramp = cfg.beta_schedule
    if base <= 0 or ramp < 0:
        raise ConfigError(f"beta_schedule needs base > 0 and ramp >= 0, got {cfg.beta_schedule}")


def _expect_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"field {name!r} must be an integer, got {value!r}")
    return value


def _expect_real(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {name!r} must be a number, got {value!r}")
    return float(value)


def _expect_str(name: str, value) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"field {name!r} must be a string, got {value!r}")
    return value


def config_to_dict(cfg: ArchConfig) -> dict:
    return {
        "variant": cfg.variant,
        "stem_out": cfg.stem_out,
        "stage_channels": list(cfg.stage_channels),
        "expansions": [list(s) for s in cfg.expansions],
        "layers_per_block": cfg.layers_per_block,
        "channel_dropout_p": cfg.channel_dropout_p,
        "classifier_hidden": cfg.classifier_hidden,
        "classifier_dropout": cfg.classifier_dropout,
        "num_classes": cfg.num_classes,
        "fusion_mode": cfg.fusion_mode,
        "beta_schedule": list(cfg.beta_schedule),
        "phase_schedule": cfg.phase_schedule,
        "lambda_mode": cfg.lambda_mode,
    }


def config_from_dict(doc: dict) -> ArchConfig:
    """Build and validate a config from a parsed JSON object; strict on unknowns."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config document must be a JSON object, got {type(doc).__name__}")
    known = {f.name for f in fields(ArchConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")

    kwargs: dict = {}
    if "variant" in doc:
        kwargs["variant"] = _expect_str("variant", doc["variant"])
    variant = kwargs.get("variant", "tiny")
    if variant == "base" and "expansions" not in doc:
        kwargs["expansions"] = (BASE_PATTERN,) * 3

    for name in ("stem_out", "layers_per_block", "classifier_hidden", "num_classes"):
        if name in doc:
            kwargs[name] = _expect_int(name, doc[name])
    for name in ("channel_dropout_p", "classifier_dropout"):
        if name in doc:
            kwargs[name] = _expect_real(name, doc[name])
    for name in ("fusion_mode", "phase_schedule", "lambda_mode"):
        if name in doc:
            kwargs[name] = _expect_str(name, doc[name])
    if "stage_channels" in doc:
        raw = doc["stage_channels"]
        if not isinstance(raw, list):
            raise ConfigError(f"field 'stage_channels' must be a list, got {raw!r}")
        kwargs["stage_channels"] = tuple(_expect_int("stage_channels", v) for v in raw)
    if "expansions" in doc:
        raw = doc["expansions"]
        if not isinstance(raw, list) or not all(isinstance(s, list) for s in raw):
            raise ConfigError(f"field 'expansions' must be a list of lists, got {raw!r}")
        kwargs["expansions"] = tuple(
            tuple(_expect_int("expansions", v) for v in s) for s in raw
        )
    if "beta_schedule" in doc:
        raw = doc["beta_schedule"]
        if not isinstance(raw, list) or len(raw) != 2:
            raise ConfigError(f"field 'beta_schedule' must be [base, ramp], got {raw!r}")
        kwargs["beta_schedule"] = tuple(_expect_real("beta_schedule", v) for v in raw)

    cfg = ArchConfig(**kwargs)
    validate_config(cfg)
    return cfg


def config_to_json(cfg: ArchConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def config_from_json(text: str) -> ArchConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def load_config(path: str) -> ArchConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_json(fh.read())


def save_config(cfg: ArchConfig, path: str) -> None:
    validate_config(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_json(cfg))


def pattern_config(pattern: tuple[int, ...], num_classes: int = 10) -> ArchConfig:
    """Config for one expansion pattern applied to every stage (sweep rows)."""
    layers = len(pattern)
    if pattern == TINY_PATTERN:
        variant = "tiny"
    elif pattern == BASE_PATTERN:
        variant = "base"
    else:
        variant = "custom"
    cfg = ArchConfig(
        variant=variant,
        expansions=(tuple(pattern),) * 3,
        layers_per_block=layers,
        num_classes=num_classes,
    )
    validate_config(cfg)
    return cfg


def with_overrides(cfg: ArchConfig, **kwargs) -> ArchConfig:
    out = replace(cfg, **kwargs)
    validate_config(out)
    return out
