"""Run configuration: dataclasses, YAML loading and ``key=value`` overrides."""

from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional

import yaml

from ..backbone import NetworkConfig
from ..errors import ConfigError
from ..losses import CONVENTIONS

VARIANTS = {
    "base": (False, False),
    "+lgaa": (True, False),
    "+lgce": (False, True),
    "full": (True, True),
}
VARIANT_LABELS = {
    "base": "Base",
    "+lgaa": "Base + LGAA",
    "+lgce": "Base + LGCE",
    "full": "LSAFNet",
}


@dataclass
class TrainConfig:
    data_root: str = "data/synthetic"
    val_root: Optional[str] = None  # defaults to data_root
    out_dir: str = "runs/train"
    epochs: int = 50
    batch_size: int = 8
    lr: float = 0.07
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_power: float = 0.9
    max_steps: int = 0  # 0 -> epochs * batches per epoch
    seed: int = 0
    variant: str = "full"
    consistency_convention: str = "as_printed"
    augment: bool = True
    eval_interval: int = 1
    threshold: float = 0.5
    model_size: str = "full"  # "full" or "tiny"
    network: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if self.consistency_convention not in CONVENTIONS:
            raise ConfigError(f"unknown consistency convention {self.consistency_convention!r}")
        if self.model_size not in ("full", "tiny"):
            raise ConfigError(f"model_size must be 'full' or 'tiny', got {self.model_size!r}")
        for name in ("epochs", "batch_size", "eval_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("lr", "lr_power"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_steps < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ConfigError("max_steps, weight_decay and momentum must be non-negative (momentum < 1)")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must lie in (0, 1)")

    def network_config(self, num_classes=None) -> NetworkConfig:
        use_lgaa, use_lgce = VARIANTS[self.variant]
        params = dict(self.network)
        if num_classes is not None:
            params.setdefault("num_classes", num_classes)
        params.update(use_lgaa=use_lgaa, use_lgce=use_lgce)
        if self.model_size == "tiny":
            return NetworkConfig.tiny(**params)
        return NetworkConfig(**params)


@dataclass
class SyntheticConfig:
    out_dir: str = "data/synthetic"
    seed: int = 0
    count: int = 8
    size: int = 64
    num_classes: int = 6
    change_fraction: float = 0.2


@dataclass
class EvalConfig:
    checkpoint: str = "runs/train/best.pt"
    data_root: str = "data/synthetic"
    out_dir: Optional[str] = None
    threshold: float = 0.5
    shards: int = 1
    batch_size: int = 8
    oracle: bool = False  # debug: score ground truth against itself


@dataclass
class PredictConfig:
    checkpoint: str = "runs/train/best.pt"
    data_root: str = "data/synthetic"
    out_dir: str = "runs/predict"
    threshold: float = 0.5
    batch_size: int = 8


def _coerce(value):
    if not isinstance(value, str):
        return value
    parsed = yaml.safe_load(value)
    if isinstance(parsed, str):
        # YAML 1.1 leaves exponent forms such as 1e-3 as strings
        try:
            return float(parsed)
        except ValueError:
            pass
    return parsed


def apply_overrides(mapping: dict, overrides):
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        target = mapping
        parts = key.strip().split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        target[parts[-1]] = _coerce(raw)
    return mapping


def build_config(cls, path=None, overrides=None, section=None):
    """``section`` names the YAML block to read (or several, first present wins);
    a file without any of them is read as a flat mapping."""
    mapping = {}
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        sections = (section,) if isinstance(section, str) else tuple(section or ())
        for name in sections:
            if isinstance(doc.get(name), dict):
                doc = doc[name]
                break
        mapping.update(doc)
    apply_overrides(mapping, overrides)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    return cls(**_typed(cls, mapping))


def _typed(cls, mapping):
    """Cast scalar values to the field's declared int/float type."""
    out = dict(mapping)
    for f in fields(cls):
        value = out.get(f.name)
        if f.type not in (int, float) or value is None or isinstance(value, bool):
            continue
        try:
            cast = f.type(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{f.name} expects {f.type.__name__}, got {value!r}") from None
        if f.type is int and cast != value and not isinstance(value, str):
            raise ConfigError(f"{f.name} expects an integer, got {value!r}")
        out[f.name] = cast
    return out


def write_config(config, out_dir, name="config.yaml"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = asdict(config) if is_dataclass(config) else dict(config)
    with open(out / name, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True)
    return out / name
