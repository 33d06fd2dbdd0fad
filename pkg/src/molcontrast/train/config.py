"""Run configuration: a flat ``key = value`` text file mirroring TrainConfig."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError
from ..loss import LossConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class TrainConfig:
    # inputs
    corpus: str = ""           # pre-training SMILES file
    dataset: str = ""          # fine-tuning CSV
    task_types: str = ""       # comma list of classification/regression, one per label column (or one for all)
    checkpoint: str = ""       # fine-tuning start point; empty means random init
    out: str = ""
    # optimisation
    epochs: int = 0            # 0 picks the mode default (pretrain 50, finetune 100)
    batch_size: int = 512
    lr0: float = 5e-4
    encoder_lr: float = -1.0   # fine-tuning only; negative means lr0, 0 freezes the encoder
    weight_decay: float = 1e-5
    decoupled_weight_decay: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    cosine_horizon: int = 0    # 0 means the total number of training steps
    finetune_schedule: str = "constant"   # constant | cosine
    # loss
    tau: float = 0.1
    lambda1: float = 0.5
    lambda2: float = 0.5
    weight_positive: bool = True
    fragment_head: str = "shared"   # shared | separate
    max_fragments: int = 0          # per molecule, 0 means no cap
    # model
    d: int = 512
    d_z: int = 256
    d_h: int = 0               # 0 means d
    n_layers: int = 5
    feature_set: str = "original"
    # data
    mask_rate: float = 0.25
    delete_rate: float = 0.25
    radius: int = 2
    nbits: int = 2048
    valid_fraction: float = 0.05
    train_ratio: float = 0.8
    valid_ratio: float = 0.1
    test_ratio: float = 0.1
    head_input_norm: bool = True   # standardize prediction-head inputs with training-split statistics
    metric: str = "auto"       # auto | roc_auc | rmse | mae
    # run
    seed: int = 0
    deterministic: bool = False
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        ratios = (self.train_ratio, self.valid_ratio, self.test_ratio)
        if min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must be non-negative and sum to 1, got {ratios}")
        if not 0.0 < self.valid_fraction < 1.0:
            raise ConfigError(f"valid_fraction must lie in (0, 1), got {self.valid_fraction}")
        if self.fragment_head not in ("shared", "separate"):
            raise ConfigError(f"fragment_head must be shared or separate, got {self.fragment_head!r}")
        if self.finetune_schedule not in ("constant", "cosine"):
            raise ConfigError(f"finetune_schedule must be constant or cosine, got {self.finetune_schedule!r}")
        if self.metric not in ("auto", "roc_auc", "rmse", "mae"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        for name in ("d", "d_z", "n_layers", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        try:
            self.loss_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def loss_config(self) -> LossConfig:
        return LossConfig(self.tau, self.lambda1, self.lambda2, self.weight_positive)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _convert(name: str, kind, text: str):
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot read {text!r} as {kind.__name__}") from None


_TYPES = {"str": str, "int": int, "float": float, "bool": bool}


def parse_config(text: str, source: str = "<config>", **overrides) -> TrainConfig:
    """Build a TrainConfig from ``key = value`` lines; ``#`` starts a comment.

    Unknown keys and duplicates are errors. Keyword overrides win over the text.
    """
    known = {f.name: _TYPES[f.type] for f in fields(TrainConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key {key!r}")
        values[key] = _convert(key, known[key], value)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def load_config(path, **overrides) -> TrainConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path), **overrides)


def require(cfg: TrainConfig, *keys: str) -> None:
    """Raise naming the first required key that is unset."""
    for key in keys:
        if getattr(cfg, key) in ("", None):
            raise ConfigError(f"missing required config key {key!r}")
