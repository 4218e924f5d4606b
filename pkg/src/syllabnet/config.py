"""Model and training hyperparameters, with the Base / Small / BaseSoftmax presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Literal

OutputHead = Literal["crf", "softmax"]
StopMetric = Literal["dev_accuracy", "dev_loss"]


@dataclass(frozen=True)
class ModelConfig:
    embedding_dim: int = 300
    lstm_dim: int = 300
    conv_blocks: int = 2
    conv_filters: int = 200
    conv_width: int = 3
    pool_size: int = 2
    dropout_rate: float = 0.25
    output_head: OutputHead = "crf"
    batch_size: int = 64
    max_epochs: int = 120
    patience: int = 10
    clip_threshold: float = 1.0
    learning_rate: float = 1e-3
    forget_bias: float = 1.0
    stop_metric: StopMetric = "dev_accuracy"
    dtype: str = "float64"

    def __post_init__(self):
        for name in ("embedding_dim", "lstm_dim", "conv_blocks", "conv_filters",
                     "conv_width", "pool_size", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.output_head not in ("crf", "softmax"):
            raise ValueError(f"unknown output head {self.output_head!r}")
        if self.stop_metric not in ("dev_accuracy", "dev_loss"):
            raise ValueError(f"unknown stop metric {self.stop_metric!r}")
        if self.clip_threshold <= 0 or self.learning_rate <= 0:
            raise ValueError("clip_threshold and learning_rate must be positive")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    @property
    def concat_dim(self) -> int:
        return 2 * self.lstm_dim + self.conv_filters

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


BASE = ModelConfig()
SMALL = BASE.replace(conv_blocks=1, conv_filters=40, lstm_dim=50, embedding_dim=100)
BASE_SOFTMAX = BASE.replace(output_head="softmax")

PRESETS = {"base": BASE, "small": SMALL, "base-softmax": BASE_SOFTMAX}


def preset(name: str) -> ModelConfig:
    key = name.lower().replace("_", "-")
    if key == "basesoftmax":
        key = "base-softmax"
    try:
        return PRESETS[key]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
