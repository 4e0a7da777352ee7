"""
运行配置数据类

Frozen dataclasses produced by the marshmallow schemas in models.schemas.
Defaults follow the published search and training setup.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

from core.errors import ConfigError
from .base import BaseModel

DEFAULT_RESOLUTIONS = (4, 8, 16, 32)


@dataclass(frozen=True)
class SearchConfig(BaseModel):
    """Search space shape: L layers, B blocks, channel multiplier F."""
    layers: int = 10
    blocks: int = 5
    filter_multiplier: int = 8
    num_classes: int = 7
    resolutions: Tuple[int, ...] = DEFAULT_RESOLUTIONS

    def __post_init__(self):
        object.__setattr__(self, 'resolutions', tuple(int(s) for s in self.resolutions))
        for name in ('layers', 'blocks', 'filter_multiplier', 'num_classes'):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive", details={name: getattr(self, name)})
        if not self.resolutions or len(self.resolutions) > len(DEFAULT_RESOLUTIONS):
            raise ConfigError("resolutions must hold between 1 and 4 levels")
        expected = DEFAULT_RESOLUTIONS[:len(self.resolutions)]
        if self.resolutions != expected:
            raise ConfigError(
                "resolutions must be consecutive powers of two starting at 4",
                details={'resolutions': list(self.resolutions)},
            )

    @property
    def num_edges(self) -> int:
        return self.blocks * (self.blocks + 3) // 2

    @property
    def max_rate(self) -> int:
        return self.resolutions[-1]


@dataclass(frozen=True)
class SearchRunConfig(BaseModel):
    epochs: int = 60
    arch_start_epoch: int = 30
    w_lr_initial: float = 0.025
    w_lr_final: float = 0.001
    w_momentum: float = 0.9
    w_weight_decay: float = 0.0003
    arch_lr: float = 0.003
    arch_weight_decay: float = 0.001
    arch_beta1: float = 0.9
    arch_beta2: float = 0.999
    batch_size: int = 2
    crop: int = 321
    half_scale: bool = True
    seed: int = 0
    prefetch: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.crop <= 0:
            raise ConfigError("epochs, batch_size and crop must be positive")
        if not 0 <= self.arch_start_epoch < self.epochs:
            raise ConfigError(
                "arch_start_epoch must be in [0, epochs)",
                details={'arch_start_epoch': self.arch_start_epoch, 'epochs': self.epochs},
            )
        for name in ('w_lr_initial', 'arch_lr'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.w_lr_final < 0 or self.w_lr_final > self.w_lr_initial:
            raise ConfigError("w_lr_final must lie in [0, w_lr_initial]")


@dataclass(frozen=True)
class TrainConfig(BaseModel):
    lr_initial: float = 0.05
    lr_power: float = 0.9
    warmup_iters: int = 5000
    total_iters: int = 95000
    batch_size: int = 8
    crop: int = 521
    half_scale: bool = False
    momentum: float = 0.9
    weight_decay: float = 0.0001
    eval_interval: int = 5000
    log_interval: int = 100
    seed: int = 0
    prefetch: int = 0

    def __post_init__(self):
        for name in ('lr_initial', 'total_iters', 'batch_size', 'crop', 'eval_interval', 'log_interval'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", details={name: getattr(self, name)})
        if not 0 <= self.warmup_iters < self.total_iters:
            raise ConfigError("warmup_iters must be in [0, total_iters)")


@dataclass(frozen=True)
class DatasetConfig(BaseModel):
    root: Optional[str] = None
    train_split: str = 'Train'
    val_split: str = 'Val'
    num_classes: int = 7
    ignore_index: int = 255
    half_scale: bool = True
    crop: int = 321
    validate_labels: bool = True

    def __post_init__(self):
        if self.num_classes <= 0:
            raise ConfigError("num_classes must be positive")
        if 0 <= self.ignore_index < self.num_classes:
            raise ConfigError("ignore_index must not collide with a class label")


@dataclass(frozen=True)
class NetworkConfig(BaseModel):
    """Decoder hyperparameters of the derived network."""
    filter_multiplier: int = 10
    dim: int = 128
    aggregation: str = 'concat'
    aspp_rates: Tuple[int, ...] = (6, 12, 18)

    def __post_init__(self):
        object.__setattr__(self, 'aspp_rates', tuple(int(r) for r in self.aspp_rates))
        if self.filter_multiplier <= 0 or self.dim <= 0:
            raise ConfigError("filter_multiplier and dim must be positive")
        if self.aggregation not in ('concat', 'add'):
            raise ConfigError(f"aggregation must be 'concat' or 'add', got {self.aggregation}")

