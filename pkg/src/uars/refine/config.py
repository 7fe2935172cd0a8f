from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass

from ..fst import FstConfig
from ..loss import LossConfig


@dataclass(frozen=True)
class AdpConfig:
    enabled: bool = True
    densify_start: int = 100
    densify_end: int = 800
    densify_interval: int = 100
    grad_threshold: float = 2e-4
    split_scale_fraction: float = 0.01
    prune_opacity: float = 0.005
    split_count: int = 2

    def __post_init__(self):
        if not (0 <= self.densify_start <= self.densify_end):
            raise ValueError("adp: need 0 <= densify_start <= densify_end")
        if self.densify_interval < 1 or self.split_count < 1:
            raise ValueError("adp: densify_interval and split_count must be >= 1")


@dataclass(frozen=True)
class RefineConfig:
    steps: int = 1000
    batch_size: int = 2
    lr_position_start: float = 1e-3
    lr_position_end: float = 2e-5
    lr_rotation: float = 1e-3
    lr_scale: float = 5e-3
    lr_opacity: float = 5e-2
    lr_color: float = 2.5e-3
    scale_band: float = 1e-2
    # "absolute": +-scale_band world units; "relative": +-scale_band fraction of the snapshot
    scale_band_mode: str = "absolute"
    background: tuple = (0.0, 0.0, 0.0)
    seed: int = 0
    adp: AdpConfig = field(default_factory=AdpConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    fst: FstConfig = field(default_factory=FstConfig)

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("refine: steps and batch_size must be >= 1")
        if not (0 <= self.lr_position_end <= self.lr_position_start):
            raise ValueError("refine: need 0 <= lr_position_end <= lr_position_start")
        if self.lr_position_end == 0 and self.lr_position_start != 0:
            raise ValueError("refine: lr_position_end must be > 0 for exponential decay")
        if self.scale_band <= 0:
            raise ValueError("refine: scale_band must be > 0")
        if self.scale_band_mode not in ("absolute", "relative"):
            raise ValueError(f"refine: unknown scale_band_mode {self.scale_band_mode!r}")
        if self.adp.enabled and self.adp.densify_end > self.steps:
            raise ValueError(
                f"adp: densify_end ({self.adp.densify_end}) exceeds steps ({self.steps}); "
                "lower densify_end or disable densification"
            )
        object.__setattr__(self, "background", tuple(float(v) for v in self.background))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RefineConfig":
        return _build(cls, d, "config")


_NESTED = {"adp": AdpConfig, "loss": LossConfig, "fst": FstConfig}


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ValueError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        if k in _NESTED and cls is RefineConfig:
            kw[k] = v if is_dataclass(v) else _build(_NESTED[k], v, f"{where}.{k}")
        elif k == "background":
            kw[k] = tuple(v)
        else:
            kw[k] = v
    return cls(**kw)
