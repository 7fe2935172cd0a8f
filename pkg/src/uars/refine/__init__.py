from .adp import AdpResult, adp_step
from .config import AdpConfig, RefineConfig
from .engine import NumericalError, RefineReport, clamp_scales, evaluate, lr_schedule, prepare_targets, refine
from .optim import Adam

__all__ = [
    "Adam",
    "AdpConfig",
    "AdpResult",
    "NumericalError",
    "RefineConfig",
    "RefineReport",
    "adp_step",
    "clamp_scales",
    "evaluate",
    "lr_schedule",
    "prepare_targets",
    "refine",
]
