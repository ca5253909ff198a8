from .geweke import GewekeReport, geweke_check, prior_reproduction, simulate_joint
from .main import (
    ChainState,
    initialize_state,
    sweep,
    trace_record,
    update_allocation,
    update_hyperparameters,
    update_jumps,
    update_scores,
    update_v,
)
from .utils import AdaptiveScale, ChainContext

__all__ = [
    "AdaptiveScale",
    "ChainContext",
    "ChainState",
    "GewekeReport",
    "geweke_check",
    "initialize_state",
    "prior_reproduction",
    "simulate_joint",
    "sweep",
    "trace_record",
    "update_allocation",
    "update_hyperparameters",
    "update_jumps",
    "update_scores",
    "update_v",
]
