"""Monte Carlo regression pricer for convertible bonds with reset and soft-call triggers."""

from .approximator import Network, NetworkConfig
from .contract import ContractTerms, TriggerState
from .dynamics import GridSpec, ModelSpec, PathSet, simulate
from .pricer import PriceReport, backward_solve, build_targets, forward_pass, price_contract

__all__ = [
    "ContractTerms", "TriggerState", "GridSpec", "ModelSpec", "PathSet", "simulate",
    "Network", "NetworkConfig", "PriceReport", "backward_solve", "build_targets",
    "forward_pass", "price_contract",
]
