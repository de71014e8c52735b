from .game import MevCaseStudy, MevResult, MevSolver, ShareSetOutcome, mev_game, mev_rules, miner_shares
from .models import TRUSTED_MINER, USER, MevParams, MinerStrategy

__all__ = [
    "MevCaseStudy",
    "MevParams",
    "MevResult",
    "MevSolver",
    "MinerStrategy",
    "ShareSetOutcome",
    "TRUSTED_MINER",
    "USER",
    "mev_game",
    "mev_rules",
    "miner_shares",
]
