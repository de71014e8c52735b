from .analysis import CROSS_CHECK_MAX_T, CrabCrossCheck, crab_cross_check
from .game import CrabCaseStudy, crab_game, crab_rules
from .models import CrabParams, CrabTxIds
from .safety import SafetyVerdict, crab_safety

__all__ = [
    "CROSS_CHECK_MAX_T",
    "CrabCaseStudy",
    "CrabCrossCheck",
    "CrabParams",
    "CrabTxIds",
    "SafetyVerdict",
    "crab_cross_check",
    "crab_game",
    "crab_rules",
    "crab_safety",
]
