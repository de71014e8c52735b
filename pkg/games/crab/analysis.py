"""
Cross-check of the closed-form CRAB condition against subgame-perfect play
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

from config.settings import AnalysisSettings, settings as default_settings
from framework.compose import backward_induction, complete
from framework.errors import EnumerationBoundExceeded
from framework.models import HashrateDistribution

from .game import crab_game, crab_rules
from .models import CrabParams
from .safety import SafetyVerdict, crab_safety

logger = logging.getLogger(__name__)

CROSS_CHECK_MAX_T = 3


@dataclass
class CrabCrossCheck:
    closed_form: SafetyVerdict
    rational_safe: bool
    rational_path: str

    @property
    def agree(self) -> bool:
        return self.closed_form.safe == self.rational_safe

    def summary(self) -> Dict[str, Any]:
        return {
            "T": self.closed_form.T,
            "closed_form_safe": self.closed_form.safe,
            "rational_safe": self.rational_safe,
            "agree": self.agree,
            "rational_path": self.rational_path,
        }


def crab_cross_check(params: CrabParams, lam: HashrateDistribution,
                     config: Optional[AnalysisSettings] = None) -> CrabCrossCheck:
    """
    Solve the full bribe race by backward induction and compare Alice's first move
    with crab_safety at the bribe cap

    Only small delays are enumerated.
    """
    config = config or default_settings
    if params.T > CROSS_CHECK_MAX_T:
        raise EnumerationBoundExceeded(f"CRAB cross-check enumerates T <= {CROSS_CHECK_MAX_T}, got {params.T}")
    protocol = crab_game(params, config)
    rules, conflicts = crab_rules(params)
    completed = complete(protocol.game.tree(params.T), lam, rules, conflicts)
    profile = backward_induction(completed, protocol.ipb(params.T), config)
    path = completed.tree.play(profile).leaf_path

    check = CrabCrossCheck(
        closed_form=crab_safety(params.T, params.c, params.bribe_cap, lam),
        rational_safe=profile[("root", params.alice)] == "latest",
        rational_path=path,
    )
    if not check.agree:
        logger.warning(f"CRAB T={params.T}: closed form safe={check.closed_form.safe}, "
                       f"rational play safe={check.rational_safe}")
    return check
