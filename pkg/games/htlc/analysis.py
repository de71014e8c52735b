"""
Single-HTLC analysis: censoring onset, IC verdict and the rational play trace
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

from config.settings import AnalysisSettings, settings as default_settings
from framework.comg import Rounds
from framework.compose import ICVerdict, check_ic
from framework.models import HashrateDistribution

from .game import htlc_game, htlc_rules, race_onset, rational_play
from .models import HtlcAction, HtlcParams

logger = logging.getLogger(__name__)

SHARE_UPDATE = f"{HtlcAction.SHARE.value}/{HtlcAction.UPDATE.value}"


@dataclass
class HtlcAnalysis:
    params: HtlcParams
    deviation_onset: Rounds
    reaches_share_update: bool
    closed_form_share_update: bool
    rational_path: str
    ic: bool
    verdict: ICVerdict

    def summary(self) -> Dict[str, Any]:
        return {
            "p": self.params.p,
            "T": self.params.T,
            "deviation_onset": self.deviation_onset,
            "reaches_share_update": self.reaches_share_update,
            "closed_form_share_update": self.closed_form_share_update,
            "rational_path": self.rational_path,
            "ic": self.ic,
            "holds": self.verdict.holds,
            "strict": self.verdict.strict,
            "indifferent": self.verdict.indifferent,
            "witness": self.verdict.witness,
            "collusions_checked": self.verdict.collusions_checked,
        }


def htlc_analysis(
    params: HtlcParams,
    lam: HashrateDistribution,
    config: Optional[AnalysisSettings] = None,
    max_block: Optional[int] = None,
) -> HtlcAnalysis:
    """
    Onset of censoring against the payee's claim, the IC verdict of the intended
    play at params.p and whether subgame-perfect play ends in (share, update)

    The intended play counts as IC only when it holds with no indifference.
    """
    config = config or default_settings
    onset = race_onset(lam, params.fee_cap_payee, params.v, params.T)

    completed, profile = rational_play(params, lam, config)
    leaf = completed.tree.play(profile).leaf_path

    protocol = htlc_game(params, config)
    rules, conflicts = htlc_rules(params, config)
    verdict = check_ic(protocol, lam, rules, conflicts, max_block=max_block,
                       config=config, params=[params.p])[params.p]

    analysis = HtlcAnalysis(
        params=params,
        deviation_onset=onset,
        reaches_share_update=leaf.endswith(SHARE_UPDATE),
        closed_form_share_update=not math.isinf(onset) and onset > 0,
        rational_path=leaf,
        ic=verdict.holds and not verdict.indifferent,
        verdict=verdict,
    )
    logger.info(f"HTLC T={params.T}: onset {onset}, rational play ends at {leaf}, IC={analysis.ic}")
    return analysis
