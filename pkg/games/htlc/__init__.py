from .analysis import HtlcAnalysis, htlc_analysis
from .composition import (
    DeviationWitness,
    TwoHtlcReport,
    WithholdingCheck,
    WormholeParams,
    WormholeReport,
    deviation_witness,
    reveal_statistic,
    timelock_condition,
    two_htlc,
    withholding_check,
    wormhole,
    wormhole_closed_form,
    wormhole_protocol,
    wormhole_rules,
)
from .game import HtlcCaseStudy, htlc_game, htlc_rules, race_onset, rational_play
from .models import HtlcAction, HtlcParams, HtlcTxIds

__all__ = [
    "DeviationWitness",
    "HtlcAction",
    "HtlcAnalysis",
    "HtlcCaseStudy",
    "HtlcParams",
    "HtlcTxIds",
    "TwoHtlcReport",
    "WithholdingCheck",
    "WormholeParams",
    "WormholeReport",
    "deviation_witness",
    "htlc_analysis",
    "htlc_game",
    "htlc_rules",
    "race_onset",
    "rational_play",
    "reveal_statistic",
    "timelock_condition",
    "two_htlc",
    "withholding_check",
    "wormhole",
    "wormhole_closed_form",
    "wormhole_protocol",
    "wormhole_rules",
]
