"""
Closed-form CRAB safety
Alice posts the old commitment only if her bribe can outlast the punishment race
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from framework.comg import CensorRaceEngine, Rounds
from framework.models import HashrateDistribution, to_fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SafetyVerdict:
    T: int
    safe: bool
    r_m: Rounds
    min_safe_T: Rounds
    trivially_safe: bool = False


def crab_safety(T: int, c: Union[Fraction, str, float], v: Union[Fraction, str, float],
                lam: HashrateDistribution) -> SafetyVerdict:
    """
    Safe iff T > ⌈ρ_m(c, v; λ)⌉

    The punishment pays the miner the collateral c against a bribe of up to v.
    A miner whose hashrate equals c/v exactly counts as a censor, so the
    boundary case is unsafe. c ≥ v is safe at any delay.
    """
    c, v = to_fraction(c), to_fraction(v)
    if c >= v:
        return SafetyVerdict(T=T, safe=True, r_m=0, min_safe_T=0, trivially_safe=True)
    schedule = CensorRaceEngine.censor_schedule(lam, c, v, strict_ties=True)
    r_m = schedule.r_star[-1] if schedule.r_star else 0
    min_safe = math.inf if math.isinf(r_m) else r_m + 1
    verdict = SafetyVerdict(T=T, safe=T > r_m, r_m=r_m, min_safe_T=min_safe)
    logger.debug(f"CRAB c={c} v={v} T={T}: r_m={r_m}, safe={verdict.safe}")
    return verdict
