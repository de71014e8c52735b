from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

from framework.errors import InvalidParameters
from framework.models import HashrateDistribution, to_fraction

TRUSTED_MINER = "mH"
USER = "U"


class MinerStrategy(Enum):
    HONEST = "H"
    SANDWICH = "D"


@dataclass(frozen=True)
class MevParams:
    """
    A user's limit order at price l with spread s to the market and fee f

    trusted_share, when set, adds a miner mH that never sandwiches with that
    share of the hashrate; the other miners are scaled down to fit.
    """
    l: Fraction
    s: Fraction
    f: Fraction
    lam: HashrateDistribution
    trusted_share: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("l", "s", "f"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.trusted_share is not None:
            object.__setattr__(self, "trusted_share", to_fraction(self.trusted_share))
        if self.s < 0:
            raise InvalidParameters("Spread s must be non-negative")
        if self.f <= 0:
            raise InvalidParameters("Fee f must be positive")
        if self.trusted_share is not None and not 0 < self.trusted_share < 1:
            raise InvalidParameters("Trusted hashrate share must lie in (0, 1)")

    @property
    def has_trusted(self) -> bool:
        return self.trusted_share is not None
