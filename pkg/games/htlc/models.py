"""
HTLC parameters and transaction naming
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Optional

from config.settings import AnalysisSettings, settings as default_settings
from framework.errors import InvalidParameters
from framework.models import to_fraction

# ==================== ENUMS ====================


class HtlcAction(Enum):
    """Action labels of the HTLC trees"""
    ON_CHAIN = "on-chain"
    SHARE = "share"
    NO_SHARE = "no share"
    UPDATE = "update"
    NO_UPDATE = "no update"
    REACT = "react"
    IGNORE = "ignore"
    NO_REFUND = "no refund"
    REFUND = "refund"
    ACCEPT = "accept"
    REJECT = "reject"
    POST = "post"
    WAIT = "wait"


# ==================== TRANSACTIONS ====================

@dataclass(frozen=True)
class HtlcTxIds:
    """
    Transaction ids of one channel
    x_H closes the channel and puts the HTLC on chain, x_R/x_P are the off-chain
    refund and payment updates, x_A/x_B the on-chain timeout and secret claims
    """
    channel: str = ""

    @property
    def close(self) -> str:
        return f"x_H{self.channel}"

    @property
    def refund(self) -> str:
        return f"x_R{self.channel}"

    @property
    def pay(self) -> str:
        return f"x_P{self.channel}"

    @property
    def timeout(self) -> str:
        return f"x_A{self.channel}"

    @property
    def claim(self) -> str:
        return f"x_B{self.channel}"


# ==================== PARAMETERS ====================

@dataclass(frozen=True)
class HtlcParams:
    """
    One HTLC between a payer and a payee

    t_s is the round the payee learns the secret (None: never), t_e the last
    round and T the timelock. fee_cap_payer/fee_cap_payee bound the fees of the
    timeout and claim transactions; fee_step refines the fee grids below the caps.
    """
    T: int
    t_e: int
    v_A: Fraction
    v_B: Fraction
    v: Fraction
    t_s: Optional[int] = 0
    fee_cap_payer: Optional[Fraction] = None
    fee_cap_payee: Optional[Fraction] = None
    fee_step: Optional[Fraction] = None
    epsilon_open: Optional[Fraction] = None
    payer: str = "A"
    payee: str = "B"
    channel: str = ""
    ids: HtlcTxIds = field(init=False)

    def __post_init__(self):
        for name in ("v_A", "v_B", "v"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.fee_cap_payer is None:
            object.__setattr__(self, "fee_cap_payer", self.v)
        if self.fee_cap_payee is None:
            object.__setattr__(self, "fee_cap_payee", self.v)
        for name in ("fee_cap_payer", "fee_cap_payee", "fee_step", "epsilon_open"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, to_fraction(value))
        object.__setattr__(self, "ids", HtlcTxIds(self.channel))
        self.validate()

    def validate(self) -> None:
        if self.T < 0 or self.t_e < 0:
            raise InvalidParameters("Timelock and horizon must be non-negative")
        if self.T > self.t_e:
            raise InvalidParameters(f"Timelock T={self.T} exceeds horizon t_e={self.t_e}")
        if self.t_s is not None and not 0 <= self.t_s <= self.t_e:
            raise InvalidParameters(f"Reveal time {self.t_s} outside [0, {self.t_e}]")
        if min(self.v_A, self.v_B, self.v) < 0:
            raise InvalidParameters("Balances and HTLC value must be non-negative")
        if not 0 < self.fee_cap_payer <= self.v or not 0 < self.fee_cap_payee <= self.v:
            raise InvalidParameters("Fee caps must lie in (0, v]")
        if self.fee_step is not None and self.fee_step <= 0:
            raise InvalidParameters("Fee step must be positive")
        if self.epsilon_open is not None and self.epsilon_open < 0:
            raise InvalidParameters("epsilon_open must be non-negative")
        if self.payer == self.payee:
            raise InvalidParameters("Payer and payee must differ")

    @property
    def p(self):
        """Parameter point (t_s, t_e) of the game family"""
        return (self.t_s, self.t_e)

    def epsilon(self, config: Optional[AnalysisSettings] = None) -> Fraction:
        """Open-channel bonus; defaults to one fee-grid step of v"""
        config = config or default_settings
        if self.epsilon_open is not None:
            return self.epsilon_open
        if config.epsilon_open is not None:
            return to_fraction(config.epsilon_open)
        return self.v / config.fee_grid_divisions

    def with_horizon(self, t_e: int) -> "HtlcParams":
        return replace(self, t_e=t_e)
