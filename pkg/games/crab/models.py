from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from framework.errors import InvalidParameters
from framework.models import to_fraction


@dataclass(frozen=True)
class CrabTxIds:
    """Commitment (AC), sweep (AS) and punishment (AP) transactions; _l latest state, _o old state"""
    commit_latest: str = "AC_l"
    sweep_latest: str = "AS_l"
    commit_old: str = "AC_o"
    sweep_old: str = "AS_o"
    punish: str = "AP_o"


@dataclass(frozen=True)
class CrabParams:
    """
    Collateralised channel after a state update

    Both parties locked collateral c on top of the channel value v. Publishing
    the old commitment lets Alice sweep v_A_o after the delay T unless Bob's
    punishment confirms first, which hands Alice's collateral to the miner.
    bribe_cap bounds Alice's sweep fee (default v_A_o - v_A_l); punish_cap bounds
    Bob's punishment fee.
    """
    T: int
    v_A_l: Fraction
    v_B_l: Fraction
    v_A_o: Fraction
    v_B_o: Fraction
    c: Fraction
    v: Fraction
    epsilon: Fraction = Fraction(1, 100)
    bribe_cap: Optional[Fraction] = None
    punish_cap: Fraction = Fraction(0)
    fee_step: Optional[Fraction] = None
    alice: str = "A"
    bob: str = "B"

    def __post_init__(self):
        for name in ("v_A_l", "v_B_l", "v_A_o", "v_B_o", "c", "v", "epsilon", "punish_cap"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.bribe_cap is None:
            object.__setattr__(self, "bribe_cap", self.v_A_o - self.v_A_l)
        object.__setattr__(self, "bribe_cap", to_fraction(self.bribe_cap))
        if self.fee_step is not None:
            object.__setattr__(self, "fee_step", to_fraction(self.fee_step))
        self.validate()

    def validate(self) -> None:
        if self.T < 0:
            raise InvalidParameters("Delay T must be non-negative")
        if self.v_A_o <= self.v_A_l:
            raise InvalidParameters("The old state must favour Alice (v_A_o > v_A_l)")
        if self.v_A_l + self.v_B_l != self.v or self.v_A_o + self.v_B_o != self.v:
            raise InvalidParameters("Both states must split the channel value v")
        if min(self.v_A_l, self.v_B_l, self.v_A_o, self.v_B_o, self.c, self.epsilon, self.punish_cap) < 0:
            raise InvalidParameters("Balances, collateral and fees must be non-negative")
        if not 0 < self.bribe_cap <= self.v:
            raise InvalidParameters("bribe_cap must lie in (0, v]")
        if self.fee_step is not None and self.fee_step <= 0:
            raise InvalidParameters("Fee step must be positive")
        if self.alice == self.bob:
            raise InvalidParameters("Alice and Bob must differ")
