"""
Blockchain response to a set of transaction triples under COMG
Pairwise conflicts are resolved by the timelock case analysis; the race case
delegates to the censoring schedule
"""

import itertools
import logging
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .comg import CensorRaceEngine
from .errors import UnsupportedConflictArity
from .models import (
    Block,
    ConflictSpec,
    HashrateDistribution,
    Ordering,
    OutcomeDistribution,
    Shares,
    TransactionTriple,
    check_unique_ids,
    miner_id,
)

logger = logging.getLogger(__name__)

# (tx, round, shares) for every confirmed transaction of one branch
Placement = Tuple[Tuple[str, int, Shares], ...]


class RaceCase(Enum):
    """Pairwise outcome of x1 (valid now) against x2 (timelocked to T)"""
    IMMEDIATE = "immediate"
    RACE = "race"
    DELAYED_AT_T = "delayed_at_T"
    DELAYED_AT_POST = "delayed_at_post"
    FEE_PRIORITY = "fee_priority"
    FEE_TIE = "fee_tie"
    FIRST_WINS_EQUAL_FEE = "first_wins_equal_fee"


def classify_race(t1: int, t2: int, T: int, f1: Fraction, f2: Fraction) -> RaceCase:
    """
    Case analysis for x1 visible and valid from t1, x2 posted at t2 and valid from T

    Same-round contests between valid transactions go to the higher fee.
    """
    def contest() -> RaceCase:
        return RaceCase.FEE_TIE if f1 == f2 else RaceCase.FEE_PRIORITY

    def race() -> RaceCase:
        if f1 < f2:
            return RaceCase.RACE
        return RaceCase.FIRST_WINS_EQUAL_FEE if f1 == f2 else RaceCase.IMMEDIATE

    if t1 < t2:
        return RaceCase.IMMEDIATE
    if t1 == t2:
        return race() if t1 < T else contest()
    if t2 >= T:
        return RaceCase.DELAYED_AT_POST
    if t1 < T:
        return race()
    if t1 > T:
        return RaceCase.DELAYED_AT_T
    return contest()


class TripleResolver:
    """Outcome distribution of the blockchain game for a triple set"""

    def __init__(self, lam: HashrateDistribution):
        self.lam = lam
        total = sum(lam.lambdas, Fraction(0))
        self.everyone: Shares = tuple(
            (miner_id(j), lam[j] / total) for j in range(lam.m + 1) if lam[j] > 0
        )

    def _shares(self, miners: Iterable[int]) -> Shares:
        miners = [j for j in miners if self.lam[j] > 0]
        mass = sum((self.lam[j] for j in miners), Fraction(0))
        return tuple((miner_id(j), self.lam[j] / mass) for j in miners)

    # ==================== GROUP RESOLUTION ====================

    def _single(self, triple: TransactionTriple, conflicts: ConflictSpec) -> List[Tuple[Placement, Fraction]]:
        round_ = max(triple.post_time, conflicts.valid_from(triple.tx))
        return [(((triple.tx, round_, self.everyone),), Fraction(1))]

    def _pair(
        self, a: TransactionTriple, b: TransactionTriple, conflicts: ConflictSpec, flags: List[str],
        bounties: Mapping[str, Fraction],
    ) -> List[Tuple[Placement, Fraction]]:
        # a zero-fee sentinel only confirms when nothing conflicts with it
        if a.tx in conflicts.sentinels and b.tx not in conflicts.sentinels:
            return self._single(b, conflicts)
        if b.tx in conflicts.sentinels and a.tx not in conflicts.sentinels:
            return self._single(a, conflicts)

        def reward(t: TransactionTriple) -> Fraction:
            return t.fee + bounties.get(t.tx, Fraction(0))

        locked = [t for t in (a, b) if conflicts.valid_from(t.tx) > t.post_time]
        if len(locked) > 1:
            raise UnsupportedConflictArity(f"Both {a.tx} and {b.tx} are timelocked")
        if locked:
            x2 = locked[0]
            x1 = b if x2 is a else a
        else:
            # order by effective time, then by reward, so x2 is never the earlier one
            x1, x2 = sorted((a, b), key=lambda t: (max(t.post_time, conflicts.valid_from(t.tx)), reward(t)))
        T = max(x2.post_time, conflicts.valid_from(x2.tx))
        t1 = max(x1.post_time, conflicts.valid_from(x1.tx))
        t2 = x2.post_time
        f1, f2 = reward(x1), reward(x2)

        case = classify_race(t1, t2, T, f1, f2)
        logger.debug(f"{x1.tx} vs {x2.tx}: {case.value}")
        if case == RaceCase.FIRST_WINS_EQUAL_FEE:
            flags.append(f"equal-fee race {x1.tx}/{x2.tx}: first transaction assumed to win")

        if case == RaceCase.IMMEDIATE or case == RaceCase.FIRST_WINS_EQUAL_FEE:
            return [(((x1.tx, t1, self.everyone),), Fraction(1))]
        if case == RaceCase.DELAYED_AT_POST:
            return [(((x2.tx, t2, self.everyone),), Fraction(1))]
        if case == RaceCase.DELAYED_AT_T:
            return [(((x2.tx, T, self.everyone),), Fraction(1))]
        if case == RaceCase.FEE_PRIORITY:
            winner = x1 if f1 > f2 else x2
            return [(((winner.tx, t1, self.everyone),), Fraction(1))]
        if case == RaceCase.FEE_TIE:
            half = Fraction(1, 2)
            return [
                (((x1.tx, t1, self.everyone),), half),
                (((x2.tx, t1, self.everyone),), half),
            ]
        return self._race(x1, x2, t1, T, f1, f2, flags)

    def _race(
        self, x1: TransactionTriple, x2: TransactionTriple, start: int, T: int,
        f1: Fraction, f2: Fraction, flags: Optional[List[str]] = None,
    ) -> List[Tuple[Placement, Fraction]]:
        """Shifted race: both visible at `start`, x2 valid after T - start rounds"""
        horizon = T - start
        lam = self.lam
        if f1 == 0:
            # only the non-strategic mass includes x1 when it pays nothing
            switch = [float("-inf")] * lam.m
        else:
            schedule = CensorRaceEngine.censor_schedule(lam, f1, f2)
            switch = CensorRaceEngine.switch_times(schedule, horizon)
            ratio = f1 / f2
            tied = [miner_id(j) for j in range(1, lam.m + 1) if lam[j] == ratio]
            if tied and flags is not None:
                flags.append(f"indifferent miners {tied} in race {x1.tx}/{x2.tx}")

        branches: List[Tuple[Placement, Fraction]] = []
        survive = Fraction(1)
        for s in range(horizon):
            includers = [0] + [j for j in range(1, lam.m + 1) if s < switch[j - 1]]
            mass = sum((lam[j] for j in includers), Fraction(0))
            if mass > 0 and survive > 0:
                branches.append(((((x1.tx, start + s, self._shares(includers)),)), survive * mass))
            survive *= 1 - mass
        if survive > 0:
            branches.append((((x2.tx, T, self.everyone),), survive))
        return branches

    # ==================== ASSEMBLY ====================

    def resolve(self, triples: Iterable[TransactionTriple], conflicts: ConflictSpec,
                bounties: Optional[Mapping[str, Fraction]] = None) -> OutcomeDistribution:
        """Outcome distribution; bounties add to a transaction's value for the including miner"""
        bounties = bounties or {}
        by_id = check_unique_ids(triples)
        flags: List[str] = []
        groups: List[List[Tuple[Placement, Fraction]]] = []
        grouped: set = set()

        for members in conflicts.conflict_sets:
            present = sorted(members & set(by_id))
            if len(present) > 2:
                raise UnsupportedConflictArity(f"Conflict set {present} has more than two posted members")
            if len(present) == 2:
                groups.append(self._pair(by_id[present[0]], by_id[present[1]], conflicts, flags, bounties))
                grouped.update(present)

        for tx in sorted(set(by_id) - grouped):
            groups.append(self._single(by_id[tx], conflicts))

        support: Dict[Ordering, Fraction] = {}
        for combination in itertools.product(*groups):
            probability = Fraction(1)
            placed: List[Tuple[str, int, Shares]] = []
            for placement, p in combination:
                probability *= p
                placed.extend(placement)
            ordering = _assemble(placed)
            support[ordering] = support.get(ordering, Fraction(0)) + probability

        return OutcomeDistribution(support=tuple(support.items()), flags=tuple(flags))


def _assemble(placed: List[Tuple[str, int, Shares]]) -> Ordering:
    by_round: Dict[int, List[Tuple[str, Shares]]] = {}
    for tx, round_, shares in placed:
        by_round.setdefault(round_, []).append((tx, shares))
    blocks = []
    for round_ in sorted(by_round):
        entries = sorted(by_round[round_])
        blocks.append(Block(
            round=round_,
            txs=tuple(tx for tx, _ in entries),
            tx_shares=tuple(entries),
        ))
    return Ordering(tuple(blocks))


def resolve_triples(
    triples: Iterable[TransactionTriple],
    conflicts: ConflictSpec,
    lam: HashrateDistribution,
    bounties: Optional[Mapping[str, Fraction]] = None,
) -> OutcomeDistribution:
    """Blockchain response of COMG to a triple set"""
    return TripleResolver(lam).resolve(triples, conflicts, bounties)
