"""
Core domain types shared by the application, network and consensus layers
Transaction triples, hashrate distributions, conflicts, orderings and settlement rules
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from .errors import (
    ConflictViolation,
    DuplicateTxId,
    InvalidTriples,
    OverlappingConflictSets,
)

Number = Union[Fraction, float]
PlayerId = str
MinerId = str
Pattern = FrozenSet[str]

PROBABILITY_TOLERANCE = 1e-9


def to_fraction(value: Union[str, int, float, Fraction]) -> Fraction:
    """Exact rational from user input; floats go through their shortest repr"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def miner_id(index: int) -> MinerId:
    """Blockchain player id of miner index j (0 is the aggregated small-miner mass)"""
    return f"m{index}"


# ==================== TRANSACTIONS ====================

@dataclass(frozen=True)
class TransactionTriple:
    """(transaction, posting round, fee)"""
    tx: str
    post_time: int
    fee: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "fee", to_fraction(self.fee))
        if self.fee < 0:
            raise InvalidTriples(f"Negative fee on {self.tx}")
        if self.post_time < 0:
            raise InvalidTriples(f"Negative posting time on {self.tx}")


def check_unique_ids(triples: Iterable[TransactionTriple]) -> Dict[str, TransactionTriple]:
    """Index a triple set by tx id, rejecting duplicates"""
    by_id: Dict[str, TransactionTriple] = {}
    for triple in triples:
        if triple.tx in by_id:
            raise DuplicateTxId(f"Transaction {triple.tx} appears twice")
        by_id[triple.tx] = triple
    return by_id


# ==================== HASHRATE ====================

@dataclass(frozen=True)
class HashrateDistribution:
    """
    (λ_0, λ_1, ..., λ_m) with λ_1 ≤ ... ≤ λ_m stored ascending
    λ_0 is the mass of miners too small to act strategically
    """
    lambdas: Tuple[Fraction, ...]
    original_index: Tuple[int, ...] = ()

    @property
    def m(self) -> int:
        return len(self.lambdas) - 1

    @property
    def lambda0(self) -> Fraction:
        return self.lambdas[0]

    def __getitem__(self, j: int) -> Fraction:
        return self.lambdas[j]

    def tail(self, j: int) -> Fraction:
        """Σ_{k=j}^m λ_k"""
        return sum(self.lambdas[j:], Fraction(0))

    def miner_ids(self) -> List[MinerId]:
        return [miner_id(j) for j in range(1, self.m + 1)]

    def as_floats(self) -> List[float]:
        return [float(x) for x in self.lambdas]


# ==================== CONFLICTS AND ORDERINGS ====================

@dataclass(frozen=True)
class ConflictSpec:
    """Mutually exclusive transaction sets plus earliest valid inclusion rounds"""
    conflict_sets: Tuple[FrozenSet[str], ...] = ()
    validity: Mapping[str, int] = field(default_factory=dict)
    # Zero-fee transactions that only confirm if no conflicting transaction is posted
    sentinels: FrozenSet[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "conflict_sets", tuple(frozenset(s) for s in self.conflict_sets))
        object.__setattr__(self, "sentinels", frozenset(self.sentinels))
        seen: set = set()
        for members in self.conflict_sets:
            if seen & members:
                raise OverlappingConflictSets(f"Conflict sets overlap on {sorted(seen & members)}")
            seen |= members

    def valid_from(self, tx: str) -> int:
        return self.validity.get(tx, 0)

    def conflict_set_of(self, tx: str) -> Optional[FrozenSet[str]]:
        for members in self.conflict_sets:
            if tx in members:
                return members
        return None

    def merged(self, other: "ConflictSpec") -> "ConflictSpec":
        return ConflictSpec(
            conflict_sets=self.conflict_sets + other.conflict_sets,
            validity={**self.validity, **other.validity},
            sentinels=self.sentinels | other.sentinels,
        )


Shares = Tuple[Tuple[MinerId, Fraction], ...]


@dataclass(frozen=True)
class Block:
    """
    A block at a round
    miner_shares gives who mined it (a point mass when known); tx_shares overrides
    it per transaction with the conditional miner distribution of that inclusion
    """
    round: int
    txs: Tuple[str, ...]
    miner_shares: Shares = ()
    tx_shares: Tuple[Tuple[str, Shares], ...] = ()

    def shares_for(self, tx: str) -> Shares:
        for name, shares in self.tx_shares:
            if name == tx:
                return shares
        return self.miner_shares


@dataclass(frozen=True)
class Ordering:
    blocks: Tuple[Block, ...] = ()

    def __post_init__(self):
        rounds = [b.round for b in self.blocks]
        if any(a >= b for a, b in zip(rounds, rounds[1:])):
            raise ConflictViolation("Block rounds must strictly increase")
        txs = [tx for b in self.blocks for tx in b.txs]
        if len(txs) != len(set(txs)):
            raise DuplicateTxId("A transaction is included twice")

    def confirmed(self) -> Pattern:
        return frozenset(tx for b in self.blocks for tx in b.txs)

    def inclusion_round(self, tx: str) -> Optional[int]:
        for b in self.blocks:
            if tx in b.txs:
                return b.round
        return None

    def check_conflicts(self, conflicts: ConflictSpec) -> None:
        confirmed = self.confirmed()
        for members in conflicts.conflict_sets:
            if len(members & confirmed) > 1:
                raise ConflictViolation(f"Ordering confirms conflicting {sorted(members & confirmed)}")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Finite distribution over orderings; exact probabilities stay Fractions"""
    support: Tuple[Tuple[Ordering, Number], ...]
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        total = sum(float(p) for _, p in self.support)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise InvalidTriples(f"Outcome probabilities sum to {total}")
        orderings = [o for o, _ in self.support]
        if len(orderings) != len(set(orderings)):
            raise InvalidTriples("Outcome support contains duplicate orderings")

    def probability_confirmed(self, tx: str) -> Number:
        return sum((p for o, p in self.support if tx in o.confirmed()), Fraction(0))


# ==================== SETTLEMENT ====================

# φ: for a confirmed triple and its block, the fee share each miner receives
ReceiverRule = Callable[[TransactionTriple, Block], Mapping[MinerId, Fraction]]


def block_miner_receives(triple: TransactionTriple, block: Block) -> Dict[MinerId, Fraction]:
    """Default fee function: the fee goes to whoever mined the block"""
    return {miner: share for miner, share in block.shares_for(triple.tx)}


@dataclass(frozen=True)
class SettlementRules:
    """
    Execution function ω: base balances ω̃ per confirmed pattern, payer χ and receiver φ
    A pattern only lists the tx ids the table cares about (its scope)
    """
    base_balance: Mapping[Pattern, Mapping[str, Fraction]]
    payer: Mapping[str, PlayerId]
    receiver_rule: ReceiverRule = block_miner_receives
    scope: FrozenSet[str] = frozenset()
    # value a miner claims by including the tx, on top of its fee (e.g. a forfeited collateral)
    bounties: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        table = {frozenset(k): {p: to_fraction(v) for p, v in row.items()}
                 for k, row in self.base_balance.items()}
        object.__setattr__(self, "base_balance", table)
        object.__setattr__(self, "bounties", {tx: to_fraction(v) for tx, v in self.bounties.items()})
        if not self.scope:
            scope = frozenset().union(*table.keys()) if table else frozenset()
            object.__setattr__(self, "scope", scope | frozenset(self.payer))

    @property
    def players(self) -> List[PlayerId]:
        names = {p for row in self.base_balance.values() for p in row}
        names |= set(self.payer.values())
        return sorted(names)
