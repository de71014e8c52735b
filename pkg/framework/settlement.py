"""
Hashrate validation and settlement of orderings into balances
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from .errors import (
    InvalidTriples,
    MalformedConfig,
    NegativeEntry,
    NonPositiveLargest,
    SumNotOne,
    UnknownPattern,
)
from .models import (
    ConflictSpec,
    HashrateDistribution,
    Number,
    Ordering,
    OutcomeDistribution,
    SettlementRules,
    TransactionTriple,
    check_unique_ids,
    to_fraction,
)

logger = logging.getLogger(__name__)


def validate_hashrate(lambdas: Sequence[Union[str, int, float, Fraction]]) -> HashrateDistribution:
    """
    Validate (λ_0, λ_1, ..., λ_m) and sort the miners ascending

    Ties keep their original order, so miner identity is deterministic.
    """
    if not lambdas:
        raise NonPositiveLargest("Hashrate distribution is empty")
    values = [to_fraction(x) for x in lambdas]
    if any(x < 0 for x in values):
        raise NegativeEntry("Hashrate entries must be non-negative")
    if sum(values) != 1:
        raise SumNotOne(f"Hashrates sum to {sum(values)}, not 1")
    indexed = sorted(enumerate(values[1:], start=1), key=lambda item: (item[1], item[0]))
    if not indexed or indexed[0][1] <= 0:
        raise NonPositiveLargest("Every strategic miner needs positive hashrate")
    return HashrateDistribution(
        lambdas=(values[0],) + tuple(x for _, x in indexed),
        original_index=(0,) + tuple(i for i, _ in indexed),
    )


def settle(
    ordering: Ordering,
    triples: Iterable[TransactionTriple],
    rules: SettlementRules,
    conflicts: ConflictSpec = ConflictSpec(),
) -> Dict[str, Fraction]:
    """
    ω_i = ω̃_i − fees paid by i, ω_j = ω̃_j + fees received by miner j

    Only transactions in the rules' scope select the ω̃ row.
    """
    by_id = check_unique_ids(triples)
    unknown = ordering.confirmed() - set(by_id)
    if unknown:
        raise InvalidTriples(f"Ordering includes unknown transactions {sorted(unknown)}")
    ordering.check_conflicts(conflicts)

    pattern = ordering.confirmed() & rules.scope
    if pattern not in rules.base_balance:
        raise UnknownPattern(f"No base balance for confirmed set {sorted(pattern)}")
    balances: Dict[str, Fraction] = dict(rules.base_balance[pattern])

    debited = Fraction(0)
    credited = Fraction(0)
    for block in ordering.blocks:
        for tx in block.txs:
            triple = by_id[tx]
            if triple.fee == 0 or tx not in rules.payer:
                continue
            payer = rules.payer[tx]
            balances[payer] = balances.get(payer, Fraction(0)) - triple.fee
            debited += triple.fee
            for miner, share in rules.receiver_rule(triple, block).items():
                amount = triple.fee * share
                balances[miner] = balances.get(miner, Fraction(0)) + amount
                credited += amount
    if debited != credited:
        raise InvalidTriples(f"Fees debited {debited} differ from fees credited {credited}")

    for block in ordering.blocks:
        for tx in block.txs:
            bounty = rules.bounties.get(tx, Fraction(0))
            if bounty == 0:
                continue
            for miner, share in rules.receiver_rule(by_id[tx], block).items():
                balances[miner] = balances.get(miner, Fraction(0)) + bounty * share
    return balances


def expected_balances(
    distribution: OutcomeDistribution,
    triples: Iterable[TransactionTriple],
    rules: SettlementRules,
    conflicts: ConflictSpec = ConflictSpec(),
) -> Dict[str, Number]:
    """Expectation of settle over a finite outcome distribution"""
    triples = list(triples)
    totals: Dict[str, Number] = {}
    for ordering, probability in distribution.support:
        for player, value in settle(ordering, triples, rules, conflicts).items():
            totals[player] = totals.get(player, Fraction(0)) + probability * value
    return totals


# ==================== DOCUMENT LOADING ====================

def load_settlement_document(
    source: Union[str, Path, Mapping[str, Any]],
) -> Tuple[List[TransactionTriple], ConflictSpec, SettlementRules]:
    """
    Load triples, conflicts and settlement rules from a JSON document

    Keys: triples[{tx, post_time, fee}], conflicts[[tx,...]], validity{tx: round},
    sentinels[tx], balances{"tx1,tx2": {player: value}}, payer{tx: player},
    bounties{tx: value}
    """
    if isinstance(source, Mapping):
        document = dict(source)
    else:
        try:
            document = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise MalformedConfig(f"Cannot read settlement document {source}: {e}") from e

    try:
        triples = [
            TransactionTriple(t["tx"], int(t.get("post_time", 0)), to_fraction(t.get("fee", 0)))
            for t in document.get("triples", [])
        ]
        conflicts = ConflictSpec(
            conflict_sets=tuple(frozenset(s) for s in document.get("conflicts", [])),
            validity={k: int(v) for k, v in document.get("validity", {}).items()},
            sentinels=frozenset(document.get("sentinels", [])),
        )
        balances = {
            frozenset(tx for tx in key.split(",") if tx): {player: to_fraction(v) for player, v in row.items()}
            for key, row in document.get("balances", {}).items()
        }
        rules = SettlementRules(
            base_balance=balances,
            payer=dict(document.get("payer", {})),
            bounties={tx: to_fraction(v) for tx, v in document.get("bounties", {}).items()},
        )
    except (AttributeError, KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise MalformedConfig(f"Malformed settlement document: {e}") from e

    logger.info(f"Loaded {len(triples)} triples and {len(rules.base_balance)} balance patterns")
    return triples, conflicts, rules
