from fractions import Fraction

import pytest

from framework.errors import (
    ConflictViolation,
    DuplicateTxId,
    InvalidTriples,
    MalformedConfig,
    NegativeEntry,
    NonPositiveLargest,
    OverlappingConflictSets,
    SumNotOne,
    UnknownPattern,
)
from framework.models import Block, ConflictSpec, Ordering, SettlementRules, TransactionTriple
from framework.settlement import load_settlement_document, settle, validate_hashrate


def test_validate_hashrate_sorts_miners_ascending():
    lam = validate_hashrate(["0.1", "0.6", "0.3"])
    assert lam.lambdas == (Fraction(1, 10), Fraction(3, 10), Fraction(3, 5))
    assert lam.original_index == (0, 2, 1)
    assert lam.m == 2
    assert lam.miner_ids() == ["m1", "m2"]


def test_validate_hashrate_errors():
    with pytest.raises(SumNotOne):
        validate_hashrate(["0.5", "0.6"])
    with pytest.raises(NegativeEntry):
        validate_hashrate(["0.5", "-0.1", "0.6"])
    with pytest.raises(NonPositiveLargest):
        validate_hashrate(["1"])
    with pytest.raises(NonPositiveLargest):
        validate_hashrate(["0.5", "0", "0.5"])


def test_triple_rejects_negative_fee():
    with pytest.raises(InvalidTriples):
        TransactionTriple("x", 0, -1)


def test_overlapping_conflict_sets_rejected():
    with pytest.raises(OverlappingConflictSets):
        ConflictSpec(conflict_sets=({"a", "b"}, {"b", "c"}))


def test_ordering_rejects_double_inclusion():
    with pytest.raises(DuplicateTxId):
        Ordering((Block(0, ("a",)), Block(1, ("a",))))


@pytest.fixture
def payment_rules():
    return SettlementRules(
        base_balance={frozenset(): {"A": 10, "B": 0}, frozenset({"pay"}): {"A": 5, "B": 5}},
        payer={"pay": "A"},
    )


def test_settle_moves_fee_from_payer_to_miner(payment_rules):
    triples = [TransactionTriple("pay", 0, 1)]
    ordering = Ordering((Block(0, ("pay",), miner_shares=(("m1", Fraction(1)),)),))
    balances = settle(ordering, triples, payment_rules)
    assert balances == {"A": 4, "B": 5, "m1": 1}


def test_settle_splits_fee_by_miner_shares(payment_rules):
    triples = [TransactionTriple("pay", 0, 2)]
    shares = (("m1", Fraction(1, 4)), ("m2", Fraction(3, 4)))
    balances = settle(Ordering((Block(0, ("pay",), miner_shares=shares),)), triples, payment_rules)
    assert balances["m1"] == Fraction(1, 2)
    assert balances["m2"] == Fraction(3, 2)
    assert sum(balances.values()) == 10


def test_settle_unknown_pattern(payment_rules):
    rules = SettlementRules(base_balance={frozenset(): {"A": 1}}, payer={"pay": "A"})
    with pytest.raises(UnknownPattern):
        settle(Ordering((Block(0, ("pay",)),)), [TransactionTriple("pay", 0)], rules)


def test_settle_rejects_conflicting_confirmations():
    rules = SettlementRules(base_balance={frozenset({"a", "b"}): {"A": 0}}, payer={})
    conflicts = ConflictSpec(conflict_sets=({"a", "b"},))
    ordering = Ordering((Block(0, ("a", "b")),))
    with pytest.raises(ConflictViolation):
        settle(ordering, [TransactionTriple("a", 0), TransactionTriple("b", 0)], rules, conflicts)


def test_settle_credits_bounty_to_including_miner():
    rules = SettlementRules(
        base_balance={frozenset({"punish"}): {"A": 0, "B": 10}},
        payer={"punish": "B"},
        bounties={"punish": 3},
    )
    ordering = Ordering((Block(2, ("punish",), miner_shares=(("m2", Fraction(1)),)),))
    balances = settle(ordering, [TransactionTriple("punish", 2, 1)], rules)
    assert balances == {"A": 0, "B": 9, "m2": 4}


def test_load_settlement_document():
    document = {
        "triples": [{"tx": "a", "post_time": 0, "fee": "1/2"}, {"tx": "b", "post_time": 1, "fee": 1}],
        "conflicts": [["a", "b"]],
        "validity": {"b": 2},
        "balances": {"": {"A": 1}, "a": {"A": 2}, "b": {"A": 3}},
        "payer": {"a": "A", "b": "A"},
        "bounties": {"b": "1"},
    }
    triples, conflicts, rules = load_settlement_document(document)
    assert triples[0].fee == Fraction(1, 2)
    assert conflicts.valid_from("b") == 2
    assert rules.base_balance[frozenset()] == {"A": 1}
    assert rules.bounties == {"b": 1}


def test_load_settlement_document_malformed():
    with pytest.raises(MalformedConfig):
        load_settlement_document({"triples": [{"post_time": 0}]})
    with pytest.raises(MalformedConfig):
        load_settlement_document("/nonexistent/settlement.json")
