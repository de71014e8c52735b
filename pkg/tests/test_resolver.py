from fractions import Fraction

import pytest

from framework.errors import UnsupportedConflictArity
from framework.models import ConflictSpec, TransactionTriple
from framework.resolver import RaceCase, TripleResolver, classify_race, resolve_triples
from framework.settlement import validate_hashrate


@pytest.mark.parametrize("t1,t2,T,f1,f2,expected", [
    (0, 1, 1, 1, 10, RaceCase.IMMEDIATE),
    (0, 0, 2, 1, 10, RaceCase.RACE),
    (3, 0, 2, 1, 10, RaceCase.DELAYED_AT_T),
    (1, 2, 2, 1, 10, RaceCase.IMMEDIATE),
    (3, 3, 2, 1, 10, RaceCase.FEE_PRIORITY),
    (2, 0, 2, 5, 5, RaceCase.FEE_TIE),
    (0, 0, 2, 5, 5, RaceCase.FIRST_WINS_EQUAL_FEE),
    (0, 0, 2, 10, 1, RaceCase.IMMEDIATE),
])
def test_classify_race(t1, t2, T, f1, f2, expected):
    assert classify_race(t1, t2, T, Fraction(f1), Fraction(f2)) == expected


def test_delayed_at_post():
    assert classify_race(3, 4, 2, Fraction(1), Fraction(10)) == RaceCase.IMMEDIATE
    assert classify_race(5, 4, 2, Fraction(1), Fraction(10)) == RaceCase.DELAYED_AT_POST


@pytest.fixture
def race():
    triples = [TransactionTriple("x1", 0, 1), TransactionTriple("x2", 0, 10)]
    conflicts = ConflictSpec(conflict_sets=({"x1", "x2"},), validity={"x2": 2})
    return triples, conflicts


def test_race_probability_matches_closed_form(lam, race):
    distribution = resolve_triples(*race, lam)
    assert distribution.probability_confirmed("x1") == Fraction(17, 20)
    assert distribution.probability_confirmed("x2") == Fraction(3, 20)


def test_race_fee_shares_follow_includers(lam, race):
    distribution = resolve_triples(*race, lam)
    first_round = [o for o, _ in distribution.support if o.inclusion_round("x1") == 0]
    assert len(first_round) == 1
    shares = dict(first_round[0].blocks[0].shares_for("x1"))
    # round 0: the small-miner mass and miner 1 include
    assert shares == {"m0": Fraction(5, 7), "m1": Fraction(2, 7)}


def test_timelocked_tx_confirms_at_validity(lam, race):
    distribution = resolve_triples(*race, lam)
    late = [o for o, _ in distribution.support if "x2" in o.confirmed()]
    assert [o.inclusion_round("x2") for o in late] == [2]


def test_bounty_raises_timelocked_reward(lam):
    triples = [TransactionTriple("x1", 0, 1), TransactionTriple("x2", 0, 0)]
    conflicts = ConflictSpec(conflict_sets=({"x1", "x2"},), validity={"x2": 2})
    without = resolve_triples(triples, conflicts, lam)
    with_bounty = resolve_triples(triples, conflicts, lam, bounties={"x2": 10})
    assert without.probability_confirmed("x1") == 1
    assert with_bounty.probability_confirmed("x1") == Fraction(17, 20)


def test_sentinel_loses_to_conflicting_transaction(lam):
    triples = [TransactionTriple("update", 0, 0), TransactionTriple("claim", 3, 1)]
    conflicts = ConflictSpec(conflict_sets=({"update", "claim"},), sentinels={"update"})
    distribution = resolve_triples(triples, conflicts, lam)
    assert distribution.probability_confirmed("claim") == 1


def test_fee_tie_splits_evenly(lam):
    triples = [TransactionTriple("a", 2, 5), TransactionTriple("b", 2, 5)]
    conflicts = ConflictSpec(conflict_sets=({"a", "b"},))
    distribution = resolve_triples(triples, conflicts, lam)
    assert distribution.probability_confirmed("a") == Fraction(1, 2)


def test_equal_fee_race_is_flagged(lam):
    triples = [TransactionTriple("a", 0, 5), TransactionTriple("b", 0, 5)]
    conflicts = ConflictSpec(conflict_sets=({"a", "b"},), validity={"b": 2})
    distribution = resolve_triples(triples, conflicts, lam)
    assert distribution.probability_confirmed("a") == 1
    assert any("equal-fee" in flag for flag in distribution.flags)


def test_indifferent_miner_is_flagged():
    lam = validate_hashrate(["0.5", "0.1", "0.4"])
    triples = [TransactionTriple("x1", 0, 1), TransactionTriple("x2", 0, 10)]
    conflicts = ConflictSpec(conflict_sets=({"x1", "x2"},), validity={"x2": 2})
    distribution = resolve_triples(triples, conflicts, lam)
    assert any("indifferent" in flag for flag in distribution.flags)


def test_unconflicted_transactions_confirm_at_post_time(lam):
    distribution = TripleResolver(lam).resolve([TransactionTriple("a", 3, 1)], ConflictSpec())
    ((ordering, probability),) = distribution.support
    assert probability == 1
    assert ordering.inclusion_round("a") == 3


def test_three_posted_members_unsupported(lam):
    triples = [TransactionTriple(x, 0, 1) for x in ("a", "b", "c")]
    with pytest.raises(UnsupportedConflictArity):
        resolve_triples(triples, ConflictSpec(conflict_sets=({"a", "b", "c"},)), lam)
