"""
Tests for the sandwich MEV game over share sets
"""

from fractions import Fraction

import pytest

from framework.errors import InvalidParameters
from games.mev import TRUSTED_MINER, USER, MevCaseStudy, MevParams, mev_game, miner_shares


def test_shares_drop_unassigned_hashrate(lam):
    shares = miner_shares(MevParams(l=0, s=1, f=1, lam=lam))
    assert shares == {"m1": Fraction(2, 5), "m2": Fraction(3, 5)}

    shares = miner_shares(MevParams(l=0, s=1, f=1, lam=lam, trusted_share="0.1"))
    assert shares[TRUSTED_MINER] == Fraction(1, 10)
    assert shares["m1"] == Fraction(9, 25)
    assert sum(shares.values()) == 1


def test_params_validation(lam):
    with pytest.raises(InvalidParameters):
        MevParams(l=0, s=1, f=0, lam=lam)
    with pytest.raises(InvalidParameters):
        MevParams(l=0, s=-1, f=1, lam=lam)
    with pytest.raises(InvalidParameters):
        MevParams(l=0, s=1, f=1, lam=lam, trusted_share=1)


def test_strategic_miners_always_sandwich(lam):
    result = mev_game(MevParams(l=0, s=1, f=1, lam=lam))
    assert result.user_utility == 0
    for outcome in result.outcomes:
        if outcome.share_set:
            assert outcome.equilibria == [{m: "D" for m in outcome.share_set}]
        assert outcome.utilities[USER] == 0


@pytest.mark.parametrize("s", [1, 5])
def test_trusted_miner_is_the_only_best_share_set(lam, s):
    result = mev_game(MevParams(l=0, s=s, f=1, lam=lam, trusted_share="0.1"))
    assert result.optimal_share_sets == [(TRUSTED_MINER,)]
    assert result.user_utility == s
    assert result.summary()["optimal_share_sets"] == [[TRUSTED_MINER]]


def test_zero_spread_makes_every_share_set_optimal(lam):
    result = mev_game(MevParams(l=0, s=0, f=1, lam=lam))
    assert len(result.optimal_share_sets) == 4
    assert result.user_utility == 0
    assert len(result.summary()["rows"]) == 4


@pytest.mark.parametrize("s", [0, 1, 5])
@pytest.mark.parametrize("trusted", [None, "0.1"])
def test_case_study_pipeline_agrees(lam, s, trusted):
    study = MevCaseStudy(MevParams(l=0, s=s, f=1, lam=lam, trusted_share=trusted))
    result = study.analyze(generic=True)
    assert result["case"] == "mev"
    assert result["holds"] is (trusted is not None)
    assert result["user_utility"] == (s if trusted else 0)
    assert result["agree"] is True
