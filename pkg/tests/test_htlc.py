"""
Tests for the HTLC case studies: single channel, two-hop routes and the wormhole
"""

from fractions import Fraction

import numpy as np
import pytest

from config.settings import AnalysisSettings
from framework.compose import CollusionMap, check_ic, complete
from framework.errors import AmbiguousBlockchainResponse, InvalidParameters
from framework.extform import Emission
from framework.models import Block, Ordering, TransactionTriple
from framework.settlement import settle, validate_hashrate
from games.htlc import (
    HtlcCaseStudy,
    HtlcParams,
    WormholeParams,
    deviation_witness,
    htlc_analysis,
    htlc_game,
    htlc_rules,
    race_onset,
    rational_play,
    timelock_condition,
    two_htlc,
    withholding_check,
    wormhole,
    wormhole_closed_form,
)

COARSE = AnalysisSettings(fee_grid_divisions=5, epsilon_open="1/100")


def channel(T, t_e=None, cap=1, **kwargs):
    return HtlcParams(T=T, t_e=T if t_e is None else t_e, v_A=5, v_B=5, v=10,
                      fee_cap_payee=cap, **kwargs)


def actions_at(tree, path, player):
    return next(info.actions for info in tree.info_sets if (info.path, info.player) == (path, player))


def test_params_validation():
    with pytest.raises(InvalidParameters):
        HtlcParams(T=3, t_e=2, v_A=0, v_B=0, v=10)
    with pytest.raises(InvalidParameters):
        HtlcParams(T=1, t_e=1, v_A=0, v_B=0, v=10, fee_cap_payee=11)
    with pytest.raises(InvalidParameters):
        HtlcParams(T=1, t_e=1, v_A=0, v_B=0, v=10, t_s=2)
    with pytest.raises(InvalidParameters):
        HtlcParams(T=1, t_e=1, v_A=0, v_B=0, v=10, payee="A")


def test_fee_caps_default_to_value():
    params = HtlcParams(T=1, t_e=1, v_A=0, v_B=0, v=10)
    assert params.fee_cap_payer == 10
    assert params.fee_cap_payee == 10
    assert params.p == (0, 1)
    assert params.epsilon() == Fraction(1, 10)


def test_race_onset(lam):
    assert race_onset(lam, Fraction(1), Fraction(10), 3) == 1
    assert race_onset(lam, Fraction(1), Fraction(10), 0) == -2
    assert race_onset(lam, Fraction(10), Fraction(10), 4) == 4


def test_rules_balances():
    params = channel(2)
    rules, conflicts = htlc_rules(params)
    eps = params.epsilon()
    ids = params.ids
    refund = settle(Ordering((Block(0, (ids.refund,)),)), [TransactionTriple(ids.refund, 0)],
                    rules, conflicts)
    assert refund == {"A": 5 + 10 + eps, "B": 5 + eps}
    pay = settle(Ordering((Block(0, (ids.pay,)),)), [TransactionTriple(ids.pay, 0)],
                 rules, conflicts)
    assert pay == {"A": 5 + eps, "B": 15 + eps}
    assert conflicts.validity[ids.timeout] == 2


def test_fee_grids_follow_configured_divisions():
    params = channel(1)
    tree = htlc_game(params, AnalysisSettings(fee_grid_divisions=5)).game.tree(params.p)
    assert actions_at(tree, "root/on-chain", "B") == tuple(Fraction(k, 5) for k in range(6))
    assert actions_at(tree, "root/on-chain/x_B=1/react", "A") == (0, 2, 4, 6, 8, 10)


def test_fee_grid_keeps_the_cap_off_step():
    params = channel(1, fee_step=3)
    tree = htlc_game(params, COARSE).game.tree(params.p)
    assert actions_at(tree, "root/on-chain", "B") == (0, 1)
    assert actions_at(tree, "root/on-chain/x_B=1/react", "A") == (0, 3, 6, 9, 10)


def test_on_chain_branch_ends_once_the_race_is_posted():
    params = channel(1)
    protocol = htlc_game(params, COARSE)
    tree = protocol.game.tree(params.p)
    result = tree.play(protocol.ipb(params.p).replaced({("root", "B"): "on-chain"}))
    assert result.leaf_path == "root/on-chain/x_B=1/ignore"
    assert [e.triple.tx for e in result.emissions] == [params.ids.close, params.ids.claim]
    assert not any(info.path.startswith("root/on-chain/x_B=1/ignore/") for info in tree.info_sets)


def test_rational_play_shares_and_updates_before_onset(lam):
    params = channel(3)
    completed, profile = rational_play(params, lam, COARSE)
    assert completed.tree.play(profile).leaf_path.endswith("share/update")


def test_zero_timelock_claim_race_is_a_strict_deviation(lam):
    summary = htlc_analysis(channel(0, fee_cap_payer=1), lam, COARSE, max_block=1).summary()
    assert summary["deviation_onset"] == -2
    assert summary["closed_form_share_update"] is False
    assert summary["holds"] is False
    assert summary["strict"] is True
    assert summary["indifferent"] is False
    assert summary["ic"] is False
    assert summary["witness"].deviator == "B"
    assert summary["witness"].gain == Fraction(449, 100)


def test_zero_timelock_with_full_timeout_fee_holds(lam):
    summary = htlc_analysis(channel(0), lam, COARSE, max_block=1).summary()
    assert summary["holds"] is True
    assert summary["strict"] is False


def test_tied_miner_race_is_rejected_when_configured(lam):
    params = channel(1)
    rules, conflicts = htlc_rules(params, COARSE)
    tree = htlc_game(params, COARSE).game.tree(params.p)
    ids = params.ids
    # λ_1 = 1/5 equals the fee ratio of the race
    emissions = [
        Emission(TransactionTriple(ids.close, 0)),
        Emission(TransactionTriple(ids.claim, 0, Fraction(1)), "B"),
        Emission(TransactionTriple(ids.timeout, 0, Fraction(5)), "A"),
    ]
    with pytest.raises(AmbiguousBlockchainResponse):
        complete(tree, lam, rules, conflicts, reject_ambiguous=True).balances(emissions)
    assert set(complete(tree, lam, rules, conflicts).balances(emissions)) >= {"A", "B"}


def test_ic_check_rejects_tied_miners_when_configured(lam):
    params = channel(1)
    strict = AnalysisSettings(fee_grid_divisions=2, epsilon_open="1/100", reject_ambiguous=True)
    rules, conflicts = htlc_rules(params, strict)
    with pytest.raises(AmbiguousBlockchainResponse):
        check_ic(htlc_game(params, strict), lam, rules, conflicts, config=strict, params=[params.p],
                 collusions=[CollusionMap.identity(["A", "B"])])


@pytest.mark.parametrize("T1, T2, expected", [(5, 5, True), (3, 5, False), (5, 3, True)])
def test_timelock_condition(lam, T1, T2, expected):
    assert timelock_condition(lam, channel(T1), channel(T2)) is expected


def test_deviation_witness(lam):
    witness = deviation_witness(lam, channel(3))
    assert witness.withhold_until == 2
    assert witness.fee == Fraction(33, 5)
    assert witness.epsilon == Fraction(17, 5)
    assert witness.gain == Fraction(17, 10)


def test_deviation_witness_races_against_lowered_fee():
    lam = validate_hashrate(["0.4", "0.1", "0.2", "0.3"])
    witness = deviation_witness(lam, channel(3, cap="0.9"))
    assert witness.withhold_until == 2
    assert witness.fee == 6
    assert witness.epsilon == 4
    assert witness.gain == 2


def test_no_witness_when_claim_pays_full_value(lam):
    assert deviation_witness(lam, channel(3, cap=10)) is None


def test_two_htlc_reports_condition(lam):
    report = two_htlc("dep", channel(3, t_e=5), channel(5), lam)
    assert report.condition is False
    assert report.onsets == {"upstream": 1, "downstream": 3}
    assert report.witness.gain == Fraction(17, 10)
    assert set(report.protocol.players) == {"A", "B", "C", "D"}

    report = two_htlc("ind", channel(5), channel(5), lam)
    assert report.condition is True
    assert report.witness is None


def test_two_htlc_rejects_unknown_mode(lam):
    with pytest.raises(InvalidParameters):
        two_htlc("parallel", channel(1), channel(1), lam)


@pytest.mark.parametrize("T1", range(1, 5))
@pytest.mark.parametrize("T2", range(0, 5))
def test_withholding_check_matches_timelock_condition(lam, T1, T2):
    report = two_htlc("dep", channel(T1), channel(T2), lam, COARSE, generic=True)
    check = report.generic
    assert check.reveal_at == T1 - 1
    assert check.deviates is not report.condition
    assert report.summary()["agree"] is True
    if check.deviates:
        assert (T1, T2) in {(1, 3), (1, 4), (2, 4)}
        assert check.gain == Fraction(199, 100)
        assert check.downstream_reply == "update"
        assert check.witness.deviator == "A"
        assert check.upstream_param == (T1 - 1, T2)


def test_withholding_without_censoring_gains_nothing(lam):
    report = two_htlc("dep", channel(0), channel(3), lam, COARSE)
    check = withholding_check(report.first, report.second, lam, COARSE)
    assert check.reveal_at == 0
    assert check.feasible is True
    assert check.gain == 0
    assert check.deviates is False


def test_wormhole_params_validation():
    with pytest.raises(InvalidParameters):
        WormholeParams(v1=12, v2=11, v3=10, T=0)
    with pytest.raises(InvalidParameters):
        WormholeParams(v1=10, v2=11, v3=10)
    with pytest.raises(InvalidParameters):
        WormholeParams(v1=10, v2=10, v3=10, fee_divisions=0)


def test_wormhole_gain(lam):
    report = wormhole(WormholeParams(v1=12, v2=11, v3=10), lam)
    assert report.gain == 1
    assert report.settlement_gain == 1
    assert report.deviates is True
    assert report.agree
    assert report.verdict.witness.deviator == "B"
    assert report.summary()["agree"] is True


def test_wormhole_without_routing_fee_is_neutral(lam):
    report = wormhole(WormholeParams(v1=10, v2=10, v3=10), lam)
    assert report.gain == 0
    assert report.deviates is False
    assert report.verdict.strict is False
    assert report.verdict.indifferent is True


def test_wormhole_routing_fee_preset(lam):
    params = WormholeParams.with_routing_fee(10, Fraction(1, 2))
    assert params.v1 == params.v2 == Fraction(21, 2)
    report = wormhole(params, lam)
    assert report.gain == Fraction(1, 2)
    assert report.timelocks_ok is True


def test_wormhole_closed_form_matches_settlement():
    rng = np.random.default_rng(7)
    for _ in range(50):
        v3, v2, v1 = sorted(int(x) for x in rng.integers(1, 100, size=3))
        balances = [int(x) for x in rng.integers(0, 50, size=6)]
        closed = wormhole_closed_form(WormholeParams(v1, v2, v3, *balances))
        assert closed["gain"] == v2 - v3
        assert closed["settlement_gain"] == closed["gain"]


def test_wormhole_composed_game_matches_closed_form(lam):
    rng = np.random.default_rng(11)
    for _ in range(3):
        v3, v2, v1 = sorted(int(x) for x in rng.integers(1, 30, size=3))
        balances = [int(x) for x in rng.integers(0, 10, size=6)]
        report = wormhole(WormholeParams(v1, v2, v3, *balances), lam)
        assert report.gain == v2 - v3
        assert report.agree
        assert report.deviates is (v2 > v3)


def test_case_study_closed_form(lam):
    study = HtlcCaseStudy(channel(3), lam)
    assert study.get_name() == "htlc"
    assert study.analyze() == {"case": "htlc", "deviation_onset": 1, "holds": True}
    model = study.build()
    assert model.lam is lam
    assert model.protocol.game.param_space == ((0, 3), (1, 3), (2, 3), (3, 3), (None, 3))


@pytest.mark.parametrize("T", range(1, 5))
def test_case_study_pipeline_agrees(lam, T):
    config = AnalysisSettings(fee_grid_divisions=10, epsilon_open="1/100")
    result = HtlcCaseStudy(channel(T), lam, config).analyze(generic=True)
    assert result["holds"] is (T >= 3)
    assert result["generic"]["holds"] is (T >= 3)
    assert result["agree"] is True
    assert result["generic"]["params_checked"] == 1
