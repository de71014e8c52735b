"""
Tests for CRAB collateral safety and the bribe race game
"""

from fractions import Fraction

import pytest

from framework.errors import EnumerationBoundExceeded, InvalidParameters
from games.crab import CROSS_CHECK_MAX_T, CrabCaseStudy, CrabParams, crab_cross_check, crab_game, crab_safety


def crab(T, c, v=1, **kwargs):
    v = Fraction(v)
    return CrabParams(T=T, v_A_l=0, v_B_l=v, v_A_o=v, v_B_o=0, c=c, v=v, **kwargs)


@pytest.mark.parametrize("T", range(1, 11))
@pytest.mark.parametrize("k", [k for k in range(1, 20)])
def test_safety_threshold_on_even_split(even_lam, T, k):
    verdict = crab_safety(T, Fraction(k, 20), 1, even_lam)
    assert verdict.safe is (k > 10)


def test_boundary_ratio_is_unsafe(even_lam):
    verdict = crab_safety(5, "1/2", 1, even_lam)
    assert verdict.safe is False
    assert verdict.min_safe_T == float("inf")


def test_minimum_safe_delay(lam):
    assert crab_safety(2, 1, 10, lam).safe is False
    verdict = crab_safety(3, 1, 10, lam)
    assert verdict.safe is True
    assert verdict.r_m == 2
    assert verdict.min_safe_T == 3


def test_full_collateral_is_trivially_safe(lam):
    verdict = crab_safety(0, 10, 10, lam)
    assert verdict.safe is True
    assert verdict.trivially_safe is True


def test_params_validation():
    with pytest.raises(InvalidParameters):
        CrabParams(T=1, v_A_l=1, v_B_l=0, v_A_o=0, v_B_o=1, c=1, v=1)
    with pytest.raises(InvalidParameters):
        CrabParams(T=1, v_A_l=0, v_B_l=1, v_A_o=1, v_B_o=1, c=1, v=1)
    with pytest.raises(InvalidParameters):
        crab(-1, 1)
    assert crab(1, 1).bribe_cap == 1


def test_intended_play_publishes_latest(even_lam):
    protocol = crab_game(crab(1, "0.6"))
    tree = protocol.game.tree(1)
    assert tree.play(protocol.ipb(1)).leaf_path == "root/latest/sweep"


@pytest.mark.parametrize("T", [1, 2])
@pytest.mark.parametrize("c, safe", [("0.6", True), ("0.4", False)])
def test_cross_check_agrees_with_closed_form(even_lam, T, c, safe):
    check = crab_cross_check(crab(T, c), even_lam)
    assert check.closed_form.safe is safe
    assert check.rational_safe is safe
    assert check.agree
    assert check.summary()["agree"] is True


def test_cross_check_bound(even_lam):
    with pytest.raises(EnumerationBoundExceeded):
        crab_cross_check(crab(CROSS_CHECK_MAX_T + 1, "0.6"), even_lam)


def test_case_study_closed_form(lam):
    study = CrabCaseStudy(crab(3, 1, v=10), lam)
    result = study.analyze()
    assert result["case"] == "crab"
    assert result["holds"] is True
    assert result["min_safe_T"] == 3


@pytest.mark.parametrize("T", [1, 2])
@pytest.mark.parametrize("c, safe", [("0.6", True), ("0.4", False)])
def test_case_study_pipeline_agrees(even_lam, T, c, safe):
    result = CrabCaseStudy(crab(T, c), even_lam).analyze(generic=True)
    assert result["holds"] is safe
    assert result["generic"]["holds"] is safe
    assert result["agree"] is True
    if not safe:
        assert result["generic"]["witness"].deviator == "A"
