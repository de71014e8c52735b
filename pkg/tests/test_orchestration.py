"""
Tests for the asynchronous timelock sweep
"""

import json
from fractions import Fraction
from pathlib import Path

import pandas as pd
import pytest

from framework.orchestration import SweepOrchestrator


@pytest.fixture
def orchestrator(lam, race_fees, config):
    return SweepOrchestrator(lam, *race_fees, config=config)


@pytest.mark.asyncio
async def test_sweep_rows_come_back_ordered(orchestrator):
    points = await orchestrator.run_sweep([3, 0, 2, 1, 2])
    assert [p.T for p in points] == [0, 1, 2, 3]
    assert [p.p_analytic for p in points] == [0, Fraction(1, 2), Fraction(17, 20), 1]
    assert all(p.p_oracle == p.p_analytic for p in points)
    assert all(p.p_mc is None for p in points)


@pytest.mark.asyncio
async def test_sweep_rows_follow_columns(orchestrator):
    await orchestrator.run_sweep(range(4))
    rows = orchestrator.rows()
    assert list(rows[0]) == orchestrator.columns()
    assert orchestrator.columns() == ["T", "p_analytic", "p_oracle", "p_mc", "se",
                                      "rho_1", "rho_2", "tstar_1", "tstar_2"]
    assert rows[2]["tstar_1"] == 1 and rows[2]["tstar_2"] == 0


@pytest.mark.asyncio
async def test_sweep_summary(orchestrator):
    await orchestrator.run_sweep(range(5), trials=2000, seed=11)
    report = orchestrator.generate_sweep_report()
    assert report["points"] == 5
    assert report["oracle_disagreements"] == []
    assert report["min_certain_timelock"] == 3


@pytest.mark.asyncio
async def test_sweep_is_seeded(lam, race_fees, config):
    first = await SweepOrchestrator(lam, *race_fees, config=config).run_sweep([2], trials=500, seed=3)
    second = await SweepOrchestrator(lam, *race_fees, config=config).run_sweep([2], trials=500, seed=3)
    assert first[0].p_mc == second[0].p_mc


@pytest.mark.asyncio
async def test_empty_sweep(orchestrator):
    assert await orchestrator.run_sweep([]) == []
    assert orchestrator.rows() == []
    assert "error" in orchestrator.generate_sweep_report()


@pytest.mark.asyncio
async def test_save_results(orchestrator, tmp_path):
    await orchestrator.run_sweep(range(3))
    paths = await orchestrator.save_results(str(tmp_path / "out"))
    json_path, csv_path = (Path(p) for p in paths)
    assert json_path.suffix == ".json" and csv_path.suffix == ".csv"
    rows = json.loads(json_path.read_text())
    assert rows[2]["p_analytic"] == "17/20"
    frame = pd.read_csv(csv_path)
    assert list(frame["T"]) == [0, 1, 2]
