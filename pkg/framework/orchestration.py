import asyncio
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import aiofiles
import pandas as pd

from config.settings import AnalysisSettings, settings as default_settings

from .comg import CensorRaceEngine, RaceSpec
from .errors import OracleBoundExceeded
from .models import HashrateDistribution
from .reporting import to_jsonable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepPoint:
    """One row of a timelock sweep"""
    T: int
    p_analytic: Fraction
    p_oracle: Optional[Fraction]
    p_mc: Optional[float]
    se: Optional[float]
    tstar: tuple

    def as_row(self, rho: Sequence[float]) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "T": self.T,
            "p_analytic": self.p_analytic,
            "p_oracle": self.p_oracle,
            "p_mc": self.p_mc,
            "se": self.se,
        }
        for i, value in enumerate(rho, start=1):
            row[f"rho_{i}"] = value
        for i, value in enumerate(self.tstar, start=1):
            row[f"tstar_{i}"] = value
        return row


class SweepOrchestrator:
    """
    Runs the race analysis over a range of timelocks
    Points are computed in batches on worker threads; rows come back ordered by T
    """

    def __init__(self, lam: HashrateDistribution, f1: Fraction, f2: Fraction,
                 config: Optional[AnalysisSettings] = None):
        self.lam = lam
        self.f1 = f1
        self.f2 = f2
        self.config = config or default_settings
        self.schedule = CensorRaceEngine.censor_schedule(lam, f1, f2)
        self.results: List[SweepPoint] = []

    async def run_sweep(self, horizons: Sequence[int], trials: int = 0, seed: Optional[int] = None) -> List[SweepPoint]:
        """Evaluate every T; Monte Carlo runs only when trials > 0"""
        seed = self.config.default_seed if seed is None else seed
        horizons = sorted(set(horizons))
        logger.info(f"Starting sweep over {len(horizons)} timelocks")

        batch_size = self.config.sweep_batch_size
        points: List[SweepPoint] = []
        for i in range(0, len(horizons), batch_size):
            batch = horizons[i:i + batch_size]
            tasks = [asyncio.to_thread(self._evaluate, T, trials, seed) for T in batch]
            points.extend(await asyncio.gather(*tasks))
            logger.info(f"Completed {min(i + batch_size, len(horizons))}/{len(horizons)} timelocks")

        self.results = sorted(points, key=lambda point: point.T)
        return self.results

    def _evaluate(self, T: int, trials: int, seed: int) -> SweepPoint:
        times = tuple(CensorRaceEngine.switch_times(self.schedule, T))
        analytic = CensorRaceEngine.inclusion_probability(self.schedule, T)
        spec = RaceSpec(self.lam, self.f1, self.f2, T)
        try:
            oracle = CensorRaceEngine.best_response_oracle(spec, self.config).probability
        except OracleBoundExceeded:
            oracle = None
        p_mc = se = None
        if trials > 0:
            # each T gets its own stream so results do not depend on batching
            simulated = CensorRaceEngine.simulate_race(spec, times, trials, seed + T)
            p_mc, se = simulated.probability, simulated.standard_error
        return SweepPoint(T, analytic, oracle, p_mc, se, times)

    def columns(self) -> List[str]:
        """Documented CSV column order"""
        m = self.lam.m
        return (["T", "p_analytic", "p_oracle", "p_mc", "se"]
                + [f"rho_{i}" for i in range(1, m + 1)]
                + [f"tstar_{i}" for i in range(1, m + 1)])

    def rows(self) -> List[Dict[str, Any]]:
        return [point.as_row(self.schedule.rho) for point in self.results]

    def generate_sweep_report(self) -> Dict[str, Any]:
        """Agreement summary of the analytic, oracle and Monte Carlo columns"""
        if not self.results:
            return {"error": "No sweep results available"}

        checked = [p for p in self.results if p.p_oracle is not None]
        simulated = [p for p in self.results if p.p_mc is not None]
        return {
            "points": len(self.results),
            "oracle_checked": len(checked),
            "oracle_disagreements": [p.T for p in checked if p.p_oracle != p.p_analytic],
            "max_mc_z": max((abs(p.p_mc - float(p.p_analytic)) / p.se for p in simulated if p.se), default=0.0),
            "min_certain_timelock": CensorRaceEngine.min_certain_timelock(self.lam, self.f1, self.f2),
        }

    async def save_results(self, results_dir: Optional[str] = None) -> List[str]:
        """Write the rows as JSON and CSV under the results directory; returns both paths"""
        results_dir = results_dir or self.config.results_dir
        os.makedirs(results_dir, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        rows = to_jsonable(self.rows())
        outputs = {
            os.path.join(results_dir, f"sweep_{timestamp}.json"): json.dumps(rows, indent=2, sort_keys=True),
            os.path.join(results_dir, f"sweep_{timestamp}.csv"): pd.DataFrame(rows).to_csv(index=False, lineterminator="\n"),
        }
        for path, payload in outputs.items():
            async with aiofiles.open(path, "w") as f:
                await f.write(payload)
        logger.info(f"Sweep saved to {results_dir}")
        return list(outputs)
