"""
Censor-Only Miner Game
Closed-form censoring schedule of the timelocked fee race, a best-response oracle
and a Monte Carlo simulator
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import AnalysisSettings, settings as default_settings

from .errors import FeeOrderViolated, InvalidParameters, OracleBoundExceeded, ZeroFee
from .models import HashrateDistribution, to_fraction

logger = logging.getLogger(__name__)

INF = math.inf
# Values this close to an integer are treated as that integer before taking ceilings
CEIL_SNAP = 1e-9

Rounds = Union[int, float]  # float only for ±inf


# ==================== MODELS ====================

@dataclass(frozen=True)
class CensorSchedule:
    """ℓ, (ρ_j) and (r*_j = ⌈ρ_j⌉) of the race between x1 (fee f1, now) and x2 (fee f2, at T)"""
    ell: int
    rho: Tuple[float, ...]
    r_star: Tuple[Rounds, ...]
    f1: Fraction
    f2: Fraction
    lam: HashrateDistribution

    @property
    def rho_m(self) -> float:
        return self.rho[-1]


@dataclass(frozen=True)
class RaceSpec:
    lam: HashrateDistribution
    f1: Fraction
    f2: Fraction
    T: int

    def __post_init__(self):
        object.__setattr__(self, "f1", to_fraction(self.f1))
        object.__setattr__(self, "f2", to_fraction(self.f2))
        if self.T < 0:
            raise InvalidParameters("Timelock must be non-negative")


@dataclass(frozen=True)
class OracleResult:
    """Per-miner decisions for rounds 0..T-1 (True = censor) and the censoring mass per round"""
    switch_rounds: Tuple[int, ...]
    decisions: Tuple[Tuple[bool, ...], ...]
    censor_mass: Tuple[Fraction, ...]
    probability: Fraction
    threshold_form: bool = True


@dataclass(frozen=True)
class SimulationResult:
    probability: float
    standard_error: float
    trials: int
    seed: int


def ceil_rounds(value: float) -> Rounds:
    if math.isinf(value):
        return INF
    nearest = round(value)
    if abs(value - nearest) < CEIL_SNAP:
        return int(nearest)
    return math.ceil(value)


# ==================== ENGINE ====================

class CensorRaceEngine:
    """
    Solutions of the timelocked fee race
    x1 pays f1 and is valid now, x2 pays f2 > f1 and is valid from round T
    """

    @staticmethod
    def check_fees(f1: Fraction, f2: Fraction) -> None:
        if f1 >= f2:
            raise FeeOrderViolated(f"Race needs f1 < f2, got f1={f1}, f2={f2}")
        if f1 <= 0:
            raise ZeroFee("With f1 = 0 censoring x1 is trivially optimal")

    @staticmethod
    def censor_schedule(
        lam: HashrateDistribution,
        f1: Union[Fraction, float, str],
        f2: Union[Fraction, float, str],
        strict_ties: bool = False,
    ) -> CensorSchedule:
        """
        Compute ℓ, ρ_j and r*_j

        With strict_ties a miner whose hashrate equals f1/f2 exactly counts as a
        potential censor (worst case for the owner of x1).
        """
        f1, f2 = to_fraction(f1), to_fraction(f2)
        CensorRaceEngine.check_fees(f1, f2)
        ratio = f1 / f2

        m = lam.m
        if strict_ties:
            ell = sum(1 for j in range(1, m + 1) if lam[j] < ratio)
        else:
            ell = sum(1 for j in range(1, m + 1) if lam[j] <= ratio)

        rho: List[float] = [0.0] * ell
        r_star: List[Rounds] = [0] * ell
        for j in range(ell + 1, m + 1):
            previous = r_star[-1] if r_star else 0
            denominator = math.log(lam.tail(j))
            if math.isinf(previous) or denominator == 0.0:
                rho.append(INF)
                r_star.append(INF)
                continue
            numerator = math.log(ratio / lam[j])
            for i in range(ell + 1, j):
                before = r_star[i - 2] if i - 2 >= 0 else 0
                numerator -= (r_star[i - 1] - before) * math.log(lam.tail(i))
            value = previous + numerator / denominator
            logger.debug(f"rho_{j} = {value}")
            rho.append(value)
            r_star.append(ceil_rounds(value))

        return CensorSchedule(ell=ell, rho=tuple(rho), r_star=tuple(r_star), f1=f1, f2=f2, lam=lam)

    @staticmethod
    def switch_times(schedule: CensorSchedule, T: int) -> List[Rounds]:
        """t*_j = T - r*_j; -inf means censoring from the start"""
        return [-INF if math.isinf(r) else T - r for r in schedule.r_star]

    @staticmethod
    def inclusion_probability(schedule: CensorSchedule, T: int) -> Fraction:
        """Probability that x1 is included before x2 becomes valid"""
        if T <= 0:
            return Fraction(0)
        lam = schedule.lam
        r = schedule.r_star
        if not r or (not math.isinf(r[-1]) and T > r[-1]):
            return Fraction(1)

        # smallest j with r_{j-1} < T <= r_j
        j = next(k for k in range(1, lam.m + 1) if T <= r[k - 1])
        previous = r[j - 2] if j >= 2 else 0
        survive = lam.tail(j) ** int(T - previous)
        for i in range(1, j):
            before = r[i - 2] if i >= 2 else 0
            survive *= lam.tail(i) ** int(r[i - 1] - before)
        return 1 - survive

    @staticmethod
    def min_certain_timelock(lam: HashrateDistribution, f1, f2) -> Rounds:
        """Smallest T for which x1 is included with certainty"""
        schedule = CensorRaceEngine.censor_schedule(lam, f1, f2)
        r_m = schedule.r_star[-1] if schedule.r_star else 0
        return INF if math.isinf(r_m) else r_m + 1

    @staticmethod
    def best_response_oracle(
        spec: RaceSpec,
        config: Optional[AnalysisSettings] = None,
    ) -> OracleResult:
        """
        Value iteration over rounds T-1 .. 0 in exact arithmetic

        W_j^t is miner j's expected fee income from round t on, given x1 is still
        pending. Miner j censors at t iff W_j^{t+1} > f1; the comparison does not
        depend on the other miners' round-t choices, so each round's best
        responses form the fixpoint directly.
        """
        config = config or default_settings
        lam, T = spec.lam, spec.T
        CensorRaceEngine.check_fees(spec.f1, spec.f2)
        if T > config.oracle_bound:
            raise OracleBoundExceeded(f"T={T} exceeds oracle bound {config.oracle_bound}")
        if lam.m > config.oracle_max_miners:
            raise OracleBoundExceeded(f"m={lam.m} exceeds {config.oracle_max_miners} miners")

        m = lam.m
        gains = [lam[j] * spec.f2 for j in range(1, m + 1)]  # W_j^T
        decisions_by_round: List[Tuple[bool, ...]] = []
        masses: List[Fraction] = []
        for t in range(T - 1, -1, -1):
            censor = tuple(gains[j - 1] > spec.f1 for j in range(1, m + 1))
            mass = sum((lam[j] for j in range(1, m + 1) if censor[j - 1]), Fraction(0))
            gains = [
                mass * gains[j - 1] if censor[j - 1] else lam[j] * spec.f1 + mass * gains[j - 1]
                for j in range(1, m + 1)
            ]
            decisions_by_round.append(censor)
            masses.append(mass)
        decisions_by_round.reverse()
        masses.reverse()

        per_miner = tuple(tuple(decisions_by_round[t][j] for t in range(T)) for j in range(m))
        switch_rounds = []
        threshold = True
        for row in per_miner:
            first = next((t for t, c in enumerate(row) if c), T)
            switch_rounds.append(first)
            threshold &= all(row[first:]) and not any(row[:first])

        survive = Fraction(1)
        for mass in masses:
            survive *= mass
        probability = Fraction(0) if T == 0 else 1 - survive
        return OracleResult(
            switch_rounds=tuple(switch_rounds),
            decisions=per_miner,
            censor_mass=tuple(masses),
            probability=probability,
            threshold_form=threshold,
        )

    @staticmethod
    def simulate_race(
        spec: RaceSpec,
        switch_rounds: Sequence[Rounds],
        trials: int,
        seed: int,
    ) -> SimulationResult:
        """
        Monte Carlo estimate of the probability that x1 is included before T

        Miner j includes x1 at rounds t < switch_rounds[j]; the λ_0 mass always does.
        """
        if trials < 1:
            raise InvalidParameters("trials must be at least 1")
        lam = spec.lam
        if len(switch_rounds) != lam.m:
            raise InvalidParameters("One switch round per miner is required")
        rng = np.random.default_rng(seed)
        if spec.T == 0:
            return SimulationResult(0.0, 0.0, trials, seed)

        weights = np.array(lam.as_floats())
        weights = weights / weights.sum()
        selected = rng.choice(lam.m + 1, size=(trials, spec.T), p=weights)
        # switch round per selected index; index 0 never censors
        switches = np.array([INF] + [float(s) for s in switch_rounds])
        rounds = np.arange(spec.T)[np.newaxis, :]
        includes = rounds < switches[selected]
        hits = includes.any(axis=1)
        p_hat = float(hits.mean())
        se = math.sqrt(p_hat * (1 - p_hat) / trials)
        logger.info(f"Simulated {trials} races: p_hat={p_hat:.6f} se={se:.6f}")
        return SimulationResult(p_hat, se, trials, seed)

    @staticmethod
    def deviation_onset(lam: HashrateDistribution, f1, f2, T: int) -> Rounds:
        """t*_m(f1, f2; λ, T), the round from which the largest miner censors"""
        schedule = CensorRaceEngine.censor_schedule(lam, f1, f2)
        times = CensorRaceEngine.switch_times(schedule, T)
        return times[-1] if times else T
