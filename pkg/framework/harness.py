"""
Executable check of IC preservation under constant composition
Verifies both components, composes them, re-checks IC and compares composed
utilities against the per-component projections on random profiles
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, List, Optional

import numpy as np

from config.settings import AnalysisSettings, settings as default_settings

from .compose import (
    CompletedGame,
    CompositionMap,
    ICVerdict,
    additive_union,
    check_ic,
    complete,
    compose_protocols,
)
from .errors import PreconditionFailed
from .extform import Protocol, StrategyProfile
from .models import ConflictSpec, HashrateDistribution, SettlementRules

logger = logging.getLogger(__name__)


@dataclass
class HarnessReport:
    passed: bool
    verdicts: Dict[Hashable, ICVerdict]
    projection_checks: int = 0
    mismatches: List[Dict] = field(default_factory=list)
    counterexample: Optional[Dict] = None

    def summary(self) -> Dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "parameters": len(self.verdicts),
            "projection_checks": self.projection_checks,
            "mismatches": len(self.mismatches),
            "counterexample": self.counterexample,
        }


def _require_ic(protocol: Protocol, lam, rules, conflicts, config) -> None:
    for p, verdict in check_ic(protocol, lam, rules, conflicts, config=config).items():
        if not verdict.holds:
            raise PreconditionFailed(f"{protocol.name} is not incentive compatible at p={p}")


def _random_profile(tree, rng: np.random.Generator) -> StrategyProfile:
    profile = StrategyProfile()
    for info in tree.info_sets:
        profile[(info.path, info.player)] = info.actions[int(rng.integers(len(info.actions)))]
    return profile


def composition_harness(
    protocol1: Protocol,
    protocol2: Protocol,
    q_constant: Hashable,
    lam: HashrateDistribution,
    rules1: SettlementRules,
    rules2: SettlementRules,
    conflicts1: ConflictSpec = ConflictSpec(),
    conflicts2: ConflictSpec = ConflictSpec(),
    trials: int = 100,
    seed: Optional[int] = None,
    config: Optional[AnalysisSettings] = None,
) -> HarnessReport:
    """
    Composed IC of two IC protocols glued by a constant map

    Raises PreconditionFailed when a component is not IC. A failing report means
    constant composition broke incentive compatibility.
    """
    config = config or default_settings
    _require_ic(protocol1, lam, rules1, conflicts1, config)
    _require_ic(protocol2, lam, rules2, conflicts2, config)

    rules = additive_union(rules1, rules2)
    conflicts = conflicts1.merged(conflicts2)
    composed = compose_protocols(protocol1, protocol2, CompositionMap(constant=q_constant))
    verdicts = check_ic(composed, lam, rules, conflicts, config=config)
    report = HarnessReport(passed=all(v.holds for v in verdicts.values()), verdicts=verdicts)
    failing = next((p for p, v in verdicts.items() if not v.holds), None)
    if failing is not None:
        witness = verdicts[failing].witness
        report.counterexample = {"p": failing, "deviator": witness.deviator if witness else None}

    # composed utility must equal the sum of the two component utilities
    rng = np.random.default_rng(config.default_seed if seed is None else seed)
    alphabet1 = rules1.scope
    for p in composed.game.param_space:
        game = complete(composed.game.tree(p), lam, rules, conflicts)
        first = CompletedGame(protocol1.game.tree(p), lam, rules1, conflicts1)
        second = CompletedGame(protocol2.game.tree(q_constant), lam, rules2, conflicts2)
        for _ in range(trials):
            emissions = game.tree.play(_random_profile(game.tree, rng)).emissions
            part1 = tuple(e for e in emissions if e.triple.tx in alphabet1)
            part2 = tuple(e for e in emissions if e.triple.tx not in alphabet1)
            total, u1, u2 = game.balances(emissions), first.balances(part1), second.balances(part2)
            report.projection_checks += 1
            for player in set(total) | set(u1) | set(u2):
                expected = u1.get(player, Fraction(0)) + u2.get(player, Fraction(0))
                if total.get(player, Fraction(0)) != expected:
                    report.mismatches.append({"p": p, "player": player,
                                              "composed": total.get(player), "sum": expected})
    if report.mismatches:
        report.passed = False
    logger.info(f"Composition harness {composed.name}: {report.summary()['status']}, "
                f"{report.projection_checks} projection checks")
    return report
