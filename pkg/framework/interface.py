"""
Abstract Case Study Interface
Defines the contract every protocol case study follows, so the pipeline and the
CLI can run any of them the same way
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

from config.settings import AnalysisSettings

from .compose import CollusionMap, ICVerdict, check_ic
from .extform import Protocol
from .models import ConflictSpec, HashrateDistribution, SettlementRules

logger = logging.getLogger(__name__)


@dataclass
class CaseModel:
    """Everything the generic pipeline needs for one instance"""
    protocol: Protocol
    rules: SettlementRules
    conflicts: ConflictSpec
    lam: HashrateDistribution


class CaseStudy(ABC):
    """
    A protocol analysed two ways: by its closed-form condition and by the
    generic build -> complete -> check_ic pipeline
    """

    # closed-form keys the generic result must reproduce
    compared: Tuple[str, ...] = ("holds",)
    config: Optional[AnalysisSettings] = None

    @abstractmethod
    def get_name(self) -> str:
        """Return the case study name used by the CLI"""
        pass

    @abstractmethod
    def get_description(self) -> str:
        """Return a one-line description for reports"""
        pass

    def build(self) -> CaseModel:
        """
        Build the application game, settlement rules and conflicts

        Returns:
            CaseModel ready for check_ic
        """
        raise NotImplementedError(f"{self.get_name()} has no application game for check_ic")

    @abstractmethod
    def closed_form(self) -> Dict[str, Any]:
        """
        Evaluate the analytic condition

        Returns:
            Dictionary with at least a boolean under "holds"
        """
        pass

    def generic_params(self) -> Optional[Sequence[Hashable]]:
        """Parameter points the generic check covers; None means the whole space"""
        return None

    def generic_collusions(self, model: CaseModel) -> Optional[List[CollusionMap]]:
        """Collusion maps of the generic check; every player on its own by default"""
        return [CollusionMap.identity(model.protocol.players)]

    def generic_check(self, params: Optional[Sequence[Hashable]] = None,
                      collusions=None, config: Optional[AnalysisSettings] = None) -> Dict[Hashable, ICVerdict]:
        """Run the generic pipeline on the built model"""
        model = self.build()
        return check_ic(model.protocol, model.lam, model.rules, model.conflicts,
                        config=config, params=params, collusions=collusions)

    def generic(self) -> Dict[str, Any]:
        """
        The closed form's verdict recomputed by the pipeline: the condition holds
        when no parameter point admits a strict deviation
        """
        model = self.build()
        verdicts = self.generic_check(self.generic_params(), self.generic_collusions(model), self.config)
        failing = [p for p, verdict in verdicts.items() if verdict.strict]
        return {
            "holds": not failing,
            "witness": verdicts[failing[0]].witness if failing else None,
            "params_checked": len(verdicts),
        }

    def analyze(self, generic: bool = False) -> Dict[str, Any]:
        """The closed form, labelled with the case name; with generic=True also the pipeline and their agreement"""
        result = {"case": self.get_name()}
        closed = self.closed_form()
        result.update(closed)
        if generic:
            computed = self.generic()
            result["generic"] = computed
            result["agree"] = all(computed[key] == closed[key] for key in self.compared)
            if not result["agree"]:
                logger.warning(f"{self.get_name()}: closed form and generic pipeline disagree")
        return result
