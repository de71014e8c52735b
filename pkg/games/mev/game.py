"""
Sandwich MEV game
The user picks which miners see its order; the block proposer, drawn from the
share set, either includes it honestly (H) or brackets it with its own
front- and backrun (D)
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

from config.settings import AnalysisSettings, settings as default_settings
from framework.errors import TooManyPlayers
from framework.extform import GameTree, Leaf, Simultaneous, StrategyProfile
from framework.interface import CaseStudy
from framework.models import Block, Ordering, SettlementRules, TransactionTriple
from framework.netgame import NetworkViews, selective_share
from framework.settlement import settle

from .models import TRUSTED_MINER, USER, MevParams, MinerStrategy

logger = logging.getLogger(__name__)

H, D = MinerStrategy.HONEST.value, MinerStrategy.SANDWICH.value
ORDER = "x_U"


def front(miner: str) -> str:
    return f"x_F_{miner}"


def back(miner: str) -> str:
    return f"x_B_{miner}"


def miner_shares(params: MevParams) -> Dict[str, Fraction]:
    """Proposer shares of the strategic miners, λ_0 removed, plus the trusted miner if any"""
    lam = params.lam
    strategic = 1 - lam.lambda0
    shares = {miner: lam[j] / strategic for j, miner in enumerate(lam.miner_ids(), start=1)}
    if params.has_trusted:
        scale = 1 - params.trusted_share
        shares = {miner: share * scale for miner, share in shares.items()}
        shares[TRUSTED_MINER] = params.trusted_share
    return shares


def mev_rules(params: MevParams, miners: Sequence[str]) -> SettlementRules:
    """
    The order's fee and the captured spread are bounties of the including miner;
    the user keeps the spread only when nobody sandwiches it
    """
    table = {frozenset(): {USER: Fraction(0)}, frozenset({ORDER}): {USER: params.s}}
    bounties = {ORDER: params.f}
    for miner in miners:
        table[frozenset({ORDER, front(miner), back(miner)})] = {USER: Fraction(0)}
        bounties[back(miner)] = params.s
    return SettlementRules(base_balance=table, payer={ORDER: USER}, bounties=bounties)


def _triples(miners: Sequence[str]) -> List[TransactionTriple]:
    triples = [TransactionTriple(ORDER, 0)]
    for miner in miners:
        triples += [TransactionTriple(front(miner), 0), TransactionTriple(back(miner), 0)]
    return triples


def _block(miner: str, strategy: str, view: FrozenSet[TransactionTriple]) -> Block:
    visible = {t.tx for t in view}
    if ORDER not in visible:
        txs: Tuple[str, ...] = ()
    elif strategy == D and {front(miner), back(miner)} <= visible:
        txs = (front(miner), ORDER, back(miner))
    else:
        txs = (ORDER,)
    return Block(round=0, txs=txs, miner_shares=((miner, Fraction(1)),))


def stage_game(share_set: Sequence[str]) -> GameTree:
    """One-shot miner stage; the trusted miner has H only"""
    owners = tuple(
        (miner, (H,) if miner == TRUSTED_MINER else (H, D)) for miner in share_set
    )
    return GameTree((USER,) + tuple(share_set), Simultaneous(owners, lambda joint: Leaf()),
                    name=f"mev[{','.join(share_set)}]")


@dataclass
class ShareSetOutcome:
    share_set: Tuple[str, ...]
    equilibria: List[Dict[str, str]]
    selected: Dict[str, str]
    utilities: Dict[str, Fraction]


@dataclass
class MevResult:
    shares: Dict[str, Fraction]
    outcomes: List[ShareSetOutcome]
    optimal_share_sets: List[Tuple[str, ...]]
    user_utility: Fraction
    miner_utilities: Dict[str, Fraction] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        return {
            "shares": self.shares,
            "optimal_share_sets": [list(s) for s in self.optimal_share_sets],
            "user_utility": self.user_utility,
            "miner_utilities": self.miner_utilities,
            "rows": [
                {
                    "share_set": ",".join(o.share_set),
                    "selected": ",".join(f"{m}:{a}" for m, a in sorted(o.selected.items())),
                    "equilibria": len(o.equilibria),
                    "user_utility": o.utilities[USER],
                }
                for o in self.outcomes
            ],
        }


class MevSolver:
    """Pure equilibria of the miner stage for every share set, and the user's best share sets"""

    def __init__(self, params: MevParams, config: Optional[AnalysisSettings] = None):
        self.params = params
        self.config = config or default_settings
        self.shares = miner_shares(params)
        self.miners = sorted(self.shares)
        if len(self.miners) + 1 > self.config.max_population:
            raise TooManyPlayers(f"{len(self.miners) + 1} participants exceed {self.config.max_population}")
        self.rules = mev_rules(params, self.miners)
        self.triples = _triples(self.miners)
        self.private = {}
        for miner in self.miners:
            self.private[front(miner)] = miner
            self.private[back(miner)] = miner

    def views(self, share_set: Sequence[str]) -> NetworkViews:
        return selective_share(self.triples, USER, ORDER, share_set, self.miners,
                               self.rules.payer, self.private)

    def utilities(self, share_set: Sequence[str], strategies: Dict[str, str]) -> Dict[str, Fraction]:
        """Expected settlement over the proposer, drawn from the share set by hashrate"""
        totals: Dict[str, Fraction] = {USER: Fraction(0)}
        totals.update({miner: Fraction(0) for miner in self.miners})
        mass = sum((self.shares[m] for m in share_set), Fraction(0))
        if mass == 0:
            return totals
        views = self.views(share_set)
        for proposer in share_set:
            weight = self.shares[proposer] / mass
            ordering = Ordering((_block(proposer, strategies[proposer], views[proposer]),))
            for player, value in settle(ordering, self.triples, self.rules).items():
                totals[player] = totals.get(player, Fraction(0)) + weight * value
        return totals

    def solve_share_set(self, share_set: Tuple[str, ...]) -> ShareSetOutcome:
        if not share_set:
            return ShareSetOutcome(share_set, [{}], {}, self.utilities(share_set, {}))
        tree = stage_game(share_set)
        equilibria: List[Dict[str, str]] = []
        for profile in tree.enumerate_profiles(self.config):
            strategies = {player: action for (_, player), action in profile.items()}
            if self._is_equilibrium(share_set, strategies, tree):
                equilibria.append(strategies)
        # profiles enumerate H before D, so the first equilibrium prefers honesty on ties
        selected = equilibria[0]
        return ShareSetOutcome(share_set, equilibria, selected, self.utilities(share_set, selected))

    def _is_equilibrium(self, share_set, strategies: Dict[str, str], tree: GameTree) -> bool:
        base = self.utilities(share_set, strategies)
        for info in tree.info_sets:
            for action in info.actions:
                if action == strategies[info.player]:
                    continue
                deviation = dict(strategies)
                deviation[info.player] = action
                if self.utilities(share_set, deviation)[info.player] > base[info.player]:
                    return False
        return True

    def solve(self) -> MevResult:
        outcomes = []
        for size in range(len(self.miners) + 1):
            for share_set in itertools.combinations(self.miners, size):
                outcomes.append(self.solve_share_set(share_set))
        best = max(o.utilities[USER] for o in outcomes)
        optimal = [o for o in outcomes if o.utilities[USER] == best]
        chosen = optimal[0]
        result = MevResult(
            shares=self.shares,
            outcomes=outcomes,
            optimal_share_sets=[o.share_set for o in optimal],
            user_utility=best,
            miner_utilities={m: chosen.utilities[m] for m in self.miners},
        )
        logger.info(f"MEV s={self.params.s}: user utility {best} with share sets {result.optimal_share_sets}")
        return result


def mev_game(params: MevParams, config: Optional[AnalysisSettings] = None) -> MevResult:
    """Solve the sandwich game over every share set"""
    return MevSolver(params, config).solve()


class MevCaseStudy(CaseStudy):
    """Sandwich MEV: whom the user should show its order to"""

    compared = ("user_utility",)

    def __init__(self, params: MevParams, config: Optional[AnalysisSettings] = None):
        self.params = params
        self.config = config or default_settings

    def get_name(self) -> str:
        return "mev"

    def get_description(self) -> str:
        return "Sandwich MEV: selective order sharing against front- and backrunning miners"

    def closed_form(self) -> Dict[str, Any]:
        """Only a trusted miner protects the spread: U earns s with one, nothing without"""
        trusted = self.params.has_trusted
        return {"holds": trusted, "user_utility": self.params.s if trusted else Fraction(0)}

    def generic(self) -> Dict[str, Any]:
        result = mev_game(self.params, self.config)
        return {"user_utility": result.user_utility, "optimal_share_sets": result.optimal_share_sets}
