import logging
from fractions import Fraction
from typing import Any, Dict, Optional, Tuple

from config.settings import AnalysisSettings, settings as default_settings
from framework.extform import (
    Decision,
    Emission,
    FeeChoice,
    GameTree,
    InfoKey,
    Leaf,
    Node,
    ParamGame,
    Protocol,
    StrategyProfile,
    fee_grid,
    fee_label,
)
from framework.interface import CaseModel, CaseStudy
from framework.models import ConflictSpec, HashrateDistribution, SettlementRules, TransactionTriple

from .models import CrabParams, CrabTxIds
from .safety import crab_safety

logger = logging.getLogger(__name__)

IDS = CrabTxIds()


def crab_rules(params: CrabParams) -> Tuple[SettlementRules, ConflictSpec]:
    """
    Base balances per confirmed set; the punishment carries Alice's collateral as
    a bounty for the miner that includes it
    """
    A, B, c = params.alice, params.bob, params.c
    table = {
        frozenset({IDS.commit_latest, IDS.sweep_latest}): {A: params.v_A_l + c, B: params.v_B_l + c},
        frozenset({IDS.commit_latest}): {A: Fraction(0), B: params.v_B_l + c},
        frozenset({IDS.commit_old}): {A: Fraction(0), B: params.v_B_o + c},
        frozenset({IDS.commit_old, IDS.sweep_old}): {A: params.v_A_o + c, B: params.v_B_o + c},
        frozenset({IDS.commit_old, IDS.punish}): {A: Fraction(0), B: params.v + c},
    }
    rules = SettlementRules(
        base_balance=table,
        payer={IDS.commit_latest: A, IDS.sweep_latest: A, IDS.commit_old: A, IDS.sweep_old: A, IDS.punish: B},
        scope=frozenset({IDS.commit_latest, IDS.sweep_latest, IDS.commit_old, IDS.sweep_old, IDS.punish}),
        bounties={IDS.punish: c},
    )
    conflicts = ConflictSpec(
        conflict_sets=(frozenset({IDS.sweep_old, IDS.punish}), frozenset({IDS.commit_latest, IDS.commit_old})),
        validity={IDS.sweep_old: params.T},
    )
    return rules, conflicts


class _CrabTreeBuilder:
    """K_{-1} (which commitment to publish) followed by the bribe race K_0 .. K_T"""

    def __init__(self, params: CrabParams):
        self.params = params
        self.A, self.B = params.alice, params.bob
        step = params.fee_step
        self.bribe_grid = fee_grid(params.bribe_cap, step, step or params.bribe_cap)
        self.punish_grid = fee_grid(params.punish_cap, None, params.punish_cap)
        self.ipb: Dict[InfoKey, Any] = {}

    def _posted(self, tx: str, t: int) -> Emission:
        return Emission(TransactionTriple(tx, t, self.params.epsilon), self.A)

    def _fee(self, owner: str, tx: str, t: int, grid, path: str, child) -> FeeChoice:
        self.ipb[(path, owner)] = grid[-1]
        per_fee = tuple((fee, child(f"{path}/{tx}={fee_label(fee)}")) for fee in grid)
        return FeeChoice(owner, tx, t, grid, per_fee[0][1], (), per_fee)

    def build(self) -> Node:
        path = "root"
        self.ipb[(path, self.A)] = "latest"
        self.ipb[(f"{path}/latest", self.A)] = "sweep"
        latest = Decision(self.A, (
            ("sweep", Leaf((self._posted(IDS.sweep_latest, 0),))),
            ("nothing", Leaf()),
        ), (self._posted(IDS.commit_latest, 0),))
        old = self._race(0, False, False, f"{path}/old")
        old = Decision(old.owner, old.actions, (self._posted(IDS.commit_old, 0),))
        return Decision(self.A, (("latest", latest), ("old", old)))

    def _race(self, t: int, swept: bool, punished: bool, path: str) -> Node:
        if swept and punished:
            return Leaf()
        if swept:
            return self._bob(t, swept, path)
        self.ipb[(path, self.A)] = "wait"
        return Decision(self.A, (
            ("sweep", self._fee(self.A, IDS.sweep_old, t, self.bribe_grid, f"{path}/sweep",
                                lambda p: self._bob(t, True, p) if not punished else self._next(t, True, True, p))),
            ("wait", self._bob(t, False, f"{path}/wait") if not punished else self._next(t, False, True, f"{path}/wait")),
        ))

    def _bob(self, t: int, swept: bool, path: str) -> Node:
        self.ipb[(path, self.B)] = "punish"
        return Decision(self.B, (
            ("punish", self._fee(self.B, IDS.punish, t, self.punish_grid, f"{path}/punish",
                                 lambda p: self._next(t, swept, True, p))),
            ("wait", self._next(t, swept, False, f"{path}/wait")),
        ))

    def _next(self, t: int, swept: bool, punished: bool, path: str) -> Node:
        if t >= self.params.T:
            return Leaf()
        return self._race(t + 1, swept, punished, path)


def crab_game(params: CrabParams, config: Optional[AnalysisSettings] = None) -> Protocol:
    """
    CRAB application game at delay T

    The intended play publishes the latest commitment and sweeps it; in the
    old-state subgames Bob punishes at once and fees sit at their caps.
    """
    players = (params.alice, params.bob)
    intended: Dict[int, Dict[InfoKey, Any]] = {}

    def build(T: int) -> GameTree:
        builder = _CrabTreeBuilder(params)
        tree = GameTree(players, builder.build(), name=f"CRAB[T={T}]")
        intended[T] = builder.ipb
        logger.debug(f"{tree.name}: {tree.node_count} nodes, {tree.leaf_count} leaves")
        return tree

    game = ParamGame(players, (params.T,), build, name="CRAB")

    def ipb(T: int) -> StrategyProfile:
        tree = game.tree(T)
        return tree.profile_from_policy(lambda info: intended[T][(info.path, info.player)])

    return Protocol(players, game, ipb, name=game.name)


class CrabCaseStudy(CaseStudy):
    """Collateralised channel against old-state bribery"""

    def __init__(self, params: CrabParams, lam: HashrateDistribution,
                 config: Optional[AnalysisSettings] = None):
        self.params = params
        self.lam = lam
        self.config = config or default_settings

    def get_name(self) -> str:
        return "crab"

    def get_description(self) -> str:
        return "CRAB channel: collateral forfeited to miners deters old-state timelock bribery"

    def build(self) -> CaseModel:
        rules, conflicts = crab_rules(self.params)
        return CaseModel(crab_game(self.params, self.config), rules, conflicts, self.lam)

    def closed_form(self) -> Dict[str, Any]:
        verdict = crab_safety(self.params.T, self.params.c, self.params.bribe_cap, self.lam)
        return {"holds": verdict.safe, "r_m": verdict.r_m, "min_safe_T": verdict.min_safe_T}
