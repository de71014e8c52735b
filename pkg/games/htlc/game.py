import logging
from fractions import Fraction
from typing import Any, Dict, Hashable, List, Optional, Tuple

from config.settings import AnalysisSettings, settings as default_settings
from framework.comg import CensorRaceEngine, Rounds
from framework.compose import CompletedGame, backward_induction, complete
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

from .models import HtlcAction, HtlcParams

logger = logging.getLogger(__name__)

A = HtlcAction


def race_onset(lam: HashrateDistribution, f1: Fraction, f2: Fraction, T: int) -> Rounds:
    """t*_m(f1, f2; λ, T); a claim paying at least the counter-bid is never censored"""
    if f1 >= f2:
        return T
    return CensorRaceEngine.deviation_onset(lam, f1, f2, T)


def htlc_rules(params: HtlcParams, config: Optional[AnalysisSettings] = None) -> Tuple[SettlementRules, ConflictSpec]:
    """Settlement table and conflicts of one HTLC channel; both parties earn the open-channel bonus"""
    ids = params.ids
    payer, payee = params.payer, params.payee
    eps = params.epsilon(config)
    v_A, v_B, v = params.v_A, params.v_B, params.v
    table = {
        frozenset({ids.refund}): {payer: v_A + v + eps, payee: v_B + eps},
        frozenset({ids.pay}): {payer: v_A + eps, payee: v_B + v + eps},
        frozenset({ids.close, ids.timeout}): {payer: v_A + v, payee: v_B},
        frozenset({ids.close, ids.claim}): {payer: v_A, payee: v_B + v},
        frozenset({ids.close}): {payer: v_A, payee: v_B},
        frozenset(): {payer: v_A + eps, payee: v_B + eps},
    }
    rules = SettlementRules(
        base_balance=table,
        payer={ids.timeout: payer, ids.claim: payee},
        scope=frozenset({ids.close, ids.refund, ids.pay, ids.timeout, ids.claim}),
    )
    conflicts = ConflictSpec(
        conflict_sets=(frozenset({ids.close, ids.refund, ids.pay}), frozenset({ids.timeout, ids.claim})),
        validity={ids.timeout: params.T},
        sentinels=frozenset({ids.refund, ids.pay}),
    )
    return rules, conflicts


class _HtlcTreeBuilder:
    """
    Builds H_t for one parameter point and records the intended action at every node

    Before the timelock the intended play waits for the secret and has the payee
    share it off-chain; from the timelock on the payment is reverted off-chain.
    """

    def __init__(self, params: HtlcParams, t_s: Optional[int], t_e: int, divisions: int):
        self.params = params
        self.ids = params.ids
        self.t_s = t_s
        self.t_e = t_e
        self.T = params.T
        self.payer, self.payee = params.payer, params.payee
        self.grid_payer = self._grid(params.fee_cap_payer, divisions)
        self.grid_payee = self._grid(params.fee_cap_payee, divisions)
        self.ipb: Dict[InfoKey, Any] = {}

    def build(self) -> Node:
        return self._round(0, "root")

    # ==================== HELPERS ====================

    def _grid(self, cap: Fraction, divisions: int) -> Tuple[Fraction, ...]:
        """{0, δ, ..., cap}; δ is fee_step, else cap split into `divisions` steps"""
        grid = fee_grid(cap, self.params.fee_step or cap / divisions)
        return grid if grid[-1] == cap else grid + (cap,)

    def _sentinel(self, tx: str, t: int) -> Emission:
        return Emission(TransactionTriple(tx, t, Fraction(0)), None)

    def _decide(self, owner: str, path: str, intended: HtlcAction,
                branches: List[Tuple[HtlcAction, Any]], emit: Tuple[Emission, ...] = ()) -> Decision:
        self.ipb[(path, owner)] = intended.value
        actions = tuple((action.value, build(f"{path}/{action.value}")) for action, build in branches)
        return Decision(owner, actions, emit)

    def _fee(self, owner: str, tx: str, t: int, grid, path: str, child, emit: Tuple[Emission, ...] = ()) -> FeeChoice:
        """Fee choice at the grid maximum in the intended play; child(path) builds each continuation"""
        self.ipb[(path, owner)] = grid[-1]
        per_fee = tuple((fee, child(f"{path}/{tx}={fee_label(fee)}")) for fee in grid)
        return FeeChoice(owner, tx, t, grid, per_fee[0][1], emit, per_fee)

    def _next(self, t: int, path: str) -> Node:
        return self._round(t + 1, path) if t < self.t_e else Leaf()

    # ==================== ROUNDS ====================

    def _round(self, t: int, path: str) -> Node:
        if self.t_s is not None and t >= self.t_s:
            return self._informed(t, path)
        return self._refund_offer(t, path)

    def _informed(self, t: int, path: str) -> Node:
        """Payee knows the secret: close on chain, share it, or keep it"""
        before = t < self.T
        return self._decide(self.payee, path, A.SHARE if before else A.NO_SHARE, [
            (A.ON_CHAIN, lambda p: self._on_chain(t, p)),
            (A.SHARE, lambda p: self._decide(self.payer, p, A.UPDATE if before else A.NO_UPDATE, [
                (A.UPDATE, lambda q: Leaf((self._sentinel(self.ids.pay, t),))),
                (A.NO_UPDATE, lambda q: self._on_chain(t, q)),
            ])),
            (A.NO_SHARE, lambda p: self._refund_offer(t, p)),
        ])

    def _on_chain(self, t: int, path: str) -> Node:
        """Close, the payee claims with the secret, the payer may counter with the timeout"""
        before = t < self.T
        return self._fee(
            self.payee, self.ids.claim, t, self.grid_payee, path,
            lambda p: self._decide(self.payer, p, A.IGNORE if before else A.REACT, [
                (A.REACT, lambda q: self._fee(self.payer, self.ids.timeout, t, self.grid_payer, q,
                                              lambda _: Leaf())),
                (A.IGNORE, lambda q: Leaf()),
            ]),
            emit=(self._sentinel(self.ids.close, t),),
        )

    def _refund_offer(self, t: int, path: str) -> Node:
        before = t < self.T
        return self._decide(self.payer, path, A.NO_REFUND if before else A.REFUND, [
            (A.NO_REFUND, lambda p: self._next(t, p)),
            (A.REFUND, lambda p: self._decide(self.payee, p, A.REJECT if before else A.ACCEPT, [
                (A.ACCEPT, lambda q: Leaf((self._sentinel(self.ids.refund, t),))),
                (A.REJECT, lambda q: self._fee(
                    self.payer, self.ids.timeout, t, self.grid_payer, q,
                    lambda r: self._payee_closed(t + 1, r),
                    emit=(self._sentinel(self.ids.close, t),),
                )),
            ])),
        ])

    def _payee_closed(self, t: int, path: str) -> Node:
        """Channel closed by a rejected refund: the payee may still claim while the timelock runs"""
        if self.t_s is None:
            return Leaf()
        round_ = max(t, self.t_s)
        if round_ > min(self.t_e, self.T - 1):
            return Leaf()
        return self._decide(self.payee, path, A.POST, [
            (A.POST, lambda p: self._fee(self.payee, self.ids.claim, round_, self.grid_payee, p,
                                         lambda _: Leaf())),
            (A.WAIT, lambda p: self._payee_closed(round_ + 1, p)),
        ])


def htlc_game(params: HtlcParams, config: Optional[AnalysisSettings] = None) -> Protocol:
    """
    HTLC application game family over (t_s, t_e)

    The space holds every reveal time 0..t_e plus None (never revealed) for the
    horizon of params.
    """
    config = config or default_settings
    players = (params.payer, params.payee)
    intended: Dict[Hashable, Dict[InfoKey, Any]] = {}

    def build(p: Hashable) -> GameTree:
        t_s, t_e = p
        builder = _HtlcTreeBuilder(params.with_horizon(t_e), t_s, t_e, config.fee_grid_divisions)
        tree = GameTree(players, builder.build(), name=f"H{params.channel}[{t_s},{t_e}]")
        intended[p] = builder.ipb
        logger.debug(f"{tree.name}: {tree.node_count} nodes, {tree.leaf_count} leaves")
        return tree

    space = [(s, params.t_e) for s in range(params.t_e + 1)] + [(None, params.t_e)]
    game = ParamGame(players, space, build, name=f"H{params.channel}")

    def ipb(p: Hashable) -> StrategyProfile:
        tree = game.tree(p)
        return tree.profile_from_policy(lambda info: intended[p][(info.path, info.player)])

    return Protocol(players, game, ipb, name=game.name)


def rational_play(params: HtlcParams, lam: HashrateDistribution,
                  config: Optional[AnalysisSettings] = None) -> Tuple[CompletedGame, StrategyProfile]:
    """Subgame-perfect play at params.p, ties broken towards the intended action"""
    config = config or default_settings
    protocol = htlc_game(params, config)
    rules, conflicts = htlc_rules(params, config)
    completed = complete(protocol.game.tree(params.p), lam, rules, conflicts,
                         reject_ambiguous=config.reject_ambiguous)
    return completed, backward_induction(completed, protocol.ipb(params.p), config)


class HtlcCaseStudy(CaseStudy):
    """Single HTLC between two parties"""

    def __init__(self, params: HtlcParams, lam: HashrateDistribution,
                 config: Optional[AnalysisSettings] = None):
        self.params = params
        self.lam = lam
        self.config = config or default_settings

    def get_name(self) -> str:
        return "htlc"

    def get_description(self) -> str:
        return "Hashed timelock contract: off-chain settlement against the on-chain fee race"

    def build(self) -> CaseModel:
        rules, conflicts = htlc_rules(self.params, self.config)
        return CaseModel(htlc_game(self.params, self.config), rules, conflicts, self.lam)

    def closed_form(self) -> Dict[str, Any]:
        onset = race_onset(self.lam, self.params.fee_cap_payee, self.params.v, self.params.T)
        return {"deviation_onset": onset, "holds": onset > 0}

    def generic_params(self):
        return [self.params.p]
