"""
Multi-hop HTLC payments
Two chained HTLCs glued by an independent or a reveal-dependent composition map,
and the wormhole attack on a three-hop route
"""

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Dict, Hashable, Optional

from config.settings import AnalysisSettings, settings as default_settings
from framework.comg import CensorRaceEngine
from framework.compose import (
    CollusionMap,
    CompletedGame,
    CompositionMap,
    ICVerdict,
    Statistic,
    Witness,
    additive_union,
    best_response,
    check_ic,
    collusion_reduce,
    complete,
    compose_protocols,
)
from framework.errors import InvalidParameters
from framework.extform import Protocol
from framework.models import (
    Block,
    ConflictSpec,
    HashrateDistribution,
    Ordering,
    Number,
    SettlementRules,
    TransactionTriple,
    to_fraction,
)
from framework.settlement import settle

from .game import htlc_game, htlc_rules, race_onset
from .models import HtlcAction, HtlcParams, HtlcTxIds

logger = logging.getLogger(__name__)

MODES = ("ind", "dep")


def reveal_statistic(ids: HtlcTxIds, t_e: int) -> Statistic:
    """(τ, t_e): τ is the first round the secret shows up in the channel, None if never"""
    def statistic(p: Hashable, trace, emissions) -> Hashable:
        rounds = [e.triple.post_time for e in emissions if e.triple.tx in (ids.pay, ids.claim)]
        return (min(rounds) if rounds else None, t_e)
    return statistic


# ==================== TWO HTLCs ====================

def timelock_condition(lam: HashrateDistribution, params1: HtlcParams, params2: HtlcParams) -> bool:
    """
    The intermediary can still claim upstream once it learns the secret downstream:
    t*_m(f̄_1, v_1; T_1) + 1 ≥ t*_m(f̄_2, v_2; T_2), with f̄_i the claim fee caps
    """
    upstream = race_onset(lam, params1.fee_cap_payee, params1.v, params1.T)
    downstream = race_onset(lam, params2.fee_cap_payee, params2.v, params2.T)
    return upstream + 1 >= downstream


@dataclass
class DeviationWitness:
    """Downstream payee withholds the secret until `withhold_until`, then claims upstream with fee v_1 - ε"""
    withhold_until: int
    fee: Fraction
    epsilon: Fraction
    gain: Fraction


def deviation_witness(lam: HashrateDistribution, params1: HtlcParams,
                      config: Optional[AnalysisSettings] = None) -> Optional[DeviationWitness]:
    """
    Largest fee below v_1 that lowers the censoring depth by one round, and the
    expected gain of withholding until one round past the upstream onset
    """
    config = config or default_settings
    cap, v1, T1 = params1.fee_cap_payee, params1.v, params1.T
    if cap >= v1:
        return None
    schedule = CensorRaceEngine.censor_schedule(lam, cap, v1)
    r_m = schedule.r_star[-1] if schedule.r_star else 0
    if math.isinf(r_m) or r_m == 0:
        return None

    step = v1 / config.fee_grid_divisions
    for k in range(config.fee_grid_divisions):
        fee = v1 - k * step
        if fee <= cap:
            break
        lowered = CensorRaceEngine.censor_schedule(lam, cap, fee)
        if lowered.r_star and lowered.r_star[-1] == r_m - 1:
            withhold_until = int(race_onset(lam, cap, v1, T1)) + 1
            epsilon = v1 - fee
            # the race after withholding runs against the lowered counter-bid
            p = CensorRaceEngine.inclusion_probability(lowered, max(T1 - withhold_until, 0))
            return DeviationWitness(withhold_until, fee, epsilon, epsilon * (1 - p))
    return None


@dataclass
class WithholdingCheck:
    """
    The cross-channel deviation of the coalition {A, D}, evaluated on the
    completed component games

    D keeps the secret until reveal_at and then shares it; the deviation is
    feasible when C's best reply is still the off-chain update. A then plays
    its best response in channel 1 at the reveal time read off channel 2.
    """
    reveal_at: int
    feasible: bool
    downstream_reply: Optional[str]
    upstream_param: Optional[Hashable]
    gain: Number
    witness: Optional[Witness] = None

    @property
    def deviates(self) -> bool:
        return self.feasible and self.gain > 0

    def summary(self) -> Dict[str, Any]:
        return {
            "reveal_at": self.reveal_at,
            "feasible": self.feasible,
            "downstream_reply": self.downstream_reply,
            "upstream_param": self.upstream_param,
            "gain": self.gain,
            "deviates": self.deviates,
        }


def _reduced(params: HtlcParams, p: Hashable, lam: HashrateDistribution, eta: CollusionMap,
             config: AnalysisSettings) -> CompletedGame:
    protocol = htlc_game(params, config)
    rules, conflicts = htlc_rules(params, config)
    completed = complete(protocol.game.tree(p), lam, rules, conflicts, reject_ambiguous=config.reject_ambiguous)
    return collusion_reduce(completed, eta.restricted(completed.participants, lam.miner_ids()))


def withholding_check(first: HtlcParams, second: HtlcParams, lam: HashrateDistribution,
                      config: Optional[AnalysisSettings] = None) -> WithholdingCheck:
    """
    Withhold the secret in channel 2 (C pays D) until one round past the
    censoring onset of channel 1 (A pays B), then claim upstream

    Both channels are completed under η = {A, D}, {B, C}; channel 1 reads its
    reveal time off channel 2's emissions. The gain compares the coalition's
    balances with the intended play of both channels.
    """
    config = config or default_settings
    miners = lam.miner_ids()
    eta = CollusionMap.from_blocks([[first.payer, second.payee], [first.payee, second.payer]], miners)
    payer, payee = second.payer, second.payee
    onset = race_onset(lam, first.fee_cap_payee, first.v, first.T)
    reveal_at = 0 if math.isinf(onset) else max(int(onset) + 1, 0)
    statistic = reveal_statistic(second.ids, first.t_e)

    down = _reduced(second, second.p, lam, eta, config)
    down_ipb = htlc_game(second, config).ipb(second.p)
    down_base = down.tree.play(down_ipb).emissions
    base_param = statistic(second.p, None, down_base)
    up_base = _reduced(first, base_param, lam, eta, config)
    base = down.value(down_base, payee) + up_base.value(
        up_base.tree.play(htlc_game(first, config).ipb(base_param)).emissions, first.payer)

    infeasible = WithholdingCheck(reveal_at, False, None, None, Fraction(0))
    if second.t_s != 0 or reveal_at > second.t_e:
        return infeasible

    # D keeps the secret while C keeps the channel open
    changes = {}
    path = "root"
    for _ in range(reveal_at):
        changes[(path, payee)] = HtlcAction.NO_SHARE.value
        path = f"{path}/{HtlcAction.NO_SHARE.value}"
        if down_ipb.get((path, payer)) != HtlcAction.NO_REFUND.value:
            return infeasible
        path = f"{path}/{HtlcAction.NO_REFUND.value}"
    changes[(path, payee)] = HtlcAction.SHARE.value
    shared = f"{path}/{HtlcAction.SHARE.value}"
    withheld = down_ipb.replaced(changes)

    reply = best_response(down, down.controller(payer), withheld, config,
                          allowed=lambda key: key[0] == shared or key[0].startswith(shared + "/"))
    played = withheld.replaced(reply.changes)
    action = played[(shared, payer)]
    if action != HtlcAction.UPDATE.value:
        logger.info(f"Withholding until {reveal_at}: {payer} answers {action!r}")
        return WithholdingCheck(reveal_at, False, action, None, Fraction(0))

    emissions = down.tree.play(played).emissions
    upstream_param = statistic(second.p, None, emissions)
    up = _reduced(first, upstream_param, lam, eta, config)
    up_ipb = htlc_game(first, config).ipb(upstream_param)
    claim = best_response(up, up.controller(first.payer), up_ipb, config)
    gain = down.value(emissions, payee) + claim.value - base

    check = WithholdingCheck(reveal_at, True, action, upstream_param, gain)
    if check.deviates:
        moves = dict(changes)
        moves.update({k: v for k, v in claim.changes.items() if up_ipb.get(k) != v})
        check.witness = Witness(eta.describe(), first.payer, moves, gain, shared, "strict")
    logger.info(f"Withholding until {reveal_at}: {payer} updates, gain {gain}")
    return check


@dataclass
class TwoHtlcReport:
    mode: str
    protocol: Protocol
    rules: SettlementRules
    conflicts: ConflictSpec
    condition: bool
    onsets: Dict[str, Any]
    first: Optional[HtlcParams] = None
    second: Optional[HtlcParams] = None
    witness: Optional[DeviationWitness] = None
    generic: Optional[WithholdingCheck] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "condition": self.condition,
            "onsets": self.onsets,
            "witness": self.witness,
            "generic": self.generic.summary() if self.generic else None,
            "agree": self.generic.deviates is not self.condition if self.generic else None,
            "players": list(self.protocol.players),
        }


def two_htlc(
    mode: str,
    params1: HtlcParams,
    params2: HtlcParams,
    lam: HashrateDistribution,
    config: Optional[AnalysisSettings] = None,
    generic: bool = False,
) -> TwoHtlcReport:
    """
    Route A -> B = C -> D: channel 1 (A pays B) runs after channel 2 (C pays D)

    In "dep" mode channel 1's reveal time is the round the secret first shows up
    in channel 2; "ind" keeps params1.t_s. Both horizons are set to max(T_1, T_2).
    With generic=True the withholding deviation of {A, D} against {B, C} is
    evaluated on the completed channel games.
    """
    if mode not in MODES:
        raise InvalidParameters(f"Unknown composition mode {mode!r}; expected one of {', '.join(MODES)}")
    config = config or default_settings
    horizon = max(params1.T, params2.T)
    first = replace(params1, payer="A", payee="B", channel="1", t_e=horizon)
    second = replace(params2, payer="C", payee="D", channel="2", t_e=horizon)

    if mode == "dep":
        g = CompositionMap(statistic=reveal_statistic(second.ids, horizon), name="g_dep")
    else:
        g = CompositionMap(constant=first.p, name="g_ind")
    protocol = compose_protocols(htlc_game(second, config), htlc_game(first, config), g)
    rules1, conflicts1 = htlc_rules(first, config)
    rules2, conflicts2 = htlc_rules(second, config)
    rules = additive_union(rules2, rules1)
    conflicts = conflicts2.merged(conflicts1)

    condition = timelock_condition(lam, first, second)
    report = TwoHtlcReport(
        mode=mode,
        protocol=protocol,
        rules=rules,
        conflicts=conflicts,
        condition=condition,
        first=first,
        second=second,
        onsets={
            "upstream": race_onset(lam, first.fee_cap_payee, first.v, first.T),
            "downstream": race_onset(lam, second.fee_cap_payee, second.v, second.T),
        },
    )
    if not condition:
        report.witness = deviation_witness(lam, first, config)

    if generic:
        report.generic = withholding_check(first, second, lam, config)
    logger.info(f"Two-HTLC ({mode}) T1={first.T} T2={second.T}: condition {condition}")
    return report


# ==================== WORMHOLE ====================

@dataclass(frozen=True)
class WormholeParams:
    """
    Route A -> B -> C -> D over channels 1, 2, 3 carrying v1 ≥ v2 ≥ v3
    v_X<i> is the balance of X in channel i outside the HTLC. Every channel
    splits its fee range into fee_divisions steps.
    """
    v1: Fraction
    v2: Fraction
    v3: Fraction
    v_A1: Fraction = Fraction(0)
    v_B1: Fraction = Fraction(0)
    v_B2: Fraction = Fraction(0)
    v_C2: Fraction = Fraction(0)
    v_C3: Fraction = Fraction(0)
    v_D3: Fraction = Fraction(0)
    T: int = 1
    fee_divisions: int = 1

    def __post_init__(self):
        for name in ("v1", "v2", "v3", "v_A1", "v_B1", "v_B2", "v_C2", "v_C3", "v_D3"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if min(self.v3, self.v_A1, self.v_B1, self.v_B2, self.v_C2, self.v_C3, self.v_D3) < 0 or self.v3 == 0:
            raise InvalidParameters("HTLC values must be positive and balances non-negative")
        if not self.v1 >= self.v2 >= self.v3:
            raise InvalidParameters("HTLC values must not grow along the route (v1 ≥ v2 ≥ v3)")
        if self.T < 1:
            raise InvalidParameters("Timelock must be at least 1: at T = 0 every channel is refunded")
        if self.fee_divisions <= 0:
            raise InvalidParameters("fee_divisions must be positive")

    @classmethod
    def with_routing_fee(cls, v3, fee, **kwargs) -> "WormholeParams":
        """Preset with v2 = v3 + the intermediary's routing fee"""
        v3, fee = to_fraction(v3), to_fraction(fee)
        kwargs.setdefault("v1", v3 + fee)
        return cls(v2=v3 + fee, v3=v3, **kwargs)

    def channel(self, i: int) -> HtlcParams:
        payer, payee = {1: ("A", "B"), 2: ("B", "C"), 3: ("C", "D")}[i]
        values = {1: (self.v_A1, self.v_B1, self.v1),
                  2: (self.v_B2, self.v_C2, self.v2),
                  3: (self.v_C3, self.v_D3, self.v3)}[i]
        return HtlcParams(T=self.T, t_e=self.T, v_A=values[0], v_B=values[1], v=values[2],
                          fee_step=values[2] / self.fee_divisions, payer=payer, payee=payee, channel=str(i))


@dataclass
class WormholeReport:
    honest: Dict[str, Fraction]
    deviation: Dict[str, Fraction]
    gain: Number
    deviates: bool
    closed_form_gain: Fraction
    settlement_gain: Fraction
    verdict: Optional[ICVerdict] = None
    timelocks_ok: Optional[bool] = None

    @property
    def agree(self) -> bool:
        return self.gain == self.closed_form_gain

    def summary(self) -> Dict[str, Any]:
        return {
            "honest": self.honest,
            "deviation": self.deviation,
            "gain": self.gain,
            "deviates": self.deviates,
            "closed_form_gain": self.closed_form_gain,
            "settlement_gain": self.settlement_gain,
            "agree": self.agree,
            "witness": self.verdict.witness if self.verdict else None,
            "timelocks_ok": self.timelocks_ok,
        }


def wormhole_rules(params: WormholeParams,
                   config: Optional[AnalysisSettings] = None) -> tuple:
    rules, conflicts = htlc_rules(params.channel(1), config)
    for i in (2, 3):
        more_rules, more_conflicts = htlc_rules(params.channel(i), config)
        rules = additive_union(rules, more_rules)
        conflicts = conflicts.merged(more_conflicts)
    return rules, conflicts


def wormhole_protocol(params: WormholeParams, config: Optional[AnalysisSettings] = None) -> Protocol:
    """H_1 ∘ H_2 ∘ H_3: channel 2 reads its reveal time off channel 3, channel 1 is independent"""
    h1, h2, h3 = (params.channel(i) for i in (1, 2, 3))
    inner = compose_protocols(htlc_game(h3, config), htlc_game(h2, config),
                              CompositionMap(statistic=reveal_statistic(h3.ids, params.T), name="g23"))
    return compose_protocols(inner, htlc_game(h1, config), CompositionMap(constant=h1.p, name="g12"))


def _coalition(balances: Dict[str, Fraction], members) -> Fraction:
    return sum((balances.get(x, Fraction(0)) for x in members), Fraction(0))


def wormhole_closed_form(params: WormholeParams,
                         config: Optional[AnalysisSettings] = None) -> Dict[str, Any]:
    """
    Per-party balances of the honest route and of the skip (channels 3 and 2
    refunded, channel 1 paid), cross-checked by settling both confirmed sets
    under the additive settlement of the three channels
    """
    p = params
    honest = {
        "A": p.v_A1,
        "B+D": p.v_B1 + p.v_B2 + p.v1 + p.v_D3 + p.v3,
        "C": p.v_C2 + p.v2 + p.v_C3,
    }
    deviation = {
        "A": p.v_A1,
        "B+D": p.v_B1 + p.v_B2 + p.v1 + p.v2 + p.v_D3,
        "C": p.v_C2 + p.v_C3 + p.v3,
    }

    rules, conflicts = wormhole_rules(params, config)
    ids = {i: HtlcTxIds(str(i)) for i in (1, 2, 3)}

    def settled(txs):
        triples = [TransactionTriple(tx, 0) for tx in txs]
        ordering = Ordering((Block(0, tuple(sorted(txs))),))
        return settle(ordering, triples, rules, conflicts)

    honest_balances = settled([ids[1].pay, ids[2].pay, ids[3].pay])
    deviation_balances = settled([ids[1].pay, ids[2].refund, ids[3].refund])
    return {
        "honest": honest,
        "deviation": deviation,
        "gain": deviation["B+D"] - honest["B+D"],
        "settlement_gain": _coalition(deviation_balances, ("B", "D")) - _coalition(honest_balances, ("B", "D")),
    }


def wormhole(params: WormholeParams, lam: HashrateDistribution,
             config: Optional[AnalysisSettings] = None) -> WormholeReport:
    """
    Colluding B and D skip C: D withholds the secret, channels 3 and 2 are
    refunded and B collects channel 1 off-chain

    The verdict comes from the IC check of the composed three-channel game under
    η = {B, D}, {A}, {C}; the closed form is kept as a cross-check. timelocks_ok
    reports the two-hop timelock condition on both consecutive channel pairs.
    """
    config = config or default_settings
    closed = wormhole_closed_form(params, config)

    protocol = wormhole_protocol(params, config)
    rules, conflicts = wormhole_rules(params, config)
    p = params.channel(3).p
    eta = CollusionMap.from_blocks([["B", "D"], ["A"], ["C"]], lam.miner_ids())
    verdict = check_ic(protocol, lam, rules, conflicts, config=config, params=[p], collusions=[eta])[p]
    gain = verdict.witness.gain if verdict.strict else Fraction(0)

    h1, h2, h3 = (params.channel(i) for i in (1, 2, 3))
    report = WormholeReport(
        honest=closed["honest"],
        deviation=closed["deviation"],
        gain=gain,
        deviates=verdict.strict,
        closed_form_gain=closed["gain"],
        settlement_gain=closed["settlement_gain"],
        verdict=verdict,
        timelocks_ok=timelock_condition(lam, h1, h2) and timelock_condition(lam, h2, h3),
    )
    if not report.agree:
        logger.warning(f"Wormhole: composed game gain {gain} differs from closed form {closed['gain']}")
    logger.info(f"Wormhole v2={params.v2} v3={params.v3}: gain {gain}, deviates={report.deviates}")
    return report
