"""
Cross-layer composition
Completion of application games with blockchain utilities, collusion reduction,
iterated weak dominance, incentive-compatibility verdicts and g-composition
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, FrozenSet, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple

from config.settings import AnalysisSettings, settings as default_settings

from .errors import (
    AlphabetOverlap,
    AmbiguousBlockchainResponse,
    EnumerationBoundExceeded,
    MinerMerged,
    NotIdempotent,
    TooManyPlayers,
    UnknownOwner,
)
from .extform import (
    Action,
    Decision,
    Emission,
    FeeChoice,
    GameTree,
    InfoKey,
    Leaf,
    Node,
    ParamGame,
    Protocol,
    Simultaneous,
    StrategyProfile,
)
from .models import ConflictSpec, HashrateDistribution, Number, PlayerId, SettlementRules
from .resolver import TripleResolver
from .settlement import expected_balances

logger = logging.getLogger(__name__)


# ==================== COLLUSION MAPS ====================

@dataclass(frozen=True)
class CollusionMap:
    """η: every player and miner to its coalition representative"""
    eta: Tuple[Tuple[str, str], ...]

    @classmethod
    def identity(cls, members: Sequence[str]) -> "CollusionMap":
        return cls(tuple((x, x) for x in sorted(members)))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[str]], miners: Sequence[str] = ()) -> "CollusionMap":
        """Canonical map: the block's miner represents it, else its smallest id"""
        pairs = []
        for block in blocks:
            block_miners = [x for x in block if x in miners]
            representative = block_miners[0] if block_miners else min(block)
            pairs.extend((x, representative) for x in block)
        return cls(tuple(sorted(pairs)))

    def as_dict(self) -> Dict[str, str]:
        return dict(self.eta)

    def __call__(self, x: str) -> str:
        return self.as_dict().get(x, x)

    def blocks(self) -> Dict[str, List[str]]:
        grouped: Dict[str, List[str]] = {}
        for member, representative in self.eta:
            grouped.setdefault(representative, []).append(member)
        return grouped

    def validate(self, miners: Sequence[str]) -> None:
        mapping = self.as_dict()
        for member, representative in mapping.items():
            if mapping.get(representative, representative) != representative:
                raise NotIdempotent(f"η({representative}) != {representative}")
            if member in miners and representative != member:
                raise MinerMerged(f"Miner {member} must represent its own coalition")
        for representative, members in self.blocks().items():
            if sum(1 for x in members if x in miners) > 1:
                raise MinerMerged(f"Coalition {sorted(members)} contains several miners")

    def restricted(self, members: Sequence[str], miners: Sequence[str] = ()) -> "CollusionMap":
        """The same coalitions cut down to members; members outside every block stay alone"""
        kept = [[x for x in block if x in members] for block in self.describe()]
        covered = {x for block in kept for x in block}
        kept += [[x] for x in members if x not in covered]
        return CollusionMap.from_blocks([block for block in kept if block], miners)

    def describe(self) -> List[List[str]]:
        return [sorted(members) for _, members in sorted(self.blocks().items())]


def enumerate_collusions(
    players: Sequence[str],
    miners: Sequence[str],
    max_block: int,
    config: Optional[AnalysisSettings] = None,
) -> List[CollusionMap]:
    """All partitions of N ∪ M with at most one miner and at most max_block members per block"""
    config = config or default_settings
    population = sorted(set(players) | set(miners))
    if len(population) > config.max_population:
        raise TooManyPlayers(f"{len(population)} participants exceed {config.max_population}")

    def partitions(items: List[str]) -> Iterator[List[List[str]]]:
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for partition in partitions(rest):
            yield [[first]] + partition
            for i, block in enumerate(partition):
                yield partition[:i] + [[first] + block] + partition[i + 1:]

    maps = []
    for partition in partitions(population):
        if any(len(block) > max_block for block in partition):
            continue
        if any(sum(1 for x in block if x in miners) > 1 for block in partition):
            continue
        maps.append(CollusionMap.from_blocks(partition, miners))
    maps.sort(key=lambda c: c.describe())
    logger.debug(f"{len(maps)} collusion maps over {population}")
    return maps


# ==================== COMPLETED GAMES ====================

def _tolerance(config: Optional[AnalysisSettings]) -> float:
    return (config or default_settings).tolerance


def greater(a: Number, b: Number, tol: float) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a > b
    return float(a) > float(b) + tol


def equal(a: Number, b: Number, tol: float) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol


class CompletedGame:
    """
    Application game whose leaves carry expected balances of the blockchain response
    Optionally reduced by a collusion map: representatives decide for and sum over their members
    """

    def __init__(
        self,
        tree: GameTree,
        lam: HashrateDistribution,
        rules: SettlementRules,
        conflicts: ConflictSpec,
        eta: Optional[CollusionMap] = None,
        reject_ambiguous: bool = False,
        _cache: Optional[Dict] = None,
    ):
        self.tree = tree
        self.lam = lam
        self.rules = rules
        self.conflicts = conflicts
        self.miners = [f"m{j}" for j in range(1, lam.m + 1)]
        self.participants = sorted(set(tree.players) | set(self.miners))
        self.eta = eta or CollusionMap.identity(self.participants)
        self.reject_ambiguous = reject_ambiguous
        self._resolver = TripleResolver(lam)
        self._cache: Dict[Tuple, Dict[str, Number]] = {} if _cache is None else _cache

    # Balances per participant for one emission set
    def balances(self, emissions: Sequence[Emission]) -> Dict[str, Number]:
        key = tuple(sorted((e.triple.tx, e.triple.post_time, e.triple.fee) for e in emissions))
        if key not in self._cache:
            triples = [e.triple for e in emissions]
            distribution = self._resolver.resolve(triples, self.conflicts, self.rules.bounties)
            if self.reject_ambiguous and any("indifferent" in f for f in distribution.flags):
                raise AmbiguousBlockchainResponse(f"Blockchain response to {key} is not unique")
            self._cache[key] = expected_balances(distribution, triples, self.rules, self.conflicts)
        return self._cache[key]

    def controller(self, player: PlayerId) -> str:
        return self.eta(player)

    def representatives(self) -> List[str]:
        return sorted(self.eta.blocks())

    def value(self, emissions: Sequence[Emission], representative: str) -> Number:
        balances = self.balances(emissions)
        members = self.eta.blocks().get(representative, [representative])
        return sum((balances.get(x, Fraction(0)) for x in members), Fraction(0))

    def utilities(self, profile: Mapping[InfoKey, Action]) -> Dict[str, Number]:
        """Reduced utility of every representative for a profile"""
        emissions = self.tree.play(profile).emissions
        return {r: self.value(emissions, r) for r in self.representatives()}

    def reduced(self, eta: CollusionMap) -> "CompletedGame":
        return CompletedGame(self.tree, self.lam, self.rules, self.conflicts, eta,
                             self.reject_ambiguous, _cache=self._cache)

    def controlled_keys(self, representative: str) -> List[InfoKey]:
        return [(i.path, i.player) for i in self.tree.info_sets if self.controller(i.player) == representative]


def complete(
    tree: GameTree,
    lam: HashrateDistribution,
    rules: SettlementRules,
    conflicts: ConflictSpec,
    reject_ambiguous: bool = False,
) -> CompletedGame:
    """Attach to every profile the expected settlement of the blockchain's response"""
    return CompletedGame(tree, lam, rules, conflicts, reject_ambiguous=reject_ambiguous)


def collusion_reduce(game: CompletedGame, eta: CollusionMap) -> CompletedGame:
    """η-collusion reduction; outcomes are unchanged, only deciders and utilities merge"""
    unknown = set(eta.as_dict()) - set(game.participants)
    if unknown:
        raise UnknownOwner(f"Collusion map names unknown participants {sorted(unknown)}")
    eta.validate(game.miners)
    full = dict((x, x) for x in game.participants)
    full.update(eta.as_dict())
    return game.reduced(CollusionMap(tuple(sorted(full.items()))))


# ==================== BEST RESPONSES ====================

@dataclass
class BestResponse:
    value: Number
    changes: Dict[InfoKey, Action]
    leaf_path: str


def best_response(game: CompletedGame, representative: str, profile: Mapping[InfoKey, Action],
                  config: Optional[AnalysisSettings] = None,
                  allowed: Optional[Callable[[InfoKey], bool]] = None) -> BestResponse:
    """
    Best deviation of one representative against fixed play of everyone else

    Perfect information lets this run as a single-agent search over the tree;
    ties keep the profile's own action. Keys rejected by allowed stay at the
    profile's action.
    """
    tol = _tolerance(config)
    tree = game.tree

    def search(node: Node, path: str, emitted: Tuple[Emission, ...]) -> BestResponse:
        emitted = emitted + tuple(node.emit)
        if isinstance(node, Leaf):
            return BestResponse(game.value(emitted, representative), {}, path)
        best: Optional[BestResponse] = None
        best_is_default = False
        for joint, child, child_path, added in tree.children(node, path):
            mine = {p: a for p, a in joint.items() if game.controller(p) == representative
                    and (allowed is None or allowed((path, p)))}
            others = {p: a for p, a in joint.items() if p not in mine}
            if any(profile[(path, p)] != a for p, a in others.items()):
                continue
            result = search(child, child_path, emitted + added)
            is_default = all(profile[(path, p)] == a for p, a in mine.items())
            if best is None or greater(result.value, best.value, tol) or (
                    is_default and not best_is_default and equal(result.value, best.value, tol)):
                changes = dict(result.changes)
                changes.update({(path, p): a for p, a in mine.items()})
                best = BestResponse(result.value, changes, result.leaf_path)
                best_is_default = is_default
        return best

    return search(tree.root, "root", ())


@dataclass
class Witness:
    eta: List[List[str]]
    deviator: str
    changes: Dict[InfoKey, Action]
    gain: Number
    node_path: str
    kind: str  # "strict" | "indifference" | "eliminated"


@dataclass
class ICVerdict:
    """
    IPB verdict of one parameter point

    strict: some coalition gains by deviating; indifferent is then False.
    indifferent: a coalition can change the outcome at no cost to itself.
    A verdict that fails without strict means the IPB was eliminated by IEWDS.
    """
    holds: bool
    strict: bool = False
    indifferent: bool = False
    witness: Optional[Witness] = None
    iewds_checked: bool = False
    collusions_checked: int = 0


def one_shot_ties(game: CompletedGame, representative: str, profile: StrategyProfile,
                  config: Optional[AnalysisSettings] = None) -> Optional[Witness]:
    """An on-path alternative action that changes the outcome at no cost to the deviator"""
    tol = _tolerance(config)
    tree = game.tree
    base = game.value(tree.play(profile).emissions, representative)
    node, path = tree.root, "root"
    while not isinstance(node, Leaf):
        next_node = next_path = None
        for joint, child, child_path, added in tree.children(node, path):
            mine = {p: a for p, a in joint.items() if game.controller(p) == representative}
            others_follow = all(profile[(path, p)] == a for p, a in joint.items() if p not in mine)
            if not others_follow:
                continue
            if all(profile[(path, p)] == a for p, a in mine.items()):
                next_node, next_path = child, child_path
                continue
            changes = {(path, p): a for p, a in mine.items()}
            deviation = best_response(game, representative, profile.replaced(changes), config)
            # the deviation must keep the alternative action at this node
            candidate = profile.replaced(changes).replaced(
                {k: v for k, v in deviation.changes.items() if k[0] != path})
            value = game.value(tree.play(candidate).emissions, representative)
            if equal(value, base, tol):
                merged = dict(deviation.changes)
                merged.update(changes)
                return Witness(game.eta.describe(), representative, merged, value - base, path, "indifference")
        node, path = next_node, next_path
    return None


# ==================== ITERATED WEAK DOMINANCE ====================

def iewds(game: CompletedGame, config: Optional[AnalysisSettings] = None) -> Dict[str, List[Dict[InfoKey, Action]]]:
    """
    Iterated elimination of weakly dominated pure strategies
    Each round removes, simultaneously for every representative, all strategies
    weakly dominated against the others' surviving strategies.
    """
    config = config or default_settings
    tol = config.tolerance
    if game.tree.profile_count() > config.enumeration_bound:
        raise EnumerationBoundExceeded(
            f"{game.tree.profile_count()} profiles exceed bound {config.enumeration_bound}")

    reps = [r for r in game.representatives() if game.controlled_keys(r)]
    surviving: Dict[str, List[Dict[InfoKey, Action]]] = {}
    for r in reps:
        owned = [i for i in game.tree.info_sets if game.controller(i.player) == r]
        keys = [(i.path, i.player) for i in owned]
        surviving[r] = [dict(zip(keys, c)) for c in itertools.product(*(i.actions for i in owned))]

    payoff_cache: Dict[Tuple, Dict[str, Number]] = {}

    def payoff(parts: Sequence[Dict[InfoKey, Action]]) -> Dict[str, Number]:
        profile = StrategyProfile()
        for part in parts:
            profile.update(part)
        key = profile.key()
        if key not in payoff_cache:
            payoff_cache[key] = game.utilities(profile)
        return payoff_cache[key]

    round_ = 0
    while True:
        round_ += 1
        eliminated: Dict[str, List[int]] = {}
        for r in reps:
            others = [surviving[o] for o in reps if o != r]
            contexts = list(itertools.product(*others))
            vectors = [[payoff((s,) + ctx)[r] for ctx in contexts] for s in surviving[r]]
            dominated = []
            for i, vi in enumerate(vectors):
                for k, vk in enumerate(vectors):
                    if k == i:
                        continue
                    if all(greater(b, a, tol) or equal(a, b, tol) for a, b in zip(vi, vk)) and \
                            any(greater(b, a, tol) for a, b in zip(vi, vk)):
                        dominated.append(i)
                        break
            if dominated:
                eliminated[r] = dominated
        if not eliminated:
            break
        for r, indices in eliminated.items():
            surviving[r] = [s for i, s in enumerate(surviving[r]) if i not in set(indices)]
        logger.debug(f"IEWDS round {round_}: removed {sum(len(v) for v in eliminated.values())} strategies")
    return surviving


# ==================== INCENTIVE COMPATIBILITY ====================

def check_profile(game: CompletedGame, profile: StrategyProfile,
                  config: Optional[AnalysisSettings] = None) -> ICVerdict:
    """Nash check of a profile in one (reduced) completed game, plus IEWDS survival when enumerable"""
    config = config or default_settings
    tol = config.tolerance
    verdict = ICVerdict(holds=True)

    for r in game.representatives():
        if not game.controlled_keys(r):
            continue
        base = game.value(game.tree.play(profile).emissions, r)
        deviation = best_response(game, r, profile, config)
        if greater(deviation.value, base, tol):
            changed = {k: v for k, v in deviation.changes.items() if profile.get(k) != v}
            first = min(changed, key=lambda k: len(k[0])) if changed else ("root", r)
            verdict.holds = False
            verdict.strict = True
            verdict.witness = Witness(game.eta.describe(), r, changed, deviation.value - base, first[0], "strict")
            return verdict

    # equal-utility deviations are reported, not failed
    for r in game.representatives():
        if not game.controlled_keys(r):
            continue
        tie = one_shot_ties(game, r, profile, config)
        if tie is not None:
            verdict.indifferent = True
            verdict.witness = tie
            break

    if game.tree.profile_count() <= config.iewds_bound:
        verdict.iewds_checked = True
        survivors = iewds(game, config)
        for r, strategies in survivors.items():
            own = {k: profile[k] for k in game.controlled_keys(r)}
            if own not in strategies:
                verdict.holds = False
                verdict.witness = Witness(game.eta.describe(), r, own, Fraction(0), "root", "eliminated")
                return verdict
    else:
        logger.warning(f"{game.tree.profile_count()} profiles: IEWDS skipped, Nash check only")
    return verdict


def check_ic(
    protocol: Protocol,
    lam: HashrateDistribution,
    rules: SettlementRules,
    conflicts: ConflictSpec,
    max_block: Optional[int] = None,
    config: Optional[AnalysisSettings] = None,
    params: Optional[Sequence[Hashable]] = None,
    collusions: Optional[Sequence[CollusionMap]] = None,
) -> Dict[Hashable, ICVerdict]:
    """IPB verdict per parameter, across every collusion reduction; first failure wins"""
    config = config or default_settings
    max_block = max_block or config.collusion_block_cap
    miners = [f"m{j}" for j in range(1, lam.m + 1)]
    maps = list(collusions) if collusions is not None else enumerate_collusions(
        protocol.players, miners, max_block, config)

    verdicts: Dict[Hashable, ICVerdict] = {}
    for p in (params if params is not None else protocol.game.param_space):
        tree = protocol.game.tree(p)
        completed = complete(tree, lam, rules, conflicts, reject_ambiguous=config.reject_ambiguous)
        ipb = protocol.ipb(p)
        verdict = ICVerdict(holds=True)
        for checked, eta in enumerate(maps, start=1):
            current = check_profile(collusion_reduce(completed, eta), ipb, config)
            current.collusions_checked = checked
            if not current.holds:
                # a strict deviation overrides ties seen under earlier maps
                if not current.strict:
                    current.indifferent = current.indifferent or verdict.indifferent
                verdict = current
                break
            verdict.collusions_checked = checked
            verdict.iewds_checked = verdict.iewds_checked or current.iewds_checked
            if current.indifferent and not verdict.indifferent:
                verdict.indifferent = True
                verdict.witness = current.witness
        verdicts[p] = verdict
        logger.info(f"{protocol.name} p={p}: holds={verdict.holds} after {verdict.collusions_checked} collusion maps")
    return verdicts


def backward_induction(game: CompletedGame, profile: Mapping[InfoKey, Action],
                       config: Optional[AnalysisSettings] = None) -> StrategyProfile:
    """
    Subgame-perfect play of a perfect-information completed game
    Ties keep the given profile's action; simultaneous stages keep the given joint action.
    """
    tol = _tolerance(config)
    tree = game.tree
    result = StrategyProfile(profile)

    def solve(node: Node, path: str, emitted: Tuple[Emission, ...]) -> Dict[str, Number]:
        emitted = emitted + tuple(node.emit)
        if isinstance(node, Leaf):
            return {r: game.value(emitted, r) for r in game.representatives()}
        branches = []
        for joint, child, child_path, added in tree.children(node, path):
            branches.append((joint, solve(child, child_path, emitted + added)))
        if isinstance(node, Simultaneous):
            chosen = next(v for j, v in branches if all(result[(path, p)] == a for p, a in j.items()))
            return chosen
        owner = node.owner
        decider = game.controller(owner)
        best_joint, best_values = None, None
        for joint, values in branches:
            if best_values is None or greater(values[decider], best_values[decider], tol) or (
                    equal(values[decider], best_values[decider], tol) and result[(path, owner)] == joint[owner]):
                best_joint, best_values = joint, values
        result[(path, owner)] = best_joint[owner]
        return best_values

    solve(tree.root, "root", ())
    return result


# ==================== g-COMPOSITION ====================

Trace = Tuple[Tuple[str, PlayerId, Action], ...]
Statistic = Callable[[Hashable, Trace, Tuple[Emission, ...]], Hashable]


@dataclass(frozen=True)
class CompositionMap:
    """g_p: parameter of game 2 from the play of game 1, constant or a trace statistic"""
    constant: Optional[Hashable] = None
    statistic: Optional[Statistic] = None
    name: str = "g"

    @property
    def is_constant(self) -> bool:
        return self.statistic is None

    def __call__(self, p: Hashable, trace: Trace, emissions: Tuple[Emission, ...]) -> Hashable:
        if self.statistic is None:
            return self.constant
        return self.statistic(p, trace, emissions)


class ComposedGame(ParamGame):
    """
    Game 1 with a copy of game 2 grafted at every leaf
    attachments[p] records, per leaf path of game 1, the game-2 parameter used there
    """

    def __init__(self, game1: ParamGame, game2: ParamGame, g: CompositionMap):
        self.game1, self.game2, self.g = game1, game2, g
        self.attachments: Dict[Hashable, Dict[str, Hashable]] = {}
        players = list(dict.fromkeys(game1.players + game2.players))
        super().__init__(players, game1.param_space, self._build, name=f"{game1.name}+{game2.name}")

    def _build(self, p: Hashable) -> GameTree:
        tree1 = self.game1.tree(p)
        attached: Dict[str, Hashable] = {}

        def graft(node: Node, path: str, trace: Trace, emitted: Tuple[Emission, ...]) -> Node:
            emitted = emitted + tuple(node.emit)
            if isinstance(node, Leaf):
                q = self.g(p, trace, emitted)
                tree2 = self.game2.tree(q)
                overlap = tree1.alphabet & tree2.alphabet
                if overlap:
                    raise AlphabetOverlap(f"{self.game1.name} and {self.game2.name} share {sorted(overlap)}")
                attached[path] = q
                return replace(tree2.root, emit=tuple(node.emit) + tuple(tree2.root.emit))

            grafted = {}
            for joint, child, child_path, added in tree1.children(node, path):
                steps = tuple((path, player, action) for player, action in joint.items())
                key = tuple(joint.values())
                grafted[key] = graft(child, child_path, trace + steps, emitted + added)

            if isinstance(node, Decision):
                return replace(node, actions=tuple((label, grafted[(label,)]) for label, _ in node.actions))
            if isinstance(node, FeeChoice):
                return replace(node, per_fee=tuple((fee, grafted[(fee,)]) for fee in node.grid))
            return replace(node, outcomes=lambda joint, table=grafted: table[tuple(joint)])

        root = graft(tree1.root, "root", (), ())
        self.attachments[p] = attached
        logger.debug(f"{self.name}[{p}]: game 2 grafted at {len(attached)} leaves")
        return GameTree(self.players, root, name=f"{self.name}[{p}]")


def g_compose(game1: ParamGame, game2: ParamGame, g: CompositionMap) -> ComposedGame:
    """Sequential composition; transaction alphabets must be disjoint"""
    return ComposedGame(game1, game2, g)


def compose_protocols(protocol1: Protocol, protocol2: Protocol, g: CompositionMap) -> Protocol:
    """Composed protocol whose IPB follows protocol 1, then protocol 2 below every graft point"""
    game = g_compose(protocol1.game, protocol2.game, g)

    def ipb(p: Hashable) -> StrategyProfile:
        tree = game.tree(p)
        first = protocol1.ipb(p)
        attached = game.attachments[p]
        second: Dict[Hashable, StrategyProfile] = {}

        def graft_point(path: str) -> Optional[str]:
            # deepest attachment on the path, so nested games resolve to their own graft point
            cut = len(path)
            while cut > 0:
                if path[:cut] in attached:
                    return path[:cut]
                cut = path.rfind("/", 0, cut)
            return None

        def policy(info):
            leaf_path = graft_point(info.path)
            if leaf_path is None:
                return first[(info.path, info.player)]
            q = attached[leaf_path]
            if q not in second:
                second[q] = protocol2.ipb(q)
            return second[q][("root" + info.path[len(leaf_path):], info.player)]
        return tree.profile_from_policy(policy)

    return Protocol(game.players, game, ipb, name=game.name)


def additive_union(rules1: SettlementRules, rules2: SettlementRules) -> SettlementRules:
    """
    Settlement of two games with disjoint alphabets
    Base balances add per player over every pair of patterns
    """
    overlap = rules1.scope & rules2.scope
    if overlap:
        raise AlphabetOverlap(f"Settlement scopes share {sorted(overlap)}")
    table: Dict[FrozenSet[str], Dict[str, Fraction]] = {}
    for pattern1, row1 in rules1.base_balance.items():
        for pattern2, row2 in rules2.base_balance.items():
            row = dict(row1)
            for player, value in row2.items():
                row[player] = row.get(player, Fraction(0)) + value
            table[pattern1 | pattern2] = row
    return SettlementRules(
        base_balance=table,
        payer={**rules1.payer, **rules2.payer},
        receiver_rule=rules1.receiver_rule,
        scope=rules1.scope | rules2.scope,
        bounties={**rules1.bounties, **rules2.bounties},
    )
