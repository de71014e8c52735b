"""
Finite extensive-form application games
Leaves and edges emit transaction triples; parametrised families and protocols
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from config.settings import AnalysisSettings, settings as default_settings

from .errors import (
    DanglingChild,
    DuplicateTxId,
    EnumerationBoundExceeded,
    FeeGridEmpty,
    InvalidTriples,
    MalformedConfig,
    ParameterOutOfRange,
    PartialProfile,
    UnknownOwner,
)
from .models import PlayerId, TransactionTriple, to_fraction

logger = logging.getLogger(__name__)

Action = Hashable
InfoKey = Tuple[str, PlayerId]  # (node path, player)


# ==================== NODES ====================

@dataclass(frozen=True)
class Emission:
    """A triple posted along the play path; payer None marks a zero-fee sentinel"""
    triple: TransactionTriple
    payer: Optional[PlayerId] = None


@dataclass(frozen=True)
class Leaf:
    emit: Tuple[Emission, ...] = ()


@dataclass(frozen=True)
class Decision:
    owner: PlayerId
    actions: Tuple[Tuple[str, Any], ...]  # (label, child node)
    emit: Tuple[Emission, ...] = ()


@dataclass(frozen=True)
class FeeChoice:
    """Owner posts tx at post_time and picks its fee from a finite grid"""
    owner: PlayerId
    tx: str
    post_time: int
    grid: Tuple[Fraction, ...]
    child: Any
    emit: Tuple[Emission, ...] = ()
    # per-fee children, when the continuation depends on the chosen fee
    per_fee: Tuple[Tuple[Fraction, Any], ...] = ()

    def child_for(self, fee: Fraction) -> Any:
        for value, child in self.per_fee:
            if value == fee:
                return child
        return self.child


@dataclass(frozen=True)
class Simultaneous:
    """One-shot stage; outcomes maps the joint action (in owner order) to a child"""
    owners: Tuple[Tuple[PlayerId, Tuple[str, ...]], ...]
    outcomes: Callable[[Tuple[str, ...]], Any]
    emit: Tuple[Emission, ...] = ()


Node = Union[Leaf, Decision, FeeChoice, Simultaneous]


def fee_grid(cap: Fraction, step: Optional[Fraction] = None, minimum: Fraction = Fraction(0)) -> Tuple[Fraction, ...]:
    """{min, min+δ, ..., cap}; δ defaults to a single step spanning the range"""
    cap, minimum = to_fraction(cap), to_fraction(minimum)
    if cap < minimum:
        raise FeeGridEmpty(f"Fee grid [{minimum}, {cap}] is empty")
    step = to_fraction(step) if step is not None else (cap - minimum or Fraction(1))
    if step <= 0:
        raise FeeGridEmpty("Fee grid step must be positive")
    values = []
    value = minimum
    while value <= cap:
        values.append(value)
        value += step
    return tuple(values)


def fee_label(fee: Fraction) -> str:
    # "/" separates path segments, so rationals print as p:q
    return str(fee).replace("/", ":")


# ==================== TREES ====================

@dataclass(frozen=True)
class InfoSet:
    path: str
    player: PlayerId
    actions: Tuple[Action, ...]


class StrategyProfile(dict):
    """Mapping (node path, player) -> chosen action"""

    def for_player(self, player: PlayerId) -> Dict[InfoKey, Action]:
        return {k: v for k, v in self.items() if k[1] == player}

    def replaced(self, changes: Mapping[InfoKey, Action]) -> "StrategyProfile":
        updated = StrategyProfile(self)
        updated.update(changes)
        return updated

    def key(self) -> Tuple:
        return tuple(sorted(self.items(), key=lambda kv: (kv[0], str(kv[1]))))


@dataclass
class PlayResult:
    leaf_path: str
    emissions: Tuple[Emission, ...]
    path: Tuple[Tuple[str, PlayerId, Action], ...]

    @property
    def triples(self) -> Tuple[TransactionTriple, ...]:
        return tuple(e.triple for e in self.emissions)


class GameTree:
    """
    Validated finite game tree
    Nodes are addressed by their path from the root, e.g. "root/refund/accept"
    """

    def __init__(self, players: Sequence[PlayerId], root: Node, name: str = "game"):
        self.players: Tuple[PlayerId, ...] = tuple(players)
        self.root = root
        self.name = name
        self.info_sets: List[InfoSet] = []
        self.node_count = 0
        self.leaf_count = 0
        self.alphabet: set = set()
        self._validate(root, "root", frozenset())

    def _validate(self, node: Node, path: str, seen: frozenset) -> None:
        self.node_count += 1
        seen = self._absorb(node.emit, seen)
        if isinstance(node, Leaf):
            self.leaf_count += 1
            return
        if isinstance(node, Decision):
            self._check_owner(node.owner)
            if not node.actions:
                raise DanglingChild(f"Decision at {path} has no actions")
            self.info_sets.append(InfoSet(path, node.owner, tuple(label for label, _ in node.actions)))
            for label, child in node.actions:
                if child is None:
                    raise DanglingChild(f"Action {label} at {path} has no child")
                self._validate(child, f"{path}/{label}", seen)
        elif isinstance(node, FeeChoice):
            self._check_owner(node.owner)
            if not node.grid:
                raise FeeGridEmpty(f"Fee choice at {path} has an empty grid")
            if any(node.child_for(fee) is None for fee in node.grid):
                raise DanglingChild(f"Fee choice at {path} has no child")
            if node.tx in seen:
                raise DuplicateTxId(f"Transaction {node.tx} posted twice on a path through {path}")
            self.info_sets.append(InfoSet(path, node.owner, tuple(node.grid)))
            self.alphabet.add(node.tx)
            for fee in node.grid:
                self._validate(node.child_for(fee), f"{path}/{node.tx}={fee_label(fee)}", seen | {node.tx})
        elif isinstance(node, Simultaneous):
            for owner, actions in node.owners:
                self._check_owner(owner)
                self.info_sets.append(InfoSet(path, owner, tuple(actions)))
            for joint in itertools.product(*(actions for _, actions in node.owners)):
                child = node.outcomes(joint)
                if child is None:
                    raise DanglingChild(f"Joint action {joint} at {path} has no child")
                self._validate(child, f"{path}/{'+'.join(joint)}", seen)
        else:
            raise MalformedConfig(f"Unknown node type at {path}: {type(node).__name__}")

    def _absorb(self, emissions: Tuple[Emission, ...], seen: frozenset) -> frozenset:
        for emission in emissions:
            tx = emission.triple.tx
            if tx in seen:
                raise DuplicateTxId(f"Transaction {tx} emitted twice on one path")
            if emission.payer is None and emission.triple.fee != 0:
                raise InvalidTriples(f"Transaction {tx} has a fee but no payer")
            if emission.payer is not None:
                self._check_owner(emission.payer)
            seen = seen | {tx}
            self.alphabet.add(tx)
        return seen

    def _check_owner(self, owner: PlayerId) -> None:
        if owner not in self.players:
            raise UnknownOwner(f"Owner {owner} is not a player of {self.name}")

    # ==================== PLAY ====================

    def play(self, profile: Mapping[InfoKey, Action]) -> PlayResult:
        """Follow the unique path the profile selects"""
        node, path = self.root, "root"
        emissions: List[Emission] = []
        trace: List[Tuple[str, PlayerId, Action]] = []
        while True:
            emissions.extend(node.emit)
            if isinstance(node, Leaf):
                return PlayResult(path, tuple(emissions), tuple(trace))
            node, path = self._step(node, path, profile, trace, emissions)

    def _step(self, node, path, profile, trace, emissions):
        def choice(player: PlayerId) -> Action:
            try:
                return profile[(path, player)]
            except KeyError:
                raise PartialProfile(f"No action for {player} at {path}") from None

        if isinstance(node, Decision):
            action = choice(node.owner)
            trace.append((path, node.owner, action))
            child = dict(node.actions).get(action)
            if child is None:
                raise PartialProfile(f"Action {action!r} is not available at {path}")
            return child, f"{path}/{action}"
        if isinstance(node, FeeChoice):
            fee = choice(node.owner)
            if fee not in node.grid:
                raise PartialProfile(f"Fee {fee} is off the grid at {path}")
            trace.append((path, node.owner, fee))
            emissions.append(Emission(TransactionTriple(node.tx, node.post_time, fee), node.owner))
            return node.child_for(fee), f"{path}/{node.tx}={fee_label(fee)}"
        joint = tuple(choice(owner) for owner, _ in node.owners)
        for (owner, _), action in zip(node.owners, joint):
            trace.append((path, owner, action))
        return node.outcomes(joint), f"{path}/{'+'.join(joint)}"

    def outcome(self, profile: Mapping[InfoKey, Action]) -> Tuple[TransactionTriple, ...]:
        """π_a: the triples emitted along the selected path"""
        return self.play(profile).triples

    def children(self, node: Node, path: str) -> Iterator[Tuple[Dict[PlayerId, Action], Node, str, Tuple[Emission, ...]]]:
        """(joint choice, child, child path, emissions added by the choice) for every branch"""
        if isinstance(node, Decision):
            for label, child in node.actions:
                yield {node.owner: label}, child, f"{path}/{label}", ()
        elif isinstance(node, FeeChoice):
            for fee in node.grid:
                emission = Emission(TransactionTriple(node.tx, node.post_time, fee), node.owner)
                yield {node.owner: fee}, node.child_for(fee), f"{path}/{node.tx}={fee_label(fee)}", (emission,)
        elif isinstance(node, Simultaneous):
            owners = [owner for owner, _ in node.owners]
            for joint in itertools.product(*(actions for _, actions in node.owners)):
                yield dict(zip(owners, joint)), node.outcomes(joint), f"{path}/{'+'.join(joint)}", ()

    # ==================== STRATEGIES ====================

    def profile_count(self) -> int:
        count = 1
        for info in self.info_sets:
            count *= len(info.actions)
        return count

    def enumerate_profiles(self, config: Optional[AnalysisSettings] = None) -> Iterator[StrategyProfile]:
        """Every pure strategy profile, in a fixed order"""
        config = config or default_settings
        count = self.profile_count()
        if count > config.enumeration_bound:
            raise EnumerationBoundExceeded(f"{count} profiles exceed bound {config.enumeration_bound}")
        keys = [(info.path, info.player) for info in self.info_sets]
        for choice in itertools.product(*(info.actions for info in self.info_sets)):
            yield StrategyProfile(zip(keys, choice))

    def player_strategies(self, player: PlayerId, config: Optional[AnalysisSettings] = None) -> List[Dict[InfoKey, Action]]:
        config = config or default_settings
        owned = [info for info in self.info_sets if info.player == player]
        count = 1
        for info in owned:
            count *= len(info.actions)
        if count > config.enumeration_bound:
            raise EnumerationBoundExceeded(f"{player} has {count} strategies, bound {config.enumeration_bound}")
        keys = [(info.path, player) for info in owned]
        return [dict(zip(keys, choice)) for choice in itertools.product(*(info.actions for info in owned))]

    def profile_from_policy(self, policy: Callable[[InfoSet], Action]) -> StrategyProfile:
        """Total profile from a rule choosing an action at every information set"""
        profile = StrategyProfile()
        for info in self.info_sets:
            action = policy(info)
            if action not in info.actions:
                raise PartialProfile(f"Policy picked {action!r} at {info.path}, not in {info.actions}")
            profile[(info.path, info.player)] = action
        return profile

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "players": list(self.players),
            "node_count": self.node_count,
            "leaf_count": self.leaf_count,
            "alphabet": sorted(self.alphabet),
        }


# ==================== PARAMETRISED GAMES ====================

class ParamGame:
    """A family of trees indexed by a finite parameter space"""

    def __init__(self, players: Sequence[PlayerId], param_space: Sequence[Hashable],
                 builder: Callable[[Hashable], GameTree], name: str = "family"):
        self.players = tuple(players)
        self.param_space = tuple(param_space)
        self.builder = builder
        self.name = name
        self._trees: Dict[Hashable, GameTree] = {}

    def tree(self, p: Hashable) -> GameTree:
        if p not in self.param_space:
            raise ParameterOutOfRange(f"Parameter {p!r} is outside the space of {self.name}")
        if p not in self._trees:
            tree = self.builder(p)
            if set(tree.players) != set(self.players):
                raise UnknownOwner(f"Tree for {p!r} has players {tree.players}, expected {self.players}")
            self._trees[p] = tree
        return self._trees[p]


@dataclass
class Protocol:
    """Parametrised game plus its intended behaviour per parameter"""
    players: Tuple[PlayerId, ...]
    game: ParamGame
    ipb: Callable[[Hashable], StrategyProfile]
    name: str = "protocol"


# ==================== JSON GAME SCHEMA ====================

def build_game(document: Union[str, Path, Mapping[str, Any]]) -> GameTree:
    """
    Build a tree from the JSON game schema

    {"players": [...], "root": node}; node kinds decision | fee_choice | simultaneous | leaf
    with owner, actions {label: node}, tx, post_time, grid {min,max,step}, child,
    owners {player: [actions]}, outcomes {"a+b": node}, emit [{tx, post_time, fee, payer}]
    """
    if not isinstance(document, Mapping):
        try:
            document = json.loads(Path(document).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise MalformedConfig(f"Cannot read game document: {e}") from e
    try:
        players = list(document["players"])
        root = _node_from_json(document["root"])
    except KeyError as e:
        raise MalformedConfig(f"Game document misses {e}") from e
    tree = GameTree(players, root, name=document.get("name", "game"))
    logger.info(f"Built game {tree.name}: {tree.node_count} nodes, {len(tree.alphabet)} transactions")
    return tree


def _emissions(items) -> Tuple[Emission, ...]:
    return tuple(
        Emission(TransactionTriple(e["tx"], int(e.get("post_time", 0)), to_fraction(e.get("fee", 0))), e.get("payer"))
        for e in items or ()
    )


def _node_from_json(spec: Optional[Mapping[str, Any]]) -> Node:
    if spec is None:
        raise DanglingChild("Missing child node")
    kind = spec.get("kind", "leaf")
    emit = _emissions(spec.get("emit"))
    if kind == "leaf":
        return Leaf(emit)
    if kind == "decision":
        return Decision(spec["owner"], tuple((label, _node_from_json(child)) for label, child in spec["actions"].items()), emit)
    if kind == "fee_choice":
        grid = spec.get("grid", {})
        values = fee_grid(to_fraction(grid.get("max", 0)), grid.get("step"), to_fraction(grid.get("min", 0)))
        return FeeChoice(spec["owner"], spec["tx"], int(spec.get("post_time", 0)), values,
                         _node_from_json(spec.get("child")), emit)
    if kind == "simultaneous":
        owners = tuple((player, tuple(actions)) for player, actions in spec["owners"].items())
        outcomes = {key: _node_from_json(child) for key, child in spec.get("outcomes", {}).items()}
        return Simultaneous(owners, lambda joint, table=outcomes: table.get("+".join(joint)), emit)
    raise MalformedConfig(f"Unknown node kind {kind!r}")


def protocol_from_document(document: Union[str, Path, Mapping[str, Any]]) -> Protocol:
    """
    Single-parameter protocol from a game document carrying its intended play

    The document adds "ipb": {node path: {player: action}} to the game schema;
    fee actions may be given as strings or numbers.
    """
    if not isinstance(document, Mapping):
        try:
            document = json.loads(Path(document).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise MalformedConfig(f"Cannot read game document: {e}") from e
    tree = build_game(document)
    raw = document.get("ipb", {})

    def policy(info: InfoSet) -> Action:
        try:
            action = raw[info.path][info.player]
        except KeyError:
            raise PartialProfile(f"Document gives no intended action for {info.player} at {info.path}") from None
        if info.actions and isinstance(info.actions[0], Fraction):
            return to_fraction(action)
        return action

    profile = tree.profile_from_policy(policy)
    game = ParamGame(tree.players, (None,), lambda p: tree, name=tree.name)
    return Protocol(tree.players, game, lambda p: profile, name=tree.name)
