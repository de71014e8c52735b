"""
Network layer: which triples each miner gets to see
"""

import logging
from typing import Collection, Dict, FrozenSet, Iterable, Mapping, Optional

from .errors import NotPayer, UnknownTx
from .models import MinerId, PlayerId, TransactionTriple

logger = logging.getLogger(__name__)

NetworkViews = Dict[MinerId, FrozenSet[TransactionTriple]]


def broadcast(triples: Iterable[TransactionTriple], miners: Collection[MinerId]) -> NetworkViews:
    """Synchronous delivery: every miner sees everything"""
    everything = frozenset(triples)
    return {miner: everything for miner in miners}


def selective_share(
    triples: Iterable[TransactionTriple],
    owner: PlayerId,
    restricted: str,
    share_set: Collection[MinerId],
    miners: Collection[MinerId],
    payer: Mapping[str, PlayerId],
    private: Optional[Mapping[str, MinerId]] = None,
) -> NetworkViews:
    """
    The owner sends `restricted` only to miners in share_set

    Triples listed in `private` (tx -> miner) stay in that miner's view only.
    """
    triples = frozenset(triples)
    by_id = {t.tx: t for t in triples}
    if restricted not in by_id:
        raise UnknownTx(f"Transaction {restricted} is not in the triple set")
    if payer.get(restricted) != owner:
        raise NotPayer(f"{owner} does not pay for {restricted}")
    private = private or {}
    unknown = set(share_set) - set(miners)
    if unknown:
        raise UnknownTx(f"Share set names unknown miners {sorted(unknown)}")

    views: NetworkViews = {}
    for miner in miners:
        visible = {
            t for t in triples
            if (t.tx not in private or private[t.tx] == miner)
            and (t.tx != restricted or miner in share_set)
        }
        views[miner] = frozenset(visible)
    logger.debug(f"{owner} shares {restricted} with {sorted(share_set)}")
    return views
