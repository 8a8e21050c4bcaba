"""Exhaustive-search reference for the causality monitor.

Enumerates every injective assignment of mints to locks instead of using the
monitor's greedy matcher, so the two can be cross-checked on small inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence

from .bridge import FORWARD, REVERSE, BridgeConfig
from .chain import Blockchain
from .monitors import CausalEvent, Diagnosis, bridge_legs, causal_events, diagnose_causality

MAX_ORACLE_EVENTS = 12


def _assignments(
    locks: Sequence[CausalEvent],
    mints: Sequence[CausalEvent],
    allowed: Callable[[CausalEvent, CausalEvent], bool],
):
    """Yield each injective mint->lock map as a tuple of lock indices."""
    chosen: List[int] = []
    taken = [False] * len(locks)

    def walk(i: int):
        if i == len(mints):
            yield tuple(chosen)
            return
        for j, lock in enumerate(locks):
            if not taken[j] and allowed(lock, mints[i]):
                taken[j] = True
                chosen.append(j)
                yield from walk(i + 1)
                chosen.pop()
                taken[j] = False

    yield from walk(0)


def brute_force_causality(
    locks: Sequence[CausalEvent],
    mints: Sequence[CausalEvent],
    horizon: int,
    grace: int,
) -> Optional[Diagnosis]:
    if len(locks) + len(mints) > MAX_ORACLE_EVENTS:
        raise ValueError("instance too large for exhaustive search")

    def same_key(lock, mint):
        return lock.key == mint.key

    def ordered(lock, mint):
        return lock.key == mint.key and lock.t < mint.t

    stale = {j for j, lock in enumerate(locks) if lock.t < horizon - grace}
    for assignment in _assignments(locks, mints, ordered):
        if stale <= set(assignment):
            return None
    if not any(True for _ in _assignments(locks, mints, same_key)):
        keys_with_locks = {lock.key for lock in locks}
        if any(m.key not in keys_with_locks for m in mints):
            return Diagnosis.MINT_WITHOUT_LOCK
        return Diagnosis.DOUBLE_CLAIM
    if not any(True for _ in _assignments(locks, mints, ordered)):
        return Diagnosis.ORDER
    return Diagnosis.STALE_LOCK


def brute_force_grouped(
    locks: Sequence[CausalEvent],
    mints: Sequence[CausalEvent],
    horizon: int,
    grace: int,
) -> Optional[Diagnosis]:
    """Exhaustive search per matching key; keys never interact.

    Raises ValueError when a single key group is too large to enumerate.
    """
    groups: Dict[Hashable, tuple] = {}
    for e in locks:
        groups.setdefault(e.key, ([], []))[0].append(e)
    for e in mints:
        groups.setdefault(e.key, ([], []))[1].append(e)
    worst: Optional[Diagnosis] = None
    for group_locks, group_mints in groups.values():
        found = brute_force_causality(group_locks, group_mints, horizon, grace)
        if found is not None and (worst is None or found < worst):
            worst = found
    return worst


@dataclass
class CrossCheck:
    checked: int = 0
    agreed: int = 0
    skipped: int = 0
    # (pair, direction, key, monitor verdict, oracle verdict)
    disagreements: List[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements


def _name(d: Optional[Diagnosis]) -> str:
    return "none" if d is None else d.name


def cross_check(cfg: BridgeConfig, chains: Mapping[str, Blockchain], horizon: int,
                grace: int) -> CrossCheck:
    """Compare monitor and exhaustive verdicts per matching key on a finished run.

    Keys never interact, so the per-key verdicts decide the whole verdict.
    Key groups too large to enumerate are counted as skipped.
    """
    out = CrossCheck()
    for pair, legs in sorted(bridge_legs(cfg, chains).items()):
        for direction, inits, settles in ((FORWARD, legs.fwd_init, legs.fwd_settle),
                                          (REVERSE, legs.rev_init, legs.rev_settle)):
            locks = causal_events(inits, cfg.prices, direction, pair)
            mints = causal_events(settles, cfg.prices, direction, pair)
            groups: Dict[Hashable, tuple] = {}
            for e in locks:
                groups.setdefault(e.key, ([], []))[0].append(e)
            for e in mints:
                groups.setdefault(e.key, ([], []))[1].append(e)
            for key in sorted(groups, key=repr):
                group_locks, group_mints = groups[key]
                if len(group_locks) + len(group_mints) > MAX_ORACLE_EVENTS:
                    out.skipped += 1
                    continue
                found = diagnose_causality(group_locks, group_mints, horizon, grace)
                mine = found[0] if found else None
                theirs = brute_force_causality(group_locks, group_mints, horizon, grace)
                out.checked += 1
                if mine == theirs:
                    out.agreed += 1
                else:
                    out.disagreements.append((pair, direction, key, _name(mine), _name(theirs)))
    return out
