"""Online monitors for the peg, causality and consistency priors.

The monitors read the two ledgers only.  Transfer nonces are used to pair
legs for the consistency rules, but causality is re-derived from values and
timestamps so a forged nonce cannot hide an unbacked settlement.
"""

from __future__ import annotations

import dataclasses
import enum
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .bridge import FORWARD, REVERSE, BridgeConfig, FunctionalType
from .chain import GENESIS, Blockchain, Provenance, Transaction, TxKind
from .errors import DanglingEvidence


class Prior(str, enum.Enum):
    PEG = "Peg"
    CAUSALITY = "Causality"
    CONSISTENCY = "Consistency"


class SubRule(str, enum.Enum):
    EQ3 = "Eq3"
    EQ4_EXISTENCE = "Eq4Existence"
    EQ4_UNIQUENESS = "Eq4Uniqueness"
    EQ4_ORDERING = "Eq4Ordering"
    EQ5 = "Eq5"
    EQ6 = "Eq6"


PRIOR_OF = {
    SubRule.EQ3: Prior.PEG,
    SubRule.EQ4_EXISTENCE: Prior.CAUSALITY,
    SubRule.EQ4_UNIQUENESS: Prior.CAUSALITY,
    SubRule.EQ4_ORDERING: Prior.CAUSALITY,
    SubRule.EQ5: Prior.CONSISTENCY,
    SubRule.EQ6: Prior.CONSISTENCY,
}

# Which rule names a run when several fire on the same tick.  A double claim
# is the most specific finding, a drained vault the least.
RULE_PRECEDENCE = {
    SubRule.EQ6: 0,
    SubRule.EQ4_EXISTENCE: 1,
    SubRule.EQ4_UNIQUENESS: 1,
    SubRule.EQ4_ORDERING: 1,
    SubRule.EQ5: 2,
    SubRule.EQ3: 3,
}


class Classification(str, enum.Enum):
    ATTACK = "Attack"
    FAILURE = "Failure"


@dataclass(frozen=True)
class PriorViolation:
    prior: Prior
    sub_rule: SubRule
    detected_at: int
    evidence: Tuple[str, ...]
    classification: Classification = Classification.FAILURE
    detail: str = ""
    # token pair for the aggregate rules, empty otherwise
    scope: str = ""

    def __post_init__(self) -> None:
        if not self.evidence:
            raise ValueError("a violation needs evidence")
        if PRIOR_OF[self.sub_rule] is not self.prior:
            raise ValueError(f"{self.sub_rule.value} does not belong to {self.prior.value}")


# Causality ----------------------------------------------------------------------


@dataclass(frozen=True)
class CausalEvent:
    """One lock-side or mint-side leg: a matching key, a tick and a ledger ref."""

    key: Hashable
    t: int
    ref: str
    adversarial: bool = False


class Diagnosis(enum.IntEnum):
    """Causality failures in reporting precedence."""

    MINT_WITHOUT_LOCK = 0
    DOUBLE_CLAIM = 1
    ORDER = 2
    STALE_LOCK = 3


DIAGNOSIS_RULE = {
    Diagnosis.MINT_WITHOUT_LOCK: SubRule.EQ4_EXISTENCE,
    Diagnosis.DOUBLE_CLAIM: SubRule.EQ4_UNIQUENESS,
    Diagnosis.ORDER: SubRule.EQ4_ORDERING,
    Diagnosis.STALE_LOCK: SubRule.EQ4_EXISTENCE,
}


@dataclass
class Matching:
    pairs: List[Tuple[CausalEvent, CausalEvent]]
    unmatched_locks: List[CausalEvent]
    unmatched_mints: List[CausalEvent]


def greedy_match(locks: Sequence[CausalEvent], mints: Sequence[CausalEvent]) -> Matching:
    """Match every mint to the earliest free lock of its key with a smaller tick.

    Earliest-first is optimal both for the number of matched mints and for
    covering the oldest locks, so it decides the bijection question exactly.
    """
    order = sorted(
        [(e.t, 0, i, e) for i, e in enumerate(mints)]
        + [(e.t, 1, i, e) for i, e in enumerate(locks)],
        key=lambda item: item[:3],
    )
    free: Dict[Hashable, deque] = defaultdict(deque)
    pairs = []
    unmatched_mints = []
    used: Set[int] = set()
    for _, is_lock, _, event in order:
        if is_lock:
            free[event.key].append(event)
        elif free[event.key]:
            lock = free[event.key].popleft()
            used.add(id(lock))
            pairs.append((lock, event))
        else:
            unmatched_mints.append(event)
    unmatched_locks = [e for e in locks if id(e) not in used]
    return Matching(pairs, unmatched_locks, unmatched_mints)


def diagnose_causality(
    locks: Sequence[CausalEvent],
    mints: Sequence[CausalEvent],
    horizon: int,
    grace: int,
) -> Optional[Tuple[Diagnosis, List[CausalEvent]]]:
    lock_count: Dict[Hashable, int] = defaultdict(int)
    mint_count: Dict[Hashable, int] = defaultdict(int)
    for e in locks:
        lock_count[e.key] += 1
    for e in mints:
        mint_count[e.key] += 1
    orphan = [e for e in mints if lock_count[e.key] == 0]
    if orphan:
        return Diagnosis.MINT_WITHOUT_LOCK, orphan
    match = greedy_match(locks, mints)
    over = {k for k in mint_count if mint_count[k] > lock_count[k]}
    if over:
        excess = [e for e in match.unmatched_mints if e.key in over]
        return Diagnosis.DOUBLE_CLAIM, excess + [e for e in locks if e.key in over]
    if match.unmatched_mints:
        keys = {e.key for e in match.unmatched_mints}
        return Diagnosis.ORDER, match.unmatched_mints + [e for e in locks if e.key in keys]
    stale = [e for e in match.unmatched_locks if e.t < horizon - grace]
    if stale:
        return Diagnosis.STALE_LOCK, stale
    return None


def _events_verdict(
    diagnosis: Diagnosis, events: Iterable[CausalEvent], now: int, detail: str = ""
) -> PriorViolation:
    refs: List[str] = []
    adversarial = False
    for e in events:
        if e.ref not in refs:
            refs.append(e.ref)
        adversarial = adversarial or e.adversarial
    return PriorViolation(
        Prior.CAUSALITY,
        DIAGNOSIS_RULE[diagnosis],
        now,
        tuple(refs),
        Classification.ATTACK if adversarial else Classification.FAILURE,
        detail,
    )


def check_causality(
    locks: Sequence[CausalEvent],
    mints: Sequence[CausalEvent],
    horizon: int,
    grace: int,
) -> Optional[PriorViolation]:
    """Return the causality violation of a lock/mint instance, if any.

    ``horizon`` is the evaluation tick; locks older than ``horizon - grace``
    must already be matched.
    """
    found = diagnose_causality(locks, mints, horizon, grace)
    if found is None:
        return None
    diagnosis, events = found
    return _events_verdict(diagnosis, events, horizon, diagnosis.name.lower())


# Monitor state ----------------------------------------------------------------------

Pair = Tuple[str, str]


@dataclass
class MonitorState:
    """Aggregates that the peg check reads.

    ``outstanding_locked`` is source-token units still backing the pair and
    ``outstanding_minted`` destination-token units in circulation, both net
    of in-flight transfers and gross of fees.  Either may go negative after
    an exploit that releases more than was ever locked.
    """

    outstanding_locked: Dict[Pair, int] = field(default_factory=dict)
    outstanding_minted: Dict[Pair, int] = field(default_factory=dict)
    # transfer_id -> (initiation ref, settlement ref), kept across reorgs
    matched_pairs: Dict[str, Tuple[str, str]] = field(default_factory=dict)
    pair_values: Dict[str, Tuple[str, Pair, int]] = field(default_factory=dict)
    evidence: Dict[Pair, Tuple[str, ...]] = field(default_factory=dict)
    grace_window: int = 0


def check_peg(state: MonitorState, prices: Mapping[str, Fraction]) -> Optional[PriorViolation]:
    found = peg_violations(state, prices, 0)
    return found[0] if found else None


def peg_violations(
    state: MonitorState, prices: Mapping[str, Fraction], now: int
) -> List[PriorViolation]:
    out = []
    for pair in sorted(set(state.outstanding_locked) | set(state.outstanding_minted)):
        t1, t2 = pair
        locked = state.outstanding_locked.get(pair, 0) * Fraction(prices[t1])
        minted = state.outstanding_minted.get(pair, 0) * Fraction(prices[t2])
        if locked != minted:
            evidence = state.evidence.get(pair) or (f"aggregate:{t1}/{t2}",)
            out.append(
                PriorViolation(
                    Prior.PEG,
                    SubRule.EQ3,
                    now,
                    tuple(evidence),
                    detail=f"{t1}/{t2} locked {locked} vs minted {minted}",
                    scope=f"{t1}/{t2}",
                )
            )
    return out


# Ledger legs ---------------------------------------------------------------------


@dataclass
class PairLegs:
    fwd_init: List[Transaction] = field(default_factory=list)
    fwd_settle: List[Transaction] = field(default_factory=list)
    rev_init: List[Transaction] = field(default_factory=list)
    rev_settle: List[Transaction] = field(default_factory=list)
    drain_src: List[Transaction] = field(default_factory=list)
    drain_dest: List[Transaction] = field(default_factory=list)


def bridge_legs(cfg: BridgeConfig, chains: Mapping[str, Blockchain]) -> Dict[Pair, PairLegs]:
    """Sort every bridge-relevant ledger entry into its leg per token pair."""
    inv = cfg.inverse_token_map
    legs: Dict[Pair, PairLegs] = {pair: PairLegs() for pair in cfg.token_map.items()}
    for tx in chains[cfg.source_chain_id].history:
        if tx.token not in cfg.token_map or tx.sender == GENESIS:
            continue
        pl = legs[(tx.token, cfg.token_map[tx.token])]
        if tx.transfer_id is not None and (
            (tx.kind is TxKind.LOCK and tx.recipient == cfg.c1) or tx.kind is TxKind.BURN
        ):
            pl.fwd_init.append(tx)
        elif tx.kind is TxKind.MINT or (
            tx.kind is TxKind.RELEASE and tx.sender == cfg.c1 and tx.transfer_id is not None
        ):
            pl.rev_settle.append(tx)
        elif tx.sender == cfg.c1 and tx.kind in (TxKind.RELEASE, TxKind.PLAIN):
            pl.drain_src.append(tx)
    for tx in chains[cfg.dest_chain_id].history:
        if tx.token not in inv or tx.sender == GENESIS:
            continue
        pl = legs[(inv[tx.token], tx.token)]
        if tx.transfer_id is not None and (
            (tx.kind is TxKind.LOCK and tx.recipient == cfg.c2) or tx.kind is TxKind.BURN
        ):
            pl.rev_init.append(tx)
        elif tx.kind is TxKind.MINT or (
            tx.kind is TxKind.RELEASE and tx.sender == cfg.c2 and tx.transfer_id is not None
        ):
            pl.fwd_settle.append(tx)
        elif tx.sender == cfg.c2 and tx.kind in (TxKind.RELEASE, TxKind.PLAIN):
            pl.drain_dest.append(tx)
    return legs


def causal_events(txs: Iterable[Transaction], prices: Mapping[str, Fraction],
                  direction: str, pair: Pair) -> List[CausalEvent]:
    # legs match on true-price notional, so oracle conversions still pair up
    return [
        CausalEvent((direction, pair, tx.value * Fraction(prices[tx.token])), tx.timestamp,
                    tx.tx_id, tx.provenance is Provenance.ADVERSARIAL)
        for tx in txs
    ]


def default_grace(cfg: BridgeConfig, chains: Mapping[str, Blockchain]) -> int:
    from .offchain import mechanism_delay

    d_b1 = chains[cfg.source_chain_id].confirmation_delay
    d_b2 = chains[cfg.dest_chain_id].confirmation_delay
    d = cfg.defenses
    return (d_b1 + cfg.d_off + mechanism_delay(cfg.offchain) + d_b2
            + d.challenge_period + d.buffer_delay + 10)


class BridgeMonitor:
    """Runs every prior against the ledgers; owns the persistent MonitorState."""

    def __init__(self, cfg: BridgeConfig, grace: int) -> None:
        self.cfg = cfg
        self.state = MonitorState(grace_window=grace)

    def copy(self) -> "BridgeMonitor":
        twin = BridgeMonitor(self.cfg, self.state.grace_window)
        twin.state = dataclasses.replace(
            self.state,
            outstanding_locked=dict(self.state.outstanding_locked),
            outstanding_minted=dict(self.state.outstanding_minted),
            matched_pairs=dict(self.state.matched_pairs),
            pair_values=dict(self.state.pair_values),
            evidence=dict(self.state.evidence),
        )
        return twin

    def sweep(self, chains: Mapping[str, Blockchain], now: int) -> List[PriorViolation]:
        """All violations that hold at ``now``, most specific rule first."""
        cfg = self.cfg
        grace = self.state.grace_window
        legs = bridge_legs(cfg, chains)
        found: List[PriorViolation] = []
        found += self._consistency_eq6(legs, now)
        causality, pending = self._causality(legs, now, grace)
        found += causality
        found += self._consistency_eq5(legs, chains, now)
        self._update_aggregates(legs, pending, now)
        found += peg_violations(self.state, cfg.prices, now)
        return found

    def _causality(self, legs: Dict[Pair, PairLegs], now: int, grace: int):
        prices = self.cfg.prices
        found = []
        pending: Dict[Tuple[str, Pair], Tuple[List[Transaction], List[str]]] = {}
        for pair in sorted(legs):
            pl = legs[pair]
            for direction, inits, settles in (
                (FORWARD, pl.fwd_init, pl.fwd_settle),
                (REVERSE, pl.rev_init, pl.rev_settle),
            ):
                locks = causal_events(inits, prices, direction, pair)
                mints = causal_events(settles, prices, direction, pair)
                verdict = check_causality(locks, mints, now, grace)
                if verdict is not None:
                    found.append(verdict)
                match = greedy_match(locks, mints)
                unmatched = {e.ref for e in match.unmatched_locks}
                stray = [e.ref for e in match.unmatched_mints]
                pending[(direction, pair)] = (
                    [tx for tx in inits if tx.tx_id in unmatched],
                    stray,
                )
        return found, pending

    def _record_pairs(self, legs: Dict[Pair, PairLegs]) -> List[Tuple[Transaction, Transaction, Transaction]]:
        """Pair settlements to initiations by nonce; return double claims."""
        doubles = []
        state = self.state
        for pair in sorted(legs):
            pl = legs[pair]
            for direction, inits, settles in (
                (FORWARD, pl.fwd_init, pl.fwd_settle),
                (REVERSE, pl.rev_init, pl.rev_settle),
            ):
                by_id = {tx.transfer_id: tx for tx in inits}
                for tx in settles:
                    init = by_id.get(tx.transfer_id)
                    if init is None or init.timestamp > tx.timestamp:
                        continue
                    key = f"{direction}:{tx.transfer_id}"
                    prev = state.matched_pairs.get(key)
                    if prev is None:
                        state.matched_pairs[key] = (init.tx_id, tx.tx_id)
                        value = init.value if direction == FORWARD else tx.value
                        state.pair_values[key] = (direction, pair, value)
                    elif prev[1] != tx.tx_id:
                        doubles.append((init, prev[1], tx))
        return doubles

    def _consistency_eq6(self, legs: Dict[Pair, PairLegs], now: int) -> List[PriorViolation]:
        out = []
        for init, first_ref, tx in self._record_pairs(legs):
            out.append(
                PriorViolation(
                    Prior.CONSISTENCY,
                    SubRule.EQ6,
                    now,
                    (init.tx_id, first_ref, tx.tx_id),
                    _classify_txs([init, tx]),
                    f"{tx.transfer_id} settled twice",
                )
            )
        return out

    def _consistency_eq5(self, legs: Dict[Pair, PairLegs], chains: Mapping[str, Blockchain],
                         now: int) -> List[PriorViolation]:
        cfg = self.cfg
        if cfg.functional_type is FunctionalType.BURN_MINT:
            return []
        b1 = chains[cfg.source_chain_id]
        live = {tx.tx_id for tx in b1.history}
        required: Dict[Pair, int] = defaultdict(int)
        for direction, pair, value in self.state.pair_values.values():
            required[pair] += value if direction == FORWARD else -value
        out = []
        for pair in sorted(legs):
            pl = legs[pair]
            held = b1.balance_of(cfg.c1, pair[0])
            if held >= required[pair]:
                continue
            paired_rev = {v[1] for k, v in self.state.matched_pairs.items()
                          if k.startswith(REVERSE + ":")}
            evidence = [tx for tx in pl.drain_src]
            evidence += [tx for tx in pl.rev_settle if tx.tx_id not in paired_rev]
            refs = [tx.tx_id for tx in evidence]
            for key, (init_ref, settle_ref) in sorted(self.state.matched_pairs.items()):
                if key.startswith(FORWARD + ":") and init_ref not in live \
                        and self.state.pair_values[key][1] == pair:
                    refs += [init_ref, settle_ref]
            if not refs:
                refs = [tx.tx_id for tx in pl.rev_settle[-1:]] or [f"aggregate:{pair[0]}"]
            out.append(
                PriorViolation(
                    Prior.CONSISTENCY,
                    SubRule.EQ5,
                    now,
                    tuple(refs),
                    _classify_txs(evidence),
                    f"c1 holds {held} {pair[0]}, outstanding claims need {required[pair]}",
                    f"{pair[0]}/{pair[1]}",
                )
            )
        return out

    def _update_aggregates(self, legs: Dict[Pair, PairLegs], pending, now: int) -> None:
        state = self.state
        cutoff = now - state.grace_window
        for pair in sorted(legs):
            pl = legs[pair]
            fwd_open, fwd_stray = pending[(FORWARD, pair)]
            rev_open, rev_stray = pending[(REVERSE, pair)]
            in_flight_fwd = sum(tx.value for tx in fwd_open if tx.timestamp >= cutoff)
            in_flight_rev = sum(tx.value for tx in rev_open if tx.timestamp >= cutoff)
            locked = (sum(tx.value for tx in pl.fwd_init) - in_flight_fwd
                      - sum(tx.value for tx in pl.rev_settle)
                      - sum(tx.value for tx in pl.drain_src))
            minted = (sum(tx.value for tx in pl.fwd_settle)
                      + sum(tx.value for tx in pl.drain_dest)
                      - sum(tx.value for tx in pl.rev_init) + in_flight_rev)
            state.outstanding_locked[pair] = locked
            state.outstanding_minted[pair] = minted
            refs = fwd_stray + rev_stray
            refs += [tx.tx_id for tx in pl.drain_src + pl.drain_dest]
            refs += [tx.tx_id for tx in fwd_open + rev_open if tx.timestamp < cutoff]
            if not refs:
                every = pl.fwd_init + pl.fwd_settle + pl.rev_init + pl.rev_settle
                refs = [max(every, key=lambda tx: (tx.timestamp, tx.tx_id)).tx_id] if every else []
            state.evidence[pair] = tuple(refs)


def _classify_txs(txs: Iterable) -> Classification:
    for tx in txs:
        if isinstance(tx, Transaction) and tx.provenance is Provenance.ADVERSARIAL:
            return Classification.ATTACK
    return Classification.FAILURE


# Classification --------------------------------------------------------------------


@dataclass
class Trace:
    """Every transaction a run ever produced, including reverted and vetoed ones."""

    txs: Dict[str, Transaction] = field(default_factory=dict)
    # tx id -> injection id for transactions an injection affected
    taint: Dict[str, str] = field(default_factory=dict)
    injections: Dict[str, Provenance] = field(default_factory=dict)

    def add(self, tx: Transaction) -> None:
        self.txs[tx.tx_id] = tx


def classify_violation(v: PriorViolation, trace: Trace) -> PriorViolation:
    """Attack iff some evidence transaction, or the injection behind it, is adversarial."""
    attack = False
    for ref in v.evidence:
        if ref.startswith("aggregate:"):
            continue
        tx = trace.txs.get(ref)
        if tx is None:
            raise DanglingEvidence(ref)
        if tx.provenance is Provenance.ADVERSARIAL:
            attack = True
        for cause in (tx.cause, trace.taint.get(ref)):
            if cause is not None and trace.injections.get(cause) is Provenance.ADVERSARIAL:
                attack = True
    label = Classification.ATTACK if attack else Classification.FAILURE
    return dataclasses.replace(v, classification=label)
