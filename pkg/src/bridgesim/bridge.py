"""Bridge transfer state machine over the four accounts a1, c1, a2, c2.

Forward transfers lock (or burn) on the source chain and mint (or release)
on the destination; reverse transfers mirror that.  Settlement always
credits the gross ``v_x`` and the recipient then pays ``f2`` to the
operator, so lock and mint legs carry identical values and the peg can be
checked on gross notionals.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from .chain import (
    Blockchain,
    BridgeEvent,
    Provenance,
    Transaction,
    TxKind,
    check_amount,
)
from .errors import (
    BridgeHalted,
    ConfigInvalid,
    FeeExceedsValue,
    InsufficientBalance,
    InvalidAttestation,
    LiquidityExhausted,
    NoLockedCollateral,
)
from .offchain import (
    Attestation,
    Entity,
    EntityKind,
    OffchainMechanism,
    TrustSet,
    offchain_entities,
    verify_attestation,
)

FORWARD = "forward"
REVERSE = "reverse"


class FunctionalType(str, enum.Enum):
    LOCK_MINT = "AssetLockMint"
    BURN_MINT = "AssetBurnMint"
    LIQUIDITY = "LiquidityNetwork"
    HYBRID = "Hybrid"


class SourceMechanism(str, enum.Enum):
    SMART_CONTRACT = "SmartContract"
    VALIDATOR_CONTROL = "ValidatorControl"
    HYBRID_SRC = "HybridSrc"


class DestMechanism(str, enum.Enum):
    SMART_CONTRACT = "SmartContract"
    VALIDATOR_CONTROL = "ValidatorControl"
    CUSTODIAN = "Custodian"
    HYBRID_DEST = "HybridDest"


# Fees ---------------------------------------------------------------------


@dataclass(frozen=True)
class FeeTerm:
    fixed: int = 0
    rate: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        check_amount(self.fixed)
        if not 0 <= self.rate <= 1:
            raise ConfigInvalid(f"fee rate {self.rate} outside [0, 1]")


@dataclass(frozen=True)
class FeeSchedule:
    f1: FeeTerm = FeeTerm()
    f2: FeeTerm = FeeTerm()
    f_star: FeeTerm = FeeTerm()
    min_cap: int = 0
    max_cap: Optional[int] = None

    def __post_init__(self) -> None:
        check_amount(self.min_cap)
        if self.max_cap is not None:
            check_amount(self.max_cap)
            if self.min_cap > self.max_cap:
                raise ConfigInvalid("min_cap exceeds max_cap")


def compute_fee(schedule: FeeSchedule, v_x: int) -> Tuple[int, int, int]:
    """Return ``(f1, f2, f_star)`` for a transfer of ``v_x``.

    Proportional parts round down.  Their sum is clamped to the schedule's
    caps; a shortfall is charged as bridge fee, an excess is taken back
    from the bridge fee first, then f2, then f1.
    """
    if v_x <= 0:
        raise ValueError("v_x must be positive")
    terms = (schedule.f1, schedule.f2, schedule.f_star)
    prop = [int(t.rate * v_x) for t in terms]  # floor, rates are >= 0
    total = sum(prop)
    if total < schedule.min_cap:
        prop[2] += schedule.min_cap - total
    elif schedule.max_cap is not None and total > schedule.max_cap:
        excess = total - schedule.max_cap
        for i in (2, 1, 0):
            cut = min(excess, prop[i])
            prop[i] -= cut
            excess -= cut
    f1, f2, f_star = (t.fixed + p for t, p in zip(terms, prop))
    return f1, f2, f_star


# Configuration ---------------------------------------------------------------


@dataclass
class Defenses:
    breaker_cap: Optional[int] = None
    # token whose units breaker_cap is expressed in; None compares raw units
    breaker_token: Optional[str] = None
    breaker_on_monitor_trip: bool = False
    buffer_delay: int = 0
    challenge_period: int = 0
    honest_watcher_prob: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        if not 0 <= self.honest_watcher_prob <= 1:
            raise ConfigInvalid("honest_watcher_prob outside [0, 1]")
        if self.buffer_delay < 0 or self.challenge_period < 0:
            raise ConfigInvalid("negative defense window")
        if self.breaker_cap is not None:
            check_amount(self.breaker_cap)


@dataclass
class BridgeConfig:
    source_chain_id: str
    dest_chain_id: str
    offchain: OffchainMechanism
    # source token -> destination token
    token_map: Dict[str, str]
    # true prices used by the peg monitor and loss valuation
    prices: Dict[str, Fraction]
    functional_type: FunctionalType = FunctionalType.LOCK_MINT
    source_mechanism: SourceMechanism = SourceMechanism.SMART_CONTRACT
    dest_mechanism: DestMechanism = DestMechanism.SMART_CONTRACT
    fees: FeeSchedule = FeeSchedule()
    reverse_fees: Optional[FeeSchedule] = None
    d_off: int = 0
    defenses: Defenses = field(default_factory=Defenses)
    c1: str = "c1"
    c2: str = "c2"
    operator: str = "operator"
    # per side ("source"/"dest"): token -> pool size, liquidity modes only
    lp_reserves: Optional[Dict[str, Dict[str, int]]] = None
    replay_tracking: bool = True
    # settlement converts through observed oracle prices
    price_oracle: bool = False
    # contract-level flaws the adversary may exploit
    vulnerabilities: FrozenSet[str] = frozenset()
    n_src_contracts: int = 1
    n_dest_contracts: int = 1

    def __post_init__(self) -> None:
        if self.source_chain_id == self.dest_chain_id:
            raise ConfigInvalid("source and destination chains must differ")
        if not self.token_map:
            raise ConfigInvalid("token_map is empty")
        if len(set(self.token_map.values())) != len(self.token_map):
            raise ConfigInvalid("token_map must be injective")
        for tok in list(self.token_map) + list(self.token_map.values()):
            if tok not in self.prices:
                raise ConfigInvalid(f"no price for token {tok}")
        if not self.price_oracle:
            for t1, t2 in self.token_map.items():
                if self.prices[t1] != self.prices[t2]:
                    raise ConfigInvalid(
                        f"{t1}/{t2} prices differ but no price oracle converts them"
                    )
        if self.functional_type is FunctionalType.LIQUIDITY and not self.lp_reserves:
            raise ConfigInvalid("LiquidityNetwork requires lp_reserves")
        if self.d_off < 0:
            raise ConfigInvalid("negative d_off")

    @property
    def reverse_schedule(self) -> FeeSchedule:
        return self.reverse_fees if self.reverse_fees is not None else self.fees

    @property
    def inverse_token_map(self) -> Dict[str, str]:
        return {v: k for k, v in self.token_map.items()}

    @property
    def has_custodian(self) -> bool:
        return self.dest_mechanism in (DestMechanism.CUSTODIAN, DestMechanism.HYBRID_DEST)

    def chains_for(self, direction: str) -> Tuple[str, str]:
        """(initiating chain, settling chain) for a direction."""
        if direction == FORWARD:
            return self.source_chain_id, self.dest_chain_id
        return self.dest_chain_id, self.source_chain_id

    def settle_token(self, direction: str, token: str) -> str:
        if direction == FORWARD:
            return self.token_map[token]
        return self.inverse_token_map[token]


def trust_set_of(cfg: BridgeConfig) -> TrustSet:
    src: Set[Entity] = set()
    if cfg.source_mechanism is not SourceMechanism.VALIDATOR_CONTROL:
        src.add(Entity(EntityKind.SC, "source-contract"))
    dest: Set[Entity] = set()
    if cfg.dest_mechanism in (DestMechanism.SMART_CONTRACT, DestMechanism.HYBRID_DEST):
        dest.add(Entity(EntityKind.SC, "dest-contract"))
    if cfg.dest_mechanism in (DestMechanism.CUSTODIAN, DestMechanism.HYBRID_DEST):
        dest.add(Entity(EntityKind.CUSTODIAN, "custodian"))
    return TrustSet(
        src_entities=frozenset(src),
        off_entities=offchain_entities(cfg.offchain),
        dest_entities=frozenset(dest),
    )


# Transfer records -------------------------------------------------------------


class TransferStatus(str, enum.Enum):
    INITIATED = "Initiated"
    LOCKED_OR_BURNED = "LockedOrBurned"
    ATTESTED = "Attested"
    BUFFER_PENDING = "BufferPending"
    CHALLENGE_PENDING = "ChallengePending"
    COMPLETED = "Completed"
    REVERSED = "Reversed"
    HALTED = "Halted"
    EXPIRED = "Expired"


_ORDER = [
    TransferStatus.INITIATED,
    TransferStatus.LOCKED_OR_BURNED,
    TransferStatus.ATTESTED,
    TransferStatus.BUFFER_PENDING,
    TransferStatus.CHALLENGE_PENDING,
    TransferStatus.COMPLETED,
]
TERMINAL = frozenset(
    {
        TransferStatus.COMPLETED,
        TransferStatus.REVERSED,
        TransferStatus.HALTED,
        TransferStatus.EXPIRED,
    }
)


@dataclass
class TransferRecord:
    transfer_id: str
    direction: str
    v_x: int
    token: str
    initiator: Optional[str]
    recipient: str
    status: TransferStatus = TransferStatus.INITIATED
    t_initiated: Optional[int] = None
    t_locked: Optional[int] = None
    t_attested: Optional[int] = None
    t_completed: Optional[int] = None
    fees_paid: Tuple[int, int, int] = (0, 0, 0)
    provenance: Provenance = Provenance.HONEST
    status_log: List[TransferStatus] = field(default_factory=list)
    tx_ids: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.status_log:
            self.status_log.append(self.status)

    def advance(self, new: TransferStatus) -> None:
        if self.status in TERMINAL:
            raise ValueError(f"{self.transfer_id} already {self.status.value}")
        if new in (TransferStatus.HALTED, TransferStatus.EXPIRED):
            pass
        elif new is TransferStatus.REVERSED:
            if self.status not in (
                TransferStatus.BUFFER_PENDING,
                TransferStatus.CHALLENGE_PENDING,
            ):
                raise ValueError("only pending settlements can be reversed")
        elif _ORDER.index(new) <= _ORDER.index(self.status):
            raise ValueError(f"illegal transition {self.status.value} -> {new.value}")
        self.status = new
        self.status_log.append(new)


@dataclass(frozen=True)
class TransferState:
    a1_balance: int
    c1_balance: int
    a2_balance: int
    c2_balance: int


def transfer_state(
    cfg: BridgeConfig, chains: Mapping[str, Blockchain], a1: str, a2: str, token: str
) -> TransferState:
    """Snapshot of the four accounts for the pair rooted at source ``token``."""
    b1 = chains[cfg.source_chain_id]
    b2 = chains[cfg.dest_chain_id]
    t2 = cfg.token_map[token]
    return TransferState(
        b1.balance_of(a1, token),
        b1.balance_of(cfg.c1, token),
        b2.balance_of(a2, t2),
        b2.balance_of(cfg.c2, t2),
    )


# Runtime bridge ----------------------------------------------------------------


class Bridge:
    """Mutable bridge state for one simulation run."""

    def __init__(self, cfg: BridgeConfig) -> None:
        self.cfg = cfg
        # injections mutate the live mechanism, never the config
        self.mechanism: OffchainMechanism = copy.deepcopy(cfg.offchain)
        self.defenses: Defenses = copy.deepcopy(cfg.defenses)
        self.records: Dict[str, TransferRecord] = {}
        self.processed: Set[tuple] = set()
        # (direction, transfer_id) of finalised settlements
        self.settled: Set[Tuple[str, str]] = set()
        self.halted = False
        self.observed_prices: Dict[str, Fraction] = dict(cfg.prices)
        self._nonce = 0

    # source side -----------------------------------------------------------

    def next_transfer_id(self, prefix: str = "t") -> str:
        self._nonce += 1
        return f"{prefix}{self._nonce}"

    def _pay(self, chain: Blockchain, payer: str, amount: int, token: str, now: int,
             transfer_id: str, record: TransferRecord) -> None:
        if amount:
            tx = chain.append_tx(Transaction(token, amount, payer, self.cfg.operator,
                                             now, TxKind.PLAIN, transfer_id))
            record.tx_ids.append(tx.tx_id)

    def initiate_transfer(
        self,
        chains: Mapping[str, Blockchain],
        a1: str,
        a2: str,
        v_x: int,
        now: int,
        token: Optional[str] = None,
    ) -> TransferRecord:
        cfg = self.cfg
        if self.halted:
            raise BridgeHalted("bridge halted")
        check_amount(v_x)
        token = token if token is not None else next(iter(cfg.token_map))
        if token not in cfg.token_map:
            raise ConfigInvalid(f"{token} is not bridged")
        b1 = chains[cfg.source_chain_id]
        f1, f2, f_star = compute_fee(cfg.fees, v_x)
        if f2 >= v_x:
            raise FeeExceedsValue(f"f2={f2} swallows v_x={v_x}")
        need = v_x + f1 + f_star
        if b1.balance_of(a1, token) < need:
            raise InsufficientBalance(f"{a1} needs {need} {token}")
        tid = self.next_transfer_id()
        record = TransferRecord(tid, FORWARD, v_x, token, a1, a2,
                                t_initiated=now, fees_paid=(f1, f2, f_star))
        if cfg.functional_type is FunctionalType.BURN_MINT:
            tx = Transaction(token, v_x, a1, cfg.c1, now, TxKind.BURN, tid)
        else:
            tx = Transaction(token, v_x, a1, cfg.c1, now, TxKind.LOCK, tid)
        tx = b1.append_tx(tx)
        record.tx_ids.append(tx.tx_id)
        self._pay(b1, a1, f1, token, now, tid, record)
        self._pay(b1, a1, f_star, token, now, tid, record)
        b1.emit_event(BridgeEvent(tid, token, v_x, a1, a2, cfg.dest_chain_id,
                                  FORWARD, now, tx.tx_id))
        record.t_locked = now + b1.confirmation_delay
        record.advance(TransferStatus.LOCKED_OR_BURNED)
        self.records[tid] = record
        return record

    def reverse_transfer(
        self,
        chains: Mapping[str, Blockchain],
        a2: str,
        a1: str,
        v_x: int,
        now: int,
        token: Optional[str] = None,
    ) -> TransferRecord:
        cfg = self.cfg
        if self.halted:
            raise BridgeHalted("bridge halted")
        check_amount(v_x)
        token = token if token is not None else next(iter(cfg.token_map.values()))
        if token not in cfg.inverse_token_map:
            raise ConfigInvalid(f"{token} is not a bridged destination token")
        t1 = cfg.inverse_token_map[token]
        b1 = chains[cfg.source_chain_id]
        b2 = chains[cfg.dest_chain_id]
        fees = compute_fee(cfg.reverse_schedule, v_x)
        if sum(fees) >= v_x:
            raise FeeExceedsValue(f"reverse fees {sum(fees)} swallow v_x={v_x}")
        if b2.balance_of(a2, token) < v_x:
            raise InsufficientBalance(f"{a2} needs {v_x} {token}")
        if (cfg.functional_type is not FunctionalType.BURN_MINT
                and b1.balance_of(cfg.c1, t1) < v_x):
            raise NoLockedCollateral(f"c1 holds {b1.balance_of(cfg.c1, t1)} {t1}")
        tid = self.next_transfer_id("r")
        record = TransferRecord(tid, REVERSE, v_x, token, a2, a1,
                                t_initiated=now, fees_paid=fees)
        if cfg.functional_type is FunctionalType.LIQUIDITY:
            tx = Transaction(token, v_x, a2, cfg.c2, now, TxKind.LOCK, tid)
        else:
            tx = Transaction(token, v_x, a2, cfg.c2, now, TxKind.BURN, tid)
        tx = b2.append_tx(tx)
        record.tx_ids.append(tx.tx_id)
        b2.emit_event(BridgeEvent(tid, token, v_x, a2, a1, cfg.source_chain_id,
                                  REVERSE, now, tx.tx_id))
        record.t_locked = now + b2.confirmation_delay
        record.advance(TransferStatus.LOCKED_OR_BURNED)
        self.records[tid] = record
        return record

    # destination side ----------------------------------------------------------

    def record_for(self, att: Attestation) -> TransferRecord:
        """The record an attestation settles; forged claims get a fresh one."""
        rec = self.records.get(att.transfer_id)
        if (rec is not None and rec.direction == att.direction
                and rec.status is TransferStatus.LOCKED_OR_BURNED):
            return rec
        key = f"{att.transfer_id}@{len(self.records)}"
        rec = TransferRecord(key, att.direction, att.claimed_value, att.token, None,
                             att.claimed_recipient, status=TransferStatus.LOCKED_OR_BURNED,
                             provenance=att.provenance)
        self.records[key] = rec
        return rec

    def settlement_amount(self, att: Attestation) -> int:
        cfg = self.cfg
        if not cfg.price_oracle:
            return att.claimed_value
        out_token = cfg.settle_token(att.direction, att.token)
        ratio = self.observed_prices[att.token] / self.observed_prices[out_token]
        return int(att.claimed_value * ratio)

    def exceeds_breaker(self, att: Attestation) -> bool:
        d = self.defenses
        if d.breaker_cap is None:
            return False
        if d.breaker_token is None:
            return att.claimed_value > d.breaker_cap
        prices = self.cfg.prices
        return att.claimed_value * prices[att.token] > d.breaker_cap * prices[d.breaker_token]

    def accept(self, att: Attestation) -> Tuple[bool, str]:
        cfg = self.cfg
        _, settle_chain = cfg.chains_for(att.direction)
        ok, why = verify_attestation(self.mechanism, att, settle_chain)
        if not ok:
            return False, why
        if cfg.replay_tracking and att.message_key() in self.processed:
            return False, "message already processed"
        return True, why

    def settle_destination(
        self,
        record: TransferRecord,
        att: Attestation,
        chains: Mapping[str, Blockchain],
        now: int,
    ) -> TransferRecord:
        """Verify and start settling; finalises at once when no window is set."""
        ok, why = self.accept(att)
        if not ok:
            raise InvalidAttestation(why)
        self.processed.add(att.message_key())
        record.t_attested = now
        record.advance(TransferStatus.ATTESTED)
        if self.halted:
            record.advance(TransferStatus.HALTED)
            return record
        if self.exceeds_breaker(att):
            self.halted = True
            record.advance(TransferStatus.HALTED)
            return record
        self.check_liquidity(att, chains)
        if self.defenses.buffer_delay > 0:
            record.advance(TransferStatus.BUFFER_PENDING)
            return record
        if self.defenses.challenge_period > 0:
            record.advance(TransferStatus.CHALLENGE_PENDING)
            return record
        return self.finalize(record, att, chains, now)

    def after_buffer(self, record: TransferRecord, att: Attestation,
                     chains: Mapping[str, Blockchain], now: int) -> TransferRecord:
        if self.halted:
            record.advance(TransferStatus.HALTED)
            return record
        if self.defenses.challenge_period > 0:
            record.advance(TransferStatus.CHALLENGE_PENDING)
            return record
        return self.finalize(record, att, chains, now)

    def check_liquidity(self, att: Attestation, chains: Mapping[str, Blockchain]) -> None:
        cfg = self.cfg
        if cfg.functional_type not in (FunctionalType.LIQUIDITY, FunctionalType.HYBRID):
            return
        _, settle_chain = cfg.chains_for(att.direction)
        out_token = cfg.settle_token(att.direction, att.token)
        pool = cfg.c2 if att.direction == FORWARD else cfg.c1
        have = chains[settle_chain].balance_of(pool, out_token)
        if have < self.settlement_amount(att):
            raise LiquidityExhausted(f"pool holds {have} {out_token}")

    def settlement_txs(self, att: Attestation, now: int) -> List[Transaction]:
        """Ledger entries that settle ``att``; nothing is appended here."""
        cfg = self.cfg
        out_token = cfg.settle_token(att.direction, att.token)
        gross = self.settlement_amount(att)
        to = att.claimed_recipient
        tid = att.transfer_id
        prov, cause = att.provenance, att.cause
        ftype = cfg.functional_type
        if att.direction == FORWARD:
            pool = cfg.c2
            if ftype is FunctionalType.HYBRID:
                # hybrid bridges pay out of a destination pool where one exists
                mint = out_token not in (cfg.lp_reserves or {}).get("dest", {})
            else:
                mint = ftype is not FunctionalType.LIQUIDITY
            _, fee, _ = compute_fee(cfg.fees, att.claimed_value)
        else:
            pool = cfg.c1
            mint = ftype is FunctionalType.BURN_MINT
            fee = sum(compute_fee(cfg.reverse_schedule, att.claimed_value))
        if mint:
            settle = Transaction(out_token, gross, pool, to, now, TxKind.MINT, tid, prov, cause)
        else:
            settle = Transaction(out_token, gross, pool, to, now, TxKind.RELEASE, tid, prov, cause)
        txs = [settle]
        fee = min(fee, gross)
        if fee and to != cfg.operator:
            txs.append(Transaction(out_token, fee, to, cfg.operator, now, TxKind.PLAIN,
                                   tid, prov, cause))
        return txs

    def finalize(self, record: TransferRecord, att: Attestation,
                 chains: Mapping[str, Blockchain], now: int) -> TransferRecord:
        _, settle_chain = self.cfg.chains_for(att.direction)
        chain = chains[settle_chain]
        for tx in self.settlement_txs(att, now):
            record.tx_ids.append(chain.append_tx(tx).tx_id)
        record.t_completed = now + chain.confirmation_delay
        record.advance(TransferStatus.COMPLETED)
        return record
