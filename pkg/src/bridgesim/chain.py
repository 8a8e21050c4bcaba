"""Ledger model of a single blockchain domain.

A chain keeps an append-only history of transactions and a balance map
that always equals the left fold of that history.  Amounts are plain
``int`` values restricted to the unsigned 128-bit range; prices are
``fractions.Fraction`` so every comparison is exact.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import (
    AmountError,
    DepthExceedsHistory,
    InsufficientBalance,
    InvalidTransaction,
    NonMonotoneTimestamp,
)

MAX_AMOUNT = 2**128 - 1

# Pseudo-address used as the sender of genesis allocations.
GENESIS = "genesis"

Price = Fraction


def check_amount(value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise AmountError(f"amount must be an int, got {type(value).__name__}")
    if value < 0 or value > MAX_AMOUNT:
        raise AmountError(f"amount {value} outside [0, 2**128 - 1]")
    return value


def make_price(numerator: int, denominator: int = 1) -> Price:
    if denominator <= 0:
        raise AmountError("price denominator must be positive")
    if numerator < 0:
        raise AmountError("price must be non-negative")
    return Fraction(numerator, denominator)


class TxKind(str, enum.Enum):
    LOCK = "Lock"
    BURN = "Burn"
    MINT = "Mint"
    RELEASE = "Release"
    PLAIN = "Plain"


class Provenance(str, enum.Enum):
    HONEST = "Honest"
    ADVERSARIAL = "Adversarial"
    FAULTY = "Faulty"


@dataclass(frozen=True)
class Transaction:
    token: str
    value: int
    sender: str
    recipient: str
    timestamp: int
    kind: TxKind
    transfer_id: Optional[str] = None
    provenance: Provenance = Provenance.HONEST
    # id of the injection that caused this transaction, if any
    cause: Optional[str] = None
    # assigned by Blockchain.append_tx
    tx_id: str = ""
    chain_id: str = ""

    def debits(self) -> bool:
        return self.kind is not TxKind.MINT

    def credits(self) -> bool:
        return self.kind is not TxKind.BURN


@dataclass(frozen=True)
class BridgeEvent:
    """A log entry emitted by a bridge contract when a transfer starts.

    Relayers read these logs rather than raw transfers.  An honest event
    is backed by the Lock or Burn transaction named in ``backing_tx_id``.
    """

    transfer_id: str
    token: str
    value: int
    sender: str
    recipient: str
    dest_chain: str
    direction: str
    timestamp: int
    backing_tx_id: Optional[str]
    provenance: Provenance = Provenance.HONEST
    cause: Optional[str] = None
    # history length when the event was emitted; used to drop it on rollback
    anchor: int = 0


def _validate(tx: Transaction) -> None:
    check_amount(tx.value)
    if tx.kind is not TxKind.PLAIN and tx.value == 0:
        raise InvalidTransaction(f"{tx.kind.value} requires a positive value")
    if tx.kind is TxKind.PLAIN and tx.sender == tx.recipient:
        raise InvalidTransaction("Plain transfer to self")
    if tx.timestamp < 0:
        raise InvalidTransaction("negative timestamp")


def fold_balances(history: Iterable[Transaction]) -> Dict[Tuple[str, str], int]:
    """Recompute balances from scratch; raises on an overdraft."""
    balances: Dict[Tuple[str, str], int] = {}
    for tx in history:
        _apply(balances, tx)
    return balances


def _apply(balances: Dict[Tuple[str, str], int], tx: Transaction) -> None:
    if tx.debits():
        key = (tx.sender, tx.token)
        have = balances.get(key, 0)
        if have < tx.value:
            raise InsufficientBalance(
                f"{tx.sender} holds {have} {tx.token}, needs {tx.value}"
            )
    if tx.credits():
        key = (tx.recipient, tx.token)
        if balances.get(key, 0) + tx.value > MAX_AMOUNT:
            raise AmountError(f"balance overflow for {tx.recipient} {tx.token}")
    if tx.debits():
        key = (tx.sender, tx.token)
        left = balances[key] - tx.value
        if left:
            balances[key] = left
        else:
            del balances[key]
    if tx.credits() and tx.value:
        key = (tx.recipient, tx.token)
        balances[key] = balances.get(key, 0) + tx.value


@dataclass
class Blockchain:
    chain_id: str
    confirmation_delay: int = 1
    consensus_honest: bool = True
    history: List[Transaction] = field(default_factory=list)
    events: List[BridgeEvent] = field(default_factory=list)
    _balances: Dict[Tuple[str, str], int] = field(default_factory=dict, repr=False)
    # never reused, so tx ids stay unique across rollbacks
    _next_seq: int = field(default=0, repr=False)

    def append_tx(self, tx: Transaction) -> Transaction:
        """Append ``tx`` and return it with its ledger id assigned."""
        _validate(tx)
        if self.history and tx.timestamp < self.history[-1].timestamp:
            raise NonMonotoneTimestamp(
                f"tx at {tx.timestamp} after tx at {self.history[-1].timestamp}"
            )
        stamped = dataclasses.replace(
            tx, tx_id=f"{self.chain_id}#{self._next_seq}", chain_id=self.chain_id
        )
        _apply(self._balances, stamped)
        self._next_seq += 1
        self.history.append(stamped)
        return stamped

    def emit_event(self, event: BridgeEvent) -> BridgeEvent:
        stamped = dataclasses.replace(event, anchor=len(self.history))
        self.events.append(stamped)
        return stamped

    def balance_of(self, address: str, token: str) -> int:
        return self._balances.get((address, token), 0)

    def balances(self) -> Dict[Tuple[str, str], int]:
        return dict(self._balances)

    def total_supply(self, token: str) -> int:
        return sum(v for (_, t), v in self._balances.items() if t == token)

    def rollback(self, depth: int) -> List[Transaction]:
        """Remove the last ``depth`` transactions and return them, oldest first."""
        if depth < 0 or depth > len(self.history):
            raise DepthExceedsHistory(
                f"cannot roll back {depth} of {len(self.history)} transactions"
            )
        if depth == 0:
            return []
        reverted = self.history[-depth:]
        del self.history[-depth:]
        keep = len(self.history)
        self.events = [e for e in self.events if e.anchor <= keep]
        self._balances = fold_balances(self.history)
        return reverted

    def find_event(self, transfer_id: str) -> Optional[BridgeEvent]:
        for event in self.events:
            if event.transfer_id == transfer_id:
                return event
        return None

    def tx_by_id(self, tx_id: str) -> Optional[Transaction]:
        for tx in self.history:
            if tx.tx_id == tx_id:
                return tx
        return None

    def last_timestamp(self) -> int:
        return self.history[-1].timestamp if self.history else 0
