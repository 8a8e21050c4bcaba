from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgesim.chain import (
    GENESIS,
    MAX_AMOUNT,
    Blockchain,
    BridgeEvent,
    Transaction,
    TxKind,
    fold_balances,
)
from bridgesim.errors import (
    AmountError,
    DepthExceedsHistory,
    InsufficientBalance,
    NonMonotoneTimestamp,
)

from conftest import fund


def tx(kind, value, sender="a1", recipient="c1", t=1, token="TKN", **kw):
    return Transaction(token, value, sender, recipient, t, kind, **kw)


def test_lock_moves_value_to_custody():
    b1 = Blockchain("b1")
    fund(b1, "a1", "TKN", 100)
    b1.append_tx(tx(TxKind.LOCK, 40))
    assert b1.balance_of("a1", "TKN") == 60
    assert b1.balance_of("c1", "TKN") == 40


def test_mint_credits_from_nothing():
    b2 = Blockchain("b2")
    b2.append_tx(tx(TxKind.MINT, 38, sender="c2", recipient="a2"))
    assert b2.balance_of("a2", "TKN") == 38


def test_overdraft_is_rejected_and_leaves_chain_untouched():
    b1 = Blockchain("b1")
    fund(b1, "a1", "TKN", 10)
    with pytest.raises(InsufficientBalance):
        b1.append_tx(tx(TxKind.PLAIN, 50, recipient="a3"))
    assert len(b1.history) == 1
    assert b1.balance_of("a1", "TKN") == 10


def test_fold_examples():
    assert fold_balances([]) == {}
    history = [tx(TxKind.MINT, 5, sender=GENESIS, recipient="a"),
               tx(TxKind.BURN, 2, sender="a", recipient="c1")]
    assert fold_balances(history)[("a", "TKN")] == 3


def test_lock_with_fees_balance():
    # v1 = 100, v_x = 40, f1 = 1, f* = 2
    b1 = Blockchain("b1")
    fund(b1, "a1", "TKN", 100)
    b1.append_tx(tx(TxKind.LOCK, 40))
    b1.append_tx(tx(TxKind.PLAIN, 1, recipient="operator"))
    b1.append_tx(tx(TxKind.PLAIN, 2, recipient="operator"))
    assert b1.balance_of("a1", "TKN") == 57


def test_burn_reduces_supply():
    b1 = Blockchain("b1")
    fund(b1, "a1", "TKN", 100)
    b1.append_tx(tx(TxKind.BURN, 40))
    assert b1.total_supply("TKN") == 60
    assert b1.balance_of("c1", "TKN") == 0


def test_amount_bounds():
    b = Blockchain("b")
    with pytest.raises(AmountError):
        b.append_tx(tx(TxKind.MINT, -1, sender=GENESIS, recipient="a"))
    with pytest.raises(AmountError):
        b.append_tx(tx(TxKind.MINT, MAX_AMOUNT + 1, sender=GENESIS, recipient="a"))
    b.append_tx(tx(TxKind.MINT, MAX_AMOUNT, sender=GENESIS, recipient="a"))
    with pytest.raises(AmountError):
        b.append_tx(tx(TxKind.MINT, 1, sender=GENESIS, recipient="a"))


def test_timestamps_must_not_go_back():
    b = Blockchain("b")
    b.append_tx(tx(TxKind.MINT, 5, sender=GENESIS, recipient="a", t=3))
    with pytest.raises(NonMonotoneTimestamp):
        b.append_tx(tx(TxKind.MINT, 5, sender=GENESIS, recipient="a", t=2))


def test_tx_ids_are_stamped_in_order():
    b = Blockchain("b")
    first = b.append_tx(tx(TxKind.MINT, 5, sender=GENESIS, recipient="a"))
    second = b.append_tx(tx(TxKind.MINT, 5, sender=GENESIS, recipient="a"))
    assert (first.tx_id, second.tx_id) == ("b#0", "b#1")
    assert b.tx_by_id("b#1") == second


def test_rollback_zero_is_identity():
    b = Blockchain("b")
    fund(b, "a1", "TKN", 100)
    before = (list(b.history), b.balances())
    assert b.rollback(0) == []
    assert (list(b.history), b.balances()) == before


def test_rollback_undoes_lock():
    b = Blockchain("b")
    fund(b, "a1", "TKN", 100)
    lock = b.append_tx(tx(TxKind.LOCK, 40))
    b.emit_event(BridgeEvent("t1", "TKN", 40, "a1", "a2", "b2", "forward", 1, lock.tx_id))
    assert b.rollback(1) == [lock]
    assert b.balance_of("a1", "TKN") == 100
    assert b.find_event("t1") is None


def test_rollback_deeper_than_history():
    b = Blockchain("b")
    with pytest.raises(DepthExceedsHistory):
        b.rollback(1)


_ops = st.lists(
    st.tuples(st.sampled_from(["mint", "plain", "lock", "burn"]), st.integers(1, 50),
              st.sampled_from(["a", "b", "c"])),
    max_size=25,
)


@given(_ops, st.integers(0, 25))
def test_rollback_matches_fold_of_prefix(ops, depth):
    b = Blockchain("b")
    t = 0
    for op, value, who in ops:
        t += 1
        try:
            if op == "mint":
                b.append_tx(tx(TxKind.MINT, value, sender=GENESIS, recipient=who, t=t))
            elif op == "plain":
                b.append_tx(tx(TxKind.PLAIN, value, sender=who, recipient="z", t=t))
            elif op == "lock":
                b.append_tx(tx(TxKind.LOCK, value, sender=who, recipient="c1", t=t))
            else:
                b.append_tx(tx(TxKind.BURN, value, sender=who, recipient="c1", t=t))
        except InsufficientBalance:
            pass
    depth = min(depth, len(b.history))
    kept = b.history[: len(b.history) - depth]
    b.rollback(depth)
    assert b.balances() == {k: v for k, v in fold_balances(kept).items() if v}
    assert all(v >= 0 for v in b.balances().values())
