from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgesim.bridge import (
    FORWARD,
    Bridge,
    Defenses,
    FeeSchedule,
    FeeTerm,
    FunctionalType,
    TransferRecord,
    TransferStatus,
    compute_fee,
)
from bridgesim.errors import (
    ConfigInvalid,
    InsufficientBalance,
    InvalidAttestation,
    LiquidityExhausted,
    NoLockedCollateral,
)
from bridgesim.offchain import Attestation, ProofKind, attest
from bridgesim.presets import FEE_SCHEDULES

from conftest import fund, make_chains, make_config


def test_zero_schedule():
    assert compute_fee(FeeSchedule(), 40) == (0, 0, 0)


def test_avalanche_minimum_applies():
    # 0.025% of 10,000 is 2.5, below the minimum of 3
    assert sum(compute_fee(FEE_SCHEDULES["avalanche_forward"], 10_000)) == 3


def test_multichain_maximum_applies():
    # 0.1% of 1,000,000 is 1,000, right at the cap
    assert sum(compute_fee(FEE_SCHEDULES["multichain_ethereum"], 1_000_000)) == 1000
    assert sum(compute_fee(FEE_SCHEDULES["multichain_ethereum"], 5_000_000)) == 1000


@given(
    st.integers(1, 10**9),
    st.fractions(0, Fraction(1, 10), max_denominator=1000),
    st.fractions(0, Fraction(1, 10), max_denominator=1000),
    st.integers(0, 50),
    st.one_of(st.none(), st.integers(50, 500)),
)
def test_fee_clamp_properties(v_x, r1, r2, lo, hi):
    sched = FeeSchedule(f1=FeeTerm(rate=r1), f_star=FeeTerm(rate=r2), min_cap=lo, max_cap=hi)
    f1, f2, f_star = compute_fee(sched, v_x)
    assert min(f1, f2, f_star) >= 0
    total = f1 + f2 + f_star
    assert total >= lo
    if hi is not None:
        assert total <= hi
    raw = int(r1 * v_x) + int(r2 * v_x)
    if lo <= raw and (hi is None or raw <= hi):
        assert total == raw


def _setup(ftype=FunctionalType.LOCK_MINT, fees=FeeSchedule(), **kw):
    cfg = make_config(functional_type=ftype, fees=fees, **kw)
    chains = make_chains(cfg)
    fund(chains["alpha"], "a1", "TKN", 100)
    return cfg, chains, Bridge(cfg)


def _settle(bridge, chains, record, now=5):
    initiating, _ = bridge.cfg.chains_for(record.direction)
    att = attest(bridge.mechanism, chains[initiating], record.transfer_id, now, bridge.cfg.d_off)
    bridge.settle_destination(record, att, chains, att.issued_at)
    return att


def test_lock_debits_fees(worked_fees):
    cfg, chains, bridge = _setup(fees=worked_fees)
    bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    assert chains["alpha"].balance_of("a1", "TKN") == 57
    assert chains["alpha"].balance_of("c1", "TKN") == 40


def test_burn_mode_destroys_collateral(worked_fees):
    cfg, chains, bridge = _setup(FunctionalType.BURN_MINT, worked_fees)
    bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    assert chains["alpha"].balance_of("a1", "TKN") == 57
    assert chains["alpha"].balance_of("c1", "TKN") == 0
    # 3 fee units moved to the operator, 40 destroyed
    assert chains["alpha"].total_supply("TKN") == 60


def test_insufficient_balance_with_fees(worked_fees):
    cfg, chains, bridge = _setup(fees=worked_fees)
    with pytest.raises(InsufficientBalance):
        bridge.initiate_transfer(chains, "a1", "a2", 100, 1)
    assert chains["alpha"].balance_of("a1", "TKN") == 100


def test_honest_settlement_pays_net_of_f2():
    fees = FeeSchedule(f2=FeeTerm(1))
    cfg, chains, bridge = _setup(fees=fees)
    record = bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    _settle(bridge, chains, record)
    assert chains["beta"].balance_of("a2", "TKN.b") == 39
    assert record.status is TransferStatus.COMPLETED


def test_liquidity_pool_too_small():
    cfg, chains, bridge = _setup(FunctionalType.LIQUIDITY,
                                 lp_reserves={"source": {}, "dest": {"TKN.b": 30}})
    fund(chains["beta"], "c2", "TKN.b", 30)
    record = bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    with pytest.raises(LiquidityExhausted):
        _settle(bridge, chains, record)
    assert chains["beta"].balance_of("c2", "TKN.b") == 30


def test_breaker_halts_large_forgery():
    cfg, chains, bridge = _setup(defenses=Defenses(breaker_cap=10))
    bridge.mechanism.compromised.update(bridge.mechanism.keys)
    att = Attestation("x1", 173_600, "attacker", "TKN", FORWARD,
                      frozenset(bridge.mechanism.keys), ProofKind.FABRICATED, "beta", 5)
    record = bridge.record_for(att)
    bridge.settle_destination(record, att, chains, 5)
    assert bridge.halted
    assert record.status is TransferStatus.HALTED
    assert chains["beta"].total_supply("TKN.b") == 0


def test_round_trip_without_fees_restores_balance():
    cfg, chains, bridge = _setup()
    record = bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    _settle(bridge, chains, record)
    back = bridge.reverse_transfer(chains, "a2", "a1", 40, 10)
    _settle(bridge, chains, back, now=15)
    assert chains["alpha"].balance_of("a1", "TKN") == 100
    assert chains["alpha"].balance_of("c1", "TKN") == 0
    assert chains["beta"].total_supply("TKN.b") == 0


def test_reverse_fee_is_taken_from_release():
    cfg, chains, bridge = _setup(reverse_fees=FeeSchedule(f_star=FeeTerm(2)))
    record = bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    _settle(bridge, chains, record)
    back = bridge.reverse_transfer(chains, "a2", "a1", 40, 10)
    _settle(bridge, chains, back, now=15)
    assert chains["alpha"].balance_of("a1", "TKN") == 60 + 38
    assert chains["alpha"].balance_of("c1", "TKN") == 0


def test_reverse_beyond_collateral():
    cfg, chains, bridge = _setup()
    fund(chains["beta"], "a2", "TKN.b", 50)
    with pytest.raises(NoLockedCollateral):
        bridge.reverse_transfer(chains, "a2", "a1", 50, 3)


def test_replayed_message_is_refused():
    cfg, chains, bridge = _setup()
    record = bridge.initiate_transfer(chains, "a1", "a2", 40, 1)
    att = _settle(bridge, chains, record)
    with pytest.raises(InvalidAttestation):
        bridge.settle_destination(bridge.record_for(att), att, chains, 9)
    assert chains["beta"].balance_of("a2", "TKN.b") == 40


def test_status_order_is_enforced():
    record = TransferRecord("t", FORWARD, 1, "TKN", "a", "b")
    record.advance(TransferStatus.LOCKED_OR_BURNED)
    record.advance(TransferStatus.ATTESTED)
    with pytest.raises(ValueError):
        record.advance(TransferStatus.LOCKED_OR_BURNED)
    with pytest.raises(ValueError):
        record.advance(TransferStatus.REVERSED)
    record.advance(TransferStatus.HALTED)
    with pytest.raises(ValueError):
        record.advance(TransferStatus.COMPLETED)
    assert record.status_log[-1] is TransferStatus.HALTED


def test_config_guards():
    with pytest.raises(ConfigInvalid):
        make_config(token_map={"A": "X", "B": "X"}, prices={"A": 1, "B": 1, "X": 1})
    with pytest.raises(ConfigInvalid):
        make_config(prices={"TKN": Fraction(1), "TKN.b": Fraction(2)})
    with pytest.raises(ConfigInvalid):
        make_config(functional_type=FunctionalType.LIQUIDITY)
