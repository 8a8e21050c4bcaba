"""Acceptance gate: one test group per criterion, summarised at the end of the run."""

from __future__ import annotations

import dataclasses
from collections import defaultdict
from fractions import Fraction

import pytest

from bridgesim.bridge import (
    FORWARD,
    REVERSE,
    DestMechanism,
    FunctionalType,
    SourceMechanism,
    compute_fee,
    trust_set_of,
)
from bridgesim.chain import TxKind
from bridgesim.cli import main
from bridgesim.engine import Simulation, run_scenario
from bridgesim.monitors import Prior
from bridgesim.offchain import LightClientModel, NativeConsensus, SidechainModel, TrustClass
from bridgesim.presets import (
    FORGED_SETTLEMENT_PRESETS,
    QUORUM_PRESETS,
    build_preset,
    preset_names,
    random_adversarial_scenario,
    random_honest_scenario,
    with_layered_validation,
)
from bridgesim.surface import (
    CUSTODIAN,
    DEST_CONTRACT,
    SIDECHAIN_CONSENSUS,
    AttackVectorSpec,
    Layer,
    damage_effort_ratio,
    default_catalog,
    layer_area,
    viable,
)

from conftest import make_config, notary
from test_oracle import _monitor, small_instances
from bridgesim.oracle import brute_force_causality

PRESETS = preset_names()
_baseline_cache = {}


def baseline(name):
    if name not in _baseline_cache:
        _baseline_cache[name] = run_scenario(build_preset(name))
    return _baseline_cache[name]


# 1 -------------------------------------------------------------------------------------

STATED_LOSSES = {
    "ronin_2022": {"ETH": 173_600, "USDC": 25_500_000},
    "wormhole_2022": {"WETH": 120_000},
    "bsc_token_hub_2022": {"BNB": 2_000_000},
}

LABELS = {
    "ronin_2022": ("Causality", "Attack", "offchain"),
    "wormhole_2022": ("Causality", "Attack", "destination"),
    "nomad_2022": ("Causality", "Attack", "destination"),
    "qubit_2022": ("Causality", "Attack", "source"),
    "bsc_token_hub_2022": ("Consistency", "Attack", "offchain"),
    "harmony_2022": ("Causality", "Attack", "offchain"),
    "omni_2022": ("Consistency", "Attack", "destination"),
    "poly_2021": ("Causality", "Attack", "source"),
    "multichain_2023": ("Causality", "Attack", "offchain"),
}


@pytest.mark.criterion(1, "preset fidelity: labels and stated token losses")
@pytest.mark.parametrize("name", PRESETS)
def test_criterion_01_preset_fidelity(name):
    result = baseline(name)
    triple = (result.primary.prior.value, result.primary.classification.value,
              result.attack_layer)
    assert triple == LABELS[name]
    if name in STATED_LOSSES:
        assert result.loss == STATED_LOSSES[name]
    assert result.loss == build_preset(name).expected.loss


# 2 -------------------------------------------------------------------------------------


def _peg_accompanies(result):
    priors = result.priors
    return not (priors & {Prior.CAUSALITY, Prior.CONSISTENCY}) or Prior.PEG in priors


@pytest.mark.criterion(2, "causality or consistency breach always comes with a peg breach")
def test_criterion_02_peg_accompanies_other_breaches():
    counterexamples = [n for n in PRESETS if not _peg_accompanies(baseline(n))]
    fired = 0
    for seed in range(100):
        result = run_scenario(random_adversarial_scenario(seed))
        fired += bool(result.violations)
        if not _peg_accompanies(result):
            counterexamples.append(seed)
    assert counterexamples == []
    assert fired > 50


# 3 -------------------------------------------------------------------------------------


def _conservation(sim):
    """Check both identities for every completed transfer; return the covered modes."""
    cfg = sim.cfg
    covered = set()
    for record in sim.bridge.records.values():
        if record.status.value != "Completed":
            continue
        initiating, settling = cfg.chains_for(record.direction)
        f1, f2, f_star = record.fees_paid
        paid = defaultdict(int)
        got = 0
        for tx_id in record.tx_ids:
            chain_id = tx_id.split("#")[0]
            tx = sim.chains[chain_id].tx_by_id(tx_id)
            if chain_id == initiating and tx.sender == record.initiator:
                paid[tx.kind] += tx.value
            if chain_id == settling:
                if tx.recipient == record.recipient and tx.kind in (TxKind.MINT, TxKind.RELEASE):
                    got += tx.value
                if tx.sender == record.recipient and tx.kind is TxKind.PLAIN:
                    got -= tx.value
        if record.direction == FORWARD:
            # a1_start - a1_end = v_x + f1 + f*; minted = v_x - f2
            assert sum(paid.values()) == record.v_x + f1 + f_star
            assert got == record.v_x - f2
        else:
            assert sum(paid.values()) == record.v_x
            assert got == record.v_x - (f1 + f2 + f_star)
        covered.add((cfg.functional_type, record.direction))
    return covered


@pytest.mark.criterion(3, "honest runs are quiet and conserve value")
def test_criterion_03_honest_soundness():
    covered = set()
    for seed in range(100):
        sim = Simulation(random_honest_scenario(seed))
        result = sim.run()
        assert result.violations == [], seed
        assert result.loss == {}
        covered |= _conservation(sim)
    modes = {FunctionalType.LOCK_MINT, FunctionalType.BURN_MINT, FunctionalType.LIQUIDITY}
    assert covered == {(m, d) for m in modes for d in (FORWARD, REVERSE)}


def test_criterion_03_fee_identity_on_worked_example(worked_fees):
    assert compute_fee(worked_fees, 40) == (1, 1, 2)


# 4 -------------------------------------------------------------------------------------


@pytest.mark.criterion(4, "causality monitor equals exhaustive search on small instances")
def test_criterion_04_oracle_equivalence():
    count = 0
    for locks, mints, horizon, grace in small_instances():
        assert len(locks) + len(mints) <= 8
        assert _monitor(locks, mints, horizon, grace) == brute_force_causality(
            locks, mints, horizon, grace)
        count += 1
    assert count >= 1000


# 5 -------------------------------------------------------------------------------------


@pytest.mark.criterion(5, "quorum sharpness at m - 1 and m stolen keys")
@pytest.mark.parametrize("name", QUORUM_PRESETS)
def test_criterion_05_quorum_sharpness(name):
    below = build_preset(name)
    m = below.bridge.offchain.m
    below.injections[0].params["keys_compromised"] = m - 1
    result = run_scenario(below)
    assert result.loss == {} and result.violations == []
    at = build_preset(name)
    at.injections[0].params["keys_compromised"] = m
    result = run_scenario(at)
    assert result.primary.prior.value == at.expected.prior
    assert result.loss == at.expected.loss


# 6 -------------------------------------------------------------------------------------


@pytest.mark.criterion(6, "surface calculus")
def test_criterion_06_surface_calculus():
    cfg = make_config(dest_mechanism=DestMechanism.HYBRID_DEST, n_dest_contracts=3)
    catalog = [AttackVectorSpec(f"dc{i}", "contract", impact=Fraction(2), component=DEST_CONTRACT)
               for i in range(3)]
    catalog.append(AttackVectorSpec("cust", "custodian", impact=Fraction(2), component=CUSTODIAN))
    assert layer_area(cfg, Layer.DEST, catalog) == 4

    side = make_config(offchain=SidechainModel())
    harmless = [AttackVectorSpec("R'", "sidechain consensus", impact=Fraction(0),
                                 component=SIDECHAIN_CONSENSUS)]
    assert layer_area(side, Layer.OFFCHAIN, harmless + default_catalog()) == 0

    for impact, effort in [(2, 1), (7, 7), (0, 3), (Fraction(9, 2), 4), (3, Fraction(1, 3))]:
        v = AttackVectorSpec("v", "v", impact=Fraction(impact), effort=Fraction(effort))
        ratio, flag = damage_effort_ratio(v)
        assert ratio == Fraction(impact) / Fraction(effort)
        assert flag == int(ratio > 1)
        for k in (Fraction(1, 7), 3, 1000):
            scaled = dataclasses.replace(v, impact=v.impact * k, effort=v.effort * k)
            assert viable(scaled) == flag


# 7 -------------------------------------------------------------------------------------

DEFENSES = {
    "breaker": lambda s: _defend(s, breaker_cap=10_000),
    "buffer": lambda s: _defend(s, buffer_delay=3, breaker_on_monitor_trip=True),
    "challenge": lambda s: _defend(s, challenge_period=5),
    "layered": with_layered_validation,
}


def _defend(s, **kw):
    s.bridge.defenses = dataclasses.replace(s.bridge.defenses, **kw)
    return s


@pytest.mark.criterion(7, "defenses never increase loss")
@pytest.mark.parametrize("defense", sorted(DEFENSES))
@pytest.mark.parametrize("name", PRESETS)
def test_criterion_07_defense_dominance(name, defense):
    base = baseline(name).loss
    defended = run_scenario(DEFENSES[defense](build_preset(name))).loss
    for token in set(base) | set(defended):
        assert defended.get(token, 0) <= base.get(token, 0)


def test_criterion_07_ronin_breaker():
    s = _defend(build_preset("ronin_2022"), breaker_cap=10_000, breaker_token="ETH")
    result = run_scenario(s)
    assert result.halted
    assert result.loss.get("ETH", 0) <= 10_000


@pytest.mark.parametrize("name", FORGED_SETTLEMENT_PRESETS)
def test_criterion_07_buffer_stops_forged_settlement(name):
    w = 3
    result = run_scenario(_defend(build_preset(name), buffer_delay=w,
                                  breaker_on_monitor_trip=True))
    assert result.loss == {}
    assert result.detection_latency is not None and result.detection_latency <= w


# 8 -------------------------------------------------------------------------------------


def _with_mechanism(name, mech):
    s = build_preset(name)
    s.bridge = dataclasses.replace(s.bridge, offchain=mech)
    return s


@pytest.mark.criterion(8, "layered validation closes single-verifier exploits")
@pytest.mark.parametrize("name,other", [
    ("wormhole_2022", LightClientModel(t_proof=2)),
    ("ronin_2022", LightClientModel(t_proof=2)),
    ("nomad_2022", notary()),
    ("bsc_token_hub_2022", notary()),
])
def test_criterion_08_layered_validation(name, other):
    assert run_scenario(build_preset(name)).loss
    # the complementary verifier on its own already holds
    assert run_scenario(_with_mechanism(name, other)).loss == {}
    assert run_scenario(with_layered_validation(build_preset(name))).loss == {}


# 9 -------------------------------------------------------------------------------------


@pytest.mark.criterion(9, "reports are byte-identical across repeated runs")
@pytest.mark.parametrize("name", PRESETS)
def test_criterion_09_determinism(name, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["run", "--preset", name, "--seed", "7", "--out", str(a)]) == 2
    assert main(["run", "--preset", name, "--seed", "7", "--out", str(b)]) == 2
    assert a.read_bytes() == b.read_bytes()


# 10 ------------------------------------------------------------------------------------


@pytest.mark.criterion(10, "trust classification of the three archetypes")
def test_criterion_10_trust_classification():
    trustless = trust_set_of(make_config(offchain=NativeConsensus(),
                                         source_mechanism=SourceMechanism.VALIDATOR_CONTROL,
                                         dest_mechanism=DestMechanism.VALIDATOR_CONTROL))
    assert trustless.classification is TrustClass.TRUSTLESS and trustless.size == 0
    assert trust_set_of(make_config()).classification is TrustClass.TRUSTED
    lc = trust_set_of(make_config(offchain=LightClientModel()))
    assert lc.classification is TrustClass.TRUST_MINIMIZED
