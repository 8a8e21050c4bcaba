from __future__ import annotations

import pytest

from bridgesim.adversary import Injection
from bridgesim.chain import Provenance
from bridgesim.engine import run_scenario
from bridgesim.errors import MissingParams, UnknownPreset, VectorNotExecutable
from bridgesim.monitors import Prior
from bridgesim.offchain import BugFlag, LightClientModel, NotarySet
from bridgesim.presets import PRESETS, build_preset, preset_names
from bridgesim.scenario import TrafficItem
from bridgesim.surface import Layer

from conftest import notary, transfer_scenario


def forged(value=500, token="TKN.b"):
    return [{"token": token, "value": value, "recipient": "mallory"}]


def test_quorum_of_stolen_keys_mints():
    s = build_preset("ronin_2022")
    result = run_scenario(s)
    accepted = [r for r in result.records if r.initiator is None and r.status.value == "Completed"]
    assert len(accepted) == 2
    assert result.final_balances["ethereum"]["attacker"] == {"ETH": 173_600, "USDC": 25_500_000}


def test_fake_proof_against_sound_light_client():
    s = transfer_scenario(offchain=LightClientModel(t_proof=2))
    s.injections = [Injection("V8", 20, {"forged": forged()}, layer=Layer.DEST)]
    result = run_scenario(s)
    assert result.violations == []
    assert result.loss == {}
    assert any(kind == "verify" for _, kind, _ in result.rejected)


def test_replay_on_unbound_notary_double_releases():
    s = transfer_scenario(back=40, offchain=notary(bug_flags=frozenset({BugFlag.NO_CHAIN_ID_BINDING})))
    # someone else's deposit keeps collateral in custody
    s.chains[0].genesis["a3"] = {"TKN": 100}
    s.honest_traffic.append(TrafficItem("a3", "a4", 60, 2))
    s.injections = [Injection("V15", 60, {"direction": "reverse", "replay_target_chain": "fork"},
                              layer=Layer.DEST)]
    result = run_scenario(s)
    assert result.loss == {"TKN": 40}
    assert Prior.CONSISTENCY in result.priors


def test_replay_on_bound_notary_is_refused():
    s = transfer_scenario(back=40)
    s.injections = [Injection("V15", 60, {"direction": "reverse", "replay_target_chain": "fork"},
                              layer=Layer.DEST)]
    result = run_scenario(s)
    assert result.loss == {} and result.violations == []


def test_injection_validation():
    with pytest.raises(VectorNotExecutable):
        Injection("V1", 5)
    with pytest.raises(MissingParams):
        Injection("V13", 5, {"forged": forged()})
    with pytest.raises(MissingParams):
        Injection("V13", 5, {"keys_compromised": 1, "forged": forged(), "bogus": 1})
    with pytest.raises(MissingParams):
        Injection("V15", 5, {}, layer=Layer.SOURCE)
    with pytest.raises(MissingParams):
        Injection("V8", 5, {"forged": forged()}, provenance=Provenance.HONEST)


def test_default_provenance():
    assert Injection("V19", 5, {"dos_delay": 3}).provenance is Provenance.FAULTY
    assert Injection("V20", 5, {"reorg_depth": 1}).provenance is Provenance.ADVERSARIAL


def test_ronin_preset_shape():
    s = build_preset("ronin_2022")
    assert isinstance(s.bridge.offchain, NotarySet)
    assert (s.bridge.offchain.n, s.bridge.offchain.m) == (9, 5)
    assert s.injections[0].trigger_at == 100
    assert s.expected.loss == {"ETH": 173_600, "USDC": 25_500_000}


def test_harmony_quorum():
    mech = build_preset("harmony_2022").bridge.offchain
    assert (mech.m, mech.n) == (2, 5)


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        build_preset("nonexistent")


def test_preset_list():
    assert len(preset_names()) == 9 == len(PRESETS)
    assert preset_names()[0] == "ronin_2022" and preset_names()[-1] == "multichain_2023"


def test_short_stall_only_delays():
    s = transfer_scenario()
    s.injections = [Injection("V19", 0, {"dos_delay": 5}, layer=Layer.OFFCHAIN)]
    result = run_scenario(s)
    assert result.loss == {} and result.violations == []
    assert result.records[0].t_attested >= 5


def test_long_stall_is_a_stale_lock_failure():
    s = transfer_scenario()
    s.injections = [Injection("V19", 0, {"dos_delay": 30}, layer=Layer.OFFCHAIN)]
    result = run_scenario(s)
    assert result.loss == {}
    assert result.primary.detail == "stale_lock"
    assert {v.classification.value for v in result.violations} == {"Failure"}


def test_presets_do_not_share_state():
    a, b = build_preset("ronin_2022"), build_preset("ronin_2022")
    run_scenario(a)
    assert a == b
    assert not a.bridge.offchain.compromised
