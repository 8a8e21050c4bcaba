from __future__ import annotations

import copy
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgesim.config import (
    canonical_json,
    config_digest,
    emit_config,
    load_config,
    parse_config,
)
from bridgesim.errors import ConfigInvalid
from bridgesim.presets import build_preset, preset_names, random_adversarial_scenario, random_honest_scenario
from bridgesim.surface import AttackVectorSpec

HONEST = Path(__file__).parent / "data" / "honest.json"


def _round_trip(scenario):
    return parse_config(json.loads(canonical_json(emit_config(scenario))))


@pytest.mark.parametrize("name", preset_names())
def test_presets_round_trip(name):
    s = build_preset(name)
    assert _round_trip(s) == s


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_random_scenarios_round_trip(seed):
    for s in (random_adversarial_scenario(seed), random_honest_scenario(seed)):
        assert _round_trip(s) == s


def test_custom_catalog_round_trips():
    s = build_preset("nomad_2022")
    s.catalog = [AttackVectorSpec("X1", "custom", impact=3), *s.catalog[::-1]]
    assert _round_trip(s).catalog == s.catalog
    s.catalog[1:] = s.catalog[1:][::-1]
    assert _round_trip(s).catalog == s.catalog


def test_honest_file_loads():
    s = load_config(HONEST)
    assert s.name == "honest_round_trip"
    assert s.honest_traffic[0].value == 400


def _doc():
    return json.loads(HONEST.read_text())


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["bridge"].update(colour="red"),
    lambda d: d["honest_traffic"][0].update(value=400),
    lambda d: d["honest_traffic"][0].update(value="4.5"),
    lambda d: d["bridge"]["prices"].update(TKN=1.5),
    lambda d: d["bridge"]["offchain"].update(m=5),
    lambda d: d["chains"][0].update(confirmation_delay=0),
    lambda d: d.update(injections=[{"vector_id": "V1", "trigger_at": 3}]),
    lambda d: d.update(injections=[{"vector_id": "V13", "trigger_at": 3, "params": {}}]),
    lambda d: d["chains"][0]["genesis"]["alice"].update(TKN=str(2**128)),
])
def test_bad_documents_are_rejected(mutate):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ConfigInvalid):
        parse_config(doc)


def test_base_preset_overlay():
    doc = {"base_preset": "ronin_2022", "defenses": {"breaker_cap": "10000", "breaker_token": "ETH"}}
    s = parse_config(doc)
    assert s.bridge.defenses.breaker_cap == 10_000
    assert s.bridge.offchain.m == 5


def test_digest_tracks_content():
    a = build_preset("omni_2022")
    b = copy.deepcopy(a)
    assert config_digest(a) == config_digest(b)
    b.horizon += 1
    assert config_digest(a) != config_digest(b)


def test_no_floats_in_emitted_documents():
    def walk(x):
        if isinstance(x, float):
            raise AssertionError(x)
        if isinstance(x, dict):
            for v in x.values():
                walk(v)
        if isinstance(x, list):
            for v in x:
                walk(v)
    for name in preset_names():
        walk(emit_config(build_preset(name)))
