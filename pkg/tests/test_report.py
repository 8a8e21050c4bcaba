from __future__ import annotations

import json

from bridgesim.config import config_digest
from bridgesim.engine import run_scenario
from bridgesim.presets import build_preset
from bridgesim.report import emit_report, render_report

from conftest import transfer_scenario


def test_same_result_same_bytes(tmp_path):
    result = run_scenario(build_preset("nomad_2022"))
    emit_report(result, tmp_path / "a.json")
    emit_report(result, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_evidence_resolves_to_echoed_transactions():
    doc = json.loads(render_report(run_scenario(build_preset("ronin_2022"))))
    assert doc["violations"]
    for v in doc["violations"]:
        for ref in v["evidence"]:
            assert ref.startswith("aggregate:") or ref in doc["transactions"]


def test_empty_catalog_surface():
    s = transfer_scenario()
    s.catalog = []
    doc = json.loads(render_report(run_scenario(s)))
    assert set(doc["surface"]["areas"].values()) == {0}


def test_amounts_are_strings_and_digest_recorded():
    s = build_preset("bsc_token_hub_2022")
    doc = json.loads(render_report(run_scenario(s), config_digest(s)))
    assert doc["loss"] == {"BNB": "2000000"}
    assert doc["config_digest"].startswith("sha256:")
    assert doc["trust"] == {"classification": "TrustMinimized", "size": 4, "cost": "0"}
