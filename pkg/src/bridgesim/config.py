"""Scenario files: JSON in, JSON out.

Amounts are decimal strings of base units and prices or rates are
fraction strings ("3/2", "0.001"), so nothing in a file is a float.  A
file is validated against ``SCHEMA`` before anything is built from it.
"""

from __future__ import annotations

import copy
import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import jsonschema

from .adversary import AMOUNT_KEYS, PARAMS, Injection
from .bridge import (
    BridgeConfig,
    Defenses,
    DestMechanism,
    FeeSchedule,
    FeeTerm,
    FunctionalType,
    SourceMechanism,
)
from .chain import Provenance, check_amount
from .errors import BridgeSimError, ConfigInvalid
from .offchain import (
    BugFlag,
    HybridAnd,
    HybridOr,
    LightClientModel,
    NativeConsensus,
    NotarySet,
    SidechainModel,
)
from .scenario import ChainSpec, Expected, RandomTraffic, Scenario, TrafficItem
from .surface import AttackVectorSpec, Layer, default_catalog, merge_catalog

# Schema ------------------------------------------------------------------------------

_AMOUNT = {"type": "string", "pattern": "^(0|[1-9][0-9]*)$"}
_RATIO = {"type": "string", "pattern": "^[0-9]+(\\.[0-9]+)?(/[1-9][0-9]*)?$"}
_NAT = {"type": "integer", "minimum": 0}
_NAME = {"type": "string", "minLength": 1}
_DIRECTION = {"enum": ["forward", "reverse"]}
_FLAGS = {"type": "array", "items": {"enum": [f.value for f in BugFlag]}, "uniqueItems": True}
_LAYER = {"enum": [layer.value for layer in Layer]}


def _obj(props: Dict[str, Any], required: tuple = ()) -> Dict[str, Any]:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


def _map(value: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "object", "additionalProperties": value}


_FEE_TERM = _obj({"fixed": _AMOUNT, "rate": _RATIO})
_FEES = _obj({"f1": _FEE_TERM, "f2": _FEE_TERM, "f_star": _FEE_TERM,
              "min_cap": _AMOUNT, "max_cap": {"anyOf": [_AMOUNT, {"type": "null"}]}})

_MECHANISM = {
    "oneOf": [
        _obj({"type": {"const": "notary"}, "keys": {"type": "array", "items": _NAME, "minItems": 1},
              "m": {"type": "integer", "minimum": 1},
              "compromised": {"type": "array", "items": _NAME},
              "per_notary_cost": _AMOUNT, "delay": _NAT, "bug_flags": _FLAGS},
             ("type", "keys", "m")),
        _obj({"type": {"const": "light_client"}, "t_proof": _NAT, "bug_flags": _FLAGS,
              "cost": _AMOUNT}, ("type",)),
        _obj({"type": {"const": "sidechain"}, "consensus_honest": {"type": "boolean"},
              "relay_delay": _NAT, "cost": _AMOUNT}, ("type",)),
        _obj({"type": {"const": "native"}, "delay": _NAT}, ("type",)),
        _obj({"type": {"enum": ["hybrid_and", "hybrid_or"]},
              "left": {"$ref": "#/$defs/mechanism"}, "right": {"$ref": "#/$defs/mechanism"}},
             ("type", "left", "right")),
    ]
}

_BRIDGE = _obj({
    "source_chain_id": _NAME,
    "dest_chain_id": _NAME,
    "offchain": {"$ref": "#/$defs/mechanism"},
    "token_map": _map(_NAME),
    "prices": _map(_RATIO),
    "functional_type": {"enum": [f.value for f in FunctionalType]},
    "source_mechanism": {"enum": [f.value for f in SourceMechanism]},
    "dest_mechanism": {"enum": [f.value for f in DestMechanism]},
    "fees": _FEES,
    "reverse_fees": {"anyOf": [_FEES, {"type": "null"}]},
    "d_off": _NAT,
    "c1": _NAME,
    "c2": _NAME,
    "operator": _NAME,
    "lp_reserves": {"anyOf": [_obj({"source": _map(_AMOUNT), "dest": _map(_AMOUNT)}),
                              {"type": "null"}]},
    "replay_tracking": {"type": "boolean"},
    "price_oracle": {"type": "boolean"},
    "vulnerabilities": {"type": "array", "items": _NAME, "uniqueItems": True},
    "n_src_contracts": _NAT,
    "n_dest_contracts": _NAT,
}, ("source_chain_id", "dest_chain_id", "offchain", "token_map", "prices"))

_DEFENSES = _obj({
    "breaker_cap": {"anyOf": [_AMOUNT, {"type": "null"}]},
    "breaker_token": {"anyOf": [_NAME, {"type": "null"}]},
    "breaker_on_monitor_trip": {"type": "boolean"},
    "buffer_delay": _NAT,
    "challenge_period": _NAT,
    "honest_watcher_prob": _RATIO,
})

_FORGED = _obj({"token": _NAME, "value": _AMOUNT, "recipient": _NAME},
               ("token", "value", "recipient"))

_PARAM_SCHEMAS = {
    "forged": {"type": "array", "items": _FORGED},
    "direction": _DIRECTION,
    "copycats": {"type": "integer", "minimum": 1},
    "keeper_takeover": {"type": "boolean"},
    "claim_settled": {"type": "boolean"},
    "price_override": _map(_RATIO),
    "keys_compromised": _NAT,
    "replay_target_chain": {"anyOf": [_NAME, {"type": "null"}]},
    "count": {"type": "integer", "minimum": 1},
    "dos_delay": _NAT,
    "window": {"anyOf": [_NAT, {"type": "null"}]},
    "equivocators": _NAT,
    "reorg_depth": _NAT,
    "chain": {"enum": ["source", "dest"]},
    "withdrawal_cap_removed": {"type": "boolean"},
    "token": _NAME,
    "drain_value": {"anyOf": [_AMOUNT, {"const": "all"}]},
    "recipient": _NAME,
}
assert set(_PARAM_SCHEMAS) == {k for spec in PARAMS.values() for k in spec}

_INJECTION = _obj({
    "vector_id": {"enum": sorted(PARAMS)},
    "trigger_at": _NAT,
    "params": _obj(_PARAM_SCHEMAS),
    "provenance": {"enum": [Provenance.ADVERSARIAL.value, Provenance.FAULTY.value]},
    "layer": _LAYER,
}, ("vector_id", "trigger_at"))

_VECTOR = _obj({
    "id": _NAME,
    "name": _NAME,
    "layers": {"type": "array", "items": _LAYER, "uniqueItems": True},
    "daggers": {"type": "array", "items": _LAYER, "uniqueItems": True},
    "requires": {"anyOf": [_NAME, {"type": "null"}]},
    "impact": _RATIO,
    "effort": _RATIO,
    "executable": {"type": "boolean"},
    "other": {"type": "boolean"},
    "component": {"anyOf": [_NAME, {"type": "null"}]},
}, ("id", "name"))

_TRAFFIC = _obj({"from": _NAME, "to": _NAME, "value": _AMOUNT, "at": _NAT,
                 "direction": _DIRECTION, "token": {"anyOf": [_NAME, {"type": "null"}]}},
                ("from", "to", "value", "at"))

_RUN = _obj({
    "seed": {"type": "integer"},
    "horizon": {"type": "integer", "minimum": 1},
    "grace": {"anyOf": [_NAT, {"type": "null"}]},
    "catalog_base": {"enum": ["default", "empty"]},
    "random_traffic": {"anyOf": [{"type": "null"}, _obj({
        "count": _NAT, "users": {"type": "array", "items": _NAME, "minItems": 1},
        "max_value": _AMOUNT, "start": _NAT, "span": {"type": "integer", "minimum": 1},
        "reverse_share": {"type": "integer", "minimum": 0, "maximum": 100},
    }, ("count", "users", "max_value"))]},
})

_EXPECTED = _obj({"prior": {"enum": ["Peg", "Causality", "Consistency"]},
                  "classification": {"enum": ["Attack", "Failure"]},
                  "layer": _LAYER, "loss": _map(_AMOUNT), "citation": {"type": "string"}},
                 ("prior", "classification", "layer"))

SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"mechanism": _MECHANISM},
    **_obj({
        "name": _NAME,
        "base_preset": _NAME,
        "chains": {"type": "array", "minItems": 2, "items": _obj({
            "chain_id": _NAME, "confirmation_delay": {"type": "integer", "minimum": 1},
            "genesis": _map(_map(_AMOUNT)),
        }, ("chain_id",))},
        "bridge": _BRIDGE,
        "honest_traffic": {"type": "array", "items": _TRAFFIC},
        "injections": {"type": "array", "items": _INJECTION},
        "defenses": _DEFENSES,
        "vector_catalog": {"type": "array", "items": _VECTOR},
        "run": _RUN,
        "expected": {"anyOf": [_EXPECTED, {"type": "null"}]},
    }),
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


# Parsing -----------------------------------------------------------------------------


def _amount(text: str) -> int:
    value = int(text)
    check_amount(value)
    return value


def _ratio(text: str) -> Fraction:
    return Fraction(text)


def _term(doc: Dict[str, Any]) -> FeeTerm:
    return FeeTerm(_amount(doc.get("fixed", "0")), _ratio(doc.get("rate", "0")))


def _fees(doc: Optional[Dict[str, Any]]) -> Optional[FeeSchedule]:
    if doc is None:
        return None
    cap = doc.get("max_cap")
    return FeeSchedule(
        f1=_term(doc.get("f1", {})),
        f2=_term(doc.get("f2", {})),
        f_star=_term(doc.get("f_star", {})),
        min_cap=_amount(doc.get("min_cap", "0")),
        max_cap=None if cap is None else _amount(cap),
    )


def _mechanism(doc: Dict[str, Any]):
    kind = doc["type"]
    flags = frozenset(BugFlag(f) for f in doc.get("bug_flags", []))
    if kind == "notary":
        return NotarySet(
            keys=tuple(doc["keys"]),
            m=doc["m"],
            compromised=set(doc.get("compromised", [])),
            per_notary_cost=_amount(doc.get("per_notary_cost", "0")),
            delay=doc.get("delay", 0),
            bug_flags=flags,
        )
    if kind == "light_client":
        return LightClientModel(doc.get("t_proof", 1), flags, _amount(doc.get("cost", "0")))
    if kind == "sidechain":
        return SidechainModel(doc.get("consensus_honest", True), doc.get("relay_delay", 1),
                              _amount(doc.get("cost", "0")))
    if kind == "native":
        return NativeConsensus(doc.get("delay", 1))
    cls = HybridAnd if kind == "hybrid_and" else HybridOr
    return cls(_mechanism(doc["left"]), _mechanism(doc["right"]))


def _defenses(doc: Dict[str, Any]) -> Defenses:
    cap = doc.get("breaker_cap")
    return Defenses(
        breaker_cap=None if cap is None else _amount(cap),
        breaker_token=doc.get("breaker_token"),
        breaker_on_monitor_trip=doc.get("breaker_on_monitor_trip", False),
        buffer_delay=doc.get("buffer_delay", 0),
        challenge_period=doc.get("challenge_period", 0),
        honest_watcher_prob=_ratio(doc.get("honest_watcher_prob", "1")),
    )


def _bridge(doc: Dict[str, Any], defenses: Dict[str, Any]) -> BridgeConfig:
    reserves = doc.get("lp_reserves")
    if reserves is not None:
        reserves = {side: {t: _amount(a) for t, a in pool.items()}
                    for side, pool in reserves.items()}
    return BridgeConfig(
        source_chain_id=doc["source_chain_id"],
        dest_chain_id=doc["dest_chain_id"],
        offchain=_mechanism(doc["offchain"]),
        token_map=dict(doc["token_map"]),
        prices={t: _ratio(p) for t, p in doc["prices"].items()},
        functional_type=FunctionalType(doc.get("functional_type", "AssetLockMint")),
        source_mechanism=SourceMechanism(doc.get("source_mechanism", "SmartContract")),
        dest_mechanism=DestMechanism(doc.get("dest_mechanism", "SmartContract")),
        fees=_fees(doc.get("fees", {})),
        reverse_fees=_fees(doc.get("reverse_fees")),
        d_off=doc.get("d_off", 0),
        defenses=_defenses(defenses),
        c1=doc.get("c1", "c1"),
        c2=doc.get("c2", "c2"),
        operator=doc.get("operator", "operator"),
        lp_reserves=reserves,
        replay_tracking=doc.get("replay_tracking", True),
        price_oracle=doc.get("price_oracle", False),
        vulnerabilities=frozenset(doc.get("vulnerabilities", [])),
        n_src_contracts=doc.get("n_src_contracts", 1),
        n_dest_contracts=doc.get("n_dest_contracts", 1),
    )


def _params_in(params: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(params)
    for item in out.get("forged") or []:
        item["value"] = _amount(item["value"])
    if out.get("drain_value") not in (None, "all"):
        out["drain_value"] = _amount(out["drain_value"])
    if out.get("price_override") is not None:
        out["price_override"] = {t: _ratio(p) for t, p in out["price_override"].items()}
    return out


def _injection(doc: Dict[str, Any]) -> Injection:
    prov = doc.get("provenance")
    layer = doc.get("layer")
    return Injection(
        vector_id=doc["vector_id"],
        trigger_at=doc["trigger_at"],
        params=_params_in(doc.get("params", {})),
        provenance=None if prov is None else Provenance(prov),
        layer=None if layer is None else Layer(layer),
    )


def _vector(doc: Dict[str, Any]) -> AttackVectorSpec:
    return AttackVectorSpec(
        id=doc["id"],
        name=doc["name"],
        layers=frozenset(Layer(x) for x in doc.get("layers", [])),
        daggers=frozenset(Layer(x) for x in doc.get("daggers", [])),
        requires=doc.get("requires"),
        impact=_ratio(doc.get("impact", "0")),
        effort=_ratio(doc.get("effort", "1")),
        executable=doc.get("executable", False),
        other=doc.get("other", False),
        component=doc.get("component"),
    )


def _merge_base(doc: Dict[str, Any]) -> Dict[str, Any]:
    """Overlay a file on a preset: mapping sections merge, lists replace."""
    from .presets import build_preset

    base = emit_config(build_preset(doc["base_preset"]))
    for key, value in doc.items():
        if key == "base_preset":
            continue
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return base


def validate_document(doc: Any) -> None:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigInvalid(f"{where}: {first.message}")


def parse_config(doc: Dict[str, Any]) -> Scenario:
    """Validate a decoded scenario document and build the scenario."""
    validate_document(doc)
    if "base_preset" in doc:
        doc = _merge_base(doc)
        validate_document(doc)
    for key in ("name", "chains", "bridge"):
        if key not in doc:
            raise ConfigInvalid(f"missing section '{key}'")
    run = doc.get("run", {})
    try:
        chains = [
            ChainSpec(c["chain_id"], c.get("confirmation_delay", 1),
                      {addr: {t: _amount(a) for t, a in held.items()}
                       for addr, held in c.get("genesis", {}).items()})
            for c in doc["chains"]
        ]
        traffic = [
            TrafficItem(t["from"], t["to"], _amount(t["value"]), t["at"],
                        t.get("direction", "forward"), t.get("token"))
            for t in doc.get("honest_traffic", [])
        ]
        base = default_catalog() if run.get("catalog_base", "default") == "default" else []
        catalog = merge_catalog(base, [_vector(v) for v in doc.get("vector_catalog", [])])
        rt = run.get("random_traffic")
        random_traffic = None if rt is None else RandomTraffic(
            rt["count"], list(rt["users"]), _amount(rt["max_value"]), rt.get("start", 1),
            rt.get("span", 50), rt.get("reverse_share", 30))
        exp = doc.get("expected")
        expected = None if exp is None else Expected(
            exp["prior"], exp["classification"], exp["layer"],
            {t: _amount(a) for t, a in exp.get("loss", {}).items()}, exp.get("citation", ""))
        return Scenario(
            name=doc["name"],
            chains=chains,
            bridge=_bridge(doc["bridge"], doc.get("defenses", {})),
            honest_traffic=traffic,
            injections=[_injection(i) for i in doc.get("injections", [])],
            catalog=catalog,
            seed=run.get("seed", 0),
            horizon=run.get("horizon", 200),
            grace=run.get("grace"),
            random_traffic=random_traffic,
            expected=expected,
        )
    except ConfigInvalid:
        raise
    except (BridgeSimError, ValueError, KeyError) as exc:
        raise ConfigInvalid(f"{type(exc).__name__}: {exc}") from exc


def load_config(path: Union[str, Path]) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc)


# Emitting ----------------------------------------------------------------------------


def _term_out(term: FeeTerm) -> Dict[str, str]:
    return {"fixed": str(term.fixed), "rate": str(term.rate)}


def _fees_out(fees: Optional[FeeSchedule]) -> Optional[Dict[str, Any]]:
    if fees is None:
        return None
    return {
        "f1": _term_out(fees.f1),
        "f2": _term_out(fees.f2),
        "f_star": _term_out(fees.f_star),
        "min_cap": str(fees.min_cap),
        "max_cap": None if fees.max_cap is None else str(fees.max_cap),
    }


def _flags_out(flags) -> List[str]:
    return sorted(f.value for f in flags)


def _mechanism_out(mech) -> Dict[str, Any]:
    if isinstance(mech, NotarySet):
        return {"type": "notary", "keys": list(mech.keys), "m": mech.m,
                "compromised": sorted(mech.compromised),
                "per_notary_cost": str(mech.per_notary_cost), "delay": mech.delay,
                "bug_flags": _flags_out(mech.bug_flags)}
    if isinstance(mech, LightClientModel):
        return {"type": "light_client", "t_proof": mech.t_proof,
                "bug_flags": _flags_out(mech.bug_flags), "cost": str(mech.cost)}
    if isinstance(mech, SidechainModel):
        return {"type": "sidechain", "consensus_honest": mech.consensus_honest,
                "relay_delay": mech.relay_delay, "cost": str(mech.cost)}
    if isinstance(mech, NativeConsensus):
        return {"type": "native", "delay": mech.delay}
    kind = "hybrid_and" if isinstance(mech, HybridAnd) else "hybrid_or"
    return {"type": kind, "left": _mechanism_out(mech.left), "right": _mechanism_out(mech.right)}


def _bridge_out(cfg: BridgeConfig) -> Dict[str, Any]:
    reserves = cfg.lp_reserves
    if reserves is not None:
        reserves = {side: {t: str(a) for t, a in pool.items()} for side, pool in reserves.items()}
    return {
        "source_chain_id": cfg.source_chain_id,
        "dest_chain_id": cfg.dest_chain_id,
        "offchain": _mechanism_out(cfg.offchain),
        "token_map": dict(cfg.token_map),
        "prices": {t: str(p) for t, p in cfg.prices.items()},
        "functional_type": cfg.functional_type.value,
        "source_mechanism": cfg.source_mechanism.value,
        "dest_mechanism": cfg.dest_mechanism.value,
        "fees": _fees_out(cfg.fees),
        "reverse_fees": _fees_out(cfg.reverse_fees),
        "d_off": cfg.d_off,
        "c1": cfg.c1,
        "c2": cfg.c2,
        "operator": cfg.operator,
        "lp_reserves": reserves,
        "replay_tracking": cfg.replay_tracking,
        "price_oracle": cfg.price_oracle,
        "vulnerabilities": sorted(cfg.vulnerabilities),
        "n_src_contracts": cfg.n_src_contracts,
        "n_dest_contracts": cfg.n_dest_contracts,
    }


def _defenses_out(d: Defenses) -> Dict[str, Any]:
    return {
        "breaker_cap": None if d.breaker_cap is None else str(d.breaker_cap),
        "breaker_token": d.breaker_token,
        "breaker_on_monitor_trip": d.breaker_on_monitor_trip,
        "buffer_delay": d.buffer_delay,
        "challenge_period": d.challenge_period,
        "honest_watcher_prob": str(d.honest_watcher_prob),
    }


def _params_out(params: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(params)
    for item in out.get("forged") or []:
        item["value"] = str(item["value"])
    for key in AMOUNT_KEYS - {"value"}:
        if isinstance(out.get(key), int):
            out[key] = str(out[key])
    if out.get("price_override") is not None:
        out["price_override"] = {t: str(Fraction(p)) for t, p in out["price_override"].items()}
    return out


def _vector_out(v: AttackVectorSpec) -> Dict[str, Any]:
    return {
        "id": v.id,
        "name": v.name,
        "layers": sorted(x.value for x in v.layers),
        "daggers": sorted(x.value for x in v.daggers),
        "requires": v.requires,
        "impact": str(v.impact),
        "effort": str(v.effort),
        "executable": v.executable,
        "other": v.other,
        "component": v.component,
    }


def _catalog_out(catalog: List[AttackVectorSpec]) -> tuple:
    base = default_catalog()
    ids = [v.id for v in catalog]
    if ids[: len(base)] == [v.id for v in base]:
        overrides = [v for v, b in zip(catalog, base) if v != b] + catalog[len(base):]
        return "default", overrides
    return "empty", list(catalog)


def emit_config(scenario: Scenario) -> Dict[str, Any]:
    """Inverse of ``parse_config``: a plain JSON-ready document."""
    catalog_base, overrides = _catalog_out(scenario.catalog)
    rt = scenario.random_traffic
    exp = scenario.expected
    return {
        "name": scenario.name,
        "chains": [
            {"chain_id": c.chain_id, "confirmation_delay": c.confirmation_delay,
             "genesis": {addr: {t: str(a) for t, a in held.items()}
                         for addr, held in c.genesis.items()}}
            for c in scenario.chains
        ],
        "bridge": _bridge_out(scenario.bridge),
        "defenses": _defenses_out(scenario.bridge.defenses),
        "honest_traffic": [
            {"from": t.sender, "to": t.recipient, "value": str(t.value), "at": t.at,
             "direction": t.direction, "token": t.token}
            for t in scenario.honest_traffic
        ],
        "injections": [
            {"vector_id": i.vector_id, "trigger_at": i.trigger_at,
             "params": _params_out(i.params), "provenance": i.provenance.value,
             "layer": i.layer.value}
            for i in scenario.injections
        ],
        "vector_catalog": [_vector_out(v) for v in overrides],
        "run": {
            "seed": scenario.seed,
            "horizon": scenario.horizon,
            "grace": scenario.grace,
            "catalog_base": catalog_base,
            "random_traffic": None if rt is None else {
                "count": rt.count, "users": list(rt.users), "max_value": str(rt.max_value),
                "start": rt.start, "span": rt.span, "reverse_share": rt.reverse_share},
        },
        "expected": None if exp is None else {
            "prior": exp.prior, "classification": exp.classification, "layer": exp.layer,
            "loss": {t: str(a) for t, a in exp.loss.items()}, "citation": exp.citation},
    }


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def config_digest(scenario: Scenario) -> str:
    blob = json.dumps(emit_config(scenario), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()


def save_config(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(canonical_json(emit_config(scenario)))
