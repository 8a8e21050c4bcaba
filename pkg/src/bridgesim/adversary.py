"""Executable attack and fault injections.

Each injection is an event in the run's queue.  Its effect is deterministic
and only succeeds when the targeted weakness exists in the configuration
(compromised quorum, verifier flag, missing replay protection, ...), so the
same injection against a sound bridge must leave no trace.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Dict, List, Optional

from .bridge import FORWARD, REVERSE
from .chain import BridgeEvent, Provenance, Transaction, TxKind
from .errors import MissingParams, VectorNotExecutable
from .offchain import (
    Attestation,
    HybridAnd,
    HybridOr,
    NotarySet,
    ProofKind,
    SidechainModel,
    notary_sets,
)
from .surface import EXECUTABLE, Layer, default_catalog

if TYPE_CHECKING:
    from .engine import Simulation

# parameter name -> (required, default); "forged" items are {token, value, recipient}
PARAMS: Dict[str, Dict[str, tuple]] = {
    "V3": {"forged": (True, None)},
    "V8": {"forged": (True, None), "direction": (False, FORWARD), "copycats": (False, 1)},
    "V9": {"forged": (True, None), "direction": (False, FORWARD),
           "keeper_takeover": (False, False), "claim_settled": (False, False)},
    "V10": {"forged": (True, None), "direction": (False, FORWARD), "copycats": (False, 1)},
    "V11": {"price_override": (True, None)},
    "V12": {"keys_compromised": (True, None), "forged": (True, None),
            "direction": (False, FORWARD)},
    "V13": {"keys_compromised": (True, None), "forged": (True, None),
            "direction": (False, FORWARD)},
    "V15": {"direction": (False, FORWARD), "replay_target_chain": (False, None),
            "count": (False, 1)},
    "V17": {"dos_delay": (True, None), "window": (False, None)},
    "V18": {"equivocators": (True, None), "forged": (True, None),
            "direction": (False, FORWARD)},
    "V19": {"dos_delay": (True, None), "window": (False, None)},
    "V20": {"reorg_depth": (True, None), "chain": (False, "source")},
    "V21": {"withdrawal_cap_removed": (False, True)},
    "V22": {"token": (True, None), "drain_value": (False, "all"),
            "recipient": (False, "rugpuller")},
}

# keys whose values are amounts (decimal strings in files)
AMOUNT_KEYS = frozenset({"value", "drain_value"})

_LAYERS = {v.id: v.layers for v in default_catalog()}


def default_provenance(vector_id: str) -> Provenance:
    # stalls are modelled as faults unless a scenario says otherwise
    if vector_id in ("V17", "V19"):
        return Provenance.FAULTY
    return Provenance.ADVERSARIAL


@dataclass
class Injection:
    vector_id: str
    trigger_at: int
    params: Dict[str, Any] = field(default_factory=dict)
    provenance: Optional[Provenance] = None
    layer: Optional[Layer] = None
    # assigned by the engine in scenario order
    id: str = ""

    def __post_init__(self) -> None:
        if self.vector_id not in EXECUTABLE:
            raise VectorNotExecutable(self.vector_id)
        spec = PARAMS[self.vector_id]
        unknown = set(self.params) - set(spec)
        if unknown:
            raise MissingParams(f"{self.vector_id}: unknown params {sorted(unknown)}")
        for name, (required, default) in spec.items():
            if name not in self.params:
                if required:
                    raise MissingParams(f"{self.vector_id} needs '{name}'")
                self.params[name] = default
        for item in self.params.get("forged") or []:
            if set(item) != {"token", "value", "recipient"}:
                raise MissingParams(f"{self.vector_id}: forged items need token, value, recipient")
        if self.params.get("forged") == []:
            raise MissingParams(f"{self.vector_id}: forged list is empty")
        if self.params.get("direction") not in (None, FORWARD, REVERSE):
            raise MissingParams(f"bad direction {self.params['direction']!r}")
        if self.provenance is None:
            self.provenance = default_provenance(self.vector_id)
        if self.provenance is Provenance.HONEST:
            raise MissingParams("injections are adversarial or faulty")
        if self.layer is None:
            self.layer = next(l for l in (Layer.SOURCE, Layer.OFFCHAIN, Layer.DEST)
                              if l in _LAYERS[self.vector_id])
        elif self.layer not in _LAYERS[self.vector_id]:
            raise MissingParams(f"{self.vector_id} does not act on the {self.layer.value} layer")
        if self.trigger_at < 0:
            raise MissingParams("trigger tick must be non-negative")


# Effects ----------------------------------------------------------------------------


def _compromise(mech, count: int) -> None:
    for ns in notary_sets(mech):
        ns.compromised.update(sorted(ns.keys)[: max(0, count)])


def _sidechains(mech) -> List[SidechainModel]:
    if isinstance(mech, SidechainModel):
        return [mech]
    if isinstance(mech, (HybridAnd, HybridOr)):
        return _sidechains(mech.left) + _sidechains(mech.right)
    return []


def _forge(sim: "Simulation", inj: Injection, item: dict, direction: str,
           transfer_id: Optional[str] = None, recipient: Optional[str] = None) -> Attestation:
    cfg = sim.cfg
    out_token = item["token"]
    if direction == FORWARD:
        token = cfg.inverse_token_map[out_token]
    else:
        token = cfg.token_map[out_token]
    _, settle_chain = cfg.chains_for(direction)
    signers = frozenset(k for ns in notary_sets(sim.bridge.mechanism) for k in ns.compromised)
    return Attestation(
        transfer_id=transfer_id or sim.forged_id(inj),
        claimed_value=item["value"],
        claimed_recipient=recipient or item["recipient"],
        token=token,
        direction=direction,
        signers=signers,
        proof=ProofKind.FABRICATED,
        chain_binding=settle_chain,
        issued_at=sim.now,
        provenance=inj.provenance,
        cause=inj.id,
    )


def inject(sim: "Simulation", inj: Injection) -> None:
    """Apply ``inj`` to the running simulation at the current tick."""
    handler = _HANDLERS[inj.vector_id]
    handler(sim, inj)


def _key_compromise(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    _compromise(sim.bridge.mechanism, p["keys_compromised"])
    for item in p["forged"]:
        sim.submit_attestation(_forge(sim, inj, item, p["direction"]))


def _fake_proof(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    for item in p["forged"]:
        for k in range(p["copycats"]):
            recipient = item["recipient"] if p["copycats"] == 1 else f"{item['recipient']}-{k + 1}"
            sim.submit_attestation(_forge(sim, inj, item, p["direction"], recipient=recipient))


def _tx_modification(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    mech = sim.bridge.mechanism
    if p["keeper_takeover"] and "unchecked_external_call" in sim.cfg.vulnerabilities:
        # the privileged call rewrites the keeper set to attacker keys
        for i, ns in enumerate(notary_sets(mech)):
            ns.keys = tuple(f"keeper-{i}-{j}" for j in range(len(ns.keys)))
            ns.compromised = set(ns.keys)
    for item in p["forged"]:
        claimed = None
        if p["claim_settled"]:
            done = sim.settled_attestations(p["direction"])
            claimed = done[-1].transfer_id if done else None
        sim.submit_attestation(_forge(sim, inj, item, p["direction"], transfer_id=claimed))


def _unchecked_deposit(sim: "Simulation", inj: Injection) -> None:
    cfg = sim.cfg
    if "unchecked_deposit" not in cfg.vulnerabilities:
        return
    for item in inj.params["forged"]:
        token = cfg.inverse_token_map[item["token"]]
        # the deposit call logs a transfer without moving any collateral
        event = BridgeEvent(
            transfer_id=sim.forged_id(inj),
            token=token,
            value=item["value"],
            sender="attacker",
            recipient=item["recipient"],
            dest_chain=cfg.dest_chain_id,
            direction=FORWARD,
            timestamp=sim.now,
            backing_tx_id=None,
            provenance=inj.provenance,
            cause=inj.id,
        )
        sim.track_deposit_event(event)


def _oracle(sim: "Simulation", inj: Injection) -> None:
    if not sim.cfg.price_oracle:
        return
    for token, price in sorted(inj.params["price_override"].items()):
        sim.bridge.observed_prices[token] = Fraction(price)


def _replay(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    done = sim.settled_attestations(p["direction"])
    if not done:
        return
    target = done[-1]
    binding = p["replay_target_chain"] or target.chain_binding
    for _ in range(p["count"]):
        sim.submit_attestation(
            dataclasses.replace(target, chain_binding=binding, issued_at=sim.now,
                                provenance=inj.provenance, cause=inj.id)
        )


def _dos(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    window = p["window"] if p["window"] is not None else p["dos_delay"]
    sim.start_dos(inj, sim.now + window, p["dos_delay"])


def _equivocate(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    mech = sim.bridge.mechanism
    sidechains = _sidechains(mech)
    if not notary_sets(mech) and not sidechains:
        return
    done = sim.settled_attestations(p["direction"])
    if not done:
        return
    _compromise(mech, p["equivocators"])
    for sc in sidechains:
        sc.consensus_honest = False
    item = p["forged"][0]
    sim.submit_attestation(_forge(sim, inj, item, p["direction"], transfer_id=done[-1].transfer_id))


def _reorg(sim: "Simulation", inj: Injection) -> None:
    p = inj.params
    chain = sim.cfg.source_chain_id if p["chain"] == "source" else sim.cfg.dest_chain_id
    depth = min(p["reorg_depth"], len(sim.chains[chain].history))
    sim.rollback(chain, depth, inj)


def _remove_caps(sim: "Simulation", inj: Injection) -> None:
    if inj.params["withdrawal_cap_removed"]:
        sim.bridge.defenses.breaker_cap = None


def _rugpull(sim: "Simulation", inj: Injection) -> None:
    cfg = sim.cfg
    if not cfg.has_custodian:
        return
    p = inj.params
    held = sim.chains[cfg.source_chain_id].balance_of(cfg.c1, p["token"])
    amount = held if p["drain_value"] == "all" else min(held, p["drain_value"])
    if amount <= 0:
        return
    tx = Transaction(p["token"], amount, cfg.c1, p["recipient"], sim.now, TxKind.RELEASE,
                     None, inj.provenance, inj.id)
    sim.commit(cfg.source_chain_id, tx)


_HANDLERS = {
    "V3": _unchecked_deposit,
    "V8": _fake_proof,
    "V9": _tx_modification,
    "V10": _fake_proof,
    "V11": _oracle,
    "V12": _key_compromise,
    "V13": _key_compromise,
    "V15": _replay,
    "V17": _dos,
    "V18": _equivocate,
    "V19": _dos,
    "V20": _reorg,
    "V21": _remove_caps,
    "V22": _rugpull,
}
