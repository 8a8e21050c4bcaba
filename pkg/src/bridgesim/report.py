"""Canonical JSON run reports.

Keys are sorted and every amount is a decimal string, so serialising the
same result twice gives the same bytes.  Evidence ids in ``violations``
resolve against the ``transactions`` section.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional, Union

from .chain import Transaction
from .config import canonical_json
from .engine import RunResult
from .monitors import PriorViolation
from .surface import Layer

REPORT_VERSION = 1


def _tx(tx: Transaction) -> Dict[str, Any]:
    return {
        "chain": tx.chain_id,
        "kind": tx.kind.value,
        "token": tx.token,
        "value": str(tx.value),
        "sender": tx.sender,
        "recipient": tx.recipient,
        "timestamp": tx.timestamp,
        "transfer_id": tx.transfer_id,
        "provenance": tx.provenance.value,
        "cause": tx.cause,
    }


def _violation(v: PriorViolation) -> Dict[str, Any]:
    return {
        "prior": v.prior.value,
        "sub_rule": v.sub_rule.value,
        "tick": v.detected_at,
        "classification": v.classification.value,
        "evidence": list(v.evidence),
        "detail": v.detail,
    }


def _amounts(d: Dict[str, int]) -> Dict[str, str]:
    return {k: str(v) for k, v in sorted(d.items())}


def report_dict(result: RunResult, digest: Optional[str] = None) -> Dict[str, Any]:
    surface = result.surface
    evidence = sorted({ref for v in result.violations for ref in v.evidence
                       if ref in result.trace.txs})
    return {
        "version": REPORT_VERSION,
        "scenario": result.scenario,
        "config_digest": digest,
        "seed": result.seed,
        "horizon": result.horizon,
        "violations": [_violation(v) for v in result.violations],
        "primary": None if result.primary is None else _violation(result.primary),
        "attack_layer": result.attack_layer,
        "loss": _amounts(result.loss),
        "loss_delta": None if result.loss_delta is None else {
            k: str(v) for k, v in sorted(result.loss_delta.items())},
        "detection_latency": result.detection_latency,
        "halted": result.halted,
        "surface": {
            "areas": {
                Layer.SOURCE.value: surface.area_src,
                Layer.OFFCHAIN.value: surface.area_off,
                Layer.DEST.value: surface.area_dest,
                "other": surface.area_other,
                "total": surface.area_total,
            },
            "layer_vectors": {layer.value: list(ids)
                              for layer, ids in surface.layer_vectors.items()},
            "vectors": {vid: {"der": str(ratio), "viable": flag}
                        for vid, (ratio, flag) in sorted(surface.der.items())},
            "counting": surface.counting,
        },
        "trust": {
            "classification": result.trust.classification.value,
            "size": result.trust.size,
            "cost": str(result.trust.cost),
        },
        "transfers": {
            r.transfer_id: {"direction": r.direction, "status": r.status.value,
                            "value": str(r.v_x), "token": r.token}
            for r in sorted(result.records, key=lambda r: r.transfer_id)
        },
        "rejected": [list(x) for x in result.rejected],
        "transactions": {ref: _tx(result.trace.txs[ref]) for ref in evidence},
        "final_balances": {
            chain: {addr: _amounts(held) for addr, held in sorted(per.items())}
            for chain, per in sorted(result.final_balances.items())
        },
    }


def render_report(result: RunResult, digest: Optional[str] = None) -> str:
    return canonical_json(report_dict(result, digest))


def emit_report(result: RunResult, path: Union[str, Path], digest: Optional[str] = None) -> None:
    Path(path).write_text(render_report(result, digest))
