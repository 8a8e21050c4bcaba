"""Attack-surface calculus: damage/effort ratios, viability and per-layer area.

A vector is viable when its damage-to-effort ratio is strictly above one;
a layer's area counts viable surfaces.  Structural surfaces (deployed
contracts, a custodian, a light client, sidechain consensus) are catalog
entries with a ``component`` tag; the rest are the 23 taxonomy vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .bridge import BridgeConfig, SourceMechanism, trust_set_of
from .errors import UnknownLayer, ZeroEffort
from .offchain import (
    HybridAnd,
    HybridOr,
    LightClientModel,
    NativeConsensus,
    NotarySet,
    OffchainMechanism,
    SidechainModel,
)


class Layer(str, enum.Enum):
    SOURCE = "source"
    OFFCHAIN = "offchain"
    DEST = "destination"


LAYER_ORDER = (Layer.SOURCE, Layer.OFFCHAIN, Layer.DEST)

# structural component tags
SRC_CONTRACT = "src_contract"
DEST_CONTRACT = "dest_contract"
CUSTODIAN = "custodian"
LIGHT_CLIENT = "light_client"
SIDECHAIN_CONSENSUS = "sidechain_consensus"
COMPONENTS = (SRC_CONTRACT, DEST_CONTRACT, CUSTODIAN, LIGHT_CLIENT, SIDECHAIN_CONSENSUS)

# what a conditional vector needs to exist on a daggered layer
REQUIREMENTS = ("oracle", "custodian", "keys", "validators")

EXECUTABLE = frozenset(
    {"V3", "V8", "V9", "V10", "V11", "V12", "V13", "V15", "V17", "V18", "V19", "V20",
     "V21", "V22"}
)


@dataclass(frozen=True)
class AttackVectorSpec:
    id: str
    name: str
    layers: FrozenSet[Layer] = frozenset()
    # layers on which the vector only applies when ``requires`` is present
    daggers: FrozenSet[Layer] = frozenset()
    requires: Optional[str] = None
    impact: Fraction = Fraction(0)
    effort: Fraction = Fraction(1)
    executable: bool = False
    # counted once in the "other" area instead of per layer
    other: bool = False
    component: Optional[str] = None

    def __post_init__(self) -> None:
        if self.impact < 0:
            raise ValueError(f"{self.id}: impact must be non-negative")
        if not self.daggers <= self.layers:
            raise ValueError(f"{self.id}: daggered layers must be flagged layers")
        if self.requires is not None and self.requires not in REQUIREMENTS:
            raise ValueError(f"{self.id}: unknown requirement {self.requires}")
        if self.component is not None and self.component not in COMPONENTS:
            raise ValueError(f"{self.id}: unknown component {self.component}")

    @property
    def conditional(self) -> bool:
        return bool(self.daggers)


def damage_effort_ratio(v: AttackVectorSpec) -> Tuple[Fraction, int]:
    if v.effort <= 0:
        raise ZeroEffort(v.id)
    ratio = Fraction(v.impact) / Fraction(v.effort)
    return ratio, int(ratio > 1)


def viable(v: AttackVectorSpec) -> int:
    return damage_effort_ratio(v)[1]


# Catalog -------------------------------------------------------------------------

_S, _O, _D = Layer.SOURCE, Layer.OFFCHAIN, Layer.DEST
_ALL = frozenset(LAYER_ORDER)
_SD = frozenset({_S, _D})

# (id, name, layers, daggers, requirement, illustrative impact in USD)
# Impact is the largest documented incident loss for the vector, 0 if none.
_TAXONOMY = [
    ("V1", "Reentrancy", _SD, frozenset(), None, 0),
    ("V2", "Integer overflow/underflow", _SD, frozenset(), None, 9_730_000),
    ("V3", "Access control and forged account", _SD, frozenset(), None, 80_000_000),
    ("V4", "Race condition", _SD, frozenset(), None, 12_000_000),
    ("V5", "Unsafe external call", _SD, frozenset(), None, 2_000_000),
    ("V6", "Event log manipulation", _SD, frozenset(), None, 13_000_000),
    ("V7", "Upgrade vulnerability", _SD, frozenset(), None, 4_300_000),
    ("V8", "Fake burn/lock proofs", _ALL, frozenset(), None, 0),
    ("V9", "Malicious transaction modification", _ALL, frozenset(), None, 611_000_000),
    ("V10", "Light-client verification flaws", _ALL, frozenset(), None, 190_000_000),
    ("V11", "Oracle manipulation", _ALL, _SD, "oracle", 0),
    ("V12", "Malicious custodian manipulation", _ALL, _SD, "custodian", 326_000_000),
    ("V13", "Private key leakage or theft", _ALL, _ALL, "keys", 624_000_000),
    ("V14", "Timestamp manipulation", _SD, frozenset(), None, 0),
    ("V15", "Replay attacks", frozenset({_O, _D}), frozenset(), None, 290_000),
    ("V16", "Consensus 51% attack", _SD, frozenset(), None, 0),
    ("V17", "Delayed finality", _SD, frozenset(), None, 0),
    ("V18", "Validator equivocation", _ALL, _SD, "validators", 0),
    ("V19", "Denial of service", _ALL, frozenset(), None, 0),
    ("V20", "Deep chain reorganization", _SD, frozenset(), None, 0),
    ("V21", "Unbounded withdrawal limits", _SD, frozenset(), None, 0),
    ("V22", "Rugpull", frozenset({_O, _D}), frozenset({_D}), "custodian", 0),
    ("V23", "Front-end deception", frozenset({_O}), frozenset(), None, 240_000),
]


def default_catalog() -> List[AttackVectorSpec]:
    """The full taxonomy with illustrative placeholder scores (effort 1)."""
    return [
        AttackVectorSpec(
            id=vid,
            name=name,
            layers=layers,
            daggers=daggers,
            requires=req,
            impact=Fraction(impact),
            effort=Fraction(1),
            executable=vid in EXECUTABLE,
        )
        for vid, name, layers, daggers, req, impact in _TAXONOMY
    ]


def merge_catalog(
    base: Sequence[AttackVectorSpec], overrides: Sequence[AttackVectorSpec]
) -> List[AttackVectorSpec]:
    """Replace entries by id; new ids are appended in override order."""
    merged: Dict[str, AttackVectorSpec] = {v.id: v for v in base}
    for v in overrides:
        merged[v.id] = v
    return list(merged.values())


# Area ----------------------------------------------------------------------------


def _has(cfg: BridgeConfig, requirement: Optional[str]) -> bool:
    if requirement is None:
        return True
    mech = cfg.offchain
    if requirement == "oracle":
        return cfg.price_oracle
    if requirement == "custodian":
        return cfg.has_custodian
    if requirement == "keys":
        return cfg.has_custodian or _contains(mech, NotarySet)
    if requirement == "validators":
        # only validators that sit in the trust set; a chain's own consensus is not one
        return _contains(mech, NotarySet) or _contains(mech, SidechainModel)
    raise ValueError(requirement)


def _contains(mech: OffchainMechanism, kind: type) -> bool:
    if isinstance(mech, (HybridAnd, HybridOr)):
        return _contains(mech.left, kind) or _contains(mech.right, kind)
    return isinstance(mech, kind)


def _applies(cfg: BridgeConfig, layer: Layer, v: AttackVectorSpec) -> bool:
    if v.component is not None or v.other or layer not in v.layers:
        return False
    return layer not in v.daggers or _has(cfg, v.requires)


def _components(catalog: Sequence[AttackVectorSpec], tag: str) -> List[AttackVectorSpec]:
    return [v for v in catalog if v.component == tag]


def _offchain_terms(
    mech: OffchainMechanism, cfg: BridgeConfig, catalog: Sequence[AttackVectorSpec]
) -> List[AttackVectorSpec]:
    if isinstance(mech, NotarySet):
        return [v for v in catalog if _applies(cfg, Layer.OFFCHAIN, v)]
    if isinstance(mech, LightClientModel):
        return _components(catalog, LIGHT_CLIENT)[:1]
    if isinstance(mech, SidechainModel):
        return _components(catalog, SIDECHAIN_CONSENSUS)[:1]
    if isinstance(mech, NativeConsensus):
        return []
    if isinstance(mech, (HybridAnd, HybridOr)):
        left = _offchain_terms(mech.left, cfg, catalog)
        ids = {v.id for v in left}
        return left + [v for v in _offchain_terms(mech.right, cfg, catalog) if v.id not in ids]
    raise TypeError(f"unknown mechanism {mech!r}")


def layer_terms(
    cfg: BridgeConfig, layer: Layer, catalog: Sequence[AttackVectorSpec]
) -> List[AttackVectorSpec]:
    """The surfaces that a layer's area sums over, structural ones first."""
    if not isinstance(layer, Layer):
        try:
            layer = Layer(layer)
        except ValueError:
            raise UnknownLayer(str(layer)) from None
    if layer is Layer.SOURCE:
        n = 0 if cfg.source_mechanism is SourceMechanism.VALIDATOR_CONTROL else cfg.n_src_contracts
        terms = _components(catalog, SRC_CONTRACT)[:n]
        return terms + [v for v in catalog if _applies(cfg, layer, v)]
    if layer is Layer.OFFCHAIN:
        return _offchain_terms(cfg.offchain, cfg, catalog)
    terms = _components(catalog, DEST_CONTRACT)[: cfg.n_dest_contracts]
    if cfg.has_custodian:
        terms += _components(catalog, CUSTODIAN)[:1]
    return terms + [v for v in catalog if _applies(cfg, layer, v)]


def layer_area(cfg: BridgeConfig, layer: Layer, catalog: Sequence[AttackVectorSpec]) -> int:
    return sum(viable(v) for v in layer_terms(cfg, layer, catalog))


# Qualitative relations reported as text; their constants are unknown.
ANNOTATIONS = (
    "E(C) ~ 1/Size(N)",
    "F ~ t_proof",
    "D ~ t_proof",
    "F ~ Size(N)",
    "F ~ cost(N)",
)

COUNTING_NOTE = "a vector spanning several layers is counted once per layer it applies to"


@dataclass
class SurfaceReport:
    layer_vectors: Dict[Layer, List[str]]
    der: Dict[str, Tuple[Fraction, int]]
    area_src: int
    area_off: int
    area_dest: int
    area_other: int
    trust: str
    trust_size: int
    trust_cost: int
    other_vectors: List[str] = field(default_factory=list)
    annotations: Tuple[str, ...] = ANNOTATIONS
    counting: str = COUNTING_NOTE

    @property
    def area_total(self) -> int:
        return self.area_src + self.area_off + self.area_dest + self.area_other

    def area(self, layer: Layer) -> int:
        return {Layer.SOURCE: self.area_src, Layer.OFFCHAIN: self.area_off,
                Layer.DEST: self.area_dest}[layer]


def total_area(cfg: BridgeConfig, catalog: Sequence[AttackVectorSpec]) -> SurfaceReport:
    # later entries with the same id replace earlier ones
    catalog = merge_catalog([], catalog)
    per_layer = {layer: layer_terms(cfg, layer, catalog) for layer in LAYER_ORDER}
    other = [v for v in catalog if v.other]
    der = {}
    for terms in list(per_layer.values()) + [other]:
        for v in terms:
            der[v.id] = damage_effort_ratio(v)
    trust = trust_set_of(cfg)
    return SurfaceReport(
        layer_vectors={layer: [v.id for v in terms] for layer, terms in per_layer.items()},
        der=der,
        area_src=sum(viable(v) for v in per_layer[Layer.SOURCE]),
        area_off=sum(viable(v) for v in per_layer[Layer.OFFCHAIN]),
        area_dest=sum(viable(v) for v in per_layer[Layer.DEST]),
        area_other=sum(viable(v) for v in other),
        trust=trust.classification.value,
        trust_size=trust.size,
        trust_cost=trust.cost,
        other_vectors=[v.id for v in other],
    )


def applicable_layers(
    cfg: BridgeConfig, v: AttackVectorSpec, catalog: Sequence[AttackVectorSpec] = ()
) -> List[Layer]:
    """Layers whose area would include ``v`` if it were added to ``catalog``."""
    merged = merge_catalog(catalog, [v])
    return [layer for layer in LAYER_ORDER
            if any(t.id == v.id for t in layer_terms(cfg, layer, merged))]
