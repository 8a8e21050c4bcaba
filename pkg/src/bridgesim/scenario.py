"""In-memory scenario description consumed by the simulation engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .bridge import FORWARD, REVERSE, BridgeConfig
from .errors import ConfigInvalid
from .surface import AttackVectorSpec, default_catalog


@dataclass
class ChainSpec:
    chain_id: str
    confirmation_delay: int = 1
    # address -> token -> amount credited before the run starts
    genesis: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # a zero delay would let a lock and its mint share a tick
        if self.confirmation_delay < 1:
            raise ConfigInvalid(f"{self.chain_id}: confirmation_delay must be >= 1")


@dataclass
class TrafficItem:
    sender: str
    recipient: str
    value: int
    at: int
    direction: str = FORWARD
    # token sent on the initiating chain; None picks the first bridged token
    token: Optional[str] = None

    def __post_init__(self) -> None:
        if self.direction not in (FORWARD, REVERSE):
            raise ConfigInvalid(f"unknown direction {self.direction!r}")
        if self.value <= 0 or self.at < 0:
            raise ConfigInvalid("traffic needs a positive value and a non-negative tick")


@dataclass
class RandomTraffic:
    """Seeded honest traffic: users move random amounts back and forth."""

    count: int
    users: List[str]
    max_value: int
    start: int = 1
    span: int = 50
    reverse_share: int = 30  # percent of transfers that go back

    def __post_init__(self) -> None:
        if self.count < 0 or self.max_value < 1 or not self.users or self.span < 1:
            raise ConfigInvalid("bad random traffic parameters")
        if not 0 <= self.reverse_share <= 100:
            raise ConfigInvalid("reverse_share is a percentage")


@dataclass
class Expected:
    prior: str
    classification: str
    layer: str
    loss: Dict[str, int] = field(default_factory=dict)
    citation: str = ""


@dataclass
class Scenario:
    name: str
    chains: List[ChainSpec]
    bridge: BridgeConfig
    honest_traffic: List[TrafficItem] = field(default_factory=list)
    injections: list = field(default_factory=list)
    catalog: List[AttackVectorSpec] = field(default_factory=default_catalog)
    seed: int = 0
    horizon: int = 200
    grace: Optional[int] = None
    random_traffic: Optional[RandomTraffic] = None
    expected: Optional[Expected] = None

    def __post_init__(self) -> None:
        ids = [c.chain_id for c in self.chains]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("duplicate chain ids")
        for needed in (self.bridge.source_chain_id, self.bridge.dest_chain_id):
            if needed not in ids:
                raise ConfigInvalid(f"bridge refers to unknown chain {needed}")
        if self.horizon <= 0:
            raise ConfigInvalid("horizon must be positive")
