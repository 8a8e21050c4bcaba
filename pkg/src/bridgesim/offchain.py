"""Off-chain validation mechanisms and trust-set bookkeeping.

Cryptography is abstracted away.  A signature is membership of a key id
in ``Attestation.signers`` and a Merkle proof is a genuine/fabricated tag.
Exploits are modelled as verifier flaws (``BugFlag``) or as compromised
keys, which is where real incidents went wrong.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Set, Tuple, Union

from .chain import Blockchain, Provenance
from .errors import ConfigInvalid, TransferNotConfirmed, TransferNotFound


class BugFlag(str, enum.Enum):
    SKIP_SIGNATURE_CHECK = "SkipSignatureCheck"
    ZERO_TRUSTED_ROOT = "ZeroTrustedRoot"
    NO_CHAIN_ID_BINDING = "NoChainIdBinding"
    PROOF_VERIFIER_BUG = "ProofVerifierBug"


class ProofKind(str, enum.Enum):
    GENUINE = "GenuineProof"
    FABRICATED = "FabricatedProof"


@dataclass
class NotarySet:
    keys: Tuple[str, ...]
    m: int
    compromised: Set[str] = field(default_factory=set)
    per_notary_cost: int = 0
    delay: int = 0
    # verifier flaws in the destination contract that checks notary signatures
    bug_flags: FrozenSet[BugFlag] = frozenset()

    def __post_init__(self) -> None:
        if len(set(self.keys)) != len(self.keys):
            raise ConfigInvalid("duplicate notary keys")
        if not 1 <= self.m <= len(self.keys):
            raise ConfigInvalid(f"quorum {self.m} outside 1..{len(self.keys)}")
        if not self.compromised <= set(self.keys):
            raise ConfigInvalid("compromised keys must be a subset of keys")

    @property
    def n(self) -> int:
        return len(self.keys)


@dataclass
class LightClientModel:
    t_proof: int = 1
    bug_flags: FrozenSet[BugFlag] = frozenset()
    cost: int = 0


@dataclass
class SidechainModel:
    consensus_honest: bool = True
    relay_delay: int = 1
    cost: int = 0


@dataclass
class NativeConsensus:
    """Validation by the two chains' own consensus, with no extra parties."""

    delay: int = 1


@dataclass
class HybridAnd:
    left: "OffchainMechanism"
    right: "OffchainMechanism"


@dataclass
class HybridOr:
    left: "OffchainMechanism"
    right: "OffchainMechanism"


OffchainMechanism = Union[
    NotarySet, LightClientModel, SidechainModel, NativeConsensus, HybridAnd, HybridOr
]


@dataclass(frozen=True)
class Attestation:
    transfer_id: str
    claimed_value: int
    claimed_recipient: str
    token: str
    direction: str
    signers: FrozenSet[str]
    proof: ProofKind
    chain_binding: Optional[str]
    issued_at: int
    # bookkeeping for classification only; verifiers never read it
    provenance: Provenance = Provenance.HONEST
    cause: Optional[str] = None

    def message_key(self) -> tuple:
        return (
            self.transfer_id,
            self.direction,
            self.chain_binding,
            self.claimed_value,
            self.claimed_recipient,
        )


def mechanism_delay(mech: OffchainMechanism) -> int:
    if isinstance(mech, NotarySet):
        return mech.delay
    if isinstance(mech, LightClientModel):
        return mech.t_proof
    if isinstance(mech, SidechainModel):
        return mech.relay_delay
    if isinstance(mech, NativeConsensus):
        return mech.delay
    if isinstance(mech, HybridAnd):
        return max(mechanism_delay(mech.left), mechanism_delay(mech.right))
    if isinstance(mech, HybridOr):
        return min(mechanism_delay(mech.left), mechanism_delay(mech.right))
    raise TypeError(f"unknown mechanism {mech!r}")


def honest_signers(mech: OffchainMechanism) -> FrozenSet[str]:
    if isinstance(mech, NotarySet):
        return frozenset(mech.keys)
    if isinstance(mech, (HybridAnd, HybridOr)):
        return honest_signers(mech.left) | honest_signers(mech.right)
    return frozenset()


def notary_sets(mech: OffchainMechanism) -> list:
    if isinstance(mech, NotarySet):
        return [mech]
    if isinstance(mech, (HybridAnd, HybridOr)):
        return notary_sets(mech.left) + notary_sets(mech.right)
    return []


def attest(
    mech: OffchainMechanism,
    source_chain: Blockchain,
    transfer_id: str,
    now: int,
    d_off: int = 0,
) -> Attestation:
    """Produce the honest attestation for a confirmed bridge event.

    The attestation is issued ``d_off`` plus the mechanism's own delay
    after ``now``.
    """
    event = source_chain.find_event(transfer_id)
    if event is None:
        raise TransferNotFound(transfer_id)
    if now < event.timestamp + source_chain.confirmation_delay:
        raise TransferNotConfirmed(
            f"{transfer_id} confirms at "
            f"{event.timestamp + source_chain.confirmation_delay}, now {now}"
        )
    return Attestation(
        transfer_id=event.transfer_id,
        claimed_value=event.value,
        claimed_recipient=event.recipient,
        token=event.token,
        direction=event.direction,
        signers=honest_signers(mech),
        proof=ProofKind.GENUINE,
        chain_binding=event.dest_chain,
        issued_at=now + d_off + mechanism_delay(mech),
        provenance=event.provenance,
        cause=event.cause,
    )


def verify_attestation(
    mech: OffchainMechanism, att: Attestation, dest_chain_id: str
) -> Tuple[bool, str]:
    """Return ``(accepted, reason)``; rejection is a value, never an error."""
    if isinstance(mech, NotarySet):
        flags = mech.bug_flags
        if BugFlag.SKIP_SIGNATURE_CHECK not in flags:
            valid = len(att.signers & set(mech.keys))
            if valid < mech.m:
                return False, f"notary quorum {valid}/{mech.m}"
        if BugFlag.NO_CHAIN_ID_BINDING not in flags and att.chain_binding != dest_chain_id:
            return False, "chain binding mismatch"
        return True, "notary quorum met"
    if isinstance(mech, LightClientModel):
        flags = mech.bug_flags
        if BugFlag.ZERO_TRUSTED_ROOT in flags:
            return True, "zero trusted root accepts any proof"
        if att.proof is not ProofKind.GENUINE and not (
            flags & {BugFlag.SKIP_SIGNATURE_CHECK, BugFlag.PROOF_VERIFIER_BUG}
        ):
            return False, "fabricated proof"
        if BugFlag.NO_CHAIN_ID_BINDING not in flags and att.chain_binding != dest_chain_id:
            return False, "chain binding mismatch"
        return True, "proof verified"
    if isinstance(mech, SidechainModel):
        if not mech.consensus_honest:
            return True, "sidechain consensus compromised"
        if att.proof is not ProofKind.GENUINE:
            return False, "fabricated proof"
        if att.chain_binding != dest_chain_id:
            return False, "chain binding mismatch"
        return True, "sidechain relay"
    if isinstance(mech, NativeConsensus):
        if att.proof is not ProofKind.GENUINE:
            return False, "fabricated proof"
        if att.chain_binding != dest_chain_id:
            return False, "chain binding mismatch"
        return True, "native consensus proof"
    if isinstance(mech, HybridAnd):
        ok_l, why_l = verify_attestation(mech.left, att, dest_chain_id)
        if not ok_l:
            return False, why_l
        return verify_attestation(mech.right, att, dest_chain_id)
    if isinstance(mech, HybridOr):
        ok_l, why_l = verify_attestation(mech.left, att, dest_chain_id)
        if ok_l:
            return True, why_l
        return verify_attestation(mech.right, att, dest_chain_id)
    raise TypeError(f"unknown mechanism {mech!r}")


# Trust sets --------------------------------------------------------------


class EntityKind(str, enum.Enum):
    SC = "SC"
    NOTARY = "Notary"
    LIGHT_CLIENT = "LightClient"
    MERKLE_PROOF = "MerkleProof"
    SIDECHAIN_CONSENSUS = "SidechainConsensus"
    CUSTODIAN = "Custodian"
    VALIDATOR = "Validator"


# Entities whose behaviour is not fixed by public, deterministic code.
TRUSTED_KINDS = frozenset({EntityKind.NOTARY, EntityKind.CUSTODIAN, EntityKind.VALIDATOR})


class TrustClass(str, enum.Enum):
    TRUSTLESS = "Trustless"
    TRUST_MINIMIZED = "TrustMinimized"
    TRUSTED = "Trusted"


@dataclass(frozen=True)
class Entity:
    kind: EntityKind
    name: str
    cost: int = 0


@dataclass(frozen=True)
class TrustSet:
    src_entities: FrozenSet[Entity]
    off_entities: FrozenSet[Entity]
    dest_entities: FrozenSet[Entity]

    @property
    def entities(self) -> FrozenSet[Entity]:
        return self.src_entities | self.off_entities | self.dest_entities

    @property
    def size(self) -> int:
        return len(self.entities)

    @property
    def cost(self) -> int:
        return sum(e.cost for e in self.entities)

    @property
    def classification(self) -> TrustClass:
        ents = self.entities
        if not ents:
            return TrustClass.TRUSTLESS
        if any(e.kind in TRUSTED_KINDS for e in ents):
            return TrustClass.TRUSTED
        return TrustClass.TRUST_MINIMIZED


def offchain_entities(mech: OffchainMechanism) -> FrozenSet[Entity]:
    if isinstance(mech, NotarySet):
        return frozenset(
            Entity(EntityKind.NOTARY, key, mech.per_notary_cost) for key in mech.keys
        )
    if isinstance(mech, LightClientModel):
        return frozenset(
            {
                Entity(EntityKind.LIGHT_CLIENT, "light-client", mech.cost),
                Entity(EntityKind.MERKLE_PROOF, "merkle-proof"),
            }
        )
    if isinstance(mech, SidechainModel):
        return frozenset({Entity(EntityKind.SIDECHAIN_CONSENSUS, "sidechain", mech.cost)})
    if isinstance(mech, NativeConsensus):
        return frozenset()
    if isinstance(mech, (HybridAnd, HybridOr)):
        return offchain_entities(mech.left) | offchain_entities(mech.right)
    raise TypeError(f"unknown mechanism {mech!r}")
