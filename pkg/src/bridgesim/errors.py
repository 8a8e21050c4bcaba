"""Exception hierarchy shared by every module."""


class BridgeSimError(Exception):
    """Base class for all simulator errors."""


class AmountError(BridgeSimError):
    """An amount fell outside the unsigned 128-bit range."""


class InsufficientBalance(BridgeSimError):
    pass


class NonMonotoneTimestamp(BridgeSimError):
    pass


class DepthExceedsHistory(BridgeSimError):
    pass


class InvalidTransaction(BridgeSimError):
    pass


class BridgeHalted(BridgeSimError):
    pass


class NoLockedCollateral(BridgeSimError):
    pass


class InvalidAttestation(BridgeSimError):
    pass


class LiquidityExhausted(BridgeSimError):
    pass


class FeeExceedsValue(BridgeSimError):
    pass


class TransferNotFound(BridgeSimError):
    pass


class TransferNotConfirmed(BridgeSimError):
    pass


class DanglingEvidence(BridgeSimError):
    pass


class ZeroEffort(BridgeSimError):
    pass


class UnknownLayer(BridgeSimError):
    pass


class VectorNotExecutable(BridgeSimError):
    pass


class MissingParams(BridgeSimError):
    pass


class UnknownPreset(BridgeSimError):
    pass


class ConfigInvalid(BridgeSimError):
    pass
