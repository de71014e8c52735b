"""
Exception hierarchy for the cross-layer analysis engine
Every error carries the process exit code the CLI maps it to
"""


class CrossLayerError(Exception):
    """Base class for all analysis errors"""

    exit_code: int = 2


# ==================== USAGE ERRORS (exit 1) ====================

class UsageError(CrossLayerError):
    exit_code = 1


class UnknownSubcommand(UsageError):
    pass


class MissingParameter(UsageError):
    pass


class MalformedConfig(UsageError):
    pass


class ConfigurationError(UsageError):
    pass


# ==================== DOMAIN ERRORS (exit 2) ====================

class DomainError(CrossLayerError):
    """A precondition of a domain operation does not hold"""

    exit_code = 2


class SumNotOne(DomainError):
    pass


class NonPositiveLargest(DomainError):
    pass


class NegativeEntry(DomainError):
    pass


class InvalidTriples(DomainError):
    pass


class UnknownPattern(DomainError):
    pass


class ConflictViolation(DomainError):
    pass


class FeeOrderViolated(DomainError):
    pass


class ZeroFee(DomainError):
    pass


class UnsupportedConflictArity(DomainError):
    pass


class OverlappingConflictSets(DomainError):
    pass


class DuplicateTxId(DomainError):
    pass


class DanglingChild(DomainError):
    pass


class FeeGridEmpty(DomainError):
    pass


class UnknownOwner(DomainError):
    pass


class PartialProfile(DomainError):
    pass


class MinerMerged(DomainError):
    pass


class NotIdempotent(DomainError):
    pass


class AlphabetOverlap(DomainError):
    pass


class ParameterOutOfRange(DomainError):
    pass


class PreconditionFailed(DomainError):
    pass


class NotPayer(DomainError):
    pass


class UnknownTx(DomainError):
    pass


class AmbiguousBlockchainResponse(DomainError):
    pass


class InvalidParameters(DomainError):
    pass


# ==================== BOUND ERRORS (exit 3) ====================

class BoundError(CrossLayerError):
    """A configured computational bound would be exceeded"""

    exit_code = 3


class OracleBoundExceeded(BoundError):
    pass


class EnumerationBoundExceeded(BoundError):
    pass


class TooManyPlayers(BoundError):
    pass
