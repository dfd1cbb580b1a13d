"""Exception hierarchy shared across the toolkit."""


class NetSentinelError(Exception):
    """Base class for every error raised by net_sentinel."""


# packet model
class SchemaMismatch(NetSentinelError):
    pass


# pcap ingest
class BadMagic(NetSentinelError):
    pass


class UnsupportedFormat(BadMagic):
    """Recognised but unsupported container (PCAPNG, non-Ethernet link types)."""


class Undissectable(NetSentinelError):
    pass


# windowing
class TooShort(NetSentinelError):
    pass


# transformer
class SequenceTooLong(NetSentinelError):
    pass


class AllMasked(NetSentinelError):
    pass


class NonFiniteLoss(NetSentinelError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# aggregator / detectors
class UnknownNode(NetSentinelError, KeyError):
    pass


class DegenerateDistances(NetSentinelError):
    pass


class NoConvergence(NetSentinelError):
    def __init__(self, message: str, kkt_violation: float):
        super().__init__(message)
        self.kkt_violation = kkt_violation


class WidthMismatch(NetSentinelError):
    pass


# evaluation
class EmptyInput(NetSentinelError):
    pass


class TooFewWindows(NetSentinelError):
    pass


class DegenerateCovariance(NetSentinelError):
    pass


# pipeline
class PartialCache(NetSentinelError):
    pass


class SchemaHashMismatch(NetSentinelError):
    pass


class MissingDetector(NetSentinelError):
    pass


class MixedTrainingData(NetSentinelError):
    pass


class ContainerError(NetSentinelError):
    pass
