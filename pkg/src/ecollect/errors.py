"""Stable machine-readable error codes shared across the protocol stack."""


class ProtocolError(Exception):
    """Base error; ``code`` is a stable identifier safe to put on the wire."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(message or code)


class Malformed(ProtocolError):
    def __init__(self, message: str = ""):
        super().__init__("MALFORMED", message)


class DecodeOutOfRange(ProtocolError):
    """Group element is not an encoding of any plaintext within the bound."""

    def __init__(self, message: str = ""):
        super().__init__("DECODE_OUT_OF_RANGE", message)


class MissingShare(ProtocolError):
    def __init__(self, message: str = ""):
        super().__init__("MISSING_SHARE", message)


class InvalidPartProof(ProtocolError):
    def __init__(self, message: str = ""):
        super().__init__("INVALID_PART_PROOF", message)


class Rejected(ProtocolError):
    """A message the bulletin board refuses to publish.

    ``head`` carries the current head digest so clients can rebuild and retry
    after STALE_SNAPSHOT.
    """

    def __init__(self, code: str, message: str = "", head: str | None = None):
        super().__init__(code, message)
        self.head = head


# Codes used by board validation; kept in one place so the service and the
# clients can rely on them verbatim.
BAD_SIGNATURE = "BAD_SIGNATURE"
CHAIN_EXISTS = "CHAIN_EXISTS"
CLOSED_COLLECTION = "CLOSED_COLLECTION"
DUPLICATE_COLLECTION = "DUPLICATE_COLLECTION"
DUPLICATE_REGISTRATION = "DUPLICATE_REGISTRATION"
DUPLICATE_TALLIER = "DUPLICATE_TALLIER"
FROZEN_CHAIN = "FROZEN_CHAIN"
INCOMPLETE_COVER = "INCOMPLETE_COVER"
INVALID_PROOF = "INVALID_PROOF"
INVALID_TALLY = "INVALID_TALLY"
MALFORMED = "MALFORMED"
MISSING_TALLIER_SIGNATURE = "MISSING_TALLIER_SIGNATURE"
STALE_SNAPSHOT = "STALE_SNAPSHOT"
UNKNOWN_COLLECTION = "UNKNOWN_COLLECTION"
UNKNOWN_VERSION = "UNKNOWN_VERSION"
UNKNOWN_VOTER = "UNKNOWN_VOTER"
