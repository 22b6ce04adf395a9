"""Exception hierarchy shared by every layer of the package."""


class OTError(Exception):
    """Base class for all protocol-level failures."""


class ModulusMismatch(OTError, ValueError):
    """A residue does not belong to the modulus it was used with."""


class NotAUnit(OTError, ValueError):
    """A value that must be invertible mod N shares a factor with N."""


class LengthMismatch(OTError, ValueError):
    pass


class ChoiceOutOfRange(OTError, ValueError):
    pass


class MalformedMessage(OTError, ValueError):
    pass


class KeyCollision(OTError):
    """Two per-index encryption keys of one session coincide."""


class DimensionMismatch(OTError, ValueError):
    pass


class DuplicateSession(OTError, KeyError):
    pass


class PhaseError(OTError):
    """A state machine was driven out of order."""


class IntegrityFailure(OTError):
    """A keyed-hash tag did not verify; the message was altered in transit."""


class DecodeError(MalformedMessage):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"decode error at offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason
