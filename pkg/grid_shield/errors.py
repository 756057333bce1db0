"""Exception hierarchy shared by every grid_shield package."""

from typing import Optional


class GridShieldError(Exception):
    """Base error - keeps the message and the underlying cause, if any."""

    def __init__(self, message: str, cause: Optional[BaseException] = None):
        super().__init__(message)
        self.cause = cause


class ShapeError(GridShieldError):
    """Tensor shapes do not fit the operation."""


class ContractError(GridShieldError):
    """A caller broke an operation precondition."""


class NonFiniteError(GridShieldError):
    """An operation produced NaN or Inf."""


class TrainingDivergedError(GridShieldError):
    """A loss went NaN during a train step."""

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        cause: Optional[BaseException] = None,
    ):
        super().__init__(message, cause)
        self.step = step


class CryptoError(GridShieldError):
    """Cryptographic input could not be used."""


class InvalidPointError(CryptoError):
    """Encoded point is malformed, off the curve or the identity."""


class ProtocolError(GridShieldError):
    """Anything that closes a protocol session."""


class FrameParseError(ProtocolError):
    """Bytes on the wire are not a well-formed frame."""


class SignatureError(ProtocolError):
    """Frame signature did not verify."""


class ProtocolStateError(ProtocolError):
    """Message arrived in a phase or role that does not accept it."""


class ReplayError(ProtocolError):
    """Counter or session id was already seen."""


class PeerAbortError(ProtocolError):
    """The peer sent a signed ABORT frame."""

    def __init__(self, message: str, code: int = 0):
        super().__init__(message)
        self.code = code


class SaturationError(ProtocolError):
    """Values fell outside the fixed-point range and the policy forbids clamping."""


class TransportError(ProtocolError):
    """The byte stream between the parties failed."""


class DataError(GridShieldError):
    """Meter data could not be read or does not satisfy its invariants."""

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        cause: Optional[BaseException] = None,
    ):
        super().__init__(f"row {row}: {message}" if row is not None else message, cause)
        self.row = row


class ConfigurationError(GridShieldError):
    """Settings or checkpoints are missing or inconsistent."""
