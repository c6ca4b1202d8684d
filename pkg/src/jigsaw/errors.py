"""Exception hierarchy shared by every layer of the protocol."""


class JigsawError(Exception):
    """Base class for all protocol errors."""


class WidthError(JigsawError, ValueError):
    """Two blocks of different widths were combined."""


class NotInvertibleError(JigsawError, ValueError):
    """An even block was used where an odd (invertible) one is required."""


class EmbedError(JigsawError, ValueError):
    """A framed part does not fit in a block at the requested offset."""


class FramingError(JigsawError):
    """An unmasked block does not carry two sentinel bits."""


class PartSizeError(JigsawError, ValueError):
    """A part is larger than ``ps - 2`` bits, or a group has too many parts."""


class KeyFileError(JigsawError):
    """A key file is malformed, truncated or of an unknown version."""


class DesyncError(JigsawError):
    """Sender and receiver key schedules have diverged."""


class TruncationError(JigsawError):
    """A stream ended (or stalled) before the current message was complete."""


class MalformedPacket(JigsawError):
    """Packet bytes do not follow the wire format."""


class AuthFailure(JigsawError):
    """A packet tag did not verify."""


class SessionExhausted(JigsawError):
    """The 64-bit packet sequence space is used up."""


class TransportError(JigsawError):
    """Connection or socket I/O failure.

    ``report`` carries whatever was transferred before the failure.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
