"""Packet wire format.

Each packet carries exactly one block::

    0x4A 0x50 | version u8 | flags u8 | seq u64 | payload (ps/8) | tag (16)

All integers are big-endian. The tag is HMAC-SHA256 truncated to 128 bits,
computed over ``version | flags | seq | payload`` (the magic is excluded).

Flag bits: bit 0 marks the R block that closes a group, bit 1 marks the end
of a message (and is only valid together with bit 0).
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional

from .bitblock import Block
from .errors import AuthFailure, MalformedPacket, SessionExhausted, TruncationError

MAGIC = b"JP"
VERSION = 1
TAG_LEN = 16
MAX_SEQ = (1 << 64) - 1

FLAG_R = 0x01
FLAG_EOM = 0x02
_KNOWN_FLAGS = FLAG_R | FLAG_EOM

_HEADER = struct.Struct(">2sBBQ")
HEADER_LEN = _HEADER.size
OVERHEAD = HEADER_LEN + TAG_LEN


@dataclass(frozen=True)
class Packet:
    version: int
    flags: int
    seq: int
    payload: Block
    tag: bytes

    @property
    def is_r(self) -> bool:
        return bool(self.flags & FLAG_R)

    @property
    def is_eom(self) -> bool:
        return bool(self.flags & FLAG_EOM)


def packet_size(ps: int) -> int:
    return OVERHEAD + ps // 8


def compute_mac(mac_key: bytes, header_and_payload: bytes) -> bytes:
    if len(mac_key) != 32:
        raise ValueError("mac key must be 32 bytes")
    return hmac.new(mac_key, header_and_payload, hashlib.sha256).digest()[:TAG_LEN]


def _check_flags(flags: int) -> None:
    if flags & ~_KNOWN_FLAGS:
        raise MalformedPacket(f"reserved flag bits set: {flags:#04x}")
    if flags & FLAG_EOM and not flags & FLAG_R:
        raise MalformedPacket("end-of-message flag without R flag")


def encode_packet(mac_key: bytes, seq: int, block: Block, flags: int) -> bytes:
    """Serialize and tag one block."""
    _check_flags(flags)
    if not 0 <= seq <= MAX_SEQ:
        raise SessionExhausted(f"sequence number {seq} outside u64 range")
    header = _HEADER.pack(MAGIC, VERSION, flags, seq)
    body = header[2:] + block.to_bytes()
    return MAGIC + body + compute_mac(mac_key, body)


def seal(session, block: Block, flags: int) -> tuple[Packet, bytes]:
    """Tag ``block`` with the session's next sequence number.

    ``session`` is anything with ``key.mac_key`` and a mutable ``next_seq``
    (an :class:`~jigsaw.codec.EncodeSession` in practice).
    """
    seq = session.next_seq
    if seq > MAX_SEQ:
        raise SessionExhausted("64-bit sequence space exhausted")
    raw = encode_packet(session.key.mac_key, seq, block, flags)
    session.next_seq = seq + 1
    return Packet(VERSION, flags, seq, block, raw[-TAG_LEN:]), raw


def verify_and_parse(mac_key: bytes, data: bytes, ps: Optional[int] = None) -> Packet:
    """Check the tag on ``data`` and return the packet.

    Only length and magic are looked at before the tag is checked; version
    and flags are validated afterwards, once they are known to be authentic.

    Raises:
        MalformedPacket: wrong length, magic, version or flag combination.
        AuthFailure: the tag does not match.
    """
    if ps is None:
        ps = (len(data) - OVERHEAD) * 8
        if ps < 8:
            raise MalformedPacket(f"packet of {len(data)} bytes is too short")
    if len(data) != packet_size(ps):
        raise MalformedPacket(f"expected {packet_size(ps)} bytes, got {len(data)}")
    if data[:2] != MAGIC:
        raise MalformedPacket(f"bad magic {data[:2]!r}")
    body, tag = data[2:-TAG_LEN], data[-TAG_LEN:]
    if not hmac.compare_digest(compute_mac(mac_key, body), tag):
        raise AuthFailure("packet tag does not verify")
    _, version, flags, seq = _HEADER.unpack_from(data)
    if version != VERSION:
        raise MalformedPacket(f"unsupported packet version {version}")
    _check_flags(flags)
    payload = Block.from_bytes(data[HEADER_LEN:-TAG_LEN])
    return Packet(version, flags, seq, payload, tag)


def peek_header(data: bytes) -> tuple[int, int]:
    """Return ``(flags, seq)`` without verifying anything."""
    _, _, flags, seq = _HEADER.unpack_from(data)
    return flags, seq


def read_packet(stream: BinaryIO, ps: int) -> Optional[bytes]:
    """Read one packet's worth of bytes; ``None`` at a clean end of stream."""
    size = packet_size(ps)
    buf = bytearray()
    while len(buf) < size:
        chunk = stream.read(size - len(buf))
        if not chunk:
            if not buf:
                return None
            raise TruncationError(f"stream ended inside a packet ({len(buf)}/{size} bytes)")
        buf += chunk
    return bytes(buf)
