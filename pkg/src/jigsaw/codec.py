"""Group encoder and decoder.

Sender side, per group of up to ``k-1`` parts:

1. frame each part, embed it at a random offset in a zero block and XOR it
   with the matching data key ``P_i``;
2. draw a fresh odd R and send ``R xor P_k`` as the closing block;
3. evolve the key with ``transform(P, R)``.

The receiver undoes the masks with its copy of the key, strips sentinels
from the data blocks (never from R), recovers R and applies the same
``transform``. Both ends therefore hold identical keys after every group.

Sessions are streaming: parts from consecutive messages share groups until
a flush closes the current group and marks it end-of-message.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .bitblock import Block, RandomSource, random_block, random_source, xor_block
from .costmodel import OpCount
from .errors import DesyncError, FramingError, PartSizeError, TruncationError
from .framing import BitString, embed, extract, frame, random_offset
from .keystate import KeyState, transform
from .tearing import TearConfig, tear

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupCiphertext:
    data_blocks: Tuple[Block, ...]
    r_block: Block
    eom: bool = False

    def blocks(self) -> Tuple[Block, ...]:
        """All blocks in transmission order, R last."""
        return self.data_blocks + (self.r_block,)


@dataclass
class EncodeSession:
    key: KeyState
    rng: RandomSource = field(default_factory=random_source)
    l_min: Optional[int] = None
    pending: List[BitString] = field(default_factory=list)
    next_seq: int = 0
    ops: OpCount = field(default_factory=OpCount)

    def __post_init__(self):
        if self.l_min is None:
            self.l_min = self.key.ps // 2
        # validates l_min against ps
        TearConfig(self.key.ps, self.l_min, self.rng)

    @property
    def group_size(self) -> int:
        return self.key.k - 1


@dataclass
class DecodeSession:
    key: KeyState
    pending: List[BitString] = field(default_factory=list)
    next_seq: int = 0
    ops: OpCount = field(default_factory=OpCount)
    poisoned: Optional[Exception] = None

    @property
    def group_size(self) -> int:
        return self.key.k - 1


def encode_group(
    session: EncodeSession,
    parts: Sequence[BitString],
    rng: Optional[RandomSource] = None,
    eom: bool = False,
) -> GroupCiphertext:
    rng = rng or session.rng
    key = session.key
    ps = key.ps
    if len(parts) > key.k - 1:
        raise PartSizeError(f"a group holds at most {key.k - 1} parts, got {len(parts)}")
    for part in parts:
        if part.length > ps - 2:
            raise PartSizeError(f"part of {part.length} bits exceeds {ps - 2}")

    data_blocks = []
    for part, p_i in zip(parts, key.data_keys):
        framed = frame(part)
        offset = random_offset(rng, framed.length, ps)
        data_blocks.append(xor_block(embed(framed, offset, ps), p_i))

    r = random_block(rng, ps, force_odd=True)
    r_block = xor_block(r, key.r_key)
    session.key = transform(key, r)
    session.ops.add_group(len(parts), key.k)
    return GroupCiphertext(tuple(data_blocks), r_block, eom)


def decode_group(session: DecodeSession, ct: GroupCiphertext) -> List[BitString]:
    """Unmask one group and advance the key.

    Any failure poisons the session: key evolution cannot be resumed after a
    lost or corrupted group, so later calls raise :class:`DesyncError`.
    """
    if session.poisoned is not None:
        raise DesyncError(f"session poisoned by earlier error: {session.poisoned}")
    try:
        return _decode_group(session, ct)
    except (FramingError, DesyncError) as exc:
        session.poisoned = exc
        raise


def _decode_group(session: DecodeSession, ct: GroupCiphertext) -> List[BitString]:
    key = session.key
    if len(ct.data_blocks) > key.k - 1:
        raise DesyncError(
            f"group carries {len(ct.data_blocks)} data blocks, at most {key.k - 1} allowed"
        )
    parts = [extract(xor_block(d, p_i)) for d, p_i in zip(ct.data_blocks, key.data_keys)]
    r = xor_block(ct.r_block, key.r_key)
    if not r.is_odd:
        raise DesyncError(f"recovered R is even at generation {key.generation}")
    session.key = transform(key, r)
    session.ops.add_group(len(parts), key.k)
    return parts


def iter_encode_message(
    session: EncodeSession, data: BitString, flush: bool = True
) -> Iterator[GroupCiphertext]:
    """Tear ``data`` and yield groups as they fill.

    Up to ``k-2`` trailing parts stay in ``session.pending`` for the next
    message unless ``flush`` is set, in which case they go out as a final
    (possibly short, possibly empty) group marked end-of-message. After each
    yield, ``session.key`` is the key following that group.
    """
    cfg = TearConfig(session.key.ps, session.l_min, session.rng)
    session.pending.extend(tear(data, cfg))
    n = session.group_size
    while len(session.pending) > n or (len(session.pending) == n and not flush):
        group, session.pending = session.pending[:n], session.pending[n:]
        yield encode_group(session, group)
    if flush:
        group, session.pending = session.pending, []
        yield encode_group(session, group, eom=True)


def encode_message(
    session: EncodeSession, data: BitString, flush: bool = True
) -> List[GroupCiphertext]:
    return list(iter_encode_message(session, data, flush))


def feed_group(session: DecodeSession, ct: GroupCiphertext) -> Optional[BitString]:
    """Decode one group; return the reassembled message if it ends one."""
    session.pending.extend(decode_group(session, ct))
    if not ct.eom:
        return None
    message = BitString.join(session.pending)
    session.pending = []
    return message


def decode_message(session: DecodeSession, groups: Iterable[GroupCiphertext]) -> BitString:
    """Decode groups (in sequence order) up to and including an end-of-message group.

    Groups after the end-of-message group are left unconsumed when ``groups``
    is an iterator.

    Raises:
        TruncationError: if ``groups`` runs out before end-of-message.
    """
    for ct in groups:
        message = feed_group(session, ct)
        if message is not None:
            return message
    raise TruncationError("stream closed before end-of-message")
