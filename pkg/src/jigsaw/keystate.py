"""The pre-shared key schedule and its on-disk form.

A key state holds ``k`` blocks. Blocks ``1..k-1`` mask data parts, block
``k`` masks the fresh random value R sent at the end of each group, and
:func:`transform` folds R into all of them once the group is done:

* ``P_i <- P_i xor R`` for ``i < k``
* ``P_k <- P_k * R mod 2**ps``

R is always odd, so the multiply is a bijection and can be undone with
:func:`inverse_transform`.

Key file layout (big-endian)::

    "JGSW" | version u8 = 1 | ps_bits u32 | k u16 | mac_key_len u16 = 32
           | mac_key (32 bytes) | P_1 .. P_k, ps/8 bytes each
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, replace
from typing import BinaryIO, Tuple, Union

from .bitblock import (
    Block,
    RandomSource,
    check_ps,
    inverse_odd,
    mul_mod,
    random_block,
    xor_block,
)
from .errors import KeyFileError, NotInvertibleError, WidthError

MAGIC = b"JGSW"
VERSION = 1
MAC_KEY_LEN = 32

_HEADER = struct.Struct(">4sBIHH")


@dataclass(frozen=True)
class KeyState:
    blocks: Tuple[Block, ...]
    mac_key: bytes
    generation: int = 0

    def __post_init__(self):
        if len(self.blocks) < 2:
            raise ValueError("a key state needs k >= 2 blocks")
        ps = self.blocks[0].ps
        if any(b.ps != ps for b in self.blocks):
            raise WidthError("all key blocks must share one width")
        if len(self.mac_key) != MAC_KEY_LEN:
            raise ValueError(f"mac key must be {MAC_KEY_LEN} bytes")
        if self.generation < 0:
            raise ValueError("generation must be non-negative")

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def ps(self) -> int:
        return self.blocks[0].ps

    @property
    def data_keys(self) -> Tuple[Block, ...]:
        """P_1 .. P_{k-1}: the blocks that mask data parts."""
        return self.blocks[:-1]

    @property
    def r_key(self) -> Block:
        """P_k: the block that masks R."""
        return self.blocks[-1]

    def __repr__(self) -> str:
        return f"KeyState(k={self.k}, ps={self.ps}, generation={self.generation})"


def _check_r(state: KeyState, r: Block) -> None:
    if r.ps != state.ps:
        raise WidthError(f"R has width {r.ps}, key blocks have {state.ps}")
    if not r.value & 1:
        raise NotInvertibleError("R must be odd")


def transform(state: KeyState, r: Block) -> KeyState:
    """Evolve the key with the group's random value ``r``."""
    _check_r(state, r)
    blocks = tuple(xor_block(p, r) for p in state.data_keys)
    blocks += (mul_mod(state.r_key, r),)
    return replace(state, blocks=blocks, generation=state.generation + 1)


def inverse_transform(state: KeyState, r: Block) -> KeyState:
    """Undo :func:`transform` for the same ``r``."""
    if state.generation == 0:
        raise ValueError("cannot step back past generation 0")
    _check_r(state, r)
    blocks = tuple(xor_block(p, r) for p in state.data_keys)
    blocks += (mul_mod(state.r_key, inverse_odd(r)),)
    return replace(state, blocks=blocks, generation=state.generation - 1)


def generate(rng: RandomSource, k: int, ps: int) -> KeyState:
    if k < 2:
        raise ValueError("k must be at least 2")
    check_ps(ps)
    blocks = tuple(random_block(rng, ps) for _ in range(k))
    return KeyState(blocks, rng.randbytes(MAC_KEY_LEN))


def key_file_size(k: int, ps: int) -> int:
    return _HEADER.size + MAC_KEY_LEN + k * ps // 8


def save_key(state: KeyState, sink: BinaryIO) -> None:
    """Write ``state`` in key-file format.

    The file records the blocks only; a loaded state starts at generation 0.
    """
    sink.write(_HEADER.pack(MAGIC, VERSION, state.ps, state.k, MAC_KEY_LEN))
    sink.write(state.mac_key)
    for block in state.blocks:
        sink.write(block.to_bytes())


def load_key(source: BinaryIO) -> KeyState:
    header = source.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise KeyFileError("truncated key file header")
    magic, version, ps, k, mac_len = _HEADER.unpack(header)
    if magic != MAGIC:
        raise KeyFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise KeyFileError(f"unsupported key file version {version}")
    if ps < 8 or ps % 8:
        raise KeyFileError(f"invalid block width {ps}")
    if k < 2:
        raise KeyFileError(f"invalid group width k={k}")
    if mac_len != MAC_KEY_LEN:
        raise KeyFileError(f"mac key length must be {MAC_KEY_LEN}, got {mac_len}")
    mac_key = source.read(MAC_KEY_LEN)
    if len(mac_key) < MAC_KEY_LEN:
        raise KeyFileError("truncated mac key")
    nbytes = ps // 8
    blocks = []
    for i in range(k):
        raw = source.read(nbytes)
        if len(raw) < nbytes:
            raise KeyFileError(f"truncated key block {i + 1} of {k}")
        blocks.append(Block.from_bytes(raw))
    if source.read(1):
        raise KeyFileError("trailing bytes after key material")
    return KeyState(tuple(blocks), mac_key)


PathLike = Union[str, os.PathLike]


def write_key_file(state: KeyState, path: PathLike) -> int:
    """Save ``state`` to ``path`` (owner read/write only); return bytes written."""
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        save_key(state, fh)
        return fh.tell()


def read_key_file(path: PathLike) -> KeyState:
    with open(path, "rb") as fh:
        return load_key(fh)
