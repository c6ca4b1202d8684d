"""Tearing a message into parts of random size."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from .bitblock import RandomSource, check_ps
from .framing import BitString


@dataclass
class TearConfig:
    """Part-size bounds for :func:`tear`.

    Every part except the last has between ``l_min`` and ``ps - 2`` bits.
    Raising ``l_min`` trades positional randomness for less expansion.
    """

    ps: int
    l_min: int
    rng: RandomSource

    def __post_init__(self):
        check_ps(self.ps)
        if not 1 <= self.l_min <= self.ps - 2:
            raise ValueError(f"l_min must be in [1, {self.ps - 2}], got {self.l_min}")

    @property
    def l_max(self) -> int:
        return self.ps - 2


def tear(data: BitString, cfg: TearConfig) -> List[BitString]:
    """Split ``data`` into consecutive parts of uniformly drawn sizes.

    The trailing remainder is emitted as-is, so the last part may be shorter
    than ``l_min``. Joining the parts gives back ``data``.
    """
    if not data.length:
        return []
    text = str(data)
    total = len(text)
    lo, hi = cfg.l_min, cfg.l_max
    parts = []
    pos = 0
    while pos < total:
        size = min(cfg.rng.randint(lo, hi), total - pos)
        chunk = text[pos:pos + size]
        parts.append(BitString(int(chunk, 2), size))
        pos += size
    return parts
