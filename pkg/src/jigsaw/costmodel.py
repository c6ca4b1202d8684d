"""Operation counts: the published analytic model and live codec counters.

The analytic model charges ``N`` block XORs for masking ``N`` parts plus
``floor(N/k)`` key changes, each costing ``k-1`` XORs and one multiply. The
codec itself works in groups of ``k-1`` parts and also masks R once per
group, so its measured counts (:class:`OpCount`) run higher. Both are
reported; neither is forced to match the other.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, fields
from typing import Iterable, List, Optional, TextIO

AES_XORS_PER_BLOCK = 11

CSV_COLUMNS = ("k", "n", "best_case_xor", "worst_case_xor", "mul", "aes_xor")


@dataclass
class OpCount:
    """Block-level operations actually performed by a codec session."""

    xor_blocks: int = 0
    mul_blocks: int = 0
    n_parts: int = 0
    k: int = 0
    groups: int = 0

    def add_group(self, n_parts: int, k: int) -> None:
        # n_parts masks, one R mask, k-1 transform XORs, one transform multiply
        self.xor_blocks += n_parts + 1 + (k - 1)
        self.mul_blocks += 1
        self.n_parts += n_parts
        self.groups += 1
        self.k = k

    def copy(self) -> OpCount:
        return OpCount(**{f.name: getattr(self, f.name) for f in fields(self)})


def analytic_xor_count(n: int, k: int) -> int:
    _check(n, k)
    return n + (n // k) * (k - 1)


def analytic_mul_count(n: int, k: int) -> int:
    _check(n, k)
    return n // k


def aes_xor_count(n_blocks: int) -> int:
    if n_blocks < 0:
        raise ValueError("n_blocks must be non-negative")
    return AES_XORS_PER_BLOCK * n_blocks


def _check(n: int, k: int) -> None:
    if n < 0:
        raise ValueError("n must be non-negative")
    if k < 2:
        raise ValueError("k must be at least 2")


@dataclass(frozen=True)
class CurveRow:
    """One (k, n) point; ``n`` is the data size in blocks.

    The best case tears the data into ``n`` full-block parts, the worst case
    into ``2n`` half-block parts.
    """

    k: int
    n: int
    best_case_xor: int
    worst_case_xor: int
    mul: int
    aes_xor: int

    @property
    def worst_case_mul(self) -> int:
        return analytic_mul_count(2 * self.n, self.k)

    def as_tuple(self):
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def curve_row(k: int, n: int) -> CurveRow:
    return CurveRow(
        k=k,
        n=n,
        best_case_xor=analytic_xor_count(n, k),
        worst_case_xor=analytic_xor_count(2 * n, k),
        mul=analytic_mul_count(n, k),
        aes_xor=aes_xor_count(n),
    )


def emit_curves(
    k_range: Iterable[int],
    n_range: Iterable[int] = (),
    data_size_range: Iterable[int] = (),
    ps: int = 1024,
) -> List[CurveRow]:
    """Rows for every ``k`` crossed with every data size.

    Sizes come from ``n_range`` (in blocks) and ``data_size_range`` (in bits,
    converted to whole ``ps``-bit blocks). Rows are sorted by (k, n).
    """
    ks = sorted(set(k_range))
    ns = set(n_range) | {bits // ps for bits in data_size_range}
    if not ks or not ns:
        raise ValueError("k and size ranges must be non-empty")
    return [curve_row(k, n) for k in ks for n in sorted(ns)]


def write_csv(rows: Iterable[CurveRow], out: Optional[TextIO] = None) -> None:
    out = out or sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_tuple())


def instrumented_counts(report) -> OpCount:
    """Measured op counts of a finished transfer (a ``TransferReport``)."""
    return report.ops.copy()
