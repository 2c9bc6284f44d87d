"""Access profiling and hotness-driven scheme assignment.

Chunks are ranked by access count (ties: ascending id), split into four
groups by three fractions, and each group gets one compression scheme:
the hottest group INT8, then E4M3, E5M2, and GSE-8 for the rest.
"""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .codecs import DEFAULT_LAYOUT, CompressedChunk, GseLayout, compress
from .core import KvChunk, Scheme


@dataclass(frozen=True)
class AccessProfile:
    counts: dict[int, int]

    def __post_init__(self):
        for cid, n in self.counts.items():
            if n < 0:
                raise ValueError(f"negative count {n} for chunk {cid}")

    @classmethod
    def for_ids(cls, ids: Iterable[int], counts: Mapping[int, int] | None = None) -> "AccessProfile":
        """Profile over ``ids``, absent ids counting zero."""
        counts = counts or {}
        return cls({int(i): int(counts.get(i, 0)) for i in ids})

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chunk_id", "count"])
        for cid in sorted(self.counts):
            w.writerow([cid, self.counts[cid]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AccessProfile":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["chunk_id", "count"]:
            raise ValueError("profile CSV must start with header 'chunk_id,count'")
        counts = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                cid, n = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise ValueError(f"profile line {lineno}: malformed row {row!r}") from None
            if cid in counts:
                raise ValueError(f"profile line {lineno}: duplicate chunk id {cid}")
            counts[cid] = n
        return cls(counts)


def check_fractions(*taus: float) -> None:
    for t in taus:
        if not (0.0 <= t <= 1.0) or math.isnan(t):
            raise ValueError(f"threshold {t} outside [0, 1]")
    if sum(taus) > 1.0 + 1e-12:
        raise ValueError(f"thresholds {taus} sum to more than 1")


def split_points(n: int, *taus: float) -> list[int]:
    """Cumulative slice boundaries, floor(tau * n) per group."""
    check_fractions(*taus)
    bounds, acc = [], 0
    for t in taus:
        # exact decimal value of the fraction, so 0.29 * 100 floors to 29, not 28
        acc += math.floor(Fraction(repr(float(t))) * n)
        bounds.append(acc)
    return bounds


def sort_by_frequency(profile: AccessProfile) -> list[int]:
    return sorted(profile.counts, key=lambda cid: (-profile.counts[cid], cid))


@dataclass(frozen=True)
class HotnessPartition:
    sorted_ids: tuple[int, ...]
    tau1: float
    tau2: float
    tau3: float
    groups: tuple[tuple[int, ...], ...]
    assignment: dict[int, Scheme]

    def scheme_histogram(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)


def partition(sorted_ids: Sequence[int], tau1: float, tau2: float, tau3: float) -> HotnessPartition:
    ids = tuple(sorted_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids in sorted list")
    i1, i2, i3 = split_points(len(ids), tau1, tau2, tau3)
    groups = (ids[:i1], ids[i1:i2], ids[i2:i3], ids[i3:])
    assignment = {cid: scheme for scheme, g in zip(Scheme, groups) for cid in g}
    return HotnessPartition(ids, tau1, tau2, tau3, groups, assignment)


def compress_corpus(
    chunks: Sequence[KvChunk],
    part: HotnessPartition,
    layout: GseLayout = DEFAULT_LAYOUT,
) -> list[CompressedChunk]:
    out = []
    for chunk in chunks:
        try:
            scheme = part.assignment[chunk.id]
        except KeyError:
            raise KeyError(f"chunk {chunk.id} missing from hotness partition") from None
        out.append(compress(chunk, scheme, layout))
    return out
