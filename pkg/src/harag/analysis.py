"""Value-range and exponent statistics for KV chunks, plus the RMSE metric."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .codecs import DEFAULT_LAYOUT, GseLayout, compress, decompress
from .core import Kind, KvChunk, Scheme


@dataclass(frozen=True)
class RangeSummary:
    min: float
    max: float
    kind: Kind


@dataclass(frozen=True)
class ExponentHistogram:
    counts: dict[int, int]
    total_nonzero: int

    def merge(self, other: "ExponentHistogram") -> "ExponentHistogram":
        c = Counter(self.counts)
        c.update(other.counts)
        return ExponentHistogram(dict(sorted(c.items())), self.total_nonzero + other.total_nonzero)


def value_range(chunk: KvChunk) -> RangeSummary:
    x = chunk.values()
    return RangeSummary(float(x.min()), float(x.max()), chunk.kind)


def exponent_histogram(chunk: KvChunk) -> ExponentHistogram:
    """Histogram of unbiased exponents over the chunk's nonzero elements.

    Subnormals are counted under the minimum normal exponent (-126), which is
    what their exponent field encodes.
    """
    bits = chunk.data
    nonzero = (bits & 0x7FFF) != 0
    field = ((bits[nonzero] >> 7) & 0xFF).astype(np.int32)
    e = np.maximum(field, 1) - 127
    vals, cnt = np.unique(e, return_counts=True)
    return ExponentHistogram(
        {int(v): int(n) for v, n in zip(vals, cnt)}, int(nonzero.sum())
    )


def topk_coverage(h: ExponentHistogram, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if h.total_nonzero == 0:
        return 0.0
    ranked = sorted(h.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return sum(n for _, n in ranked[:k]) / h.total_nonzero


def rmse(original: KvChunk, reconstructed: KvChunk) -> float:
    a, b = original.values(), reconstructed.values()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    diff = a - b
    return math.sqrt(float(np.dot(diff, diff)) / a.size)


def scheme_errors(chunk: KvChunk, layout: GseLayout = DEFAULT_LAYOUT) -> dict[Scheme, float]:
    """RMSE of a compress/decompress round trip under every scheme."""
    return {s: rmse(chunk, decompress(compress(chunk, s, layout))) for s in Scheme}


def error_order_holds(errors: dict[Scheme, float]) -> bool:
    """True if INT8 <= E4M3 <= E5M2 <= GSE-8."""
    seq = [errors[s] for s in Scheme]
    return all(x <= y for x, y in zip(seq, seq[1:]))


def analyze_chunk(chunk: KvChunk, layout: GseLayout = DEFAULT_LAYOUT) -> dict:
    r = value_range(chunk)
    h = exponent_histogram(chunk)
    row = {
        "chunk_id": chunk.id,
        "kind": chunk.kind.name.lower(),
        "min": r.min,
        "max": r.max,
        "top1_coverage": topk_coverage(h, 1),
        "top4_coverage": topk_coverage(h, 4),
        "top8_coverage": topk_coverage(h, 8),
    }
    for s, err in scheme_errors(chunk, layout).items():
        row[f"rmse_{s.label}"] = err
    return row
