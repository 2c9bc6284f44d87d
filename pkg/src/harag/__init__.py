"""Hotness-aware mixed-precision KV-chunk compression and tiered placement."""

from .codecs import CompressedChunk, GseLayout, compress, decompress
from .core import Kind, KvChunk, Scheme, bf16_from_real, bf16_to_real

__all__ = [
    "CompressedChunk",
    "GseLayout",
    "Kind",
    "KvChunk",
    "Scheme",
    "bf16_from_real",
    "bf16_to_real",
    "compress",
    "decompress",
]
