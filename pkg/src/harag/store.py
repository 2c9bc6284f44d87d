"""On-disk formats: HKVC raw BF16 corpora and HARG compressed chunk stores.

All integers are little-endian.

HKVC::

    "HKVC" u16 version
    repeated until EOF:
        u32 id, u8 kind, u32 token_count, u32 width, token_count*width x u16 BF16

HARG::

    "HARG" u16 version u32 chunk_count u8 e_bits u8 m_bits
    repeated chunk_count times:
        u32 id, u8 kind, u8 scheme, u32 token_count, u32 width,
        u16 meta_len, meta bytes, token_count*width payload bytes

Scheme metadata: INT8 carries an f32 scale; GSE-8 carries u8 step, u8 count
and count signed exponents; FP8 carries nothing.
"""

from __future__ import annotations

import struct
from collections.abc import Sequence

import numpy as np

from .codecs import CompressedChunk, GseLayout, GseMeta
from .core import Kind, KvChunk, Scheme

HKVC_MAGIC = b"HKVC"
HARG_MAGIC = b"HARG"
VERSION = 1

_HKVC_HEAD = struct.Struct("<4sH")
_HKVC_CHUNK = struct.Struct("<IBII")
_HARG_HEAD = struct.Struct("<4sHIBB")
_HARG_CHUNK = struct.Struct("<IBBIIH")


class FormatError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (at byte offset {offset})")
        self.offset = offset


def _unpack(st: struct.Struct, buf: bytes, off: int, what: str) -> tuple:
    if off + st.size > len(buf):
        raise FormatError(f"truncated {what}", off)
    return st.unpack_from(buf, off)


def _kind(v: int, off: int) -> Kind:
    try:
        return Kind(v)
    except ValueError:
        raise FormatError(f"invalid chunk kind {v}", off) from None


def dump_corpus(chunks: Sequence[KvChunk]) -> bytes:
    parts = [_HKVC_HEAD.pack(HKVC_MAGIC, VERSION)]
    for c in chunks:
        parts.append(_HKVC_CHUNK.pack(c.id, c.kind, c.token_count, c.width))
        parts.append(c.data.astype("<u2").tobytes())
    return b"".join(parts)


def load_corpus(buf: bytes) -> list[KvChunk]:
    magic, version = _unpack(_HKVC_HEAD, buf, 0, "HKVC header")
    if magic != HKVC_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {HKVC_MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported HKVC version {version}", 4)
    off = _HKVC_HEAD.size
    chunks, seen = [], set()
    while off < len(buf):
        start = off
        cid, kind, tokens, width = _unpack(_HKVC_CHUNK, buf, off, "chunk header")
        off += _HKVC_CHUNK.size
        if tokens == 0 or width == 0:
            raise FormatError(f"chunk {cid} has zero token_count or width", start)
        if cid in seen:
            raise FormatError(f"duplicate chunk id {cid}", start)
        n = tokens * width
        if off + 2 * n > len(buf):
            raise FormatError(f"chunk {cid} data truncated", off)
        data = np.frombuffer(buf, dtype="<u2", count=n, offset=off).astype(np.uint16)
        try:
            chunk = KvChunk(cid, _kind(kind, start + 4), tokens, width, data)
        except ValueError as e:
            raise FormatError(str(e), off) from None
        off += 2 * n
        seen.add(cid)
        chunks.append(chunk)
    return chunks


def dump_store(chunks: Sequence[CompressedChunk], layout: GseLayout) -> bytes:
    """Serialise compressed chunks in ascending id order."""
    parts = [_HARG_HEAD.pack(HARG_MAGIC, VERSION, len(chunks), layout.e_bits, layout.m_bits)]
    for c in sorted(chunks, key=lambda c: c.id):
        if c.scheme is Scheme.GSE8 and c.layout != layout:
            raise ValueError(f"chunk {c.id} was encoded with {c.layout}, store layout is {layout}")
        meta = c.meta_bytes()
        parts.append(_HARG_CHUNK.pack(c.id, c.kind, c.scheme, c.token_count, c.width, len(meta)))
        parts.append(meta)
        parts.append(c.payload)
    return b"".join(parts)


def load_store(buf: bytes) -> tuple[list[CompressedChunk], GseLayout]:
    magic, version, count, e_bits, m_bits = _unpack(_HARG_HEAD, buf, 0, "HARG header")
    if magic != HARG_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {HARG_MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported HARG version {version}", 4)
    try:
        layout = GseLayout(e_bits, m_bits)
    except ValueError as e:
        raise FormatError(str(e), 10) from None
    off = _HARG_HEAD.size
    chunks = []
    for _ in range(count):
        start = off
        cid, kind, scheme, tokens, width, meta_len = _unpack(_HARG_CHUNK, buf, off, "chunk header")
        off += _HARG_CHUNK.size
        try:
            scheme = Scheme(scheme)
        except ValueError:
            raise FormatError(f"invalid scheme tag {scheme}", start + 5) from None
        n = tokens * width
        if off + meta_len + n > len(buf):
            raise FormatError(f"chunk {cid} body truncated", off)
        meta = buf[off:off + meta_len]
        off += meta_len
        payload = bytes(buf[off:off + n])
        off += n
        scale, gse = None, None
        try:
            if scheme is Scheme.INT8:
                if meta_len != 4:
                    raise ValueError(f"INT8 metadata must be 4 bytes, got {meta_len}")
                (scale,) = struct.unpack("<f", meta)
            elif scheme is Scheme.GSE8:
                gse = GseMeta.unpack(meta)
            elif meta_len:
                raise ValueError(f"FP8 chunk carries {meta_len} metadata bytes")
            chunks.append(CompressedChunk(
                cid, _kind(kind, start + 4), scheme, tokens, width, payload,
                scale=scale, gse=gse, layout=layout,
            ))
        except ValueError as e:
            if isinstance(e, FormatError):
                raise
            raise FormatError(str(e), start) from None
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after {count} chunks", off)
    return chunks, layout
