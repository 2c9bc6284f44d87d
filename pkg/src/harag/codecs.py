"""8-bit codecs for KV chunks: symmetric INT8, FP8 (E4M3/E5M2) and GSE-8.

Every codec stores exactly one byte per element.  Per-chunk metadata is a
float32 scale for INT8 and a shared-exponent array for GSE-8; the FP8
variants carry none.  Decoders always emit BF16 so round trips compare
bit-for-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import KvChunk, Kind, Scheme, bf16_decode, bf16_encode

INT8_QMAX = 127


class CodecError(ValueError):
    """Raised on scheme mismatches and corrupt payloads."""


@dataclass(frozen=True)
class GseLayout:
    e_bits: int = 4
    m_bits: int = 3

    def __post_init__(self):
        if 1 + self.e_bits + self.m_bits != 8:
            raise ValueError("GSE-8 layout must satisfy 1 + e_bits + m_bits == 8")
        if self.e_bits < 2 or self.m_bits < 2:
            raise ValueError("GSE-8 layout needs e_bits >= 2 and m_bits >= 2")

    @property
    def max_entries(self) -> int:
        return 1 << self.e_bits

    @property
    def base_step(self) -> int:
        return self.m_bits - 1


DEFAULT_LAYOUT = GseLayout()


@dataclass(frozen=True)
class GseMeta:
    step: int
    exponents: tuple[int, ...]

    def pack(self) -> bytes:
        return struct.pack(f"<BB{len(self.exponents)}b", self.step, len(self.exponents), *self.exponents)

    @classmethod
    def unpack(cls, raw: bytes) -> "GseMeta":
        if len(raw) < 2:
            raise CodecError("GSE-8 metadata truncated")
        step, n = raw[0], raw[1]
        if len(raw) != 2 + n:
            raise CodecError(f"GSE-8 metadata length {len(raw)} != {2 + n}")
        return cls(step, struct.unpack(f"<{n}b", raw[2:]))


@dataclass(frozen=True, eq=False)
class CompressedChunk:
    id: int
    kind: Kind
    scheme: Scheme
    token_count: int
    width: int
    payload: bytes
    scale: float | None = None
    gse: GseMeta | None = None
    layout: GseLayout = field(default=DEFAULT_LAYOUT)

    def __post_init__(self):
        if len(self.payload) != self.token_count * self.width:
            raise CodecError(
                f"chunk {self.id}: payload has {len(self.payload)} bytes, "
                f"expected {self.token_count * self.width}"
            )
        if self.scheme is Scheme.INT8 and not (self.scale and self.scale > 0):
            raise CodecError("INT8 chunk needs a positive scale")
        if self.scheme is Scheme.GSE8 and self.gse is None:
            raise CodecError("GSE-8 chunk needs a shared exponent array")

    def meta_bytes(self) -> bytes:
        if self.scheme is Scheme.INT8:
            return struct.pack("<f", self.scale)
        if self.scheme is Scheme.GSE8:
            return self.gse.pack()
        return b""

    @property
    def nbytes(self) -> int:
        return len(self.payload) + len(self.meta_bytes())

    @property
    def raw_nbytes(self) -> int:
        return 2 * self.token_count * self.width

    @property
    def ratio(self) -> float:
        return self.raw_nbytes / self.nbytes

    def codes(self) -> np.ndarray:
        return np.frombuffer(self.payload, dtype=np.uint8)

    def __eq__(self, other):
        if not isinstance(other, CompressedChunk):
            return NotImplemented
        return (
            (self.id, self.kind, self.scheme, self.token_count, self.width, self.payload)
            == (other.id, other.kind, other.scheme, other.token_count, other.width, other.payload)
            and self.meta_bytes() == other.meta_bytes()
            and (self.scheme is not Scheme.GSE8 or self.layout == other.layout)
        )


def _rebuild(c: CompressedChunk, bits: np.ndarray) -> KvChunk:
    return KvChunk(c.id, c.kind, c.token_count, c.width, bits)


def _require(c: CompressedChunk, *schemes: Scheme) -> None:
    if c.scheme not in schemes:
        raise CodecError(f"chunk {c.id} is {c.scheme.name}, expected {' or '.join(s.name for s in schemes)}")


# ---------------------------------------------------------------- INT8


def encode_int8(chunk: KvChunk) -> CompressedChunk:
    x = chunk.values()
    absmax = float(np.max(np.abs(x)))
    scale = float(np.float32(absmax / INT8_QMAX)) if absmax > 0 else 1.0
    q = np.clip(np.rint(x / scale), -INT8_QMAX, INT8_QMAX).astype(np.int8)
    return CompressedChunk(
        chunk.id, chunk.kind, Scheme.INT8, chunk.token_count, chunk.width,
        q.tobytes(), scale=scale,
    )


def decode_int8(c: CompressedChunk) -> KvChunk:
    _require(c, Scheme.INT8)
    q = np.frombuffer(c.payload, dtype=np.int8).astype(np.float64)
    return _rebuild(c, bf16_encode(q * c.scale))


# ---------------------------------------------------------------- FP8


@dataclass(frozen=True)
class Fp8Format:
    exp_bits: int
    man_bits: int
    bias: int
    # E4M3 reserves only S.1111.111 for NaN; E5M2 reserves the whole top exponent
    ieee_specials: bool

    def code_value(self, code: int) -> float:
        sign = -1.0 if code & 0x80 else 1.0
        e = (code >> self.man_bits) & ((1 << self.exp_bits) - 1)
        m = code & ((1 << self.man_bits) - 1)
        if e == 0:
            return sign * m * 2.0 ** (1 - self.bias - self.man_bits)
        return sign * (1 + m / (1 << self.man_bits)) * 2.0 ** (e - self.bias)

    def is_finite(self, code: int) -> bool:
        e = (code >> self.man_bits) & ((1 << self.exp_bits) - 1)
        m = code & ((1 << self.man_bits) - 1)
        top = (1 << self.exp_bits) - 1
        if self.ieee_specials:
            return e != top
        return not (e == top and m == (1 << self.man_bits) - 1)

    def finite_codes(self) -> list[int]:
        return [c for c in range(256) if self.is_finite(c)]

    @property
    def max_finite(self) -> float:
        return max(self.code_value(c) for c in self.finite_codes())


FP8_FORMATS = {
    Scheme.FP8_E4M3: Fp8Format(4, 3, 7, ieee_specials=False),
    Scheme.FP8_E5M2: Fp8Format(5, 2, 15, ieee_specials=True),
}


@lru_cache(maxsize=None)
def _fp8_tables(variant: Scheme) -> tuple[np.ndarray, np.ndarray]:
    """(BF16 pattern -> FP8 code, FP8 code -> BF16 pattern) lookup tables."""
    fmt = FP8_FORMATS[variant]
    # non-negative codes in ascending value order (bit order == value order)
    pos = np.array([c for c in range(128) if fmt.is_finite(c)], dtype=np.uint8)
    vals = np.array([fmt.code_value(int(c)) for c in pos])
    mids = (vals[:-1] + vals[1:]) / 2

    with np.errstate(invalid="ignore"):
        x = bf16_decode(np.arange(1 << 16, dtype=np.uint32).astype(np.uint16))
    mag = np.abs(np.nan_to_num(x, nan=0.0, posinf=0.0, neginf=0.0))
    i = np.searchsorted(mids, mag, side="left")
    # exact midpoint: searchsorted(left) picks the lower code; move up if that one is odd
    tie = (i < mids.size) & (mag == mids[np.minimum(i, mids.size - 1)])
    i = np.where(tie & (pos[i] & 1 == 1), i + 1, i)
    code = pos[i] | np.where(np.signbit(x), 0x80, 0).astype(np.uint8)
    encode = code.astype(np.uint8)
    encode.flags.writeable = False

    decode = np.zeros(256, dtype=np.uint16)
    for c in range(256):
        if fmt.is_finite(c):
            decode[c] = bf16_encode(np.array([fmt.code_value(c)]))[0]
    decode.flags.writeable = False
    return encode, decode


def fp8_value(variant: Scheme, code: int) -> float:
    return FP8_FORMATS[variant].code_value(code)


def encode_fp8(chunk: KvChunk, variant: Scheme) -> CompressedChunk:
    if variant not in FP8_FORMATS:
        raise CodecError(f"{variant!r} is not an FP8 variant")
    enc, _ = _fp8_tables(variant)
    return CompressedChunk(
        chunk.id, chunk.kind, variant, chunk.token_count, chunk.width,
        enc[chunk.data].tobytes(),
    )


def decode_fp8(c: CompressedChunk) -> KvChunk:
    _require(c, Scheme.FP8_E4M3, Scheme.FP8_E5M2)
    fmt = FP8_FORMATS[c.scheme]
    codes = c.codes()
    bad = [int(v) for v in np.unique(codes) if not fmt.is_finite(int(v))]
    if bad:
        raise CodecError(f"chunk {c.id}: non-finite FP8 code 0x{bad[0]:02x}")
    _, dec = _fp8_tables(c.scheme)
    return _rebuild(c, dec[codes])


# ---------------------------------------------------------------- GSE-8


def _gse_array(emin: int, emax: int, step: int) -> list[int]:
    # right endpoints of step-wide intervals, starting at emin; last one capped at emax
    return list(range(emin, emax, step)) + [emax]


def build_gse_exponent_array(
    chunk: KvChunk, layout: GseLayout = DEFAULT_LAYOUT
) -> tuple[list[int], int]:
    """Shared exponents covering the chunk's exponent range, plus the step used.

    Only normal values take part; BF16 subnormals are flushed by the encoder.
    The step starts at ``m_bits - 1`` and is widened only if the range would
    need more entries than the index field can address.
    """
    bits = chunk.data
    field_ = (bits >> 7) & 0xFF
    normal = field_ != 0
    if not normal.any():
        raise CodecError(f"chunk {chunk.id} has no nonzero normal elements")
    e = field_[normal].astype(np.int32) - 127
    emin, emax = int(e.min()), int(e.max())
    step = layout.base_step
    span = emax - emin
    if span:
        step = max(step, -(-span // (layout.max_entries - 1)))
    return _gse_array(emin, emax, step), step


def gse_encode_bits(bits: np.ndarray, exponents, layout: GseLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Encode BF16 patterns against a given shared exponent array."""
    m = layout.m_bits
    arr = np.asarray(exponents, dtype=np.int32)
    bits = np.asarray(bits, dtype=np.uint16)
    sign = (bits >> 15).astype(np.uint8)
    field_ = ((bits >> 7) & 0xFF).astype(np.int32)
    frac = (bits & 0x7F).astype(np.int32)
    e = field_ - 127

    out = np.zeros(bits.shape, dtype=np.uint8)
    live = field_ != 0  # zero and subnormals encode as the zero byte
    if arr.size == 0:
        if live.any():
            raise CodecError("empty shared exponent array for nonzero data")
        return out

    pos = np.searchsorted(arr, e, side="left")
    above = pos == arr.size
    idx = np.minimum(pos, arr.size - 1)
    d = arr[idx] - e
    d = np.where(above, 0, d)
    saturate = above.copy()
    # gap wider than the marker can express: fall back to the next lower exponent, saturated
    gap = ~above & (d > m - 1)
    lower_ok = gap & (pos > 0)
    idx = np.where(lower_ok, pos - 1, idx)
    d = np.where(lower_ok, 0, d)
    saturate |= lower_ok
    live &= ~(gap & (pos == 0))

    keep = m - d - 1
    if np.any(live & ((keep < 0) | (d < 0))):
        raise CodecError("internal error: shift exceeds fraction field")
    keep = np.clip(keep, 0, m - 1)
    frac_field = (1 << keep) | (frac >> (7 - keep))
    frac_field = np.where(saturate, (1 << m) - 1, frac_field)
    code = (sign.astype(np.int32) << 7) | (idx << m) | frac_field
    out[live] = code[live].astype(np.uint8)
    return out


def gse_decode_bits(codes: np.ndarray, exponents, layout: GseLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Decode GSE-8 bytes to BF16 patterns against a shared exponent array."""
    m = layout.m_bits
    arr = np.asarray(exponents, dtype=np.int32)
    codes = np.asarray(codes, dtype=np.uint8).astype(np.int32)
    frac_field = codes & ((1 << m) - 1)
    idx = (codes >> m) & ((1 << layout.e_bits) - 1)
    nz = frac_field != 0
    if np.any(nz & (idx >= arr.size)):
        bad = int(np.argmax(nz & (idx >= arr.size)))
        raise CodecError(f"element {bad}: exponent index {int(idx[bad])} outside array of {arr.size}")
    # bit_length of the field locates the marker
    blen = np.zeros_like(frac_field)
    for b in range(m):
        blen = np.where(frac_field >= (1 << b), b + 1, blen)
    d = m - blen
    rest_bits = np.maximum(blen - 1, 0)
    rest = frac_field & ((1 << rest_bits) - 1)
    mant = 1.0 + rest / np.exp2(rest_bits)
    g = arr[np.minimum(idx, max(arr.size - 1, 0))] if arr.size else np.zeros_like(idx)
    vals = np.ldexp(mant, g - d)
    vals = np.where(codes & 0x80, -vals, vals)
    vals = np.where(nz, vals, 0.0)
    return bf16_encode(vals)


def encode_gse8(chunk: KvChunk, layout: GseLayout = DEFAULT_LAYOUT) -> CompressedChunk:
    try:
        exps, step = build_gse_exponent_array(chunk, layout)
    except CodecError:
        exps, step = [], layout.base_step
    payload = gse_encode_bits(chunk.data, exps, layout)
    return CompressedChunk(
        chunk.id, chunk.kind, Scheme.GSE8, chunk.token_count, chunk.width,
        payload.tobytes(), gse=GseMeta(step, tuple(exps)), layout=layout,
    )


def decode_gse8(c: CompressedChunk) -> KvChunk:
    _require(c, Scheme.GSE8)
    return _rebuild(c, gse_decode_bits(c.codes(), c.gse.exponents, c.layout))


# ---------------------------------------------------------------- dispatch


def compress(chunk: KvChunk, scheme: Scheme, layout: GseLayout = DEFAULT_LAYOUT) -> CompressedChunk:
    scheme = Scheme(scheme)
    if scheme is Scheme.INT8:
        return encode_int8(chunk)
    if scheme is Scheme.GSE8:
        return encode_gse8(chunk, layout)
    return encode_fp8(chunk, scheme)


def decompress(c: CompressedChunk) -> KvChunk:
    if c.scheme is Scheme.INT8:
        return decode_int8(c)
    if c.scheme is Scheme.GSE8:
        return decode_gse8(c)
    return decode_fp8(c)
