"""BF16 bit handling and the KV-chunk container shared by every other module."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

BF16_MAX = float.fromhex("0x1.fep127")
BF16_SUBNORMAL_QUANTUM_EXP = -133
DEFAULT_WIDTH = 256


class Kind(enum.IntEnum):
    KEY = 0
    VALUE = 1


class Scheme(enum.IntEnum):
    """Compression schemes in hotness order: the hottest chunks get INT8."""

    INT8 = 0
    FP8_E4M3 = 1
    FP8_E5M2 = 2
    GSE8 = 3

    @property
    def label(self) -> str:
        return _SCHEME_LABELS[self]


_SCHEME_LABELS = {
    Scheme.INT8: "int8",
    Scheme.FP8_E4M3: "fp8_e4m3",
    Scheme.FP8_E5M2: "fp8_e5m2",
    Scheme.GSE8: "gse8",
}


def bf16_round(x) -> np.ndarray:
    """Round float64 values to the nearest BF16 value (ties to even).

    Returns float64 values that are exactly representable in BF16.  Raises
    ``ValueError`` for NaN, infinities, or values that overflow BF16.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("BF16 conversion requires finite input")
    _, e = np.frexp(x)
    # quantum exponent: 8 significant bits for normals, fixed grid for subnormals
    qexp = np.maximum(e - 8, BF16_SUBNORMAL_QUANTUM_EXP)
    out = np.ldexp(np.rint(np.ldexp(x, -qexp)), qexp)
    if np.any(np.abs(out) > BF16_MAX):
        raise ValueError("value overflows BF16")
    return out


def bf16_encode(x) -> np.ndarray:
    """Vectorised real -> BF16 bit patterns (uint16), round-to-nearest-even."""
    r = bf16_round(x).astype(np.float32)
    return (r.view(np.uint32) >> 16).astype(np.uint16)


def bf16_decode(bits) -> np.ndarray:
    """Vectorised BF16 bit patterns -> exact float64 values."""
    b = np.asarray(bits, dtype=np.uint16).astype(np.uint32) << 16
    return b.view(np.float32).astype(np.float64)


def bf16_from_real(x: float) -> int:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r}")
    return int(bf16_encode(np.array([x]))[0])


def bf16_to_real(bits: int) -> float:
    return float(bf16_decode(np.array([bits & 0xFFFF]))[0])


def bf16_is_finite(bits) -> np.ndarray:
    return (np.asarray(bits, dtype=np.uint16) & 0x7F80) != 0x7F80


def bf16_exponents(bits) -> np.ndarray:
    """Unbiased exponent field of each pattern; subnormals and zero report -126."""
    field = (np.asarray(bits, dtype=np.uint16) >> 7) & 0xFF
    return np.maximum(field.astype(np.int16), 1) - 127


@dataclass(frozen=True, eq=False)
class KvChunk:
    """A flat BF16 Key or Value tensor for one document segment."""

    id: int
    kind: Kind
    token_count: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        if self.token_count <= 0 or self.width <= 0:
            raise ValueError("token_count and width must be positive")
        data = np.ascontiguousarray(self.data, dtype=np.uint16).reshape(-1)
        if data.size != self.token_count * self.width:
            raise ValueError(
                f"chunk {self.id}: {data.size} elements, expected "
                f"{self.token_count} x {self.width}"
            )
        if not np.all(bf16_is_finite(data)):
            raise ValueError(f"chunk {self.id} contains NaN/Inf patterns")
        data.flags.writeable = False
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "data", data)

    @classmethod
    def from_values(cls, id: int, kind: Kind, values, width: int | None = None) -> "KvChunk":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        width = values.size if width is None else width
        return cls(id, kind, values.size // width, width, bf16_encode(values))

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def nbytes(self) -> int:
        return 2 * self.data.size

    def values(self) -> np.ndarray:
        return bf16_decode(self.data)

    def __eq__(self, other):
        if not isinstance(other, KvChunk):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and self.token_count == other.token_count
            and self.width == other.width
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.id, self.kind, self.token_count, self.width, self.data.tobytes()))
