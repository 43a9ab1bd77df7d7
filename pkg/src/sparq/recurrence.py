"""Binary recurrence matrices, bit-packed by row into 64-bit words.

Bit ``j`` of row ``i`` lives in word ``j // 64`` at bit position ``j % 64``.
Rows of cross-recurrence matrices index the first (contagious) series and
columns the second (healthy) series, so the diagonal offset ``k = j - i > 0``
means the healthy agent reached a cell ``k`` windows after the contagious one.

Serialized container (little-endian)::

    b"SPRQ" | version u8 | shape u8 (0 full, 1 upper) | n u32 | rows

where each row is ``ceil(n / 8)`` bytes, bit ``j`` at byte ``j // 8``,
bit position ``j % 8`` (LSB first).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyList, FormatError, GridMisaligned, LengthMismatch, SizeMismatch
from .preprocess import GridSeries

MAGIC = b"SPRQ"
VERSION = 1
_HEADER = struct.Struct("<4sBBI")
_ROW_BLOCK = 256
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


class MatrixShape(enum.IntEnum):
    FULL = 0
    UPPER_TRIANGLE = 1


def n_words(n: int) -> int:
    return (n + 63) // 64


def _pack_rows(block: np.ndarray, nw: int) -> np.ndarray:
    packed = np.packbits(block, axis=1, bitorder="little")
    out = np.zeros((block.shape[0], nw * 8), dtype=np.uint8)
    out[:, : packed.shape[1]] = packed
    return out.view("<u8").astype(np.uint64, copy=False)


def _upper_mask(n: int) -> np.ndarray:
    nw = n_words(n)
    rows = np.arange(n, dtype=np.uint64)
    wi = (rows >> np.uint64(6))[:, None]
    bit = (rows & np.uint64(63))[:, None]
    w = np.arange(nw, dtype=np.uint64)[None, :]
    return np.where(w > wi, _ALL, np.where(w == wi, _ALL << bit, np.uint64(0))).astype(np.uint64)


@dataclass(frozen=True, eq=False)
class RecurrenceMatrix:
    n: int
    words: np.ndarray
    shape: MatrixShape = MatrixShape.FULL

    def __post_init__(self):
        w = np.asarray(self.words, dtype=np.uint64)
        if w.shape != (self.n, n_words(self.n)):
            raise ValueError(f"words must have shape {(self.n, n_words(self.n))}, got {w.shape}")
        w.flags.writeable = False
        object.__setattr__(self, "words", w)
        object.__setattr__(self, "shape", MatrixShape(self.shape))

    @classmethod
    def from_bool(cls, arr, shape: MatrixShape = MatrixShape.FULL) -> "RecurrenceMatrix":
        arr = np.asarray(arr, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("expected a square 2-D array")
        n = arr.shape[0]
        words = _pack_rows(arr, n_words(n))
        if shape == MatrixShape.UPPER_TRIANGLE:
            words = words & _upper_mask(n)
        return cls(n, words, shape)

    @classmethod
    def zeros(cls, n: int, shape: MatrixShape = MatrixShape.FULL) -> "RecurrenceMatrix":
        return cls(n, np.zeros((n, n_words(n)), dtype=np.uint64), shape)

    def to_bool(self) -> np.ndarray:
        b = np.unpackbits(self.words.astype("<u8").view(np.uint8), axis=1, bitorder="little")
        return b[:, : self.n].astype(bool)

    def __getitem__(self, ij) -> int:
        i, j = ij
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(ij)
        return int((int(self.words[i, j >> 6]) >> (j & 63)) & 1)

    def __eq__(self, other):
        if not isinstance(other, RecurrenceMatrix):
            return NotImplemented
        return self.n == other.n and self.shape == other.shape and np.array_equal(self.words, other.words)

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    @property
    def nbytes(self) -> int:
        return int(self.words.nbytes)

    def to_bytes(self) -> bytes:
        row_len = (self.n + 7) // 8
        rows = self.words.astype("<u8").view(np.uint8)[:, :row_len]
        return _HEADER.pack(MAGIC, VERSION, int(self.shape), self.n) + rows.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RecurrenceMatrix":
        if len(data) < _HEADER.size:
            raise FormatError("truncated header")
        magic, version, shape, n = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FormatError("bad magic")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        try:
            shape = MatrixShape(shape)
        except ValueError:
            raise FormatError(f"unknown shape code {shape}") from None
        row_len = (n + 7) // 8
        body = data[_HEADER.size:]
        if len(body) != row_len * n:
            raise FormatError("body length does not match n")
        nw = n_words(n)
        buf = np.zeros((n, nw * 8), dtype=np.uint8)
        buf[:, :row_len] = np.frombuffer(body, dtype=np.uint8).reshape(n, row_len)
        words = buf.view("<u8").astype(np.uint64)
        # padding bits past column n must be zero
        if n % 64 and n and np.any(words[:, -1] >> np.uint64(n % 64)):
            raise FormatError("nonzero padding bits")
        m = cls(n, words, shape)
        if shape == MatrixShape.UPPER_TRIANGLE and np.any(words & ~_upper_mask(n)):
            raise FormatError("upper-triangle matrix has bits below the diagonal")
        return m


def _equality_matrix(a, b, valid_a=None, valid_b=None) -> RecurrenceMatrix:
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.size
    nw = n_words(n)
    words = np.empty((n, nw), dtype=np.uint64)
    for r0 in range(0, n, _ROW_BLOCK):
        r1 = min(n, r0 + _ROW_BLOCK)
        block = a[r0:r1, None] == b[None, :]
        if valid_a is not None:
            block &= valid_a[r0:r1, None]
        if valid_b is not None:
            block &= valid_b[None, :]
        words[r0:r1] = _pack_rows(block, nw)
    return RecurrenceMatrix(n, words, MatrixShape.FULL)


def self_recurrence(symbols: Sequence[int]) -> RecurrenceMatrix:
    s = np.asarray(symbols)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("symbol series must be a non-empty 1-D sequence")
    return _equality_matrix(s, s)


def cross_recurrence(a: Sequence[int], b: Sequence[int]) -> RecurrenceMatrix:
    """``R[i, j] = 1`` iff ``a[i] == b[j]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0:
        raise ValueError("symbol series must be non-empty 1-D sequences")
    if a.size != b.size:
        raise LengthMismatch(f"series lengths differ: {a.size} != {b.size}")
    return _equality_matrix(a, b)


def spatial_cross_recurrence(healthy: GridSeries, contagious: GridSeries) -> tuple[RecurrenceMatrix, RecurrenceMatrix]:
    """Per-dimension cross-recurrence; rows index the contagious agent, columns the healthy one."""
    if healthy.n != contagious.n:
        raise LengthMismatch(f"series lengths differ: {contagious.n} != {healthy.n}")
    if not healthy.same_grid(contagious) or healthy.start_index != contagious.start_index:
        raise GridMisaligned(
            f"start_index {contagious.start_index} vs {healthy.start_index} "
            f"(window {contagious.window_s} vs {healthy.window_s})")
    vc = ~contagious.gap_mask
    vh = ~healthy.gap_mask
    rx = _equality_matrix(contagious.cells_x, healthy.cells_x, vc, vh)
    ry = _equality_matrix(contagious.cells_y, healthy.cells_y, vc, vh)
    return rx, ry


def combine_dimensions(rx: RecurrenceMatrix, ry: RecurrenceMatrix) -> RecurrenceMatrix:
    """Elementwise product of the two planes, keeping only ``j >= i``."""
    if rx.n != ry.n:
        raise SizeMismatch(f"matrix sizes differ: {rx.n} != {ry.n}")
    words = rx.words & ry.words & _upper_mask(rx.n)
    return RecurrenceMatrix(rx.n, words, MatrixShape.UPPER_TRIANGLE)


def proximity_matrix(healthy: GridSeries, contagious: GridSeries) -> RecurrenceMatrix:
    return combine_dimensions(*spatial_cross_recurrence(healthy, contagious))


@dataclass(frozen=True, eq=False)
class ExposureAccumulator:
    """Per-cell sum of combined matrices over several contagious agents."""

    n: int
    counts: np.ndarray
    contributor_count: int

    def __post_init__(self):
        if self.counts.shape != (self.n, self.n):
            raise ValueError("counts must be n x n")

    def merge(self, other: "ExposureAccumulator") -> "ExposureAccumulator":
        if other.n != self.n:
            raise SizeMismatch(f"accumulator sizes differ: {self.n} != {other.n}")
        return ExposureAccumulator(self.n, self.counts + other.counts,
                                   self.contributor_count + other.contributor_count)

    def to_matrix(self, threshold: int = 1) -> RecurrenceMatrix:
        """Cells with count ``>= threshold`` as an upper-triangle matrix."""
        return RecurrenceMatrix.from_bool(self.counts >= threshold, MatrixShape.UPPER_TRIANGLE)

    def simultaneous_total(self) -> int:
        return int(np.trace(self.counts))

    def total(self) -> int:
        return int(self.counts.sum())

    def lag_totals(self) -> dict[int, int]:
        out = {}
        for k in range(1, self.n):
            s = int(np.trace(self.counts, offset=k))
            if s:
                out[k] = s
        return out


def accumulate(matrices: Sequence[RecurrenceMatrix]) -> ExposureAccumulator:
    matrices = list(matrices)
    if not matrices:
        raise EmptyList("no matrices to accumulate")
    n = matrices[0].n
    counts = np.zeros((n, n), dtype=np.uint32)
    for m in matrices:
        if m.n != n:
            raise SizeMismatch(f"matrix sizes differ: {n} != {m.n}")
        if m.shape != MatrixShape.UPPER_TRIANGLE:
            raise ValueError("accumulate expects upper-triangle matrices")
        counts += m.to_bool()
    return ExposureAccumulator(n, counts, len(matrices))
