"""Contact metrics, classic RQA measures and diagonal-line statistics.

All line statistics come from one scan of maximal diagonal runs: a run of
length 4 is a single line of length 4, never four embedded shorter lines,
so the length-weighted histogram always sums to the recurrent point count.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidLMin
from .recurrence import RecurrenceMatrix

_BLOCK_ELEMS = 1 << 17


class Scope(str, enum.Enum):
    UPPER_TRIANGLE_ALL = "upper_triangle_all"
    CENTRAL_DIAGONAL_ONLY = "central_diagonal_only"
    OFF_CENTER_ONLY = "off_center_only"


def _diagonal_block(words: np.ndarray, n: int, k_lo: int, k_hi: int) -> np.ndarray:
    """``out[r, i] = R[i, i + k_lo + r]``, zero where the column is out of range."""
    ks = np.arange(k_lo, k_hi, dtype=np.int64)[:, None]
    rows = np.arange(n, dtype=np.int64)[None, :]
    cols = rows + ks
    valid = (cols >= 0) & (cols < n)
    cols = np.where(valid, cols, 0)
    w = words[rows, cols >> 6]
    bits = (w >> (cols & 63).astype(np.uint64)) & np.uint64(1)
    return bits.astype(bool) & valid


def diagonal_runs(m: RecurrenceMatrix, k_lo: int, k_hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Maximal runs of 1s on diagonal offsets ``k_lo <= k < k_hi``.

    Returns parallel arrays ``(offset, length)``, ordered by offset then position.
    """
    n = m.n
    k_lo = max(k_lo, -(n - 1))
    k_hi = min(k_hi, n)
    step = max(1, _BLOCK_ELEMS // max(n, 1))
    offs, lens = [], []
    for k0 in range(k_lo, k_hi, step):
        k1 = min(k_hi, k0 + step)
        block = _diagonal_block(m.words, n, k0, k1)
        padded = np.zeros((k1 - k0, n + 2), dtype=np.int8)
        padded[:, 1:-1] = block
        d = np.diff(padded, axis=1)
        sr, sc = np.nonzero(d == 1)
        _, ec = np.nonzero(d == -1)
        offs.append(sr + k0)
        lens.append(ec - sc)
    if not offs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(offs).astype(np.int64), np.concatenate(lens).astype(np.int64)


@dataclass(frozen=True)
class LineHistogram:
    p: dict[int, int]
    scope: Scope = Scope.UPPER_TRIANGLE_ALL

    @classmethod
    def from_lengths(cls, lengths: np.ndarray, scope: Scope) -> "LineHistogram":
        ls, cs = np.unique(lengths, return_counts=True)
        return cls({int(l): int(c) for l, c in zip(ls, cs)}, scope)

    def weighted(self, l_from: int = 1) -> int:
        return sum(l * c for l, c in self.p.items() if l >= l_from)

    def maxline(self) -> int:
        return max(self.p, default=0)


_SCOPE_OFFSETS = {
    Scope.UPPER_TRIANGLE_ALL: (0, None),
    Scope.CENTRAL_DIAGONAL_ONLY: (0, 1),
    Scope.OFF_CENTER_ONLY: (1, None),
}


def diagonal_histogram(m: RecurrenceMatrix, scope: Scope = Scope.UPPER_TRIANGLE_ALL) -> LineHistogram:
    scope = Scope(scope)
    lo, hi = _SCOPE_OFFSETS[scope]
    _, lengths = diagonal_runs(m, lo, m.n if hi is None else hi)
    return LineHistogram.from_lengths(lengths, scope)


def _upper_points(n: int) -> int:
    # 0.5 n^2 + 0.5 n, kept integral
    return n * (n + 1) // 2


def contact_total(m: RecurrenceMatrix) -> tuple[float, int]:
    """Proportional and raw count of recurrent points with ``j >= i``."""
    _, lengths = diagonal_runs(m, 0, m.n)
    raw = int(lengths.sum())
    return raw / _upper_points(m.n), raw


def contact_sustained(h: LineHistogram, l_min: int) -> float:
    """Share of recurrent points lying on lines at least ``l_min`` long (0 if none)."""
    if l_min < 1:
        raise InvalidLMin(f"l_min must be >= 1, got {l_min}")
    total = h.weighted(1)
    if total == 0:
        return 0.0
    return h.weighted(l_min) / total


def simultaneous_metrics(m: RecurrenceMatrix, l_min: int) -> tuple[float, int, float]:
    """The three contact metrics restricted to the central diagonal."""
    if l_min < 1:
        raise InvalidLMin(f"l_min must be >= 1, got {l_min}")
    h = diagonal_histogram(m, Scope.CENTRAL_DIAGONAL_ONLY)
    raw = h.weighted(1)
    return raw / m.n, raw, contact_sustained(h, l_min)


def lag_profile(m: RecurrenceMatrix) -> dict[int, int]:
    """Recurrent points per diagonal offset ``k >= 1`` (only nonzero offsets)."""
    offs, lengths = diagonal_runs(m, 1, m.n)
    return _lag_sums(offs, lengths)


def _lag_sums(offs, lengths) -> dict[int, int]:
    if offs.size == 0:
        return {}
    ks, inv = np.unique(offs, return_inverse=True)
    sums = np.bincount(inv, weights=lengths).astype(np.int64)
    return {int(k): int(s) for k, s in zip(ks, sums)}


@dataclass(frozen=True)
class ContactMetrics:
    n: int
    c_tot: float
    c_tot_raw: int
    c_sus: float
    sc_tot: float
    sc_tot_raw: int
    sc_sus: float
    maxline_central: int
    maxline_lagged: int
    lag_profile: dict[int, int]
    l_min: int
    window_s: int
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def exposure_seconds(self) -> int:
        return self.c_tot_raw * self.window_s

    @property
    def simultaneous_exposure_seconds(self) -> int:
        return self.sc_tot_raw * self.window_s

    @property
    def lagged_raw(self) -> int:
        return self.c_tot_raw - self.sc_tot_raw

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lag_profile"] = {str(k): v for k, v in sorted(self.lag_profile.items())}
        d["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        d["exposure_seconds"] = self.exposure_seconds
        d["simultaneous_exposure_seconds"] = self.simultaneous_exposure_seconds
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ContactMetrics":
        d = dict(d)
        d.pop("exposure_seconds", None)
        d.pop("simultaneous_exposure_seconds", None)
        d["lag_profile"] = {int(k): int(v) for k, v in d.get("lag_profile", {}).items()}
        d["histogram"] = {int(k): int(v) for k, v in d.get("histogram", {}).items()}
        return cls(**d)


def contact_metrics(m: RecurrenceMatrix, window_s: int, l_min: int) -> ContactMetrics:
    """Every contact metric of an upper-triangle matrix from a single diagonal scan."""
    if l_min < 1:
        raise InvalidLMin(f"l_min must be >= 1, got {l_min}")
    n = m.n
    offs, lengths = diagonal_runs(m, 0, n)
    central = offs == 0
    h_all = LineHistogram.from_lengths(lengths, Scope.UPPER_TRIANGLE_ALL)
    h_central = LineHistogram.from_lengths(lengths[central], Scope.CENTRAL_DIAGONAL_ONLY)
    c_tot_raw = h_all.weighted(1)
    sc_tot_raw = h_central.weighted(1)
    lagged = lengths[~central]
    return ContactMetrics(
        n=n,
        c_tot=c_tot_raw / _upper_points(n),
        c_tot_raw=c_tot_raw,
        c_sus=contact_sustained(h_all, l_min),
        sc_tot=sc_tot_raw / n,
        sc_tot_raw=sc_tot_raw,
        sc_sus=contact_sustained(h_central, l_min),
        maxline_central=h_central.maxline(),
        maxline_lagged=int(lagged.max()) if lagged.size else 0,
        lag_profile=_lag_sums(offs[~central], lagged),
        l_min=l_min,
        window_s=window_s,
        histogram=h_all.p,
    )


@dataclass(frozen=True)
class RqaMetrics:
    recurrence_rate: float
    determinism: float
    det_rr_ratio: float
    maxline: int


def rqa_metrics(m: RecurrenceMatrix, l_min: int = 2, self_recurrence: bool = True) -> RqaMetrics:
    """Recurrence rate, determinism, their ratio and maxline of a full matrix.

    For self-recurrence the identity diagonal is excluded from every measure;
    for cross-recurrence it counts like any other diagonal. ``maxline`` always
    ignores the central diagonal.
    """
    if l_min < 1:
        raise InvalidLMin(f"l_min must be >= 1, got {l_min}")
    n = m.n
    offs, lengths = diagonal_runs(m, -(n - 1), n)
    if self_recurrence:
        keep = offs != 0
        offs, lengths = offs[keep], lengths[keep]
        denom = n * n - n
    else:
        denom = n * n
    points = int(lengths.sum())
    rr = points / denom if denom else 0.0
    det = int(lengths[lengths >= l_min].sum()) / points if points else 0.0
    off_center = lengths[offs != 0]
    return RqaMetrics(
        recurrence_rate=rr,
        determinism=det,
        det_rr_ratio=det / rr if rr else 0.0,
        maxline=int(off_center.max()) if off_center.size else 0,
    )
