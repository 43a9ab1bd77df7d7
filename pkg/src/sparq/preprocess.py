"""Windowed averaging onto a global time grid and floor-based spatial binning."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EmptyInterval, NyquistViolation
from .ingest import Trajectory

# Cell value written into gap windows. Matching code never relies on it alone:
# the gap mask is applied explicitly, so two gaps never count as co-location.
GAP_CELL = np.iinfo(np.int64).min
_MAX_CELL = 2 ** 62

DEFAULT_CRITICAL_EXPOSURE_S = 900


@dataclass(frozen=True)
class WindowConfig:
    window_s: int
    grid_origin_t: int = 0
    critical_exposure_s: int = DEFAULT_CRITICAL_EXPOSURE_S
    allow_nyquist_violation: bool = False

    def __post_init__(self):
        if int(self.window_s) != self.window_s or self.window_s <= 0:
            raise ConfigError("window_s must be a positive integer")
        if int(self.critical_exposure_s) != self.critical_exposure_s or self.critical_exposure_s <= 0:
            raise ConfigError("critical_exposure_s must be a positive integer")
        if int(self.grid_origin_t) != self.grid_origin_t:
            raise ConfigError("grid_origin_t must be an integer")

    def check_nyquist(self):
        # window_s <= critical / 2, kept in integers
        if not self.allow_nyquist_violation and 2 * self.window_s > self.critical_exposure_s:
            raise NyquistViolation(
                f"window_s={self.window_s} exceeds half of critical_exposure_s={self.critical_exposure_s}")

    def window_index(self, t):
        return (t - self.grid_origin_t) // self.window_s

    def window_start(self, index):
        return self.grid_origin_t + index * self.window_s


@dataclass(frozen=True)
class QuantConfig:
    cell_m: float

    def __post_init__(self):
        if not (math.isfinite(self.cell_m) and self.cell_m > 0):
            raise ConfigError("cell_m must be a positive finite number")


@dataclass(frozen=True, eq=False)
class AveragedSeries:
    agent_id: str
    start_index: int
    x: np.ndarray
    y: np.ndarray
    gap_mask: np.ndarray
    window_s: int
    grid_origin_t: int

    def __len__(self):
        return int(self.gap_mask.size)


@dataclass(frozen=True, eq=False)
class GridSeries:
    """Quantized cell series of one agent on the shared window grid.

    ``cells_x[k]`` / ``cells_y[k]`` describe global window ``start_index + k``.
    """

    agent_id: str
    start_index: int
    cells_x: np.ndarray
    cells_y: np.ndarray
    gap_mask: np.ndarray
    window_s: int
    grid_origin_t: int = 0

    def __post_init__(self):
        cx = np.asarray(self.cells_x, dtype=np.int64)
        cy = np.asarray(self.cells_y, dtype=np.int64)
        gm = np.asarray(self.gap_mask, dtype=bool)
        if not (cx.shape == cy.shape == gm.shape) or cx.ndim != 1 or cx.size == 0:
            raise ValueError("cells_x, cells_y and gap_mask must be equal-length, non-empty 1-D arrays")
        cx = np.where(gm, GAP_CELL, cx)
        cy = np.where(gm, GAP_CELL, cy)
        for a in (cx, cy, gm):
            a.flags.writeable = False
        object.__setattr__(self, "cells_x", cx)
        object.__setattr__(self, "cells_y", cy)
        object.__setattr__(self, "gap_mask", gm)
        object.__setattr__(self, "start_index", int(self.start_index))

    def __len__(self):
        return int(self.gap_mask.size)

    @property
    def n(self) -> int:
        return len(self)

    @property
    def end_index(self) -> int:
        return self.start_index + self.n

    @property
    def span(self) -> tuple[int, int]:
        """Time interval covered by the windows, in seconds."""
        return (self.grid_origin_t + self.start_index * self.window_s,
                self.grid_origin_t + self.end_index * self.window_s)

    def same_grid(self, other: "GridSeries") -> bool:
        return self.window_s == other.window_s and self.grid_origin_t == other.grid_origin_t

    def realign(self, start_index: int, n: int) -> "GridSeries":
        """Re-express the series over windows ``[start_index, start_index + n)``.

        Windows not covered by this series become gaps.
        """
        cx = np.full(n, GAP_CELL, dtype=np.int64)
        cy = np.full(n, GAP_CELL, dtype=np.int64)
        gm = np.ones(n, dtype=bool)
        lo = max(start_index, self.start_index)
        hi = min(start_index + n, self.end_index)
        if hi > lo:
            dst = slice(lo - start_index, hi - start_index)
            src = slice(lo - self.start_index, hi - self.start_index)
            cx[dst] = self.cells_x[src]
            cy[dst] = self.cells_y[src]
            gm[dst] = self.gap_mask[src]
        return replace(self, start_index=start_index, cells_x=cx, cells_y=cy, gap_mask=gm)


def window_range(interval, cfg: WindowConfig) -> tuple[int, int]:
    """Global window indices ``[first, last)`` touched by ``interval``."""
    t0, t1 = interval
    if t1 <= t0:
        raise EmptyInterval(f"interval [{t0}, {t1}] is empty")
    first = cfg.window_index(t0)
    last = -((cfg.grid_origin_t - t1) // cfg.window_s)  # ceil
    return first, last


def windowize(traj: Trajectory, interval, cfg: WindowConfig) -> AveragedSeries:
    """Average positions per window over the windows spanned by ``interval``.

    Every sample whose timestamp falls in ``[start, start + window_s)`` of a
    window contributes to that window's mean. Windows with no samples are gaps.
    """
    cfg.check_nyquist()
    first, last = window_range(interval, cfg)
    n = last - first

    idx = cfg.window_index(traj.t) - first
    keep = (idx >= 0) & (idx < n)
    idx = idx[keep]
    counts = np.bincount(idx, minlength=n)
    sx = np.bincount(idx, weights=traj.x[keep], minlength=n)
    sy = np.bincount(idx, weights=traj.y[keep], minlength=n)
    gap = counts == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        mx = np.where(gap, np.nan, sx / counts)
        my = np.where(gap, np.nan, sy / counts)
    return AveragedSeries(traj.agent_id, first, mx, my, gap, cfg.window_s, cfg.grid_origin_t)


def _floor_cells(v: np.ndarray, cell_m: float, gap: np.ndarray) -> np.ndarray:
    q = np.floor(np.where(gap, 0.0, v) / cell_m)
    if np.any(np.abs(q) > _MAX_CELL):
        raise ValueError("coordinate too large for the cell grid")
    return np.where(gap, GAP_CELL, q.astype(np.int64))


def quantize(avg: AveragedSeries, cfg: QuantConfig) -> GridSeries:
    return GridSeries(
        agent_id=avg.agent_id,
        start_index=avg.start_index,
        cells_x=_floor_cells(avg.x, cfg.cell_m, avg.gap_mask),
        cells_y=_floor_cells(avg.y, cfg.cell_m, avg.gap_mask),
        gap_mask=avg.gap_mask.copy(),
        window_s=avg.window_s,
        grid_origin_t=avg.grid_origin_t,
    )


def full_interval(traj: Trajectory) -> tuple[int, int]:
    """Interval covering every sample, including the window of the last one."""
    t0, t1 = traj.span
    return t0, t1 + 1


def to_grid(traj: Trajectory, window: WindowConfig, quant: QuantConfig, interval=None) -> GridSeries:
    """Windowize and quantize in one step (defaults to the trajectory's full span)."""
    if interval is None:
        interval = full_interval(traj)
    return quantize(windowize(traj, interval, window), quant)


def l_min_for(critical_exposure_s: int, window_s: int) -> int:
    """Shortest run of windows that spans the critical exposure time."""
    return max(1, -(-critical_exposure_s // window_s))


@dataclass(frozen=True)
class PipelineConfig:
    window: WindowConfig
    quant: QuantConfig
    min_overlap_s: int | None = None
    l_min: int | None = None
    retention_s: int | None = None

    def __post_init__(self):
        if self.min_overlap_s is None:
            object.__setattr__(self, "min_overlap_s", self.window.window_s)
        if self.l_min is None:
            object.__setattr__(self, "l_min", l_min_for(self.window.critical_exposure_s, self.window.window_s))
        if self.l_min < 1:
            raise ConfigError("l_min must be >= 1")
        if self.min_overlap_s < 0:
            raise ConfigError("min_overlap_s must be >= 0")
        if self.retention_s is not None and self.retention_s <= 0:
            raise ConfigError("retention_s must be positive")

    def to_dict(self) -> dict:
        return {
            "window_s": self.window.window_s,
            "grid_origin_t": self.window.grid_origin_t,
            "critical_exposure_s": self.window.critical_exposure_s,
            "allow_nyquist_violation": self.window.allow_nyquist_violation,
            "cell_m": self.quant.cell_m,
            "min_overlap_s": self.min_overlap_s,
            "l_min": self.l_min,
            "retention_s": self.retention_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        unknown = set(d) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**DEFAULT_CONFIG, **{k: v for k, v in d.items() if v is not None}}
        try:
            window = WindowConfig(
                window_s=int(merged["window_s"]),
                grid_origin_t=int(merged["grid_origin_t"]),
                critical_exposure_s=int(merged["critical_exposure_s"]),
                allow_nyquist_violation=bool(merged["allow_nyquist_violation"]),
            )
            quant = QuantConfig(float(merged["cell_m"]))
            return cls(
                window, quant,
                min_overlap_s=_opt_int(merged.get("min_overlap_s")),
                l_min=_opt_int(merged.get("l_min")),
                retention_s=_opt_int(merged.get("retention_s")),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def _opt_int(v):
    return None if v is None else int(v)


DEFAULT_CONFIG = {
    "window_s": 450,
    "grid_origin_t": 0,
    "critical_exposure_s": DEFAULT_CRITICAL_EXPOSURE_S,
    "allow_nyquist_violation": False,
    "cell_m": 2.0,
}
_CONFIG_KEYS = (*DEFAULT_CONFIG, "min_overlap_s", "l_min", "retention_s")


def read_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` and ``;`` start comments."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[_]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return dict(parser["_"])


def _coerce(key, raw: str):
    if key == "allow_nyquist_violation":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return float(raw) if key == "cell_m" else int(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config(text: str, overrides: dict | None = None) -> PipelineConfig:
    values = {k: _coerce(k, v) for k, v in read_key_values(text).items() if k in _CONFIG_KEYS}
    unknown = set(read_key_values(text)) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return PipelineConfig.from_dict(values)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Built-in defaults, then the file at ``path``, then ``overrides``."""
    text = ""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, overrides)
