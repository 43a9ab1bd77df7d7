"""Trajectory parsing from CSV / JSONL sources and planar projection.

CSV layout: ``agent_id,timestamp,x,y`` (or ``agent_id,timestamp,lat,lon``
under the equirectangular projection). The header line is optional. JSONL
carries one object per line with the same four keys.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DuplicateTimestamp, EmptyInput, InsufficientOverlap, MalformedRecord

# meters per degree used by the equirectangular projection
METERS_PER_DEG_LON = 111320.0
METERS_PER_DEG_LAT = 110540.0


class SourceKind(str, enum.Enum):
    GPS = "gps"
    INTERVIEW = "interview"
    OTHER = "other"


class ProjectionMode(str, enum.Enum):
    PLANAR_PASSTHROUGH = "planar_passthrough"
    EQUIRECTANGULAR = "equirectangular"


class RawSample(NamedTuple):
    timestamp: int
    x: float
    y: float


@dataclass(frozen=True)
class ProjectionConfig:
    reference_latitude_deg: float = 0.0
    mode: ProjectionMode = ProjectionMode.PLANAR_PASSTHROUGH

    def __post_init__(self):
        object.__setattr__(self, "mode", ProjectionMode(self.mode))
        if not -90.0 <= self.reference_latitude_deg <= 90.0:
            raise ValueError("reference_latitude_deg must lie in [-90, 90]")

    def project(self, a: float, b: float) -> tuple[float, float]:
        """Map one input coordinate pair to planar meters (x east, y north).

        Planar mode reads ``(x, y)``; equirectangular mode reads ``(lat, lon)``.
        """
        if self.mode is ProjectionMode.PLANAR_PASSTHROUGH:
            return a, b
        lat, lon = a, b
        x = lon * math.cos(math.radians(self.reference_latitude_deg)) * METERS_PER_DEG_LON
        y = lat * METERS_PER_DEG_LAT
        return x, y

    @property
    def columns(self) -> tuple[str, str]:
        if self.mode is ProjectionMode.EQUIRECTANGULAR:
            return ("lat", "lon")
        return ("x", "y")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped planar positions of a single agent, sorted by time.

    Stored column-wise (``t``, ``x``, ``y`` arrays) rather than as a list of
    samples; iterate :attr:`samples` for the row view.
    """

    agent_id: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    source_kind: SourceKind = SourceKind.OTHER

    def __post_init__(self):
        if not self.agent_id:
            raise ValueError("agent_id must be non-empty")
        t = np.asarray(self.t, dtype=np.int64)
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if not (t.shape == x.shape == y.shape) or t.ndim != 1:
            raise ValueError("t, x, y must be 1-D arrays of equal length")
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0)):
            raise ValueError("timestamps must be non-negative and strictly ascending")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("coordinates must be finite")
        for a in (t, x, y):
            a.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))

    def __len__(self):
        return int(self.t.size)

    @property
    def samples(self) -> Iterator[RawSample]:
        for t, x, y in zip(self.t.tolist(), self.x.tolist(), self.y.tolist()):
            yield RawSample(t, x, y)

    @property
    def span(self) -> tuple[int, int]:
        """First and last timestamp."""
        if not self.t.size:
            raise EmptyInput(f"trajectory {self.agent_id!r} has no samples")
        return int(self.t[0]), int(self.t[-1])

    @classmethod
    def from_samples(cls, agent_id, samples, source_kind=SourceKind.OTHER) -> "Trajectory":
        rows = sorted(samples, key=lambda s: s[0])
        for prev, cur in zip(rows, rows[1:]):
            if prev[0] == cur[0]:
                raise DuplicateTimestamp(cur[0])
        t = [r[0] for r in rows]
        x = [r[1] for r in rows]
        y = [r[2] for r in rows]
        return cls(agent_id, np.array(t, dtype=np.int64), np.array(x, dtype=np.float64),
                   np.array(y, dtype=np.float64), source_kind)


def _parse_timestamp(raw, line):
    if isinstance(raw, bool):
        raise MalformedRecord(line, "timestamp must be an integer")
    if isinstance(raw, int):
        t = raw
    elif isinstance(raw, str):
        try:
            t = int(raw.strip())
        except ValueError:
            raise MalformedRecord(line, f"timestamp {raw!r} is not an integer") from None
    else:
        raise MalformedRecord(line, "timestamp must be an integer")
    if t < 0:
        raise MalformedRecord(line, "timestamp must be non-negative")
    return t


def _parse_coord(raw, line):
    if isinstance(raw, bool):
        raise MalformedRecord(line, "coordinate must be numeric")
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise MalformedRecord(line, f"coordinate {raw!r} is not numeric") from None
    if not math.isfinite(v):
        raise MalformedRecord(line, "coordinate must be finite")
    return v


def _iter_csv(text, columns):
    expected_header = ["agent_id", "timestamp", *columns]
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip() == "agent_id":
            if [c.strip() for c in row] != expected_header:
                raise MalformedRecord(lineno, f"expected header {','.join(expected_header)}")
            continue
        if len(row) != 4:
            raise MalformedRecord(lineno, f"expected 4 fields, got {len(row)}")
        yield lineno, row[0].strip(), row[1], row[2], row[3]


def _iter_jsonl(text, columns):
    ca, cb = columns
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, str(exc)) from None
        if not isinstance(obj, dict):
            raise MalformedRecord(lineno, "expected a JSON object")
        try:
            yield lineno, obj["agent_id"], obj["timestamp"], obj[ca], obj[cb]
        except KeyError as exc:
            raise MalformedRecord(lineno, f"missing key {exc.args[0]!r}") from None


def parse_trajectory(data: bytes, format: str = "csv",
                     projection: ProjectionConfig | None = None,
                     source_kind: SourceKind = SourceKind.OTHER) -> Trajectory:
    """Parse a single-agent trajectory from raw bytes."""
    projection = projection or ProjectionConfig()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedRecord(0, f"input is not UTF-8: {exc}") from None
    if format == "csv":
        rows = _iter_csv(text, projection.columns)
    elif format == "jsonl":
        rows = _iter_jsonl(text, projection.columns)
    else:
        raise ValueError(f"unknown format {format!r}")

    agent_id = None
    seen = {}
    for lineno, aid, raw_t, raw_a, raw_b in rows:
        if not isinstance(aid, str) or not aid:
            raise MalformedRecord(lineno, "agent_id must be a non-empty string")
        if agent_id is None:
            agent_id = aid
        elif aid != agent_id:
            raise MalformedRecord(lineno, f"mixed agent ids {agent_id!r} and {aid!r}")
        t = _parse_timestamp(raw_t, lineno)
        a = _parse_coord(raw_a, lineno)
        b = _parse_coord(raw_b, lineno)
        if t in seen:
            raise DuplicateTimestamp(t)
        seen[t] = projection.project(a, b)

    if agent_id is None:
        raise EmptyInput("no samples in input")
    ts = sorted(seen)
    return Trajectory(
        agent_id,
        np.array(ts, dtype=np.int64),
        np.array([seen[t][0] for t in ts], dtype=np.float64),
        np.array([seen[t][1] for t in ts], dtype=np.float64),
        source_kind,
    )


def serialize_trajectory(traj: Trajectory, format: str = "csv") -> bytes:
    """Write planar samples back out; floats use ``repr`` so values round-trip exactly."""
    if format == "csv":
        lines = ["agent_id,timestamp,x,y"]
        lines += [f"{traj.agent_id},{s.timestamp},{s.x!r},{s.y!r}" for s in traj.samples]
    elif format == "jsonl":
        lines = [json.dumps({"agent_id": traj.agent_id, "timestamp": s.timestamp, "x": s.x, "y": s.y})
                 for s in traj.samples]
    else:
        raise ValueError(f"unknown format {format!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_trajectory(path, projection: ProjectionConfig | None = None) -> Trajectory:
    """Read a trajectory file, picking the format from its extension."""
    path = str(path)
    fmt = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "csv"
    with open(path, "rb") as fh:
        return parse_trajectory(fh.read(), fmt, projection)


def interval_overlap(a: tuple[int, int], b: tuple[int, int], min_overlap_s: int = 0) -> tuple[int, int]:
    start = max(a[0], b[0])
    end = min(a[1], b[1])
    if end < start or end - start < min_overlap_s:
        raise InsufficientOverlap(
            f"overlap [{start}, {end}] is shorter than {min_overlap_s} s")
    return start, end


def validate_overlap(a: Trajectory, b: Trajectory, min_overlap_s: int = 0) -> tuple[int, int]:
    """Common time interval of two trajectories, if it lasts at least ``min_overlap_s``."""
    return interval_overlap(a.span, b.span, min_overlap_s)
