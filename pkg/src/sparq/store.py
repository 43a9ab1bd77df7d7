"""Single-directory file store for the contagious pool and opted-in artifacts.

Layout::

    <root>/index.json              config, hashed pool secret, record/artifact index
    <root>/.lock                   flock target (exclusive for writes, shared for reads)
    <root>/pool/<case_id>.cells    quantized grid series ("SPRC" container)
    <root>/pool/<case_id>.json     record metadata sidecar
    <root>/optin/<query_id>/meta.json
    <root>/optin/<query_id>/<label>.sprq   combined matrices ("SPRQ" container)

Only integer cell indices are ever written for contagious agents, and only
binary matrices plus metrics for healthy agents who opted in.
"""

from __future__ import annotations

import contextlib
import fcntl
import hashlib
import hmac
import json
import os
import re
import secrets
import shutil
import struct
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (FormatError, InsufficientOverlap, NotFound, StoreError,
                     Unauthorized)
from .ingest import Trajectory, interval_overlap
from .metrics import ContactMetrics, contact_metrics
from .preprocess import GridSeries, PipelineConfig, to_grid
from .recurrence import ExposureAccumulator, RecurrenceMatrix, accumulate, proximity_matrix
from .risk import RiskAssessment, RiskPolicy, assess

SECRET_ENV = "SPARQ_POOL_SECRET"
INDEX_FORMAT = 1
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,127}$")
_KDF_ITERATIONS = 20_000

_CELLS_MAGIC = b"SPRC"
_CELLS_HEADER = struct.Struct("<4sBIq")

NO_POOL_DATA = "NoPoolData"


def _check_id(kind, value):
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise StoreError(f"invalid {kind} {value!r}")


def _hash_secret(secret: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", secret.encode("utf-8"), salt, _KDF_ITERATIONS)


def encode_cells(gs: GridSeries) -> bytes:
    header = _CELLS_HEADER.pack(_CELLS_MAGIC, 1, gs.n, gs.start_index)
    return (header + gs.cells_x.astype("<i8").tobytes() + gs.cells_y.astype("<i8").tobytes()
            + gs.gap_mask.astype(np.uint8).tobytes())


def decode_cells(data: bytes, agent_id: str, window_s: int, grid_origin_t: int) -> GridSeries:
    magic, version, n, start = _CELLS_HEADER.unpack_from(data)
    if magic != _CELLS_MAGIC or version != 1:
        raise FormatError("not a cell-series container")
    body = data[_CELLS_HEADER.size:]
    if len(body) != 17 * n:
        raise FormatError("cell-series body length mismatch")
    cx = np.frombuffer(body, dtype="<i8", count=n)
    cy = np.frombuffer(body, dtype="<i8", count=n, offset=8 * n)
    gap = np.frombuffer(body, dtype=np.uint8, count=n, offset=16 * n).astype(bool)
    return GridSeries(agent_id, start, cx, cy, gap, window_s, grid_origin_t)


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


@dataclass(frozen=True)
class ContagiousRecord:
    case_id: str
    grid_series: GridSeries
    ingested_at: int
    authorized_by: str


@dataclass(frozen=True)
class OptInArtifact:
    query_id: str
    matrices: dict[str, RecurrenceMatrix]
    metrics: dict[str, ContactMetrics]
    assessment: dict
    opted_in: bool = True

    def accumulator(self) -> ExposureAccumulator | None:
        return accumulate(self.matrices.values()) if self.matrices else None


@dataclass
class QueryResult:
    """Outcome of one risk query. Held in memory only; nothing here is persisted unless opted in."""

    assessment: RiskAssessment
    artifact: OptInArtifact | None = None
    per_record: dict[str, ContactMetrics] = field(default_factory=dict)
    matrices: dict[str, RecurrenceMatrix] = field(default_factory=dict)
    accumulator: ExposureAccumulator | None = None
    skipped: list[str] = field(default_factory=list)
    expired: list[str] = field(default_factory=list)
    notice: str | None = None

    def to_dict(self) -> dict:
        return {
            "assessment": self.assessment.to_dict(),
            "records_matched": len(self.per_record),
            "records_skipped_overlap": len(self.skipped),
            "records_expired": len(self.expired),
            "notice": self.notice,
            "query_id": self.artifact.query_id if self.artifact else None,
            "metrics": {k: m.to_dict() for k, m in self.per_record.items()},
        }


class Store:
    def __init__(self, root):
        self.root = Path(root)
        if not (self.root / "index.json").is_file():
            raise NotFound(f"no store at {self.root}")
        self._lock_path = self.root / ".lock"

    # -- creation and locking

    @classmethod
    def create(cls, root, config: PipelineConfig, secret: str | None = None) -> "Store":
        """Initialise an empty store whose pool accepts ``secret`` (default: ``$SPARQ_POOL_SECRET``)."""
        config.window.check_nyquist()
        secret = os.environ.get(SECRET_ENV) if secret is None else secret
        if not secret:
            raise Unauthorized(f"a pool secret is required (set {SECRET_ENV})")
        root = Path(root)
        if (root / "index.json").exists():
            raise StoreError(f"store already exists at {root}")
        (root / "pool").mkdir(parents=True, exist_ok=True)
        (root / "optin").mkdir(exist_ok=True)
        (root / ".lock").touch()
        salt = secrets.token_bytes(16)
        index = {
            "format": INDEX_FORMAT,
            "config": config.to_dict(),
            "secret": {"salt": salt.hex(), "hash": _hash_secret(secret, salt).hex(),
                       "iterations": _KDF_ITERATIONS},
            "records": {},
            "artifacts": [],
        }
        _atomic_write(root / "index.json", json.dumps(index, indent=1, sort_keys=True).encode())
        return cls(root)

    @contextlib.contextmanager
    def _locked(self, exclusive: bool):
        with open(self._lock_path, "rb") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _read_index(self) -> dict:
        with open(self.root / "index.json", "rb") as fh:
            index = json.load(fh)
        if index.get("format") != INDEX_FORMAT:
            raise StoreError("unsupported index format")
        return index

    def _write_index(self, index: dict):
        _atomic_write(self.root / "index.json", json.dumps(index, indent=1, sort_keys=True).encode())

    @property
    def config(self) -> PipelineConfig:
        with self._locked(False):
            return PipelineConfig.from_dict(self._read_index()["config"])

    # -- contagious pool

    def _authorize(self, index: dict, credential: str | None) -> str:
        salt = bytes.fromhex(index["secret"]["salt"])
        expected = bytes.fromhex(index["secret"]["hash"])
        presented = _hash_secret(credential or "", salt)
        if not credential or not hmac.compare_digest(presented, expected):
            raise Unauthorized("credential rejected for the contagious pool")
        return hashlib.sha256(b"fingerprint:" + presented).hexdigest()[:16]

    def ingest_contagious(self, traj: Trajectory, credential: str | None,
                          case_id: str | None = None, now: int | None = None) -> ContagiousRecord:
        """Quantize a confirmed case's trajectory and add it to the pool.

        Raw coordinates are discarded once the grid series exists; nothing is
        written when the credential is rejected.
        """
        case_id = case_id or uuid.uuid4().hex
        _check_id("case_id", case_id)
        with self._locked(True):
            index = self._read_index()
            fingerprint = self._authorize(index, credential)
            if case_id in index["records"]:
                raise StoreError(f"case {case_id!r} already in the pool")
            cfg = PipelineConfig.from_dict(index["config"])
            grid = to_grid(traj, cfg.window, cfg.quant)
            ingested_at = int(time.time()) if now is None else int(now)
            pool = self.root / "pool"
            _atomic_write(pool / f"{case_id}.cells", encode_cells(grid))
            meta = {"case_id": case_id, "ingested_at": ingested_at, "authorized_by": fingerprint,
                    "start_index": grid.start_index, "n": grid.n}
            _atomic_write(pool / f"{case_id}.json", json.dumps(meta, sort_keys=True).encode())
            index["records"][case_id] = {"ingested_at": ingested_at, "authorized_by": fingerprint}
            self._write_index(index)
        return ContagiousRecord(case_id, grid, ingested_at, fingerprint)

    def _load_record(self, case_id: str, meta: dict, cfg: PipelineConfig) -> ContagiousRecord:
        data = (self.root / "pool" / f"{case_id}.cells").read_bytes()
        grid = decode_cells(data, case_id, cfg.window.window_s, cfg.window.grid_origin_t)
        return ContagiousRecord(case_id, grid, meta["ingested_at"], meta["authorized_by"])

    def records(self) -> list[ContagiousRecord]:
        with self._locked(False):
            index = self._read_index()
            cfg = PipelineConfig.from_dict(index["config"])
            return [self._load_record(cid, meta, cfg) for cid, meta in sorted(index["records"].items())]

    # -- queries

    def query_risk(self, healthy: Trajectory, opt_in: bool = False, policy: RiskPolicy | None = None,
                   query_id: str | None = None, now: int | None = None) -> QueryResult:
        """Assess a healthy agent against every pool record.

        The healthy grid series only lives inside this call. With
        ``opt_in=False`` the store is not written at all.
        """
        policy = policy or RiskPolicy()
        with self._locked(False):
            index = self._read_index()
            cfg = PipelineConfig.from_dict(index["config"])
            pool = [self._load_record(cid, meta, cfg) for cid, meta in sorted(index["records"].items())]

        result = QueryResult(assessment=assess([], policy))
        if not pool:
            result.notice = NO_POOL_DATA
            return result

        now = int(time.time()) if now is None else int(now)
        grid = to_grid(healthy, cfg.window, cfg.quant)
        for rec in pool:
            if cfg.retention_s is not None and rec.ingested_at < now - cfg.retention_s:
                result.expired.append(rec.case_id)
                continue
            try:
                interval_overlap(grid.span, rec.grid_series.span, cfg.min_overlap_s)
            except InsufficientOverlap:
                result.skipped.append(rec.case_id)
                continue
            contagious = rec.grid_series.realign(grid.start_index, grid.n)
            combined = proximity_matrix(grid, contagious)
            result.matrices[rec.case_id] = combined
            result.per_record[rec.case_id] = contact_metrics(combined, cfg.window.window_s, cfg.l_min)
        del grid

        if result.matrices:
            result.accumulator = accumulate(result.matrices.values())
        result.assessment = assess(result.per_record.values(), policy)

        if opt_in:
            result.artifact = self._persist_opt_in(result, query_id or uuid.uuid4().hex)
        return result

    # -- opt-in artifacts

    def _persist_opt_in(self, result: QueryResult, query_id: str) -> OptInArtifact:
        _check_id("query_id", query_id)
        # contributors are relabelled so the artifact does not link back to case ids
        labels = {cid: f"c{i}" for i, cid in enumerate(result.matrices)}
        matrices = {labels[c]: m for c, m in result.matrices.items()}
        metrics = {labels[c]: m for c, m in result.per_record.items()}
        artifact = OptInArtifact(query_id, matrices, metrics, result.assessment.to_dict())
        with self._locked(True):
            index = self._read_index()
            if query_id in index["artifacts"]:
                raise StoreError(f"artifact {query_id!r} already exists")
            final = self.root / "optin" / query_id
            tmp = self.root / "optin" / f".{query_id}.tmp"
            shutil.rmtree(tmp, ignore_errors=True)
            tmp.mkdir()
            for label, m in matrices.items():
                (tmp / f"{label}.sprq").write_bytes(m.to_bytes())
            meta = {
                "query_id": query_id,
                "opted_in": True,
                "assessment": artifact.assessment,
                "metrics": {label: m.to_dict() for label, m in metrics.items()},
            }
            (tmp / "meta.json").write_text(json.dumps(meta, sort_keys=True))
            os.replace(tmp, final)
            index["artifacts"].append(query_id)
            self._write_index(index)
        return artifact

    def artifacts(self) -> list[str]:
        with self._locked(False):
            return list(self._read_index()["artifacts"])

    def load_opt_in(self, query_id: str) -> OptInArtifact:
        _check_id("query_id", query_id)
        with self._locked(False):
            if query_id not in self._read_index()["artifacts"]:
                raise NotFound(f"no artifact {query_id!r}")
            d = self.root / "optin" / query_id
            meta = json.loads((d / "meta.json").read_text())
            metrics = {k: ContactMetrics.from_dict(v) for k, v in meta["metrics"].items()}
            matrices = {k: RecurrenceMatrix.from_bytes((d / f"{k}.sprq").read_bytes()) for k in metrics}
        return OptInArtifact(query_id, matrices, metrics, meta["assessment"], meta["opted_in"])

    def delete_opt_in(self, query_id: str) -> str:
        _check_id("query_id", query_id)
        with self._locked(True):
            index = self._read_index()
            if query_id not in index["artifacts"]:
                raise NotFound(f"no artifact {query_id!r}")
            index["artifacts"].remove(query_id)
            self._write_index(index)
            shutil.rmtree(self.root / "optin" / query_id, ignore_errors=True)
        return query_id
