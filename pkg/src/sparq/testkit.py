"""Synthetic scenarios with planted co-location, plus brute-force oracles.

The oracles here deliberately avoid numpy and the bit-packed code paths:
windowing, averaging, flooring and line scanning are re-done with plain
Python loops so they can check the optimized pipeline independently.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import UnrealizableSpec
from .ingest import SourceKind, Trajectory
from .metrics import ContactMetrics, RqaMetrics
from .preprocess import PipelineConfig
from .recurrence import MatrixShape, RecurrenceMatrix, n_words


@dataclass(frozen=True)
class Episode:
    """Contagious agent dwells at a spot from ``start_s`` for ``duration_s``;
    the healthy agent dwells there ``lag_s`` later.

    ``axis`` restricts the shared coordinate to one dimension ("x" or "y").
    """

    start_s: int
    duration_s: int
    lag_s: int = 0
    axis: str = "both"
    place: tuple[float, float] | None = None


@dataclass(frozen=True)
class AgentPath:
    agent_id: str
    waypoints: list[tuple[int, float, float]]


@dataclass(frozen=True)
class ScenarioSpec:
    """Agents' piecewise-linear paths; episodes link ``agents[0]`` (contagious)
    to ``agents[1]`` (healthy)."""

    agents: list[AgentPath]
    episodes: list[Episode] = field(default_factory=list)
    seed: int = 0
    window_s: int = 300
    grid_origin_t: int = 0
    cell_m: float = 2.0
    sample_interval_s: int = 60
    jitter_s: int = 0
    dropout: float = 0.0
    max_speed_mps: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        d["agents"] = [AgentPath(a["agent_id"], [tuple(w) for w in a["waypoints"]]) for a in d["agents"]]
        d["episodes"] = [Episode(**{**e, "place": tuple(e["place"]) if e.get("place") else None})
                         for e in d.get("episodes", [])]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_dict(json.loads(text))


def _snap_up(t, w, origin):
    return origin + -((origin - t) // w) * w


def planted_windows(spec: ScenarioSpec) -> list[tuple[int, int, int]]:
    """``(contagious_start_window, lag_windows, full_windows)`` for each episode after snapping."""
    out = []
    w = spec.window_s
    for ep in spec.episodes:
        s = _snap_up(ep.start_s, w, spec.grid_origin_t)
        out.append(((s - spec.grid_origin_t) // w, round(ep.lag_s / w), ep.duration_s // w))
    return out


def _dwell_intervals(spec: ScenarioSpec):
    w = spec.window_s
    for ep in spec.episodes:
        s = _snap_up(ep.start_s, w, spec.grid_origin_t)
        lag = round(ep.lag_s / w) * w
        yield ep, (s, s + ep.duration_s), (s + lag, s + lag + ep.duration_s)


def _check_disjoint(intervals, who):
    ordered = sorted(intervals)
    for (a0, a1), (b0, b1) in zip(ordered, ordered[1:]):
        if b0 < a1:
            raise UnrealizableSpec(f"{who} dwell intervals overlap: [{a0},{a1}) and [{b0},{b1})")


def generate_scenario(spec: ScenarioSpec) -> list[Trajectory]:
    """Sample every agent's path, overriding positions during planted dwells.

    Episode starts snap up to the window grid and lags round to whole windows,
    so with ``sample_interval_s + jitter_s <= window_s`` and no dropout each
    episode yields at least ``duration_s // window_s`` consecutive cells on
    diagonal offset ``round(lag_s / window_s)``.
    """
    if len(spec.agents) < 1:
        raise UnrealizableSpec("no agents")
    if spec.episodes and len(spec.agents) < 2:
        raise UnrealizableSpec("episodes need a contagious and a healthy agent")
    if spec.sample_interval_s <= 0 or not 0 <= spec.jitter_s < spec.sample_interval_s:
        raise UnrealizableSpec("need sample_interval_s > 0 and 0 <= jitter_s < sample_interval_s")
    if not 0.0 <= spec.dropout < 1.0:
        raise UnrealizableSpec("dropout must lie in [0, 1)")
    for a in spec.agents:
        ts = [wp[0] for wp in a.waypoints]
        if not ts or any(t1 <= t0 for t0, t1 in zip(ts, ts[1:])) or ts[0] < 0:
            raise UnrealizableSpec(f"agent {a.agent_id!r}: waypoint times must be non-negative and increasing")

    rng = random.Random(spec.seed)
    dwells = list(_dwell_intervals(spec))
    if spec.episodes:
        spans = [(a.waypoints[0][0], a.waypoints[-1][0]) for a in spec.agents[:2]]
        for ep, c_iv, h_iv in dwells:
            if ep.duration_s <= 0 or ep.lag_s < 0:
                raise UnrealizableSpec("episodes need duration_s > 0 and lag_s >= 0")
            if ep.axis not in ("both", "x", "y"):
                raise UnrealizableSpec(f"unknown axis {ep.axis!r}")
            for (lo, hi), (s0, s1) in ((c_iv, spans[0]), (h_iv, spans[1])):
                if lo < s0 or hi > s1 + 1:
                    raise UnrealizableSpec(f"dwell [{lo},{hi}) falls outside the agent's path [{s0},{s1}]")
        _check_disjoint([c for _, c, _ in dwells], "contagious")
        _check_disjoint([h for _, _, h in dwells], "healthy")

    places = []
    for ep, _, _ in dwells:
        if ep.place is not None:
            places.append(ep.place)
        else:
            # cell centres keep the dwell point away from bin edges
            cx, cy = rng.randrange(-5000, 5000), rng.randrange(-5000, 5000)
            places.append(((cx + 0.5) * spec.cell_m, (cy + 0.5) * spec.cell_m))

    out = []
    for idx, agent in enumerate(spec.agents):
        wts = [wp[0] for wp in agent.waypoints]
        wxs = [wp[1] for wp in agent.waypoints]
        wys = [wp[2] for wp in agent.waypoints]
        # path endpoints are always sampled so the trajectory spans the whole path
        times = [wts[0]]
        t = wts[0] + spec.sample_interval_s
        while t < wts[-1]:
            tj = t + (rng.randrange(spec.jitter_s + 1) if spec.jitter_s else 0)
            if tj < wts[-1] and rng.random() >= spec.dropout:
                times.append(tj)
            t += spec.sample_interval_s
        if wts[-1] > wts[0]:
            times.append(wts[-1])
        t_arr = np.array(times, dtype=np.int64)
        x = np.interp(t_arr, wts, wxs)
        y = np.interp(t_arr, wts, wys)
        if idx < 2:
            for (ep, c_iv, h_iv), (px, py) in zip(dwells, places):
                lo, hi = c_iv if idx == 0 else h_iv
                inside = (t_arr >= lo) & (t_arr < hi)
                if idx == 0 or ep.axis in ("both", "x"):
                    x[inside] = px
                if idx == 0 or ep.axis in ("both", "y"):
                    y[inside] = py
        if spec.max_speed_mps is not None and t_arr.size > 1:
            speed = np.hypot(np.diff(x), np.diff(y)) / np.diff(t_arr)
            if np.any(speed > spec.max_speed_mps):
                raise UnrealizableSpec(f"agent {agent.agent_id!r} exceeds max_speed_mps")
        out.append(Trajectory(agent.agent_id, t_arr, x, y, SourceKind.OTHER))
    return out


def random_scenario_spec(rng: random.Random, max_windows: int = 200) -> ScenarioSpec:
    """A small random two-agent scenario; both paths stay inside a few cells."""
    window_s = rng.choice([60, 120, 300, 450, 600])
    cell_m = rng.choice([1.0, 2.0, 2.5, 5.0, 10.0])
    origin = rng.randrange(0, 3600)
    n_windows = rng.randint(1, max_windows)
    t0 = origin + rng.randrange(0, 10 * window_s)
    # last second of the n_windows-th grid window touched, so N never exceeds max_windows
    end = origin + ((t0 - origin) // window_s + n_windows) * window_s
    t1 = max(t0, end - 1 - rng.randrange(0, window_s))
    extent = cell_m * rng.choice([2, 3, 5, 10])

    def path(agent_id):
        k = rng.randint(2, 8)
        inner = sorted(rng.sample(range(t0 + 1, t1), min(k, max(0, t1 - t0 - 1))))
        ts = [t0, *inner, t1] if t1 > t0 else [t0]
        return AgentPath(agent_id, [(t, rng.uniform(-extent, extent), rng.uniform(-extent, extent)) for t in ts])

    sample = rng.choice([window_s // 4, window_s // 2, window_s, window_s * 2])
    sample = max(1, sample)
    episodes = []
    if n_windows >= 6 and rng.random() < 0.7:
        dur = rng.randint(1, 3) * window_s
        lag = rng.randint(0, max(0, n_windows // 3)) * window_s
        start = t0 + rng.randrange(0, max(1, (t1 - t0 - dur - lag) // 2))
        if _snap_up(start, window_s, origin) + lag + dur <= t1:
            episodes.append(Episode(start, dur, lag))
    return ScenarioSpec(
        agents=[path("contagious"), path("healthy")],
        episodes=episodes,
        seed=rng.randrange(2 ** 31),
        window_s=window_s,
        grid_origin_t=origin,
        cell_m=cell_m,
        sample_interval_s=sample,
        jitter_s=rng.randrange(0, sample) if rng.random() < 0.5 else 0,
        dropout=rng.choice([0.0, 0.0, 0.1, 0.4]),
    )


# -- brute-force oracles


def _oracle_cells(traj: Trajectory, first: int, n: int, window_s: int, origin: int, cell_m: float):
    sums_x = [0.0] * n
    sums_y = [0.0] * n
    counts = [0] * n
    for t, x, y in zip(traj.t.tolist(), traj.x.tolist(), traj.y.tolist()):
        k = (t - origin) // window_s - first
        if 0 <= k < n:
            sums_x[k] += x
            sums_y[k] += y
            counts[k] += 1
    cells = []
    for k in range(n):
        if counts[k] == 0:
            cells.append(None)
        else:
            cells.append((math.floor(sums_x[k] / counts[k] / cell_m),
                          math.floor(sums_y[k] / counts[k] / cell_m)))
    return cells


def pair_interval(contagious: Trajectory, healthy: Trajectory) -> tuple[int, int]:
    """Shared sample span, widened by one second so the last shared window counts."""
    a0, a1 = contagious.span
    b0, b1 = healthy.span
    return max(a0, b0), min(a1, b1) + 1


def brute_force_rows(contagious: Trajectory, healthy: Trajectory, cfg: PipelineConfig, interval=None):
    """Upper-triangle proximity matrix as nested lists of 0/1 (row = contagious window)."""
    t0, t1 = interval if interval is not None else pair_interval(contagious, healthy)
    w = cfg.window.window_s
    origin = cfg.window.grid_origin_t
    first = (t0 - origin) // w
    last = (t1 - origin) // w + (1 if (t1 - origin) % w else 0)
    n = last - first
    c = _oracle_cells(contagious, first, n, w, origin, cfg.quant.cell_m)
    h = _oracle_cells(healthy, first, n, w, origin, cfg.quant.cell_m)
    rows = []
    for i in range(n):
        row = [0] * n
        for j in range(i, n):
            if c[i] is not None and h[j] is not None and c[i] == h[j]:
                row[j] = 1
        rows.append(row)
    return rows


def pack_rows_naive(rows, shape=MatrixShape.UPPER_TRIANGLE) -> RecurrenceMatrix:
    n = len(rows)
    nw = n_words(n)
    words = np.zeros((n, nw), dtype=np.uint64)
    for i, row in enumerate(rows):
        acc = 0
        for j, v in enumerate(row):
            if v:
                acc |= 1 << j
        for w in range(nw):
            words[i, w] = (acc >> (64 * w)) & 0xFFFFFFFFFFFFFFFF
    return RecurrenceMatrix(n, words, shape)


def brute_force_contact(contagious: Trajectory, healthy: Trajectory, cfg: PipelineConfig,
                        interval=None) -> RecurrenceMatrix:
    return pack_rows_naive(brute_force_rows(contagious, healthy, cfg, interval))


def _diagonal_runs_naive(rows, offsets):
    runs = []  # (offset, length)
    n = len(rows)
    for k in offsets:
        run = 0
        for i in range(n):
            j = i + k
            if 0 <= j < n and rows[i][j]:
                run += 1
            else:
                if run:
                    runs.append((k, run))
                run = 0
        if run:
            runs.append((k, run))
    return runs


def naive_contact_metrics(rows, window_s: int, l_min: int) -> ContactMetrics:
    n = len(rows)
    runs = _diagonal_runs_naive(rows, range(0, n))
    total = sum(l for _, l in runs)
    central = [l for k, l in runs if k == 0]
    lagged = [(k, l) for k, l in runs if k > 0]
    sc_raw = sum(central)
    lag = {}
    for k, l in lagged:
        lag[k] = lag.get(k, 0) + l
    hist = {}
    for _, l in runs:
        hist[l] = hist.get(l, 0) + 1

    def sus(lengths):
        tot = sum(lengths)
        return sum(l for l in lengths if l >= l_min) / tot if tot else 0.0

    return ContactMetrics(
        n=n,
        c_tot=total / (0.5 * n * n + 0.5 * n),
        c_tot_raw=total,
        c_sus=sus([l for _, l in runs]),
        sc_tot=sc_raw / n,
        sc_tot_raw=sc_raw,
        sc_sus=sus(central),
        maxline_central=max(central, default=0),
        maxline_lagged=max((l for _, l in lagged), default=0),
        lag_profile=lag,
        l_min=l_min,
        window_s=window_s,
        histogram=hist,
    )


def naive_rqa(rows, l_min: int, self_recurrence: bool = True) -> RqaMetrics:
    n = len(rows)
    runs = _diagonal_runs_naive(rows, range(-(n - 1), n))
    if self_recurrence:
        runs = [(k, l) for k, l in runs if k != 0]
        denom = n * n - n
    else:
        denom = n * n
    points = sum(l for _, l in runs)
    rr = points / denom if denom else 0.0
    det = sum(l for _, l in runs if l >= l_min) / points if points else 0.0
    return RqaMetrics(rr, det, det / rr if rr else 0.0, max((l for k, l in runs if k != 0), default=0))


# -- bundled melodies


def parse_symbols(text: str) -> list[int]:
    """Integer symbols separated by whitespace or commas; ``#`` starts a comment."""
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        out.extend(int(tok) for tok in line.replace(",", " ").split())
    if not out:
        raise ValueError("no symbols found")
    return out


def bundled_melody(name: str) -> list[int]:
    """``"frere_jacques"`` or ``"happy_birthday"`` as MIDI pitch codes, one per note."""
    text = resources.files("sparq").joinpath("data", f"{name}.txt").read_text(encoding="utf-8")
    return parse_symbols(text)
