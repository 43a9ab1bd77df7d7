"""One contagious/healthy pair through the whole pipeline."""

from __future__ import annotations

from .ingest import Trajectory, validate_overlap
from .metrics import ContactMetrics, contact_metrics
from .preprocess import GridSeries, PipelineConfig, quantize, windowize
from .recurrence import RecurrenceMatrix, proximity_matrix


def pair_grids(contagious: Trajectory, healthy: Trajectory, cfg: PipelineConfig,
               interval=None) -> tuple[GridSeries, GridSeries]:
    """Grid both agents over their shared span (last shared second included)."""
    if interval is None:
        start, end = validate_overlap(contagious, healthy, 0)
        interval = (start, end + 1)
    c = quantize(windowize(contagious, interval, cfg.window), cfg.quant)
    h = quantize(windowize(healthy, interval, cfg.window), cfg.quant)
    return c, h


def pair_matrix(contagious: Trajectory, healthy: Trajectory, cfg: PipelineConfig,
                interval=None) -> RecurrenceMatrix:
    c, h = pair_grids(contagious, healthy, cfg, interval)
    return proximity_matrix(h, c)


def pair_metrics(contagious: Trajectory, healthy: Trajectory, cfg: PipelineConfig,
                 interval=None) -> tuple[RecurrenceMatrix, ContactMetrics]:
    m = pair_matrix(contagious, healthy, cfg, interval)
    return m, contact_metrics(m, cfg.window.window_s, cfg.l_min)
