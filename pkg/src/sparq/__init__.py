"""Spatial cross-recurrence quantification for contact tracing."""

from .errors import SparqError
from .ingest import ProjectionConfig, ProjectionMode, RawSample, SourceKind, Trajectory, parse_trajectory, validate_overlap
from .metrics import (ContactMetrics, LineHistogram, RqaMetrics, Scope, contact_metrics, contact_sustained,
                      contact_total, diagonal_histogram, lag_profile, rqa_metrics, simultaneous_metrics)
from .pipeline import pair_grids, pair_matrix, pair_metrics
from .plot import Palette, PlotSpec, Target, render_plot
from .preprocess import GridSeries, PipelineConfig, QuantConfig, WindowConfig, l_min_for, load_config, quantize, windowize
from .recurrence import (ExposureAccumulator, MatrixShape, RecurrenceMatrix, accumulate, combine_dimensions,
                         cross_recurrence, self_recurrence, spatial_cross_recurrence)
from .risk import FeatureVector, RiskAssessment, RiskPolicy, Tier, assess, export_features
from .store import Store

__version__ = "0.1.0"
