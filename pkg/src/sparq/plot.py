"""Recurrence-plot rendering to binary PGM (P5).

Row ``i`` of the matrix is image row ``i`` (top to bottom) and column ``j``
runs left to right. Binary palette: 0 (black) for a recurrent cell, 255
otherwise. Heat palette: ``255 - (255 * count) // contributor_count``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .recurrence import ExposureAccumulator, RecurrenceMatrix


class Palette(str, enum.Enum):
    BINARY = "binary"
    HEAT = "heat"


class Target(str, enum.Enum):
    MATRIX = "matrix"
    ACCUMULATOR = "accumulator"


@dataclass(frozen=True)
class PlotSpec:
    target: Target = Target.MATRIX
    scale: int = 1
    palette: Palette = Palette.BINARY

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        object.__setattr__(self, "palette", Palette(self.palette))
        if int(self.scale) != self.scale or self.scale < 1:
            raise ValueError("scale must be an integer >= 1")


def _pixels(m, palette: Palette) -> np.ndarray:
    if isinstance(m, ExposureAccumulator):
        counts = m.counts.astype(np.int64)
        if palette is Palette.BINARY:
            return np.where(counts > 0, 0, 255).astype(np.uint8)
        return (255 - (255 * counts) // max(m.contributor_count, 1)).astype(np.uint8)
    bits = m.to_bool()
    return np.where(bits, 0, 255).astype(np.uint8)


def render_plot(m: RecurrenceMatrix | ExposureAccumulator, spec: PlotSpec | None = None) -> bytes:
    spec = spec or PlotSpec(Target.ACCUMULATOR if isinstance(m, ExposureAccumulator) else Target.MATRIX)
    expected = Target.ACCUMULATOR if isinstance(m, ExposureAccumulator) else Target.MATRIX
    if spec.target is not expected:
        raise ValueError(f"plot target {spec.target.value} does not match {type(m).__name__}")
    img = _pixels(m, spec.palette)
    if spec.scale > 1:
        img = np.repeat(np.repeat(img, spec.scale, axis=0), spec.scale, axis=1)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a P5 image as written by :func:`render_plot`."""
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError("not a P5 image with maxval 255")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
