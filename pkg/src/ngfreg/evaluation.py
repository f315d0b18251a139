"""Landmark error and precision-divergence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DeformationField, Grid3, GridError, Image3

__all__ = ["LandmarkSet", "LandmarkErrorResult", "landmark_error",
           "field_difference_stats", "sample_deformation"]


@dataclass
class LandmarkSet:
    """Landmark positions in world millimeters."""

    points: np.ndarray  # (n, 3)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("landmarks must be finite")

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass
class LandmarkErrorResult:
    mean_mm: float
    stddev_mm: float            # population standard deviation
    per_landmark_mm: np.ndarray
    outside_domain: np.ndarray  # flags: reference landmark outside the image domain


def sample_deformation(y: DeformationField, points: np.ndarray) -> np.ndarray:
    """Trilinear evaluation of the deformation at world points (clamp-to-edge)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    g = y.grid
    corners = []
    fracs = []
    for a in range(3):
        t = (pts[:, a] - g.origin[a]) / g.spacing[a]
        n = g.dims[a]
        i0 = np.clip(np.floor(t).astype(np.intp), 0, max(n - 2, 0))
        f = np.clip(t - i0, 0.0, 1.0) if n > 1 else np.zeros(len(pts))
        corners.append(i0)
        fracs.append(f)
    out = np.zeros((len(pts), 3))
    fld = y.field.astype(np.float64, copy=False)
    for dz in (0, 1):
        wz = fracs[2] if dz else 1 - fracs[2]
        iz = np.minimum(corners[2] + dz, g.dims[2] - 1)
        for dy in (0, 1):
            wy = fracs[1] if dy else 1 - fracs[1]
            iy = np.minimum(corners[1] + dy, g.dims[1] - 1)
            for dx in (0, 1):
                wx = fracs[0] if dx else 1 - fracs[0]
                ix = np.minimum(corners[0] + dx, g.dims[0] - 1)
                w = (wx * wy * wz)[:, None]
                out += w * fld[:, iz, iy, ix].T
    return out


def landmark_error(
    y: DeformationField,
    lm_ref: LandmarkSet,
    lm_tmpl: LandmarkSet,
    image_grid: Grid3,
) -> LandmarkErrorResult:
    """Mean/stddev/per-landmark Euclidean error in mm.

    The deformation is evaluated at each reference landmark; the mapped
    position is compared against the template-space annotation.
    """
    if lm_ref.count != lm_tmpl.count:
        raise ValueError(
            f"landmark counts differ: {lm_ref.count} reference vs {lm_tmpl.count} template"
        )
    lo = np.array(image_grid.domain_min)
    hi = lo + np.array(image_grid.extent)
    outside = np.any((lm_ref.points < lo) | (lm_ref.points > hi), axis=1)
    mapped = sample_deformation(y, lm_ref.points)
    per = np.linalg.norm(mapped - lm_tmpl.points, axis=1)
    mean = float(per.mean()) if len(per) else 0.0
    std = float(per.std()) if len(per) else 0.0
    return LandmarkErrorResult(mean, std, per, outside)


def field_difference_stats(a: DeformationField, b: DeformationField):
    """Per-point displacement difference magnitude: (max mm, mean mm, volume)."""
    if a.grid != b.grid:
        raise GridError("deformation fields must share one grid")
    d = a.field.astype(np.float64, copy=False) - b.field.astype(np.float64, copy=False)
    mag = np.sqrt(np.sum(d * d, axis=0))
    return float(mag.max()), float(mag.mean()), Image3(a.grid, mag)
