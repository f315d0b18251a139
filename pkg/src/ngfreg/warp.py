"""Template sampling at deformed positions and image-grid finite differences.

Both the warp and the gradient stencils come with exact transpose
(adjoint) applications so the distance gradient can be assembled by the
chain rule without materializing any operator matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid3, Image3, VectorField3
from .parallel import run_slabs

__all__ = [
    "WarpResult",
    "image_gradient",
    "image_gradient_apply_transpose",
    "warp_image",
    "warp_jacobian_apply_transpose",
]


@dataclass
class WarpResult:
    warped: Image3
    inside_mask: np.ndarray  # True where the sample fell inside the template hull


def _fractional_coords(template: Image3, positions: np.ndarray):
    """Continuous template indices and inside flag for world positions (3, ...)."""
    g = template.grid
    t = np.empty_like(positions)
    inside = np.ones(positions.shape[1:], dtype=bool)
    for a in range(3):
        t[a] = (positions[a] - g.origin[a]) / positions.dtype.type(g.spacing[a])
        inside &= (t[a] >= 0) & (t[a] <= g.dims[a] - 1)
    return t, inside


def _corner_data(template: Image3, t: np.ndarray):
    """Lower corner indices (clipped) and in-cell fractions per axis."""
    g = template.grid
    i0 = []
    f = []
    for a in range(3):
        n = g.dims[a]
        lo = np.clip(np.floor(t[a]).astype(np.intp), 0, max(n - 2, 0))
        i0.append(lo)
        f.append(np.clip(t[a] - lo, 0.0, 1.0).astype(t.dtype))
    return i0, f


def _corner_values(template: Image3, i0, dx, dy, dz):
    g = template.grid
    ix = np.minimum(i0[0] + dx, g.dims[0] - 1)
    iy = np.minimum(i0[1] + dy, g.dims[1] - 1)
    iz = np.minimum(i0[2] + dz, g.dims[2] - 1)
    return template.values[iz, iy, ix]


def warp_image(template: Image3, yhat: VectorField3, workers: int = 1) -> WarpResult:
    """Trilinear sampling of the template at world positions yhat.

    Positions outside the template cell-center hull produce value 0 with
    inside_mask False (Dirichlet-zero outside).
    """
    out = np.empty(yhat.grid.shape, dtype=yhat.field.dtype)
    mask = np.empty(yhat.grid.shape, dtype=bool)
    nz = yhat.grid.shape[0]

    def do_slab(lo, hi):
        pos = yhat.field[:, lo:hi]
        t, inside = _fractional_coords(template, pos)
        i0, f = _corner_data(template, t)
        acc = np.zeros(pos.shape[1:], dtype=pos.dtype)
        for dz in (0, 1):
            wz = f[2] if dz else 1 - f[2]
            for dy in (0, 1):
                wy = f[1] if dy else 1 - f[1]
                for dx in (0, 1):
                    wx = f[0] if dx else 1 - f[0]
                    acc += _corner_values(template, i0, dx, dy, dz).astype(pos.dtype) * (wx * wy * wz)
        out[lo:hi] = np.where(inside, acc, 0)
        mask[lo:hi] = inside

    run_slabs(do_slab, nz, workers)
    return WarpResult(warped=Image3(yhat.grid, out), inside_mask=mask)


def warp_jacobian_apply_transpose(
    template: Image3, yhat: VectorField3, w: np.ndarray, workers: int = 1
) -> VectorField3:
    """Apply the transposed interpolation Jacobian: per voxel, w_i times the
    spatial gradient of the trilinear interpolant of the template at yhat(i).

    Zero where the sample is outside the template hull.
    """
    g = template.grid
    out = np.empty((3,) + yhat.grid.shape, dtype=yhat.field.dtype)
    nz = yhat.grid.shape[0]

    def do_slab(lo, hi):
        pos = yhat.field[:, lo:hi]
        ws = w[lo:hi]
        t, inside = _fractional_coords(template, pos)
        i0, f = _corner_data(template, t)
        grads = [np.zeros(pos.shape[1:], dtype=pos.dtype) for _ in range(3)]
        for dz in (0, 1):
            wz, dwz = (f[2], 1.0) if dz else (1 - f[2], -1.0)
            for dy in (0, 1):
                wy, dwy = (f[1], 1.0) if dy else (1 - f[1], -1.0)
                for dx in (0, 1):
                    wx, dwx = (f[0], 1.0) if dx else (1 - f[0], -1.0)
                    c = _corner_values(template, i0, dx, dy, dz).astype(pos.dtype)
                    grads[0] += c * (dwx * wy * wz)
                    grads[1] += c * (wx * dwy * wz)
                    grads[2] += c * (wx * wy * dwz)
        for a in range(3):
            # degenerate axes have a constant interpolant
            scale = ws / pos.dtype.type(g.spacing[a]) if g.dims[a] > 1 else 0.0
            out[a, lo:hi] = np.where(inside, grads[a] * scale, 0)

    run_slabs(do_slab, nz, workers)
    return VectorField3(yhat.grid, out)


def _diff_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Central differences interior, one-sided first order at the two faces."""
    n = values.shape[axis]
    out = np.zeros_like(values)
    if n < 2:
        return out
    v = np.moveaxis(values, axis, 0)
    g = np.moveaxis(out, axis, 0)
    h = values.dtype.type(h)
    g[0] = (v[1] - v[0]) / h
    g[-1] = (v[-1] - v[-2]) / h
    if n > 2:
        g[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    return out


def image_gradient(img: Image3, workers: int = 1) -> VectorField3:
    """Finite-difference spatial gradient on the image grid."""
    g = img.grid
    out = np.empty((3,) + g.shape, dtype=img.values.dtype)
    for a in range(3):
        out[a] = _diff_axis(img.values, g.spacing[a], _np_axis(a))
    return VectorField3(g, out)


def _np_axis(a: int) -> int:
    return 2 - a  # geometric x,y,z -> numpy axes 2,1,0


def _diff_axis_transpose(w: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Exact transpose of _diff_axis along one axis."""
    n = w.shape[axis]
    out = np.zeros_like(w)
    if n < 2:
        return out
    ww = np.moveaxis(w, axis, 0)
    o = np.moveaxis(out, axis, 0)
    h = w.dtype.type(h)
    o[0] += -ww[0] / h
    o[1] += ww[0] / h
    o[n - 2] += -ww[n - 1] / h
    o[n - 1] += ww[n - 1] / h
    if n > 2:
        half = ww[1:-1] / (2 * h)
        o[: n - 2] += -half
        o[2:] += half
    return out


def image_gradient_apply_transpose(w: VectorField3, grid: Grid3) -> np.ndarray:
    """Apply G^T where G is the exact linear operator of image_gradient."""
    out = np.zeros(grid.shape, dtype=w.field.dtype)
    for a in range(3):
        out += _diff_axis_transpose(w.field[a], grid.spacing[a], _np_axis(a))
    return out
