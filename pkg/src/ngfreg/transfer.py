"""Grid conversion between the deformation grid and the image grid.

The conversion operator P is separable trilinear interpolation from
deformation-grid cell centers to image-grid cell centers, with clamp-to-edge
extrapolation outside the coarse cell-center hull (weights always sum to 1).

Three strategies compute the exact transpose P^T of the same operator:

* gather      -- each deformation-grid point sums its weighted image-grid
                 range (x inner, then y, then z); conflict-free and
                 bit-deterministic for any worker count.
* scatter     -- parallel over image slices, accumulating into shared
                 outputs under a lock (the atomic-add style).
* red-black   -- image slices grouped by the deformation slab they feed;
                 alternating slab colors run without write conflicts.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .geometry import DeformationField, Grid3, GridError, VectorField3
from .parallel import run_slabs

__all__ = [
    "GatherPlan",
    "apply_P",
    "apply_Pt",
    "apply_Pt_gather",
    "apply_Pt_redblack",
    "apply_Pt_scatter_atomic",
    "build_gather_plan",
    "dense_P_oracle",
]

PT_VARIANTS = ("gather", "scatter", "redblack")


def check_compatible(def_grid: Grid3, image_grid: Grid3) -> None:
    if not def_grid.same_extent(image_grid):
        raise GridError(
            f"deformation grid extent {def_grid.extent} (min {def_grid.domain_min}) does not "
            f"match image grid extent {image_grid.extent} (min {image_grid.domain_min})"
        )
    if any(mi < md for mi, md in zip(image_grid.dims, def_grid.dims)):
        raise GridError(
            f"image grid dims {image_grid.dims} must be >= deformation grid dims {def_grid.dims}"
        )


def _axis_transfer(image_grid: Grid3, def_grid: Grid3, axis: int):
    """Per image index along `axis`: lower deformation index i0 and weight w1 of i0+1."""
    xs = image_grid.axis_centers(axis)
    nd = def_grid.dims[axis]
    if nd == 1:
        return np.zeros(len(xs), dtype=np.intp), np.zeros(len(xs))
    t = (xs - def_grid.origin[axis]) / def_grid.spacing[axis]
    i0 = np.clip(np.floor(t).astype(np.intp), 0, nd - 2)
    w1 = np.clip(t - i0, 0.0, 1.0)
    return i0, w1


@dataclass(frozen=True)
class AxisPlan:
    """Transposed 1D interpolation along one axis: contiguous image ranges per point."""

    start: np.ndarray    # (nd,) first image index feeding each deformation point
    counts: np.ndarray   # (nd,) range lengths
    weights: np.ndarray  # (nd, max(counts)) zero-padded 1D weights


@dataclass(frozen=True)
class GatherPlan:
    def_grid: Grid3
    image_grid: Grid3
    axes: tuple[AxisPlan, AxisPlan, AxisPlan]  # x, y, z


def _build_axis_plan(image_grid: Grid3, def_grid: Grid3, axis: int) -> AxisPlan:
    i0, w1 = _axis_transfer(image_grid, def_grid, axis)
    ni = len(i0)
    nd = def_grid.dims[axis]
    start = np.empty(nd, dtype=np.intp)
    counts = np.empty(nd, dtype=np.intp)
    rows = []
    for d in range(nd):
        lo = 0 if d == 0 else int(np.searchsorted(i0, d - 1, side="left"))
        hi = ni if d == nd - 1 else int(np.searchsorted(i0, d, side="right"))
        seg = i0[lo:hi]
        w = np.where(seg == d, 1.0 - w1[lo:hi], np.where(seg == d - 1, w1[lo:hi], 0.0))
        start[d] = lo
        counts[d] = hi - lo
        rows.append(w)
    width = max(1, int(counts.max()))
    weights = np.zeros((nd, width))
    for d, w in enumerate(rows):
        weights[d, : len(w)] = w
    return AxisPlan(start=start, counts=counts, weights=weights)


def build_gather_plan(def_grid: Grid3, image_grid: Grid3) -> GatherPlan:
    check_compatible(def_grid, image_grid)
    return GatherPlan(
        def_grid=def_grid,
        image_grid=image_grid,
        axes=tuple(_build_axis_plan(image_grid, def_grid, a) for a in range(3)),
    )


# numpy array axis for geometric axis: x -> 2, y -> 1, z -> 0
_ARRAY_AXIS = (2, 1, 0)


def _interp_block(arr: np.ndarray, i0: np.ndarray, w1: np.ndarray, axis: int) -> np.ndarray:
    """Interpolate along one array axis: out has len(i0) entries on that axis."""
    n = arr.shape[axis]
    i1 = np.minimum(i0 + 1, n - 1)
    a0 = np.take(arr, i0, axis=axis)
    a1 = np.take(arr, i1, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = len(i0)
    w = w1.astype(arr.dtype).reshape(shape)
    return a0 * (1 - w) + a1 * w


def apply_P(y: DeformationField, image_grid: Grid3, workers: int = 1) -> VectorField3:
    """Convert a deformation from its (coarse) grid to the image grid."""
    check_compatible(y.grid, image_grid)
    coeffs = [_axis_transfer(image_grid, y.grid, a) for a in range(3)]
    out = np.empty((3,) + image_grid.shape, dtype=y.field.dtype)
    nz_img = image_grid.shape[0]

    def do_comp(c):
        arr = _interp_block(y.field[c], *coeffs[0], axis=2)
        arr = _interp_block(arr, *coeffs[1], axis=1)
        i0z, w1z = coeffs[2]

        def do_slab(lo, hi):
            out[c, lo:hi] = _interp_block(arr, i0z[lo:hi], w1z[lo:hi], axis=0)

        run_slabs(do_slab, nz_img, workers)

    for c in range(3):
        do_comp(c)
    return VectorField3(image_grid, out)


def _gather_block(arr: np.ndarray, ap: AxisPlan, axis: int, rows: slice | None = None) -> np.ndarray:
    """Apply the transposed 1D weights along one array axis, fixed ascending order."""
    start = ap.start if rows is None else ap.start[rows]
    W = ap.weights if rows is None else ap.weights[rows]
    ni = arr.shape[axis]
    width = W.shape[1]
    idx = np.minimum(start[:, None] + np.arange(width)[None, :], ni - 1)
    g = np.take(arr, idx, axis=axis)  # axis replaced by (nd, width)
    shape = [1] * arr.ndim
    shape[axis] = len(start)
    out = None
    for j in range(width):  # ascending index order keeps summation deterministic
        term = np.take(g, j, axis=axis + 1) * W[:, j].astype(arr.dtype).reshape(shape)
        out = term if out is None else out + term
    return out


def _validate_pt_input(r: VectorField3, plan: GatherPlan) -> None:
    if r.grid != plan.image_grid:
        raise GridError("input field grid does not match the plan's image grid")


def apply_Pt_gather(r: VectorField3, plan: GatherPlan, workers: int = 1) -> VectorField3:
    """P^T via per-output gathering; bit-identical for any worker count."""
    _validate_pt_input(r, plan)
    xp, yp, zp = plan.axes
    nz_img = plan.image_grid.shape[0]
    nz_def = plan.def_grid.shape[0]
    out = np.empty((3,) + plan.def_grid.shape, dtype=r.field.dtype)
    for c in range(3):
        tmp = np.empty((nz_img, plan.def_grid.dims[1], plan.def_grid.dims[0]), dtype=r.field.dtype)

        def do_xy(lo, hi):
            tmp[lo:hi] = _gather_block(_gather_block(r.field[c, lo:hi], xp, axis=2), yp, axis=1)

        run_slabs(do_xy, nz_img, workers)

        def do_z(lo, hi):
            out[c, lo:hi] = _gather_block(tmp, zp, axis=0, rows=slice(lo, hi))

        run_slabs(do_z, nz_def, workers)
    return VectorField3(plan.def_grid, out)


def _reduce_slice_xy(sl: np.ndarray, xp: AxisPlan, yp: AxisPlan) -> np.ndarray:
    return _gather_block(_gather_block(sl, xp, axis=1), yp, axis=0)


def apply_Pt_scatter_atomic(r: VectorField3, def_grid: Grid3, workers: int = 1) -> VectorField3:
    """P^T scattering image slices into shared outputs under a lock."""
    check_compatible(def_grid, r.grid)
    xp = _build_axis_plan(r.grid, def_grid, 0)
    yp = _build_axis_plan(r.grid, def_grid, 1)
    i0z, w1z = _axis_transfer(r.grid, def_grid, 2)
    nz_img = r.grid.shape[0]
    out = np.zeros((3,) + def_grid.shape, dtype=r.field.dtype)
    lock = threading.Lock()

    def do_slab(lo, hi):
        for k in range(lo, hi):
            d0 = i0z[k]
            w1 = r.field.dtype.type(w1z[k])
            w0 = r.field.dtype.type(1) - w1
            for c in range(3):
                sl = _reduce_slice_xy(r.field[c, k], xp, yp)
                with lock:
                    out[c, d0] += w0 * sl
                    if w1 != 0:
                        out[c, d0 + 1] += w1 * sl

    run_slabs(do_slab, nz_img, workers)
    return VectorField3(def_grid, out)


def apply_Pt_redblack(r: VectorField3, def_grid: Grid3, workers: int = 1) -> VectorField3:
    """P^T with image slices grouped by target deformation slab; alternating
    slab colors run concurrently without write conflicts."""
    check_compatible(def_grid, r.grid)
    xp = _build_axis_plan(r.grid, def_grid, 0)
    yp = _build_axis_plan(r.grid, def_grid, 1)
    i0z, w1z = _axis_transfer(r.grid, def_grid, 2)
    out = np.zeros((3,) + def_grid.shape, dtype=r.field.dtype)

    groups: dict[int, list[int]] = {}
    for k in range(r.grid.shape[0]):
        groups.setdefault(int(i0z[k]), []).append(k)

    def do_group(d0):
        for k in groups[d0]:
            w1 = r.field.dtype.type(w1z[k])
            w0 = r.field.dtype.type(1) - w1
            for c in range(3):
                sl = _reduce_slice_xy(r.field[c, k], xp, yp)
                out[c, d0] += w0 * sl
                if w1 != 0:
                    out[c, d0 + 1] += w1 * sl

    for parity in (0, 1):
        color = sorted(d for d in groups if d % 2 == parity)

        def do_slab(lo, hi):
            for d0 in color[lo:hi]:
                do_group(d0)

        run_slabs(do_slab, len(color), workers)
    return VectorField3(def_grid, out)


def apply_Pt(r: VectorField3, plan: GatherPlan, variant: str = "gather", workers: int = 1) -> VectorField3:
    if variant == "gather":
        return apply_Pt_gather(r, plan, workers)
    if variant == "scatter":
        return apply_Pt_scatter_atomic(r, plan.def_grid, workers)
    if variant == "redblack":
        return apply_Pt_redblack(r, plan.def_grid, workers)
    raise ValueError(f"unknown P^T variant {variant!r}, expected one of {PT_VARIANTS}")


def dense_P_oracle(def_grid: Grid3, image_grid: Grid3) -> np.ndarray:
    """Explicit (m_image, m_def) matrix for one scalar component of P. Test-only.

    Built directly from the 1D weight rule via Kronecker products, so it is
    an independent ground truth for the matrix-free apply/transpose paths.
    """
    check_compatible(def_grid, image_grid)
    if image_grid.num_points > 512 or def_grid.num_points > 512:
        raise ValueError("dense_P_oracle is limited to grids of at most 8^3 points")
    mats = []
    for a in range(3):
        i0, w1 = _axis_transfer(image_grid, def_grid, a)
        ni, nd = image_grid.dims[a], def_grid.dims[a]
        A = np.zeros((ni, nd))
        rows = np.arange(ni)
        np.add.at(A, (rows, i0), 1.0 - w1)
        np.add.at(A, (rows, np.minimum(i0 + 1, nd - 1)), w1)
        mats.append(A)
    return np.kron(mats[2], np.kron(mats[1], mats[0]))
