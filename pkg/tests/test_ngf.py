import numpy as np
import pytest

from ngfreg.geometry import DeformationField, Grid3, Image3, make_identity
from ngfreg.ngf import (
    NgfParams,
    distance_and_gradient,
    ngf_value,
    precompute_reference_terms,
)
from ngfreg.synthetic import make_volume, smooth_random_volume
from ngfreg.transfer import build_gather_plan
from ngfreg.warp import warp_image


def _grid(dims, spacing=(1, 1, 1), origin=(0, 0, 0)):
    return Grid3(dims, spacing, origin)


def _ramps(g):
    x = g.axis_centers(0)[None, None, :]
    y = g.axis_centers(1)[None, :, None]
    T = Image3(g, x + np.zeros(g.shape))
    R = Image3(g, y + np.zeros(g.shape))
    return T, R


def test_params_validation():
    with pytest.raises(ValueError):
        NgfParams(tau=0.0)
    with pytest.raises(ValueError):
        NgfParams(rho=-1.0)


def test_value_on_orthogonal_ramps():
    # T = x and R = y have exact unit gradients (1,0,0) and (0,1,0); with
    # tau = rho = 0.1 each voxel contributes 1 - (0.01/1.01)^2.
    g = _grid((6, 6, 6))
    T, R = _ramps(g)
    params = NgfParams(tau=0.1, rho=0.1)
    ref = precompute_reference_terms(R, params)
    warped = warp_image(T, make_identity(g))
    h_bar = g.cell_volume
    per_voxel = 1.0 - (0.01 / 1.01) ** 2
    expected = h_bar / 2 * per_voxel * g.num_points
    assert abs(ngf_value(warped, ref, params, h_bar) - expected) < 1e-10 * expected


def test_matched_images_give_zero_distance():
    # with tau == rho and T == R, r_i == 1 exactly, so every term vanishes
    g = _grid((8, 7, 6), (1.1, 0.9, 1.2))
    T = smooth_random_volume(g, seed=21)
    params = NgfParams(tau=5.0, rho=5.0)
    ref = precompute_reference_terms(T, params)
    warped = warp_image(T, make_identity(g))
    assert abs(ngf_value(warped, ref, params, g.cell_volume)) < 1e-12


def test_matched_images_identity_is_stationary():
    g = _grid((8, 8, 8))
    T = smooth_random_volume(g, seed=22)
    params = NgfParams(tau=5.0, rho=5.0)
    ref = precompute_reference_terms(T, params)
    plan = build_gather_plan(g, g)
    _, grad = distance_and_gradient(make_identity(g), ref, T, plan, params)
    assert np.max(np.abs(grad.field)) < 1e-12


def test_intensity_scale_invariance_with_scaled_parameters():
    # scaling both images by c and (tau, rho) by c leaves every r_i unchanged
    g = _grid((6, 6, 6), (1.3, 1.0, 0.8))
    T = smooth_random_volume(g, seed=31)
    R = smooth_random_volume(g, seed=32)
    yid = make_identity(g)
    h_bar = g.cell_volume
    base = ngf_value(warp_image(T, yid),
                     precompute_reference_terms(R, NgfParams(10.0, 10.0)),
                     NgfParams(10.0, 10.0), h_bar)
    c = 7.5
    Tc = Image3(g, c * T.values)
    Rc = Image3(g, c * R.values)
    scaled = ngf_value(warp_image(Tc, yid),
                       precompute_reference_terms(Rc, NgfParams(10.0 * c, 10.0 * c)),
                       NgfParams(10.0 * c, 10.0 * c), h_bar)
    assert abs(base - scaled) < 1e-9 * (abs(base) + 1)


def test_distance_bounded_by_domain_volume():
    # every term lies in [0, 1], so 0 <= D <= (h_bar/2) * N
    g = _grid((7, 6, 5), (1.0, 1.4, 0.9))
    T = smooth_random_volume(g, seed=41)
    R = smooth_random_volume(g, seed=42)
    params = NgfParams(1.0, 1.0)
    ref = precompute_reference_terms(R, params)
    D = ngf_value(warp_image(T, make_identity(g)), ref, params, g.cell_volume)
    assert 0.0 <= D <= g.cell_volume / 2 * g.num_points + 1e-12


def _extended_template(image_grid, pad=2):
    """Template covering the image grid plus a margin, so test perturbations
    never touch the Dirichlet boundary of the hull."""
    dims = tuple(n + 2 * pad for n in image_grid.dims)
    origin = tuple(o - pad * s for o, s in zip(image_grid.origin, image_grid.spacing))
    return make_volume(Grid3(dims, image_grid.spacing, origin))


def test_gradient_matches_fd(rng):
    gi = _grid((10, 9, 8), (1.0, 1.1, 0.9))
    gd = Grid3((5, 3, 4),
               tuple(n * s / m for n, s, m in zip(gi.dims, gi.spacing, (5, 3, 4))),
               tuple(o - s / 2 + n * s / m / 2
                     for o, s, n, m in zip(gi.origin, gi.spacing, gi.dims, (5, 3, 4))))
    T = _extended_template(gi)
    R = make_volume(gi)
    params = NgfParams(10.0, 10.0)
    ref = precompute_reference_terms(R, params)
    plan = build_gather_plan(gd, gi)
    # offsets of ~0.37 cells keep the image-grid samples off trilinear knots
    field = make_identity(gd).field + 0.37 + 0.1 * rng.standard_normal((3,) + gd.shape)
    y = DeformationField(gd, field)
    _, grad = distance_and_gradient(y, ref, T, plan, params)
    gnorm = max(float(np.max(np.abs(grad.field))), 1.0)

    eps = 1e-6
    for (c, k, j, i) in [(0, 1, 1, 2), (1, 3, 0, 4), (2, 2, 2, 0), (0, 0, 2, 1)]:
        fp = field.copy()
        fp[c, k, j, i] += eps
        fm = field.copy()
        fm[c, k, j, i] -= eps
        Dp, _ = distance_and_gradient(DeformationField(gd, fp), ref, T, plan, params)
        Dm, _ = distance_and_gradient(DeformationField(gd, fm), ref, T, plan, params)
        fd = (Dp - Dm) / (2 * eps)
        assert abs(fd - grad.field[c, k, j, i]) < 2e-5 * gnorm


def test_variants_and_workers_agree(rng):
    gi = _grid((9, 8, 7))
    gd = Grid3((3, 4, 2),
               tuple(n * s / m for n, s, m in zip(gi.dims, gi.spacing, (3, 4, 2))),
               tuple(o - s / 2 + n * s / m / 2
                     for o, s, n, m in zip(gi.origin, gi.spacing, gi.dims, (3, 4, 2))))
    T = _extended_template(gi)
    R = make_volume(gi)
    params = NgfParams()
    ref = precompute_reference_terms(R, params)
    plan = build_gather_plan(gd, gi)
    y = DeformationField(gd, make_identity(gd).field
                         + 0.5 * rng.standard_normal((3,) + gd.shape))
    D0, g0 = distance_and_gradient(y, ref, T, plan, params, "gather", workers=1)
    for variant in ("gather", "scatter", "redblack"):
        for w in (1, 4):
            D, gv = distance_and_gradient(y, ref, T, plan, params, variant, workers=w)
            assert D == D0
            scale = np.abs(g0.field).max() + 1e-30
            if variant == "gather":
                assert np.array_equal(gv.field, g0.field)
            else:
                assert np.max(np.abs(gv.field - g0.field)) <= 1e-12 * scale
