"""Joint objective J(y) = D_NGF + alpha * S_curvature for one level.

The flat optimization variable is the deformation field in component-major
order (all y_x, then y_y, then y_z, each x-fastest), which is exactly the
ravel of the (3, nz, ny, nx) field array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import curvature_gradient, curvature_value
from .geometry import DeformationField, Grid3, Image3
from .ngf import NgfParams, ReferenceTerms, distance_and_gradient
from .transfer import GatherPlan

__all__ = ["LevelObjective"]


@dataclass
class LevelObjective:
    """Callable objective for one multilevel level; records the last D/S split."""

    template: Image3
    ref: ReferenceTerms
    plan: GatherPlan
    params: NgfParams
    alpha: float
    pt_variant: str = "gather"
    workers: int = 1
    last_D: float = 0.0
    last_S: float = 0.0

    @property
    def def_grid(self) -> Grid3:
        return self.plan.def_grid

    def field_from_flat(self, x: np.ndarray) -> DeformationField:
        return DeformationField(self.def_grid, x.reshape((3,) + self.def_grid.shape))

    def evaluate(self, y: DeformationField):
        """Returns (J, D, S, flat gradient)."""
        D, grad_D = distance_and_gradient(
            y, self.ref, self.template, self.plan, self.params,
            self.pt_variant, self.workers,
        )
        S = curvature_value(y)
        grad = grad_D.field + y.field.dtype.type(self.alpha) * curvature_gradient(y)
        J = D + self.alpha * S
        return J, D, S, grad.ravel()

    def __call__(self, x: np.ndarray):
        if not np.all(np.isfinite(x)):
            # overflowed line-search trial point; force a backtrack
            return float("inf"), np.zeros_like(x)
        J, D, S, g = self.evaluate(self.field_from_flat(x))
        self.last_D, self.last_S = D, S
        return J, g
