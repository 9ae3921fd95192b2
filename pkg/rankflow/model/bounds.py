"""
RANKFLOW Rate Bound

R >= sup_a sup_{[0,1]x[0,T]} max{w_a, |dw_a/dy|}, used as the thinning rate of
the simulator and in the solver's contraction estimate.
"""

import numpy as np
import structlog

from rankflow.model.spec import ModelSpec

logger = structlog.get_logger()

BOUND_GRID = 1001


def _cell_padding(values: np.ndarray) -> float:
    """
    Overshoot allowance between grid nodes.

    Inside a cell a C2 function exceeds the largest corner value by at most
    (hy^2 |F_yy| + 2 hy ht |F_yt| + ht^2 |F_tt|) / 8. Each term is estimated by
    the matching second difference of the sampled values, so rates whose higher
    derivatives blow up at the boundary (y^1.5 at y = 0) still get a finite
    allowance. The estimate is doubled.
    """
    d_yy = np.abs(np.diff(values, n=2, axis=0)).max()
    d_yt = np.abs(np.diff(np.diff(values, axis=0), axis=1)).max()
    d_tt = np.abs(np.diff(values, n=2, axis=1)).max()
    return float(d_yy + 2.0 * d_yt + d_tt) / 4.0


def rate_bound(model: ModelSpec, grid_points: int = BOUND_GRID) -> float:
    """
    Certified upper bound on the rates and their y-slopes; stored in model.rate_bound.

    Raises:
        DomainError: a rate or its y-slope is not finite on the grid
        NotDifferentiableError: a rate uses min/max
    """
    if grid_points < 3:
        raise ValueError(f"rate_bound needs at least 3 grid points, got {grid_points}")
    ys = np.linspace(0.0, 1.0, grid_points)
    ts = np.linspace(0.0, model.horizon, grid_points)
    Y, T = np.meshgrid(ys, ts, indexing="ij")

    bound = 0.0
    for a, (w, slope) in enumerate(zip(model.rates, model.rate_slopes)):
        w_values = w.eval_grid(Y, T)
        slope_values = slope.eval_grid(Y, T)
        w_sup = w_values.max() + _cell_padding(w_values)
        slope_sup = np.abs(slope_values).max() + _cell_padding(slope_values)
        type_bound = float(max(w_sup, slope_sup))
        logger.debug("Rate bound for type", type_index=a, bound=type_bound)
        bound = max(bound, type_bound)

    model.rate_bound = bound
    logger.info("Computed rate bound", rate_bound=bound, types=model.A, grid=grid_points)
    return bound
