"""
RANKFLOW Characteristic Field

Solved grids for the hydrodynamic limit and the pure evaluators built on them:
the characteristic map y_C, its inverse gamma-hat, the boundary measure phi,
the limit tail measure U and the velocity V.

Grids: y_j = j/M (j = 0..M), t_k = k T/K (k = 0..K). The s-axis of g shares the
t grid. Below the diagonal (s > t) g is extended by 0 and the boundary integral
J by its diagonal target B, so bilinear interpolation is defined on the whole
square.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from rankflow.errors import OutOfDomainError
from rankflow.model.spec import ModelSpec
from rankflow.simulation.observables import Anchor

_EPS = 1e-12
_VELOCITY_CACHE_SIZE = 64


@dataclass
class FieldDiagnostics:
    """Per-iteration sup-differences of the fixed-point solves."""
    f_diffs: list[float] = field(default_factory=list)
    f_weighted_diffs: list[float] = field(default_factory=list)
    g_diffs: list[float] = field(default_factory=list)
    g_weighted_diffs: list[float] = field(default_factory=list)
    # eta_diffs[a][sweep]: inner history of type a during one outer g sweep
    eta_diffs: list[list[list[float]]] = field(default_factory=list)
    eta_weighted_diffs: list[list[list[float]]] = field(default_factory=list)
    identity_defect: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "f_iterations": len(self.f_diffs),
            "f_diffs": self.f_diffs,
            "f_weighted_diffs": self.f_weighted_diffs,
            "g_iterations": len(self.g_diffs),
            "g_diffs": self.g_diffs,
            "g_weighted_diffs": self.g_weighted_diffs,
            "eta_iterations": [[len(h) for h in sweeps] for sweeps in self.eta_diffs],
            "eta_diffs": self.eta_diffs,
            "eta_weighted_diffs": self.eta_weighted_diffs,
            "identity_defect": self.identity_defect,
        }


@dataclass(eq=False)
class CharacteristicField:
    """
    Solved limit objects on tensor grids.

    Attributes:
        f: (M+1, K+1) characteristics from the initial line, f[j, k] = f(y_j, t_k)
        g: (K+1, K+1) characteristics from the left boundary, g[i, k] = g(s_i, t_k)
        eta: (A, K+1) boundary densities eta_a(t_k)
        tail: (A, M+1, K+1) int_{y_j}^1 rho_a'(z) exp(-int_0^t w_a(f(z,s),s) ds) dz
        boundary: (A, K+1, K+1) int_0^{s_i} eta_a(u) exp(-int_u^t w_a(g(u,v),v) dv) du
    """

    model: ModelSpec
    ys: np.ndarray
    ts: np.ndarray
    f: np.ndarray
    g: np.ndarray
    eta: np.ndarray
    tail: np.ndarray
    boundary: np.ndarray
    diagnostics: FieldDiagnostics = field(default_factory=FieldDiagnostics)
    _velocity_cache: OrderedDict = field(default_factory=OrderedDict, repr=False)

    @property
    def M(self) -> int:
        return len(self.ys) - 1

    @property
    def K(self) -> int:
        return len(self.ts) - 1

    @property
    def horizon(self) -> float:
        return float(self.ts[-1])

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_velocity_cache"] = OrderedDict()
        return state

    # -- grid access ---------------------------------------------------------

    def _time_cell(self, t: float) -> tuple[int, float]:
        T = self.horizon
        if not (-_EPS * max(1.0, T) <= t <= T * (1.0 + _EPS) + _EPS):
            raise OutOfDomainError(f"t={t} outside [0, {T}]", t=t)
        pos = min(max(t, 0.0), T) / T * self.K
        k = min(int(pos), self.K - 1)
        return k, pos - k

    def _column(self, grid: np.ndarray, t: float) -> np.ndarray:
        """Linear interpolation in t along the last axis."""
        k, theta = self._time_cell(t)
        return (1.0 - theta) * grid[..., k] + theta * grid[..., k + 1]

    @staticmethod
    def _check_y(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y < -_EPS) or np.any(y > 1.0 + _EPS):
            raise OutOfDomainError("y outside [0, 1]", y=float(np.ravel(y)[0]))
        return np.clip(y, 0.0, 1.0)

    def _check_anchor(self, anchor: Anchor, t: float) -> None:
        if anchor.y0 != 0.0 and anchor.t0 != 0.0:
            raise OutOfDomainError(f"{anchor.label} is not a boundary point")
        if not (0.0 <= anchor.y0 <= 1.0) or anchor.t0 < 0.0:
            raise OutOfDomainError(f"{anchor.label} outside the domain")
        if t < anchor.t0 - _EPS:
            raise OutOfDomainError(f"t={t} precedes t0={anchor.t0}", t=t)
        self._time_cell(t)

    # -- characteristics -----------------------------------------------------

    def y_C(self, anchor: Anchor, t: float) -> float:
        """Position at time t of the characteristic started at the boundary point."""
        self._check_anchor(anchor, t)
        if anchor.t0 == 0.0:
            return float(np.interp(anchor.y0, self.ys, self._column(self.f, t)))
        return float(np.interp(anchor.t0, self.ts, self._column(self.g, t)))

    def _invert_many(self, y: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(initial-line mask, y0, t0) for each query point."""
        f_col = self._column(self.f, t)
        on_initial = y >= f_col[0]
        y0 = np.where(on_initial, np.interp(y, f_col, self.ys), 0.0)
        t0 = np.zeros_like(y)
        if not on_initial.all():
            g_col = self._column(self.g, t)
            ds = self.ts[1] - self.ts[0]
            targets = y[~on_initial]
            # left-most s with g(s, t) <= y; g is non-increasing in s
            idx = np.searchsorted(-g_col, -targets, side="left")
            idx = np.clip(idx, 1, self.K)
            upper = g_col[idx - 1]
            lower = g_col[idx]
            span = np.where(upper > lower, upper - lower, 1.0)
            s = self.ts[idx - 1] + np.clip((upper - targets) / span, 0.0, 1.0) * ds
            t0[~on_initial] = np.minimum(s, t)
        return on_initial, y0, t0

    def invert_characteristics(self, y: float, t: float) -> Anchor:
        """gamma-hat(y, t): the boundary point whose characteristic passes through (y, t)."""
        y_arr = self._check_y(np.atleast_1d(float(y)))
        self._time_cell(t)
        _, y0, t0 = self._invert_many(y_arr, t)
        return Anchor(float(y0[0]), float(t0[0]))

    # -- measures ------------------------------------------------------------

    def _phi_columns(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self._column(self.tail, t), self._column(self.boundary, t)

    def phi(self, a: int, anchor: Anchor, t: float) -> float:
        """phi_a(gamma, t) for gamma on the initial line or the left boundary."""
        self._check_anchor(anchor, t)
        r = self.model.weights[a]
        tail_col, boundary_col = self._phi_columns(t)
        if anchor.t0 == 0.0:
            return float(-r * np.interp(anchor.y0, self.ys, tail_col[a]))
        return float(r * (-tail_col[a, 0] + np.interp(anchor.t0, self.ts, boundary_col[a])))

    def U_many(self, y: Sequence[float], t: float) -> np.ndarray:
        """U_a(y, t) for every type and query point, shape (A, len(y))."""
        y_arr = self._check_y(np.atleast_1d(np.asarray(y, dtype=float)))
        on_initial, y0, t0 = self._invert_many(y_arr, t)
        tail_col, boundary_col = self._phi_columns(t)
        result = np.empty((self.model.A, len(y_arr)))
        for a, r in enumerate(self.model.weights):
            from_initial = -r * np.interp(y0, self.ys, tail_col[a])
            from_boundary = r * (-tail_col[a, 0] + np.interp(t0, self.ts, boundary_col[a]))
            result[a] = np.where(on_initial, from_initial, from_boundary)
        return np.clip(result, 0.0, 1.0)

    def U(self, a: int, y: float, t: float) -> float:
        return float(self.U_many([y], t)[a, 0])

    def _velocity_columns(self, weights: tuple[float, ...], t: float):
        key = (weights, float(t))
        cached = self._velocity_cache.get(key)
        if cached is not None:
            self._velocity_cache.move_to_end(key)
            return cached
        U_col = self.U_many(self.ys, t)
        integrand = np.zeros_like(self.ys)
        for a, h in enumerate(weights):
            if h != 0.0:
                integrand += h * self.model.rate_slopes[a].eval_grid(self.ys, t) * U_col[a]
        # int_{y_j}^1: integrate from y = 1 backwards, last entry is 0
        dy = self.ys[1] - self.ys[0]
        tail_integral = cumulative_trapezoid(integrand[::-1], dx=dy, initial=0.0)[::-1]
        cached = (integrand, tail_integral)
        self._velocity_cache[key] = cached
        if len(self._velocity_cache) > _VELOCITY_CACHE_SIZE:
            self._velocity_cache.popitem(last=False)
        return cached

    def V_many(self, weights: Sequence[float], y: Sequence[float], t: float) -> np.ndarray:
        """V(h, y, t) = sum_a h_a w_a U_a + int_y^1 sum_a h_a dw_a/dz U_a dz."""
        h = tuple(float(x) for x in weights)
        if len(h) != self.model.A:
            raise ValueError(f"Expected {self.model.A} weights, got {len(h)}")
        y_arr = self._check_y(np.atleast_1d(np.asarray(y, dtype=float)))
        integrand_col, tail_integral = self._velocity_columns(h, t)
        U_here = self.U_many(y_arr, t)
        local = np.zeros_like(y_arr)
        integrand_here = np.zeros_like(y_arr)
        for a, ha in enumerate(h):
            if ha != 0.0:
                local += ha * self.model.rates[a].eval_grid(y_arr, t) * U_here[a]
                integrand_here += ha * self.model.rate_slopes[a].eval_grid(y_arr, t) * U_here[a]
        j = np.minimum((y_arr * self.M).astype(int), self.M - 1)
        right = self.ys[j + 1]
        partial = 0.5 * (right - y_arr) * (integrand_here + integrand_col[j + 1])
        return local + partial + tail_integral[j + 1]

    def V(self, weights: Sequence[float], y: float, t: float) -> float:
        return float(self.V_many(weights, [y], t)[0])

    # -- diagnostics ---------------------------------------------------------

    def solidity_defect(self) -> float:
        """max over grid nodes of |sum_a U_a(y, t) - (1 - y)|."""
        worst = 0.0
        for t in self.ts:
            total = self.U_many(self.ys, float(t)).sum(axis=0)
            worst = max(worst, float(np.abs(total - (1.0 - self.ys)).max()))
        return worst

    def identity_defect(self) -> list[float]:
        return list(self.diagnostics.identity_defect)


class LimitMeasure:
    """U_a(y, t) = phi_a(gamma-hat(y, t), t) over a solved field."""

    def __init__(self, field: CharacteristicField):
        self.field = field

    def __call__(self, a: int, y: float, t: float) -> float:
        return self.field.U(a, y, t)

    def vector(self, y: float, t: float) -> np.ndarray:
        return self.field.U_many([y], t)[:, 0]

    def total(self, y: float, t: float) -> float:
        return float(self.vector(y, t).sum())


def y_C(field: CharacteristicField, anchor: Anchor, t: float) -> float:
    return field.y_C(anchor, t)


def invert_characteristics(field: CharacteristicField, y: float, t: float) -> Anchor:
    return field.invert_characteristics(y, t)


def phi(field: CharacteristicField, a: int, anchor: Anchor, t: float) -> float:
    return field.phi(a, anchor, t)


def U_of(field: CharacteristicField, a: int, y: float, t: float) -> float:
    return field.U(a, y, t)


def V_of(field: CharacteristicField, weights: Sequence[float], y: float, t: float) -> float:
    return field.V(weights, y, t)
