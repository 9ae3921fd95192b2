"""
RANKFLOW Hydrodynamic Limit Solver

Picard iterations for the characteristic fields:

    f(y,t)   = 1 + sum_a r_a int_y^1 rho_a'(z) exp(-int_0^t w_a(f(z,s),s) ds) dz
    eta_a(t) = int_0^t eta_a(u) w_a(g(u,t),t) E_a(u,t) du
               - int_0^1 rho_a'(z) w_a(f(z,t),t) exp(-int_0^t w_a(f(z,v),v) dv) dz
    g(s,t)   = sum_a r_a [ B_a(t) - int_0^s eta_a(u) E_a(u,t) du ]

with E_a(u,t) = exp(-int_u^t w_a(g(u,v),v) dv) and
B_a(t) = 1 + int_0^1 rho_a'(z) exp(-int_0^t w_a(f(z,s),s) ds) dz.

Time integrals are composite trapezoid sums precomputed cumulatively. The
y-integrals against rho_a' are taken in Stieltjes form over profile increments,
which makes f(y, 0) = y and U(y, 0) = r rho(y) hold without quadrature error.
"""

import math
from typing import Optional

import numpy as np
import structlog
from scipy.integrate import cumulative_trapezoid

from rankflow.config import SolverSettings, get_settings
from rankflow.errors import NonContractionError
from rankflow.limit.field import CharacteristicField, FieldDiagnostics
from rankflow.model.spec import ModelSpec

logger = structlog.get_logger()


class _ContractionMonitor:
    """Tracks successive sup-differences and flags a stalled iteration."""

    def __init__(self, stage: str, stall_limit: int):
        self.stage = stage
        self.stall_limit = stall_limit
        self.plain: list[float] = []
        self.weighted: list[float] = []
        self._stalled = 0

    def record(self, plain: float, weighted: float) -> None:
        if self.weighted and weighted >= self.weighted[-1] and weighted > 0.0:
            self._stalled += 1
        else:
            self._stalled = 0
        self.plain.append(float(plain))
        self.weighted.append(float(weighted))
        if self._stalled >= self.stall_limit:
            raise NonContractionError(
                f"{self.stage} iteration stopped contracting after {len(self.plain)} sweeps",
                stage=self.stage,
                history=self.plain,
            )


def _grids(model: ModelSpec, M: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    if M < 2 or K < 2:
        raise ValueError(f"Grids need M, K >= 2, got M={M}, K={K}")
    return np.linspace(0.0, 1.0, M + 1), np.linspace(0.0, model.horizon, K + 1)


def _profile_increments(model: ModelSpec, ys: np.ndarray) -> np.ndarray:
    """rho_a(y_{j+1}) - rho_a(y_j), shape (A, M); non-positive for valid profiles."""
    rho = np.stack([p.eval_grid(ys, 0.0) for p in model.profiles])
    return rho[:, 1:] - rho[:, :-1]


def _tail_integral(increments: np.ndarray, values: np.ndarray) -> np.ndarray:
    """int_{y_j}^1 rho'(z) values(z, .) dz for every j; last row is 0."""
    cells = increments[:, None] * 0.5 * (values[:-1] + values[1:])
    tail = np.zeros_like(values)
    tail[:-1] = np.cumsum(cells[::-1], axis=0)[::-1]
    return tail


def _survival_from_f(w, F: np.ndarray, ts: np.ndarray, dt: float) -> np.ndarray:
    """exp(-int_0^t w(f(z,s), s) ds) on the (M+1, K+1) grid."""
    rates = w.eval_grid(F, ts[None, :])
    return np.exp(-cumulative_trapezoid(rates, dx=dt, axis=1, initial=0.0))


def _f_map(model: ModelSpec, F: np.ndarray, ys, ts, dt, increments) -> np.ndarray:
    new = np.ones_like(F)
    for a, (w, r) in enumerate(zip(model.rates, model.weights)):
        new += r * _tail_integral(increments[a], _survival_from_f(w, F, ts, dt))
    new[:, 0] = ys
    return np.clip(new, 0.0, 1.0)


def solve_f(
    model: ModelSpec,
    M: int,
    K: int,
    settings: Optional[SolverSettings] = None,
    diagnostics: Optional[FieldDiagnostics] = None,
) -> np.ndarray:
    """
    Fixed point of the f-map on the (M+1) x (K+1) grid.

    The first sweep evaluates rates at w(z, s), i.e. starts from f(z, s) = z.
    Iteration stops when the sup-difference drops below f_tol or after
    max_iterations sweeps.

    Raises:
        NonContractionError: the e^{-2Rt}-weighted sup-difference failed to
            decrease for stall_limit consecutive sweeps
    """
    settings = settings or get_settings().solver
    ys, ts = _grids(model, M, K)
    dt = ts[1] - ts[0]
    increments = _profile_increments(model, ys)
    damping = np.exp(-2.0 * model.require_rate_bound() * ts)[None, :]
    monitor = _ContractionMonitor("f", settings.stall_limit)

    # f(z, s) = z: characteristics frozen at their start
    F = np.repeat(ys[:, None], K + 1, axis=1)
    for _ in range(settings.max_iterations):
        new = _f_map(model, F, ys, ts, dt, increments)
        change = np.abs(new - F)
        F = new
        monitor.record(change.max(), (change * damping).max())
        if monitor.plain[-1] < settings.f_tol:
            break
    else:
        logger.warning("f iteration hit the sweep cap", last_diff=monitor.plain[-1])

    if diagnostics is not None:
        diagnostics.f_diffs = monitor.plain
        diagnostics.f_weighted_diffs = monitor.weighted
    logger.info("Solved f field", M=M, K=K, iterations=len(monitor.plain),
                last_diff=monitor.plain[-1])
    return F


def _time_weights(K: int, dt: float) -> np.ndarray:
    """W[k, i]: composite trapezoid weights of int_0^{t_k} on nodes i <= k."""
    weights = np.tril(np.full((K + 1, K + 1), dt))
    weights[:, 0] = 0.5 * dt
    np.fill_diagonal(weights, 0.5 * dt)
    weights[0, 0] = 0.0
    return weights


class _BoundarySystem:
    """Precomputed f-side quantities shared by every g sweep."""

    def __init__(self, model: ModelSpec, F: np.ndarray, M: int, K: int):
        self.model = model
        self.ys, self.ts = _grids(model, M, K)
        self.dt = self.ts[1] - self.ts[0]
        self.K = K
        increments = _profile_increments(model, self.ys)
        self.time_weights = _time_weights(K, self.dt)
        self.upper = np.triu(np.ones((K + 1, K + 1), dtype=bool))
        self.tails = []
        self.sources = []
        for a, w in enumerate(model.rates):
            survival = _survival_from_f(w, F, self.ts, self.dt)
            self.tails.append(_tail_integral(increments[a], survival))
            rates = w.eval_grid(F, self.ts[None, :])
            # -int_0^1 rho'(z) w(f(z,t),t) exp(...) dz
            self.sources.append(-_tail_integral(increments[a], rates * survival)[0])
        self.targets = np.stack([1.0 + tail[0] for tail in self.tails])

    def kernel(self, a: int, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Rates w_a(g(s_i,t_k), t_k) and survival E_a[i, k] = exp(-int_{s_i}^{t_k} w_a dv)
        for i <= k; entries below the diagonal are 0.
        """
        rates = self.model.rates[a].eval_grid(G, self.ts[None, :])
        cumulative = cumulative_trapezoid(rates, dx=self.dt, axis=1, initial=0.0)
        exponent = cumulative - np.diag(cumulative)[:, None]
        survival = np.where(self.upper, np.exp(-np.where(self.upper, exponent, 0.0)), 0.0)
        return np.where(self.upper, rates, 0.0), survival

    def solve_eta(
        self, a: int, rates: np.ndarray, survival: np.ndarray, start: np.ndarray,
        settings: SolverSettings, R: float,
    ) -> tuple[np.ndarray, _ContractionMonitor]:
        # kernel[k, i] = W[k, i] w_a(g(u_i, t_k), t_k) E_a(u_i, t_k)
        kernel = self.time_weights * (rates * survival).T
        source = self.sources[a]
        damping = np.exp(-2.0 * R * self.ts)
        monitor = _ContractionMonitor(f"eta[{a}]", settings.stall_limit)
        eta = start
        for _ in range(settings.max_iterations):
            new = kernel @ eta + source
            change = np.abs(new - eta)
            eta = new
            monitor.record(change.max(), (change * damping).max())
            if monitor.plain[-1] < settings.g_tol:
                break
        return np.maximum(eta, 0.0), monitor

    def boundary_integral(self, eta: np.ndarray, survival: np.ndarray) -> np.ndarray:
        """J[i, k] = int_0^{s_i} eta(u) E(u, t_k) du for i <= k."""
        return cumulative_trapezoid(eta[:, None] * survival, dx=self.dt, axis=0, initial=0.0)


def solve_g_eta(
    model: ModelSpec,
    F: np.ndarray,
    M: int,
    K: int,
    settings: Optional[SolverSettings] = None,
    diagnostics: Optional[FieldDiagnostics] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Joint fixed point of the eta- and g-iterations, alternating: for the current
    g every eta_a is iterated to convergence, then g is updated. Starts from
    g = 1 and eta = 0.

    Returns:
        (g, eta) with g of shape (K+1, K+1) (zero below the diagonal, zero on it)
        and eta of shape (A, K+1)
    """
    field, _ = _solve_boundary(model, F, M, K, settings, diagnostics)
    return field


def _solve_boundary(model, F, M, K, settings, diagnostics):
    """Outer sweep on g(s, t) over s <= t with an inner eta solve per type and sweep."""
    settings = settings or get_settings().solver
    R = model.require_rate_bound()
    system = _BoundarySystem(model, F, M, K)
    upper = system.upper
    # e^{-2Rt}-weighted sup norm for the stall check
    damping = np.exp(-2.0 * R * system.ts)[None, :]
    monitor = _ContractionMonitor("g", settings.stall_limit)
    eta_plain: list[list[list[float]]] = [[] for _ in range(model.A)]
    eta_weighted: list[list[list[float]]] = [[] for _ in range(model.A)]

    # start from g = 1 above the diagonal; eta warm-starts from the previous sweep
    G = np.where(upper, 1.0, 0.0)
    eta = np.zeros((model.A, K + 1))
    boundary = np.zeros((model.A, K + 1, K + 1))
    for _ in range(settings.max_iterations):
        new = np.zeros_like(G)
        for a, r in enumerate(model.weights):
            rates, survival = system.kernel(a, G)
            eta[a], eta_monitor = system.solve_eta(a, rates, survival, eta[a], settings, R)
            eta_plain[a].append(eta_monitor.plain)
            eta_weighted[a].append(eta_monitor.weighted)
            # J_a(s, t): type-a mass entered at the front before s and not yet jumped by t
            boundary[a] = system.boundary_integral(eta[a], survival)
            new += r * (system.targets[a][None, :] - boundary[a])
        # g(t, t) = 0 and g = 0 below the diagonal
        new = np.where(upper, np.clip(new, 0.0, 1.0), 0.0)
        np.fill_diagonal(new, 0.0)
        change = np.abs(new - G)
        G = new
        monitor.record(change.max(), (change * damping).max())
        if monitor.plain[-1] < settings.g_tol:
            break
    else:
        logger.warning("g iteration hit the sweep cap", last_diff=monitor.plain[-1])

    # J_a(t, t) against 1 + tail_a(0, t); J is extended below the diagonal by that target
    identity_defect = []
    for a in range(model.A):
        diagonal = np.diag(boundary[a])
        identity_defect.append(float(np.abs(diagonal - system.targets[a]).max()))
        boundary[a] = np.where(upper, boundary[a], system.targets[a][None, :])

    if diagnostics is not None:
        diagnostics.g_diffs = monitor.plain
        diagnostics.g_weighted_diffs = monitor.weighted
        diagnostics.eta_diffs = eta_plain
        diagnostics.eta_weighted_diffs = eta_weighted
        diagnostics.identity_defect = identity_defect
    logger.info(
        "Solved g and eta",
        K=K,
        iterations=len(monitor.plain),
        last_diff=monitor.plain[-1],
        identity_defect=max(identity_defect),
    )
    return (G, eta), (system, boundary)


def solve_field(
    model: ModelSpec,
    M: Optional[int] = None,
    K: Optional[int] = None,
    settings: Optional[SolverSettings] = None,
) -> CharacteristicField:
    """Solve f, then g and eta, and keep the cumulative integrals phi/U/V read."""
    settings = settings or get_settings().solver
    M = M or settings.grid_m
    K = K or settings.grid_k
    diagnostics = FieldDiagnostics()
    F = solve_f(model, M, K, settings, diagnostics)
    (G, eta), (system, boundary) = _solve_boundary(model, F, M, K, settings, diagnostics)
    field = CharacteristicField(
        model=model,
        ys=system.ys,
        ts=system.ts,
        f=F,
        g=G,
        eta=eta,
        tail=np.stack(system.tails),
        boundary=boundary,
        diagnostics=diagnostics,
    )
    contraction = math.exp(2.0 * model.require_rate_bound() * model.horizon)
    logger.info("Solved characteristic field", M=M, K=K, contraction_constant=contraction)
    return field
