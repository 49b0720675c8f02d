"""Quantitative implicit-function bounds for a split system f(x, y).

Given f with f(x0, y0) = z0 and an invertible D_y f at the base point, the
implicit map y(x) with f(x, y(x)) = z0 exists on B(x0, r_x) with values in
B(y0, r_y) whenever both strict inequalities hold:

    L_x * r_x + L_y * r_y  <  r_y / M_y - M_x * r_x      (domain condition)
    M_y * L_y              <  1                          (contraction condition)

where M_x, M_y are base-point operator norms and L_x, L_y are suprema of
Jacobian deviations over the stated balls. Sampled L estimates are maxima
over finite subsets and therefore lower bounds on the true suprema; analytic
overrides restore rigour when a closed form is available.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFinite, SingularDyf
from .norms import check_norm_kind, induced_norm, inverse_norm, vector_norm
from .sampling import ball_points, max_over
from .system import fd_jacobians

DEFAULT_SAMPLES_PER_DIM = 17


@dataclass(frozen=True)
class SplitFunction:
    """f : R^{n_x} x R^{n_y} -> R^{n_y} with both Jacobian blocks."""

    n_x: int
    n_y: int
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_y: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def value(self, x, y) -> np.ndarray:
        return np.asarray(self.fun(np.asarray(x, float), np.asarray(y, float)), dtype=float).ravel()

    def dx(self, x, y) -> np.ndarray:
        return np.asarray(self.jac_x(np.asarray(x, float), np.asarray(y, float)), dtype=float).reshape(self.n_y, self.n_x)

    def dy(self, x, y) -> np.ndarray:
        return np.asarray(self.jac_y(np.asarray(x, float), np.asarray(y, float)), dtype=float).reshape(self.n_y, self.n_y)


def split_function(fun, n_x: int, n_y: int, jac_x=None, jac_y=None) -> SplitFunction:
    """Wrap a callable, filling missing Jacobian blocks by central differences."""
    if jac_x is None:
        jac_x = lambda x, y: fd_jacobians(fun, n_x, n_y, x, y)[0]
    if jac_y is None:
        jac_y = lambda x, y: fd_jacobians(fun, n_x, n_y, x, y)[1]
    return SplitFunction(n_x=n_x, n_y=n_y, fun=fun, jac_x=jac_x, jac_y=jac_y)


@dataclass(frozen=True)
class SupremumEstimator:
    """How deviation suprema are obtained.

    mode "sampled" maximises over the deterministic ball sample set and is a
    lower bound on the true supremum (best effort, flagged non-rigorous).
    mode "analytic" uses the provided closed-form overrides where present
    and falls back to sampling for the rest. safety_factor (>= 1) inflates
    sampled estimates only; overrides are trusted as given.
    """

    mode: str = "sampled"
    samples_per_dim: int = DEFAULT_SAMPLES_PER_DIM
    safety_factor: float = 1.0
    override_L_x: Callable[[float], float] | None = None
    override_L_y: Callable[[float, float], float] | None = None

    def __post_init__(self):
        if self.mode not in ("sampled", "analytic"):
            raise ValueError(f"estimator mode must be 'sampled' or 'analytic', got {self.mode!r}")
        if self.samples_per_dim < 2:
            raise ValueError("samples_per_dim must be at least 2")
        if not (np.isfinite(self.safety_factor) and self.safety_factor >= 1.0):
            raise ValueError("safety_factor must be finite and >= 1")
        if self.mode == "analytic" and self.override_L_x is None and self.override_L_y is None:
            raise ValueError("analytic mode requires at least one override")

    def uses_override_x(self) -> bool:
        return self.mode == "analytic" and self.override_L_x is not None

    def uses_override_y(self) -> bool:
        return self.mode == "analytic" and self.override_L_y is not None


@dataclass(frozen=True)
class ImftQuantities:
    """Base-point norms plus deviation-bound evaluators for one run."""

    M_x: float
    M_y: float
    L_x: Callable[[float], float]
    L_y: Callable[[float, float], float]
    norm_kind: str
    L_x_rigorous: bool
    L_y_rigorous: bool

    @property
    def rigorous(self) -> bool:
        return self.L_x_rigorous and self.L_y_rigorous


@dataclass(frozen=True)
class ConditionCheck:
    """Strict-inequality verdict; a zero margin fails."""

    certified: bool
    margin_domain: float
    margin_contraction: float


@dataclass(frozen=True)
class RegionEntry:
    r_x: float
    r_y: float
    certified: bool
    margin_domain: float
    margin_contraction: float


@dataclass(frozen=True)
class FrontierPoint:
    r_y: float
    r_x_max: float | None  # None when nothing certified at this r_y


@dataclass(frozen=True)
class CertifiedRegion:
    entries: tuple[RegionEntry, ...]
    frontier: tuple[FrontierPoint, ...]
    rigorous: bool

    @property
    def any_certified(self) -> bool:
        return any(e.certified for e in self.entries)


def compute_M(
    f: SplitFunction,
    x0: np.ndarray,
    y0: np.ndarray,
    norm_kind: str = "spectral",
    x_weights: np.ndarray | None = None,
) -> tuple[float, float]:
    """Base-point norms M_x = ||D_x f||, M_y = ||(D_y f)^-1||.

    Raises SingularDyf when D_y f is numerically singular (cond > 1e14).
    Optional x_weights stretch the domain ball per coordinate, which turns
    the induced norm into ||D_x f diag(w)||.
    """
    check_norm_kind(norm_kind)
    dx = f.dx(x0, y0)
    if x_weights is not None:
        dx = dx * np.asarray(x_weights, dtype=float)[None, :]
    m_x = induced_norm(dx, norm_kind)
    m_y = inverse_norm(f.dy(x0, y0), norm_kind, error=SingularDyf)
    return m_x, m_y


def _sampled_L_x(f, x0, y0, r_x, est, norm_kind, x_weights) -> float:
    base = f.dx(x0, y0)
    w = None if x_weights is None else np.asarray(x_weights, dtype=float)
    pts = ball_points(np.asarray(x0, float), r_x, est.samples_per_dim, norm_kind, weights=w)

    def deviation(p):
        d = f.dx(p, y0) - base
        if w is not None:
            d = d * w[None, :]
        return induced_norm(d, norm_kind)

    return est.safety_factor * max_over(pts, deviation)


def _sampled_L_y(f, x0, y0, r_x, r_y, est, norm_kind, x_weights) -> float:
    base = f.dy(x0, y0)
    w = None if x_weights is None else np.asarray(x_weights, dtype=float)
    pts_x = ball_points(np.asarray(x0, float), r_x, est.samples_per_dim, norm_kind, weights=w)
    pts_y = ball_points(np.asarray(y0, float), r_y, est.samples_per_dim, norm_kind)
    pairs = [(px, py) for px in pts_x for py in pts_y]

    def deviation(pair):
        px, py = pair
        return induced_norm(f.dy(px, py) - base, norm_kind)

    return est.safety_factor * max_over(pairs, deviation)


def estimate_L(
    f: SplitFunction,
    x0: np.ndarray,
    y0: np.ndarray,
    r_x: float,
    r_y: float,
    estimator: SupremumEstimator,
    norm_kind: str = "spectral",
    x_weights: np.ndarray | None = None,
) -> tuple[float, float]:
    """Deviation bounds (L_x, L_y) for the given radii."""
    check_norm_kind(norm_kind)
    for name, r in (("r_x", r_x), ("r_y", r_y)):
        if not (np.isfinite(r) and r >= 0):
            raise ValueError(f"{name} must be finite and nonnegative, got {r}")
    if estimator.uses_override_x():
        l_x = float(estimator.override_L_x(r_x))
    else:
        l_x = _sampled_L_x(f, x0, y0, r_x, estimator, norm_kind, x_weights)
    if estimator.uses_override_y():
        l_y = float(estimator.override_L_y(r_x, r_y))
    else:
        l_y = _sampled_L_y(f, x0, y0, r_x, r_y, estimator, norm_kind, x_weights)
    if not (np.isfinite(l_x) and np.isfinite(l_y)) or l_x < 0 or l_y < 0:
        raise NonFinite(f"deviation bounds must be finite and nonnegative, got ({l_x}, {l_y})")
    return l_x, l_y


def imft_quantities(
    f: SplitFunction,
    x0: np.ndarray,
    y0: np.ndarray,
    estimator: SupremumEstimator,
    norm_kind: str = "spectral",
    x_weights: np.ndarray | None = None,
) -> ImftQuantities:
    """Bundle M values with cached L evaluators for repeated grid queries."""
    m_x, m_y = compute_M(f, x0, y0, norm_kind, x_weights)
    cache_x: dict[float, float] = {}
    cache_y: dict[tuple[float, float], float] = {}

    def l_x(r: float) -> float:
        if r not in cache_x:
            if estimator.uses_override_x():
                cache_x[r] = float(estimator.override_L_x(r))
            else:
                cache_x[r] = _sampled_L_x(f, x0, y0, r, estimator, norm_kind, x_weights)
        return cache_x[r]

    def l_y(rx: float, ry: float) -> float:
        key = (rx, ry)
        if key not in cache_y:
            if estimator.uses_override_y():
                cache_y[key] = float(estimator.override_L_y(rx, ry))
            else:
                cache_y[key] = _sampled_L_y(f, x0, y0, rx, ry, estimator, norm_kind, x_weights)
        return cache_y[key]

    return ImftQuantities(
        M_x=m_x, M_y=m_y, L_x=l_x, L_y=l_y, norm_kind=norm_kind,
        L_x_rigorous=estimator.uses_override_x(),
        L_y_rigorous=estimator.uses_override_y(),
    )


def check_conditions(q: ImftQuantities, r_x: float, r_y: float) -> ConditionCheck:
    """Evaluate both certification inequalities at one radius pair.

    Inequalities are strict with zero tolerance: a margin of exactly zero is
    a failure. M_y = 0 only occurs for the empty y-block, where the domain
    budget r_y / M_y is +inf by convention.
    """
    l_x = q.L_x(r_x)
    l_y = q.L_y(r_x, r_y)
    budget = np.inf if q.M_y == 0.0 else r_y / q.M_y
    margin_domain = budget - q.M_x * r_x - (l_x * r_x + l_y * r_y)
    margin_contraction = 1.0 - q.M_y * l_y
    return ConditionCheck(
        certified=bool(margin_domain > 0.0 and margin_contraction > 0.0),
        margin_domain=float(margin_domain),
        margin_contraction=float(margin_contraction),
    )


def _refine_frontier(
    q: ImftQuantities, r_y: float, last_pass: float | None, first_fail: float | None
) -> float | None:
    # one bisection level between the last certified radius and the first failure
    if last_pass is None:
        return None
    if first_fail is None:
        return last_pass
    mid = 0.5 * (last_pass + first_fail)
    return mid if check_conditions(q, mid, r_y).certified else last_pass


def certify_grid(q: ImftQuantities, r_x_grid, r_y_grid) -> CertifiedRegion:
    """Verdicts over the radius grid plus the certified frontier.

    The frontier records, per r_y, the largest certified r_x, refined by one
    bisection step between the neighbouring pass/fail grid radii.
    """
    r_x_grid = sorted(float(r) for r in r_x_grid)
    r_y_grid = sorted(float(r) for r in r_y_grid)
    entries: list[RegionEntry] = []
    frontier: list[FrontierPoint] = []
    for r_y in r_y_grid:
        last_pass, first_fail = None, None
        for r_x in r_x_grid:
            check = check_conditions(q, r_x, r_y)
            entries.append(RegionEntry(r_x, r_y, check.certified,
                                       check.margin_domain, check.margin_contraction))
            if check.certified:
                if first_fail is None:
                    last_pass = r_x
            elif last_pass is not None and first_fail is None:
                first_fail = r_x
        frontier.append(FrontierPoint(r_y, _refine_frontier(q, r_y, last_pass, first_fail)))
    return CertifiedRegion(entries=tuple(entries), frontier=tuple(frontier), rigorous=q.rigorous)


def certify_region(
    f: SplitFunction,
    x0: np.ndarray,
    y0: np.ndarray,
    r_x_grid,
    r_y_grid,
    estimator: SupremumEstimator | None = None,
    norm_kind: str = "spectral",
    x_weights: np.ndarray | None = None,
) -> tuple[CertifiedRegion, ImftQuantities]:
    estimator = estimator or SupremumEstimator()
    q = imft_quantities(f, x0, y0, estimator, norm_kind, x_weights)
    return certify_grid(q, r_x_grid, r_y_grid), q


def newton_solve_y(
    f: SplitFunction,
    x: np.ndarray,
    y_start: np.ndarray,
    target: np.ndarray,
    tol: float = 1e-12,
    max_iters: int = 50,
    max_backtracks: int = 30,
) -> np.ndarray | None:
    """Damped Newton in y for f(x, y) = target; None when it stalls."""
    y = np.array(y_start, dtype=float)
    r = f.value(x, y) - target
    rnorm = float(np.linalg.norm(r))
    for _ in range(max_iters):
        if rnorm <= tol:
            return y
        try:
            step = np.linalg.solve(f.dy(x, y), -r)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        for _ in range(max_backtracks):
            y_new = y + t * step
            r_new = f.value(x, y_new) - target
            rnorm_new = float(np.linalg.norm(r_new))
            if np.isfinite(rnorm_new) and rnorm_new < rnorm:
                break
            t *= 0.5
        else:
            return None
        y, r, rnorm = y_new, r_new, rnorm_new
    return y if rnorm <= tol else None


@dataclass(frozen=True)
class WitnessResult:
    converged: int
    total: int
    max_y_norm: float
    ok: bool


def witness_check(
    f: SplitFunction,
    x0: np.ndarray,
    y0: np.ndarray,
    r_x: float,
    r_y: float,
    n_samples: int = 100,
    norm_kind: str = "spectral",
    seed: int = 0,
) -> WitnessResult:
    """Empirical check that the implicit map exists and stays in the y-ball.

    Solves f(x, y) = f(x0, y0) by Newton from y0 at fixed-seed random x in
    B(x0, r_x) and reports whether every solve converged with
    ||y - y0|| < r_y.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    target = f.value(x0, y0)
    rng = np.random.default_rng(seed)
    converged = 0
    max_norm = 0.0
    for _ in range(n_samples):
        # rejection sample the unit ball of the chosen norm, then scale
        while True:
            u = rng.uniform(-1.0, 1.0, size=x0.size)
            if vector_norm(u, norm_kind) <= 1.0:
                break
        x = x0 + r_x * u
        y = newton_solve_y(f, x, y0, target)
        if y is None:
            continue
        converged += 1
        max_norm = max(max_norm, vector_norm(y - y0, norm_kind))
    ok = converged == n_samples and max_norm < r_y
    return WitnessResult(converged=converged, total=n_samples, max_y_norm=max_norm, ok=ok)
