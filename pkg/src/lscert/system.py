"""Parameterised nonlinear systems Phi(x, lambda) = 0 and their Jacobians.

A system bundles the residual map with analytic Jacobian callables; when only
the residual is available, central finite differences fill in. Built-in
models cover the cases used throughout the tests and the CLI. Maps are
assumed at least twice continuously differentiable on the working region,
recorded as a documentation-level tag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NonFinite, NonSingularJacobian, UnknownModel
from .subspace import DEFAULT_RANK_TOL, compute_decomposition

DEFAULT_EQUILIBRIUM_TOL = 1e-10

_FD_REL_STEP = float(np.cbrt(np.finfo(float).eps))

ArrayFun = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ParametricSystem:
    """Residual map with state dimension n and parameter dimension m."""

    n: int
    m: int
    fun: ArrayFun
    jac_x: ArrayFun
    jac_lambda: ArrayFun
    name: str = "custom"
    smoothness_order: int = 2  # assumed continuous derivatives, documentation only

    def phi(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        x, lam = self._check(x, lam)
        out = np.asarray(self.fun(x, lam), dtype=float).ravel()
        if out.shape != (self.n,):
            raise DimensionMismatch(f"residual has shape {out.shape}, expected ({self.n},)")
        return out

    def dphi_dx(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        x, lam = self._check(x, lam)
        out = np.asarray(self.jac_x(x, lam), dtype=float)
        if out.shape != (self.n, self.n):
            raise DimensionMismatch(f"state Jacobian has shape {out.shape}, expected {(self.n, self.n)}")
        return out

    def dphi_dlambda(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        x, lam = self._check(x, lam)
        out = np.asarray(self.jac_lambda(x, lam), dtype=float).reshape(self.n, self.m)
        return out

    def _check(self, x, lam) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if x.shape != (self.n,):
            raise DimensionMismatch(f"state has shape {x.shape}, expected ({self.n},)")
        if lam.shape != (self.m,):
            raise DimensionMismatch(f"parameter has shape {lam.shape}, expected ({self.m},)")
        return x, lam


@dataclass(frozen=True)
class EvaluationPoint:
    """A candidate base point with its residual norm."""

    x0: np.ndarray
    lambda0: np.ndarray
    residual: float

    def is_equilibrium(self, tol: float = DEFAULT_EQUILIBRIUM_TOL) -> bool:
        return self.residual <= tol


def evaluation_point(sys: ParametricSystem, x0, lambda0) -> EvaluationPoint:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    lambda0 = np.atleast_1d(np.asarray(lambda0, dtype=float))
    res = float(np.linalg.norm(sys.phi(x0, lambda0)))
    if not np.isfinite(res):
        raise NonFinite("residual at the base point is not finite")
    return EvaluationPoint(x0=x0, lambda0=lambda0, residual=res)


def fd_jacobians(
    fun: ArrayFun,
    n: int,
    m: int,
    x: np.ndarray,
    lam: np.ndarray,
    rel_step: float = _FD_REL_STEP,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobian blocks of fun at (x, lam).

    Per-coordinate step h_i = rel_step * max(1, |z_i|), the usual cube-root
    of machine epsilon balance between truncation and rounding for first
    derivatives.
    """
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    base = np.asarray(fun(x, lam), dtype=float).ravel()
    k = base.size
    jx = np.empty((k, n))
    jl = np.empty((k, m))
    for i in range(n):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jx[:, i] = (np.asarray(fun(xp, lam), dtype=float).ravel()
                    - np.asarray(fun(xm, lam), dtype=float).ravel()) / (2 * h)
    for j in range(m):
        h = rel_step * max(1.0, abs(lam[j]))
        lp, lm_ = lam.copy(), lam.copy()
        lp[j] += h
        lm_[j] -= h
        jl[:, j] = (np.asarray(fun(x, lp), dtype=float).ravel()
                    - np.asarray(fun(x, lm_), dtype=float).ravel()) / (2 * h)
    if not (np.all(np.isfinite(jx)) and np.all(np.isfinite(jl))):
        raise NonFinite("finite-difference probe produced non-finite values")
    return jx, jl


def from_callable(
    fun: ArrayFun,
    n: int,
    m: int,
    jac_x: ArrayFun | None = None,
    jac_lambda: ArrayFun | None = None,
    name: str = "custom",
) -> ParametricSystem:
    """Wrap a residual callable, filling missing Jacobians by differences."""
    if jac_x is None:
        jac_x = lambda x, lam: fd_jacobians(fun, n, m, x, lam)[0]
    if jac_lambda is None:
        jac_lambda = lambda x, lam: fd_jacobians(fun, n, m, x, lam)[1]
    return ParametricSystem(n=n, m=m, fun=fun, jac_x=jac_x, jac_lambda=jac_lambda, name=name)


# --- built-in models ---------------------------------------------------------


def _tanh2() -> ParametricSystem:
    # coupled pair x1 = tanh(l x2), x2 = tanh(l x1); symmetric kernel at l = +-1
    def fun(x, lam):
        l = lam[0]
        return np.array([-x[0] + math.tanh(l * x[1]), -x[1] + math.tanh(l * x[0])])

    def jac_x(x, lam):
        l = lam[0]
        return np.array([
            [-1.0, l * (1.0 / math.cosh(l * x[1]) ** 2)],
            [l * (1.0 / math.cosh(l * x[0]) ** 2), -1.0],
        ])

    def jac_lambda(x, lam):
        l = lam[0]
        return np.array([
            [x[1] * (1.0 / math.cosh(l * x[1]) ** 2)],
            [x[0] * (1.0 / math.cosh(l * x[0]) ** 2)],
        ])

    return ParametricSystem(n=2, m=1, fun=fun, jac_x=jac_x, jac_lambda=jac_lambda, name="tanh2")


def _pitchfork_normal_form() -> ParametricSystem:
    def fun(x, lam):
        return np.array([lam[0] * x[0] - x[0] ** 3])

    def jac_x(x, lam):
        return np.array([[lam[0] - 3.0 * x[0] ** 2]])

    def jac_lambda(x, lam):
        return np.array([[x[0]]])

    return ParametricSystem(n=1, m=1, fun=fun, jac_x=jac_x, jac_lambda=jac_lambda,
                            name="pitchfork_normal_form")


def _linear(params: dict) -> ParametricSystem:
    if "A" not in params or "b" not in params:
        raise UnknownModel("linear model requires params A (n x n) and b (n x m)")
    a = np.asarray(params["A"], dtype=float)
    b = np.asarray(params["b"], dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"A must be square, got shape {a.shape}")
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"b has {b.shape[0]} rows, expected {a.shape[0]}")
    n, m = a.shape[0], b.shape[1]
    return ParametricSystem(
        n=n, m=m,
        fun=lambda x, lam: a @ x + b @ lam,
        jac_x=lambda x, lam: a,
        jac_lambda=lambda x, lam: b,
        name="linear",
    )


_BUILTINS = ("tanh2", "pitchfork_normal_form", "linear")


def builtin_model(name: str, params: dict | None = None) -> ParametricSystem:
    """Construct a registered model. Raises UnknownModel for other names."""
    params = params or {}
    if name == "tanh2":
        return _tanh2()
    if name == "pitchfork_normal_form":
        return _pitchfork_normal_form()
    if name == "linear":
        return _linear(params)
    raise UnknownModel(f"unknown built-in model {name!r}; available: {', '.join(_BUILTINS)}")


def system_from_expressions(source: str, n: int, m: int) -> ParametricSystem:
    """Build a system whose residual and Jacobians come from the DSL."""
    from . import expr as _expr

    asts = _expr.parse(source, n, m)
    names = _expr.default_names(n, m)

    def fun(x, lam):
        return _expr.eval_values(asts, x, lam, names=names)

    def jac_x(x, lam):
        return _expr.eval_dual(asts, x, lam, n_state=n, names=names)[1]

    def jac_lambda(x, lam):
        return _expr.eval_dual(asts, x, lam, n_state=n, names=names)[2]

    return ParametricSystem(n=n, m=m, fun=fun, jac_x=jac_x, jac_lambda=jac_lambda, name="expr")


def is_bifurcation_candidate(
    sys: ParametricSystem,
    point: EvaluationPoint,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> tuple[bool, int]:
    """Whether the Jacobian at the point has a kernel, and its dimension."""
    jac = sys.dphi_dx(point.x0, point.lambda0)
    try:
        decomp = compute_decomposition(jac, rank_tol)
    except NonSingularJacobian:
        return False, 0
    return True, decomp.q


def newton_full(
    sys: ParametricSystem,
    x: np.ndarray,
    lam: np.ndarray,
    tol: float = 1e-12,
    max_iters: int = 50,
    max_backtracks: int = 30,
) -> np.ndarray | None:
    """Damped Newton on the full system at fixed parameter.

    Returns the solution or None when it stalls or hits a singular linear
    system; callers sweeping many start points treat None as 'no root from
    here'.
    """
    x = np.array(x, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    r = sys.phi(x, lam)
    rnorm = float(np.linalg.norm(r))
    for _ in range(max_iters):
        if rnorm <= tol:
            return x
        try:
            step = np.linalg.solve(sys.dphi_dx(x, lam), -r)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        for _ in range(max_backtracks):
            x_new = x + t * step
            r_new = sys.phi(x_new, lam)
            rnorm_new = float(np.linalg.norm(r_new))
            if np.isfinite(rnorm_new) and rnorm_new < rnorm:
                break
            t *= 0.5
        else:
            return None
        x, r, rnorm = x_new, r_new, rnorm_new
    return x if rnorm <= tol else None


def refine_equilibrium(
    sys: ParametricSystem,
    x0,
    lambda0,
    tol: float = DEFAULT_EQUILIBRIUM_TOL,
) -> EvaluationPoint:
    """Newton-polish a base point whose residual exceeds the tolerance."""
    pt = evaluation_point(sys, x0, lambda0)
    if pt.residual <= tol:
        return pt
    refined = newton_full(sys, pt.x0, pt.lambda0, tol=min(tol, 1e-12))
    if refined is None:
        return pt  # caller decides; residual still carries the truth
    return evaluation_point(sys, refined, pt.lambda0)
