"""Kernel/range splitting of a singular Jacobian via SVD.

The decomposition fixes four orthonormal bases: V spans the kernel (dimension
q), Vperp its orthogonal complement in the domain, W spans the range, Wperp
its complement in the codomain. Rank is decided relative to the largest
singular value, and column signs follow a deterministic convention so that
repeated runs produce identical bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFinite, NonSingularJacobian

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Orthonormal bases splitting domain and codomain of a singular matrix.

    Attributes
    ----------
    q : kernel dimension (number of singular values at or below the cut).
    V : (n, q) kernel basis.
    Vperp : (n, n-q) basis of the kernel's orthogonal complement.
    W : (n, n-q) basis of the range.
    Wperp : (n, q) basis of the range's orthogonal complement.
    singular_values : all n singular values, descending.
    rank_tol : the relative tolerance that determined q.
    """

    q: int
    V: np.ndarray
    Vperp: np.ndarray
    W: np.ndarray
    Wperp: np.ndarray
    singular_values: np.ndarray = field(repr=False)
    rank_tol: float

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def validate(self) -> dict[str, float]:
        """Residuals of the orthonormality and complementarity identities."""
        eye = np.eye
        q, n = self.q, self.n
        full_v = np.hstack([self.V, self.Vperp])
        full_w = np.hstack([self.W, self.Wperp])
        return {
            "VtV": float(np.abs(self.V.T @ self.V - eye(q)).max(initial=0.0)),
            "VperptVperp": float(np.abs(self.Vperp.T @ self.Vperp - eye(n - q)).max(initial=0.0)),
            "WtW": float(np.abs(self.W.T @ self.W - eye(n - q)).max(initial=0.0)),
            "WperptWperp": float(np.abs(self.Wperp.T @ self.Wperp - eye(q)).max(initial=0.0)),
            "VtVperp": float(np.abs(self.V.T @ self.Vperp).max(initial=0.0)),
            "WtWperp": float(np.abs(self.W.T @ self.Wperp).max(initial=0.0)),
            "V_completeness": float(np.abs(full_v @ full_v.T - eye(n)).max(initial=0.0)),
            "W_completeness": float(np.abs(full_w @ full_w.T - eye(n)).max(initial=0.0)),
        }


def _fix_column_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive.

    np.argmax resolves ties to the first index, which keeps the convention
    deterministic even when two entries agree in magnitude.
    """
    out = basis.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def compute_decomposition(jacobian: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> SubspaceDecomposition:
    """Split domain and codomain of a square singular matrix.

    A singular value sigma_i counts toward the kernel when
    sigma_i <= rank_tol * sigma_max; sigma_max = 0 is treated as fully
    singular (q = n). Raises NonSingularJacobian when no singular value
    qualifies, NonFinite on NaN/inf input.
    """
    a = np.asarray(jacobian, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        raise DimensionMismatch("matrix must be at least 1x1")
    if not np.all(np.isfinite(a)):
        raise NonFinite("Jacobian contains non-finite entries")
    if not (np.isfinite(rank_tol) and rank_tol >= 0):
        raise ValueError(f"rank_tol must be a nonnegative finite number, got {rank_tol}")

    u, s, vt = np.linalg.svd(a)
    sigma_max = s[0]
    if sigma_max == 0.0:
        q = n
    else:
        q = int(np.count_nonzero(s <= rank_tol * sigma_max))
    if q == 0:
        raise NonSingularJacobian(
            f"no kernel at tolerance {rank_tol:g}: smallest/largest singular value "
            f"ratio is {s[-1] / sigma_max:.3e}")

    v_all = vt.T
    return SubspaceDecomposition(
        q=q,
        V=_fix_column_signs(v_all[:, n - q:]),
        Vperp=_fix_column_signs(v_all[:, : n - q]),
        W=_fix_column_signs(u[:, : n - q]),
        Wperp=_fix_column_signs(u[:, n - q:]),
        singular_values=s,
        rank_tol=float(rank_tol),
    )


def projection_onto_range(decomp: SubspaceDecomposition) -> np.ndarray:
    """Orthogonal projection P = W W^T onto the range of the Jacobian."""
    return decomp.W @ decomp.W.T


def split_state(decomp: SubspaceDecomposition, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of x in the kernel basis and its complement.

    Returns (alpha, beta) with x = V alpha + Vperp beta.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (decomp.n,):
        raise DimensionMismatch(f"state has shape {x.shape}, expected ({decomp.n},)")
    return decomp.V.T @ x, decomp.Vperp.T @ x
