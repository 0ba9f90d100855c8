"""Affine sets L + a given as A x = b, with derived orthonormal bases and the
reducing subspace W = L^perp ∩ {a}^perp."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InfeasibleAffineError

# Relative rank threshold for the orthogonal factorization of A.
TAU_LIN = 1e-10


@dataclass(frozen=True)
class AffineSet:
    """The solution set of A x = b together with derived subspace bases.

    ``null_basis`` spans L = null(A), ``row_basis`` spans L^perp = rowspace(A),
    ``anchor`` is the least-norm solution and ``w_basis`` spans
    W = L^perp ∩ {anchor}^perp. All bases are orthonormal columns.
    """

    A: np.ndarray
    b: np.ndarray
    anchor: np.ndarray = field(repr=False, default=None)
    null_basis: np.ndarray = field(repr=False, default=None)
    row_basis: np.ndarray = field(repr=False, default=None)
    w_basis: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def dim_w(self) -> int:
        return self.w_basis.shape[1]

    def is_homogeneous(self) -> bool:
        return bool(np.linalg.norm(self.b) == 0.0)


def make_affine(A, b) -> AffineSet:
    """Build an AffineSet from equations A x = b.

    Uses an SVD as the rank-revealing orthogonal factorization; rank decisions
    are made at TAU_LIN relative to the largest singular value. Raises
    InfeasibleAffineError when the system is inconsistent.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.size == 0:
        A = A.reshape(0, A.shape[1] if A.ndim == 2 and A.shape[1] else 0)
    m, n = A.shape
    if b.shape != (m,):
        raise DimensionMismatchError(f"A has {m} rows but b has {b.shape[0]} entries")

    if m == 0:
        anchor = np.zeros(n)
        null_basis = np.eye(n)
        row_basis = np.zeros((n, 0))
        w_basis = np.zeros((n, 0))
        return AffineSet(A, b, anchor, null_basis, row_basis, w_basis)

    u, s, vt = np.linalg.svd(A, full_matrices=True)
    tol = TAU_LIN * (s[0] if s.size else 0.0)
    r = int(np.sum(s > tol))
    row_basis = vt[:r].T
    null_basis = vt[r:].T
    # least-norm solution via the pseudoinverse
    anchor = row_basis @ ((u[:, :r].T @ b) / s[:r]) if r else np.zeros(n)
    if np.linalg.norm(A @ anchor - b) > 1e-10 * (1.0 + np.linalg.norm(b)):
        raise InfeasibleAffineError("system A x = b is inconsistent")

    g = row_basis.T @ anchor
    gn = np.linalg.norm(g)
    if gn <= TAU_LIN * max(1.0, np.linalg.norm(anchor)):
        w_basis = row_basis
    else:
        # orthonormal basis of g^perp inside the rowspace coefficients
        lam, vec = np.linalg.eigh(np.eye(r) - np.outer(g / gn, g / gn))
        w_basis = row_basis @ vec[:, lam > 0.5]
    return AffineSet(A, b, anchor, null_basis, row_basis, w_basis)


def project_affine(s: AffineSet, x) -> tuple[np.ndarray, float]:
    """Metric projection of x onto L + a and the distance to it."""
    x = np.asarray(x, dtype=float)
    if x.shape != (s.dim,):
        raise DimensionMismatchError(f"expected {s.dim} coordinates, got {x.shape}")
    proj = x + s.row_basis @ (s.row_basis.T @ (s.anchor - x))
    return proj, float(np.linalg.norm(x - proj))


def project_W(s: AffineSet, z) -> np.ndarray:
    """Orthogonal projection onto W = L^perp ∩ {anchor}^perp."""
    z = np.asarray(z, dtype=float)
    if z.shape != (s.dim,):
        raise DimensionMismatchError(f"expected {s.dim} coordinates, got {z.shape}")
    return s.w_basis @ (s.w_basis.T @ z)
