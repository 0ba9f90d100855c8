"""Geometry of the cone of squares and its faces: membership, projection,
distances, generalized eigenvalues, exposed and conjugate faces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as al
from .algebra import (
    ORTHANT,
    SPIN,
    SYM,
    AlgebraSpec,
    Element,
    FaceDescriptor,
    rank_tolerance,
)
from .errors import DomainError, NotInDualError

# Dual-membership slack; looser than TAU_SPEC because candidate directions
# arrive from an iterative solver.
TAU_FACE = 1e-7


@dataclass(frozen=True)
class ConeHandle:
    """The cone of squares of an algebra spec, with per-block polyhedrality flags."""

    spec: AlgebraSpec
    polyhedral_mask: tuple[bool, ...]

    @property
    def rank(self) -> int:
        return self.spec.rank

    def pps_rank_cap(self) -> int:
        """Sum of (rank - 1) over non-polyhedral blocks."""
        return sum(
            b.rank - 1
            for b, poly in zip(self.spec.blocks, self.polyhedral_mask)
            if not poly
        )

    def nonpolyhedral_restriction(self, x: Element) -> Element:
        """Zero out the polyhedral (orthant) blocks of x."""
        coords = np.array(x.coords)
        for (lo, hi), poly in zip(self.spec.offsets(), self.polyhedral_mask):
            if poly:
                coords[lo:hi] = 0.0
        return Element(self.spec, coords)


def cone_of(spec: AlgebraSpec) -> ConeHandle:
    return ConeHandle(spec, tuple(b.kind == ORTHANT for b in spec.blocks))


def lambda_min(x: Element) -> float:
    """Minimum eigenvalue of x over all blocks."""
    return float(np.min(al.eigenvalues(x)))


def in_cone(x: Element, tol: float = 0.0) -> bool:
    return lambda_min(x) >= -tol


# ---------------------------------------------------------------------------
# projections and distances


def _clamp_block(block, v: np.ndarray) -> tuple[np.ndarray, float]:
    """Project one block onto its cone; returns (projection, squared distance)."""
    if block.kind == SYM:
        lam, q = np.linalg.eigh(al.smat(v))
        neg = np.minimum(lam, 0.0)
        proj = (q * np.maximum(lam, 0.0)) @ q.T
        return al.svec(proj), float(np.sum(neg**2))
    if block.kind == SPIN:
        x0, xbar = al.spin_natural(v)
        r = float(np.linalg.norm(xbar))
        if x0 >= r:
            return np.array(v), 0.0
        if x0 <= -r:
            return np.zeros_like(v), float(np.dot(v, v))
        lam_neg = x0 - r  # the only negative eigenvalue
        u = xbar / r if r > 0 else np.zeros_like(xbar)
        proj0 = (x0 + r) / 2.0
        proj = al.spin_canonical(proj0, proj0 * u)
        return proj, float(lam_neg**2)
    neg = np.minimum(v, 0.0)
    return np.maximum(v, 0.0), float(np.sum(neg**2))


def project_cone_coords(spec: AlgebraSpec, coords: np.ndarray) -> tuple[np.ndarray, float]:
    """Coordinate-level cone projection; used by hot projection loops."""
    out = np.empty_like(coords)
    dist_sq = 0.0
    for (lo, hi), b in zip(spec.offsets(), spec.blocks):
        part, d2 = _clamp_block(b, coords[lo:hi])
        out[lo:hi] = part
        dist_sq += d2
    return out, float(np.sqrt(dist_sq))


def project_cone(x: Element) -> tuple[Element, float]:
    """Metric projection onto the cone and the distance to it."""
    coords, dist = project_cone_coords(x.spec, x.coords)
    return Element(x.spec, coords), dist


def dist_cone(x: Element) -> float:
    lam = al.eigenvalues(x)
    return float(np.sqrt(np.sum(np.minimum(lam, 0.0) ** 2)))


def generalized_eigenvalue(d: Element, x: Element) -> float:
    """Renegar eigenvalue inf { t : x - t d not in K } for d in ri K.

    Computed algebraically as the minimum eigenvalue of Q_{d^{-1/2}}(x);
    coincides with lambda_min when d is the identity.
    """
    lam_d = al.eigenvalues(d)
    if float(np.min(lam_d)) <= rank_tolerance(lam_d):
        raise DomainError("d must lie in the relative interior of the cone")
    d_inv_sqrt = al.spectral_map(d, lambda t: 1.0 / np.sqrt(t))
    return lambda_min(al.quadratic_apply(d_inv_sqrt, x))


def conjugate_face(c: FaceDescriptor) -> FaceDescriptor:
    """Conjugate face K ∩ {c}^perp, the cone of squares of V(c,0)."""
    return FaceDescriptor(al.identity(c.spec) - c.c)


def dist_span_face(c: FaceDescriptor, x: Element) -> float:
    """Distance from x to span F = V(c,1)."""
    return al.norm(x - al.peirce_project(c, x))


def expose_face(c: FaceDescriptor, z: Element) -> FaceDescriptor:
    """The face F ∩ {z}^perp of F, for z in F*.

    Dual membership is tested through the identity F* = { z : Q_c(z) in F }.
    Eigenvalues of Q_c(z) within rank tolerance of zero are classified as
    zero, which can only enlarge the face and keeps the reduction sound.
    """
    w = al.quadratic_apply(c.c, z)
    dec = al.spectral(w)
    lam = dec.eigenvalues
    tol = rank_tolerance(lam)
    if float(np.min(lam)) < -TAU_FACE * max(1.0, float(np.max(np.abs(lam)))):
        raise NotInDualError("Q_c(z) has a negative eigenvalue inside V(c,1)")
    coords = np.array(c.c.coords)
    for (lo, hi), bs in zip(c.spec.offsets(), dec.blocks):
        keep = bs.eigenvalues > tol
        if np.any(keep):
            coords[lo:hi] -= np.sum(bs.idempotents[keep], axis=0)
    return FaceDescriptor(Element(c.spec, coords))


def _span_basis_sym(n: int, proj_mat: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis (columns) of the range of a rank-k projector."""
    lam, q = np.linalg.eigh(proj_mat)
    return q[:, np.argsort(lam)[::-1][:k]]


def dist_to_face_within_span(c: FaceDescriptor, x: Element) -> float:
    """Projection distance from x in span F onto F, computed inside V(c,1).

    This works block by block in the reduced subalgebra and is independent
    of the ambient spectral clamp used by :func:`project_cone`.
    """
    if dist_span_face(c, x) > al.TAU_SPEC * max(1.0, al.norm(x)):
        raise DomainError("x does not lie in span F = V(c,1)")
    dist_sq = 0.0
    for i, b in enumerate(c.spec.blocks):
        k = c.block_ranks[i]
        v = x.block(i)
        cv = c.c.block(i)
        if k == 0:
            continue
        if b.kind == SYM:
            basis = _span_basis_sym(b.n, al.smat(cv), k)
            reduced = basis.T @ al.smat(v) @ basis
            mu = np.linalg.eigvalsh(reduced)
            dist_sq += float(np.sum(np.minimum(mu, 0.0) ** 2))
        elif b.kind == SPIN:
            if k == 2:
                x0, xbar = al.spin_natural(v)
                r = float(np.linalg.norm(xbar))
                dist_sq += min(x0 - r, 0.0) ** 2 + min(x0 + r, 0.0) ** 2
            else:  # rank-1 face: a single ray spanned by the unit idempotent c
                mu = float(np.dot(v, cv))
                dist_sq += min(mu, 0.0) ** 2
        else:
            mask = cv > 0.5
            dist_sq += float(np.sum(np.minimum(v[mask], 0.0) ** 2))
    return float(np.sqrt(dist_sq))


def dist_to_face(c: FaceDescriptor, x: Element) -> float:
    """Distance from an arbitrary x to the face encoded by c."""
    off_span = dist_span_face(c, x)
    within = dist_to_face_within_span(c, al.peirce_project(c, x))
    return float(np.hypot(off_span, within))


def face_spectral(c: FaceDescriptor, w: Element) -> list[tuple[float, Element]]:
    """Spectral decomposition of w inside the subalgebra V(c,1).

    Returns c.rank pairs (eigenvalue, primitive idempotent of V(c,1)); w is
    assumed to lie in V(c,1). Unlike :func:`facered.algebra.spectral`, the
    zero eigenvalues of the ambient decomposition coming from the complement
    of V(c,1) do not appear here.
    """
    spec = c.spec
    out: list[tuple[float, Element]] = []

    def embed(block_index: int, part: np.ndarray) -> Element:
        coords = np.zeros(spec.dim)
        lo, hi = spec.offsets()[block_index]
        coords[lo:hi] = part
        return Element(spec, coords)

    for i, b in enumerate(spec.blocks):
        k = c.block_ranks[i]
        if k == 0:
            continue
        v = w.block(i)
        cv = c.c.block(i)
        if b.kind == SYM:
            basis = _span_basis_sym(b.n, al.smat(cv), k)
            mu, u = np.linalg.eigh(basis.T @ al.smat(v) @ basis)
            for j in range(k):
                vec = basis @ u[:, j]
                out.append((float(mu[j]), embed(i, al.svec(np.outer(vec, vec)))))
        elif b.kind == SPIN:
            if k == 2:
                bs = al._block_spectral(b, v)
                for lam, idem in zip(bs.eigenvalues, bs.idempotents):
                    out.append((float(lam), embed(i, idem)))
            else:
                out.append((float(np.dot(v, cv)), embed(i, cv.copy())))
        else:
            mask = np.flatnonzero(cv > 0.5)
            eye = np.eye(b.n)
            for j in mask:
                out.append((float(v[j]), embed(i, eye[j])))
    return out


def face_lambda_min(c: FaceDescriptor, w: Element) -> float:
    """Minimum eigenvalue of w inside V(c,1); +inf for the zero face."""
    pairs = face_spectral(c, w)
    if not pairs:
        return float("inf")
    return min(lam for lam, _ in pairs)


def project_face_coords(c: FaceDescriptor, coords: np.ndarray) -> np.ndarray:
    """Metric projection onto the face encoded by c, in flat coordinates.

    The face is the cone of squares of V(c,1); the projection clamps the
    V(c,1) part spectrally inside the subalgebra and discards the rest.
    """
    spec = c.spec
    out = np.zeros_like(coords)
    for i, b in enumerate(spec.blocks):
        k = c.block_ranks[i]
        if k == 0:
            continue
        lo, hi = spec.offsets()[i]
        v = coords[lo:hi]
        cv = c.c.block(i)
        if b.kind == SYM:
            basis = _span_basis_sym(b.n, al.smat(cv), k)
            mu, u = np.linalg.eigh(basis.T @ al.smat(v) @ basis)
            mu = np.maximum(mu, 0.0)
            reduced = (u * mu) @ u.T
            out[lo:hi] = al.svec(basis @ reduced @ basis.T)
        elif b.kind == SPIN:
            if k == 2:
                part, _ = _clamp_block(b, v)
                out[lo:hi] = part
            else:
                out[lo:hi] = max(float(np.dot(v, cv)), 0.0) * cv
        else:
            mask = cv > 0.5
            clipped = np.where(mask, np.maximum(v, 0.0), 0.0)
            out[lo:hi] = clipped
    return out


def project_face(c: FaceDescriptor, x: Element) -> tuple[Element, float]:
    """Metric projection of x onto the face encoded by c, with the distance."""
    coords = project_face_coords(c, x.coords)
    proj = Element(c.spec, coords)
    return proj, al.norm(x - proj)
