"""Euclidean Jordan algebra kernel for products of symmetric-matrix, spin-factor
and orthant blocks.

Canonical coordinates are chosen so that the flat dot product of coordinate
vectors equals the trace inner product tr(x o y):

* ``sym`` blocks are stored as the packed lower triangle (column major:
  for each column j, rows i = j..n-1) with off-diagonal entries scaled by
  sqrt(2) (svec),
* ``spin`` blocks store sqrt(2) * (x0, xbar),
* ``orthant`` blocks store plain coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    DomainError,
    InvalidFaceError,
    SingularElementError,
)

SYM = "sym"
SPIN = "spin"
ORTHANT = "orthant"

SQRT2 = math.sqrt(2.0)

# Relative tolerance for structural identities (idempotency, reconstruction).
TAU_SPEC = 1e-9
# Eigenvalue-zero threshold is TAU_RANK_FACTOR * max(1, lambda_max).
TAU_RANK_FACTOR = 1e-8


def rank_tolerance(eigenvalues) -> float:
    """Zero threshold for a set of eigenvalues, relative to the largest."""
    lam_max = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    return TAU_RANK_FACTOR * max(1.0, lam_max)


@dataclass(frozen=True)
class Block:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (SYM, SPIN, ORTHANT):
            raise DimensionMismatchError(f"unknown block kind {self.kind!r}")
        lo = 2 if self.kind == SPIN else 1
        if self.n < lo:
            raise DimensionMismatchError(f"{self.kind} block needs n >= {lo}, got {self.n}")

    @property
    def dim(self) -> int:
        if self.kind == SYM:
            return self.n * (self.n + 1) // 2
        return self.n

    @property
    def rank(self) -> int:
        if self.kind == SYM:
            return self.n
        if self.kind == SPIN:
            return 2
        return self.n


def sym_block(n: int) -> Block:
    return Block(SYM, n)


def spin_block(n: int) -> Block:
    return Block(SPIN, n)


def orthant_block(n: int) -> Block:
    return Block(ORTHANT, n)


@dataclass(frozen=True)
class AlgebraSpec:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise DimensionMismatchError("algebra spec needs at least one block")

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def rank(self) -> int:
        return sum(b.rank for b in self.blocks)

    def offsets(self) -> list[tuple[int, int]]:
        """Half-open coordinate ranges, one per block."""
        out, lo = [], 0
        for b in self.blocks:
            out.append((lo, lo + b.dim))
            lo += b.dim
        return out


def make_spec(*blocks: Block) -> AlgebraSpec:
    return AlgebraSpec(tuple(blocks))


# ---------------------------------------------------------------------------
# svec/smat tables

_SVEC_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _svec_table(n: int):
    """Row indices, column indices and scale factors of the svec layout."""
    tab = _SVEC_CACHE.get(n)
    if tab is None:
        rows, cols = [], []
        for j in range(n):
            for i in range(j, n):
                rows.append(i)
                cols.append(j)
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        scale = np.where(rows == cols, 1.0, SQRT2)
        tab = (rows, cols, scale)
        _SVEC_CACHE[n] = tab
    return tab


def svec(mat: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix into canonical coordinates."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise DimensionMismatchError(f"expected square matrix, got {mat.shape}")
    rows, cols, scale = _svec_table(n)
    return mat[rows, cols] * scale


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    n = int(round((math.sqrt(8 * v.size + 1) - 1) / 2))
    if n * (n + 1) // 2 != v.size:
        raise DimensionMismatchError(f"{v.size} is not a triangular number")
    rows, cols, scale = _svec_table(n)
    out = np.zeros((n, n))
    out[rows, cols] = v / scale
    out[cols, rows] = out[rows, cols]
    return out


def spin_canonical(x0: float, xbar: np.ndarray) -> np.ndarray:
    """Canonical coordinates of the spin element (x0, xbar)."""
    return SQRT2 * np.concatenate(([float(x0)], np.asarray(xbar, dtype=float)))


def spin_natural(v: np.ndarray) -> tuple[float, np.ndarray]:
    """Natural coordinates (x0, xbar) of a canonical spin coordinate vector."""
    w = np.asarray(v, dtype=float) / SQRT2
    return float(w[0]), w[1:]


# ---------------------------------------------------------------------------
# Elements


@dataclass(frozen=True)
class Element:
    """A point of the algebra in canonical coordinates."""

    spec: AlgebraSpec
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (self.spec.dim,):
            raise DimensionMismatchError(
                f"expected {self.spec.dim} coordinates, got {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise DomainError("element coordinates must be finite")
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    def block(self, i: int) -> np.ndarray:
        lo, hi = self.spec.offsets()[i]
        return self.coords[lo:hi]

    def __add__(self, other: "Element") -> "Element":
        _check_same_spec(self, other)
        return Element(self.spec, self.coords + other.coords)

    def __sub__(self, other: "Element") -> "Element":
        _check_same_spec(self, other)
        return Element(self.spec, self.coords - other.coords)

    def __mul__(self, t: float) -> "Element":
        return Element(self.spec, self.coords * float(t))

    __rmul__ = __mul__

    def __neg__(self) -> "Element":
        return Element(self.spec, -self.coords)


def _check_same_spec(x: Element, y: Element):
    if x.spec != y.spec:
        raise DimensionMismatchError("elements live over different algebra specs")


def element(spec: AlgebraSpec, coords) -> Element:
    return Element(spec, np.asarray(coords, dtype=float))


def from_blocks(spec: AlgebraSpec, parts) -> Element:
    """Assemble an element from per-block canonical coordinate arrays."""
    if len(parts) != len(spec.blocks):
        raise DimensionMismatchError("wrong number of block parts")
    return Element(spec, np.concatenate([np.asarray(p, dtype=float) for p in parts]))


def zero(spec: AlgebraSpec) -> Element:
    return Element(spec, np.zeros(spec.dim))


def _block_identity(block: Block) -> np.ndarray:
    if block.kind == SYM:
        return svec(np.eye(block.n))
    if block.kind == SPIN:
        return spin_canonical(1.0, np.zeros(block.n - 1))
    return np.ones(block.n)


def identity(spec: AlgebraSpec) -> Element:
    return from_blocks(spec, [_block_identity(b) for b in spec.blocks])


def inner(x: Element, y: Element) -> float:
    """Trace inner product; flat dot product in canonical coordinates."""
    _check_same_spec(x, y)
    return float(np.dot(x.coords, y.coords))


def norm(x: Element) -> float:
    return float(np.linalg.norm(x.coords))


def _block_trace(block: Block, v: np.ndarray) -> float:
    if block.kind == SYM:
        rows, cols, _ = _svec_table(block.n)
        return float(np.sum(v[rows == cols]))
    if block.kind == SPIN:
        return SQRT2 * float(v[0])
    return float(np.sum(v))


def trace(x: Element) -> float:
    return sum(_block_trace(b, x.block(i)) for i, b in enumerate(x.spec.blocks))


def _block_product(block: Block, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if block.kind == SYM:
        a, b = smat(u), smat(v)
        return svec((a @ b + b @ a) / 2.0)
    if block.kind == SPIN:
        # canonical coords carry an overall sqrt(2); product picks up 1/sqrt(2)
        w0 = u[0] * v[0] + np.dot(u[1:], v[1:])
        wbar = u[0] * v[1:] + v[0] * u[1:]
        return np.concatenate(([w0], wbar)) / SQRT2
    return u * v


def jordan_product(x: Element, y: Element) -> Element:
    _check_same_spec(x, y)
    parts = [
        _block_product(b, x.block(i), y.block(i))
        for i, b in enumerate(x.spec.blocks)
    ]
    return from_blocks(x.spec, parts)


def quadratic_apply(x: Element, y: Element) -> Element:
    """Quadratic representation Q_x(y) = 2 x o (x o y) - (x o x) o y."""
    _check_same_spec(x, y)
    xy = jordan_product(x, y)
    return 2.0 * jordan_product(x, xy) - jordan_product(jordan_product(x, x), y)


# ---------------------------------------------------------------------------
# Spectral decomposition


@dataclass(frozen=True)
class BlockSpectral:
    """Eigenvalues (descending) and primitive idempotent coordinates of one block."""

    eigenvalues: np.ndarray
    idempotents: np.ndarray  # shape (rank, block dim), canonical coordinates


@dataclass(frozen=True)
class SpectralDecomposition:
    spec: AlgebraSpec
    blocks: tuple[BlockSpectral, ...]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([b.eigenvalues for b in self.blocks])

    def pairs(self):
        """Yield (eigenvalue, idempotent Element, block index) triples."""
        for bi, bs in enumerate(self.blocks):
            for lam, idem in zip(bs.eigenvalues, bs.idempotents):
                yield float(lam), self._embed(bi, idem), bi

    def _embed(self, block_index: int, part: np.ndarray) -> Element:
        coords = np.zeros(self.spec.dim)
        lo, hi = self.spec.offsets()[block_index]
        coords[lo:hi] = part
        return Element(self.spec, coords)

    def reconstruct(self) -> Element:
        coords = np.zeros(self.spec.dim)
        for (lo, hi), bs in zip(self.spec.offsets(), self.blocks):
            coords[lo:hi] = bs.eigenvalues @ bs.idempotents
        return Element(self.spec, coords)


def _block_spectral(block: Block, v: np.ndarray) -> BlockSpectral:
    if block.kind == SYM:
        lam, q = np.linalg.eigh(smat(v))
        order = np.argsort(lam)[::-1]
        lam = lam[order]
        q = q[:, order]
        idems = np.stack([svec(np.outer(q[:, k], q[:, k])) for k in range(block.n)])
        return BlockSpectral(lam, idems)
    if block.kind == SPIN:
        x0, xbar = spin_natural(v)
        r = float(np.linalg.norm(xbar))
        if r <= 1e-300:
            # tied eigenvalues: fix the frame along the first coordinate axis
            u = np.zeros(block.n - 1)
            u[0] = 1.0
        else:
            u = xbar / r
        lam = np.array([x0 + r, x0 - r])
        idems = np.stack([spin_canonical(0.5, 0.5 * u), spin_canonical(0.5, -0.5 * u)])
        return BlockSpectral(lam, idems)
    order = np.argsort(v)[::-1]
    idems = np.eye(block.n)[order]
    return BlockSpectral(np.asarray(v, dtype=float)[order], idems)


def spectral(x: Element) -> SpectralDecomposition:
    """Spectral decomposition x = sum_i lambda_i c_i, eigenvalues descending per block."""
    parts = tuple(
        _block_spectral(b, x.block(i)) for i, b in enumerate(x.spec.blocks)
    )
    return SpectralDecomposition(x.spec, parts)


def eigenvalues(x: Element) -> np.ndarray:
    """All eigenvalues of x (concatenated per block, descending within blocks)."""
    out = []
    for i, b in enumerate(x.spec.blocks):
        v = x.block(i)
        if b.kind == SYM:
            out.append(np.linalg.eigvalsh(smat(v))[::-1])
        elif b.kind == SPIN:
            x0, xbar = spin_natural(v)
            r = float(np.linalg.norm(xbar))
            out.append(np.array([x0 + r, x0 - r]))
        else:
            out.append(np.sort(np.asarray(v, dtype=float))[::-1])
    return np.concatenate(out)


def spectral_map(x: Element, fn) -> Element:
    """Apply a scalar function to the eigenvalues of x."""
    dec = spectral(x)
    coords = np.zeros(x.spec.dim)
    for (lo, hi), bs in zip(x.spec.offsets(), dec.blocks):
        coords[lo:hi] = np.array([fn(l) for l in bs.eigenvalues]) @ bs.idempotents
    return Element(x.spec, coords)


# ---------------------------------------------------------------------------
# Faces


@dataclass(frozen=True)
class FaceDescriptor:
    """A face of the cone of squares, encoded by an idempotent c per block."""

    c: Element
    block_ranks: tuple[int, ...] = field(default=())

    def __post_init__(self):
        prod = jordan_product(self.c, self.c)
        scale = max(1.0, norm(self.c))
        if norm(prod - self.c) > TAU_SPEC * scale:
            raise InvalidFaceError("c o c differs from c beyond tolerance")
        lam = eigenvalues(self.c)
        if np.any(np.minimum(np.abs(lam), np.abs(lam - 1.0)) > TAU_SPEC * scale):
            raise InvalidFaceError("idempotent eigenvalues must lie in {0, 1}")
        ranks = []
        for i, b in enumerate(self.c.spec.blocks):
            t = _block_trace(b, self.c.block(i))
            r = int(round(t))
            if abs(t - r) > TAU_SPEC * max(1.0, abs(t)):
                raise InvalidFaceError(f"block {i} trace {t} is not near an integer")
            ranks.append(r)
        object.__setattr__(self, "block_ranks", tuple(ranks))

    @property
    def spec(self) -> AlgebraSpec:
        return self.c.spec

    @property
    def rank(self) -> int:
        return sum(self.block_ranks)


def face(c: Element) -> FaceDescriptor:
    return FaceDescriptor(c)


def face_identity(spec: AlgebraSpec) -> FaceDescriptor:
    return FaceDescriptor(identity(spec))


def face_zero(spec: AlgebraSpec) -> FaceDescriptor:
    return FaceDescriptor(zero(spec))


def peirce_project(c: FaceDescriptor, x: Element) -> Element:
    """Orthogonal projection onto V(c,1), i.e. Q_c(x)."""
    return quadratic_apply(c.c, x)


def peirce_split(c: FaceDescriptor, x: Element) -> tuple[Element, Element, Element]:
    """Split x into its V(c,1), V(c,1/2) and V(c,0) components."""
    _check_same_spec(c.c, x)
    e = identity(x.spec)
    x1 = quadratic_apply(c.c, x)
    x3 = quadratic_apply(e - c.c, x)
    x2 = x - x1 - x3
    return x1, x2, x3


def _face_membership_residual(c: FaceDescriptor, x: Element) -> float:
    return norm(x - quadratic_apply(c.c, x))


def inverse_in_face(c: FaceDescriptor, x: Element) -> Element:
    """Inverse of x inside the subalgebra V(c,1); x o result = c."""
    _check_same_spec(c.c, x)
    if _face_membership_residual(c, x) > TAU_SPEC * max(1.0, norm(x)):
        raise DomainError("x does not lie in V(c,1)")
    dec = spectral(x)
    lam = dec.eigenvalues
    tol = rank_tolerance(lam)
    support = np.abs(lam) > tol
    if int(np.sum(support)) != c.rank:
        raise SingularElementError(
            f"x has {int(np.sum(support))} nonzero eigenvalues, face rank is {c.rank}"
        )
    coords = np.zeros(x.spec.dim)
    for (lo, hi), bs in zip(x.spec.offsets(), dec.blocks):
        keep = np.abs(bs.eigenvalues) > tol
        if np.any(keep):
            coords[lo:hi] = (1.0 / bs.eigenvalues[keep]) @ bs.idempotents[keep]
    return Element(x.spec, coords)


def schur_complement(c: FaceDescriptor, x: Element) -> Element:
    """Generalized Schur complement x1 - Q_{x2}(x3^{-1}) of x with respect to c."""
    x1, x2, x3 = peirce_split(c, x)
    comp = FaceDescriptor(identity(x.spec) - c.c)
    lam3 = eigenvalues(x3)
    tol = rank_tolerance(lam3)
    # x3 must be in the relative interior of the conjugate face
    positive = lam3 > tol
    if int(np.sum(positive)) != comp.rank:
        raise SingularElementError("x3 is singular inside V(c,0)")
    inv3 = inverse_in_face(comp, x3)
    return x1 - quadratic_apply(x2, inv3)
