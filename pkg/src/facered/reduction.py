"""Facial reduction engine: reducing directions, face chains, PPS/Slater
detection and trivial-intersection certificates.

A reducing direction at face F (idempotent c) is a point of
F* ∩ L^perp ∩ {a}^perp that is not orthogonal to F. Dual membership uses
F* = { z : Q_c(z) ∈ F }, whose metric projection is exact: Peirce-split by c,
clamp the V(c,1) part onto F, pass the remaining parts through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as al
from . import conegeom as cg
from .affine import AffineSet, project_W
from .algebra import Element, FaceDescriptor, rank_tolerance
from .conegeom import TAU_FACE, ConeHandle
from .errors import DomainError

# Direction-search defaults: Dykstra gap threshold, stall threshold, stall
# window, iterate-norm divergence bound and iteration budget.
DELTA_GAP = 1e-9
DELTA_INFEAS = 1e-6
STALL_WINDOW = 500
R_MAX = 1e6
DEFAULT_BUDGET = 50_000

MODE_PPS = "pps"
MODE_SLATER = "slater"

# Projected supergradient ascent used for trivial-intersection certificates.
TAU_INT = 1e-6
ASCENT_ITERS = 1500


@dataclass(frozen=True)
class DirectionSearchReport:
    found: bool
    direction: Element | None
    iterations: int
    gap: float
    reason: str = ""


@dataclass(frozen=True)
class ReductionChain:
    mode: str
    faces: tuple[FaceDescriptor, ...]
    directions: tuple[Element, ...]
    cq_reached: bool
    step_cap_hit: bool
    dim_w: int
    rank_cap: int

    @property
    def steps(self) -> int:
        return len(self.directions)

    @property
    def face_ranks(self) -> tuple[int, ...]:
        return tuple(f.rank for f in self.faces)


def _mode_cap(cone: ConeHandle, mode: str) -> int:
    if mode == MODE_PPS:
        return cone.pps_rank_cap()
    if mode == MODE_SLATER:
        return cone.rank
    raise DomainError(f"unknown mode {mode!r}")


def _selected_idempotent(cone: ConeHandle, c: FaceDescriptor, mode: str) -> Element:
    if mode == MODE_PPS:
        return cone.nonpolyhedral_restriction(c.c)
    return c.c


def _nonpolyhedral_face_is_polyhedral(cone: ConeHandle, c: FaceDescriptor) -> bool:
    """True when every non-polyhedral block of the face has rank <= 1.

    Rank-one faces of a symmetric-cone block are rays, so the whole face is
    polyhedral as a cone even though it lives in non-polyhedral blocks.
    """
    return all(
        poly or r <= 1
        for poly, r in zip(cone.polyhedral_mask, c.block_ranks)
    )


def _project_face_dual(spec, c: FaceDescriptor, v: np.ndarray) -> np.ndarray:
    """Metric projection onto C = { z : Q_c(z) ∈ F } in flat coordinates."""
    x = Element(spec, v)
    x1 = al.quadratic_apply(c.c, x)
    clamped, _ = cg.project_cone_coords(spec, x1.coords)
    return v - x1.coords + clamped


def _direction_is_valid(cone: ConeHandle, c: FaceDescriptor, mode: str, z: Element) -> bool:
    w = al.quadratic_apply(c.c, z)
    lam = al.eigenvalues(w)
    if float(np.min(lam)) < -TAU_FACE:
        return False
    w_sel = cone.nonpolyhedral_restriction(w) if mode == MODE_PPS else w
    return al.norm(w_sel) > rank_tolerance(lam)


def _target_frame(g: np.ndarray):
    """Orthonormal tangent basis of the hyperplane { t : <g, t> = 1 }."""
    gn2 = float(np.dot(g, g))
    k = g.size
    lam_t, vec_t = np.linalg.eigh(np.eye(k) - np.outer(g, g) / gn2)
    return vec_t[:, lam_t > 0.5]


def _soft_min_ascent(
    c: FaceDescriptor,
    wb: np.ndarray,
    g: np.ndarray,
    t_anchor: np.ndarray,
    tangent_basis: np.ndarray,
    mus,
) -> np.ndarray:
    """L-BFGS ascent of the soft minimum eigenvalue over the target set.

    Runs one L-BFGS pass per smoothing level mu in ``mus``; returns the point
    with the best true minimum eigenvalue seen.
    """
    from scipy.optimize import minimize

    spec = c.spec

    def spectrum(t: np.ndarray):
        z = Element(spec, wb @ t)
        w = al.quadratic_apply(c.c, z)
        return cg.face_spectral(c, w)

    def neg_soft(theta: np.ndarray, mu: float):
        pairs = spectrum(t_anchor + tangent_basis @ theta)
        lams = np.array([p[0] for p in pairs])
        lo = float(np.min(lams))
        weights = np.exp((lo - lams) / mu)
        total = float(np.sum(weights))
        value = lo - mu * np.log(total)
        grad = np.zeros(wb.shape[0])
        for w_i, (_, idem) in zip(weights / total, pairs):
            grad += w_i * idem.coords
        return -value, -(tangent_basis.T @ (wb.T @ grad))

    theta = np.zeros(tangent_basis.shape[1])
    pairs0 = spectrum(t_anchor)
    if not pairs0:
        return t_anchor
    best = float(min(p[0] for p in pairs0))
    best_theta = theta
    for mu in mus:
        res = minimize(
            neg_soft,
            theta,
            args=(float(mu),),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 80, "ftol": 1e-18, "gtol": 1e-15},
        )
        theta = res.x
        lam_min = float(min(p[0] for p in spectrum(t_anchor + tangent_basis @ theta)))
        if lam_min > best:
            best, best_theta = lam_min, theta
    return t_anchor + tangent_basis @ best_theta


def _polish_direction(
    c: FaceDescriptor,
    wb: np.ndarray,
    g: np.ndarray,
    t_start: np.ndarray,
) -> np.ndarray:
    """Maximize the V(c,1)-minimum eigenvalue of Q_c(z) over the target set.

    The target set is { W t : <g, t> = 1 } in rowspace coordinates. The
    objective is concave; it is maximized through an annealed log-sum-exp
    smoothing (the soft minimum -mu log sum exp(-lam_i/mu) is smooth and
    concave) driven by L-BFGS. This removes the low-order contamination that
    Dykstra iterates retain when the target set is tangent to the dual-cone
    boundary.
    """
    gn2 = float(np.dot(g, g))
    t0 = np.asarray(t_start, dtype=float)
    t0 = t0 + g * (1.0 - float(np.dot(g, t0))) / gn2
    tangent_basis = _target_frame(g)
    if tangent_basis.shape[1] == 0:
        return t0
    mus = [0.2**j for j in range(0, 20)]
    return _soft_min_ascent(c, wb, g, t0, tangent_basis, mus)


def _polish_local(
    c: FaceDescriptor,
    wb: np.ndarray,
    g: np.ndarray,
    t_start: np.ndarray,
    mu: float,
) -> np.ndarray:
    """Single-level local repair of cone feasibility near a refined point."""
    gn2 = float(np.dot(g, g))
    t0 = np.asarray(t_start, dtype=float)
    t0 = t0 + g * (1.0 - float(np.dot(g, t0))) / gn2
    tangent_basis = _target_frame(g)
    if tangent_basis.shape[1] == 0:
        return t0
    return _soft_min_ascent(c, wb, g, t0, tangent_basis, [mu])


# Spectrum bands for classifying a candidate's face eigenvalues: entries above
# SIG_BAND * top are significant, entries below NEG_BAND * top are negligible,
# anything in between marks an unresolved (contaminated) direction.
SIG_BAND = 1e-6
NEG_BAND = 1e-9


def _spectrum_bands(lams: np.ndarray) -> tuple[int, bool]:
    """Number of significant eigenvalues and whether the rest are negligible."""
    if lams.size == 0:
        return 0, False
    top = float(lams[0])
    sig_thr = max(SIG_BAND * top, al.TAU_RANK_FACTOR * max(1.0, abs(top)))
    neg_thr = max(NEG_BAND * top, 1e-14)
    significant = int(np.sum(lams > sig_thr))
    tail = lams[significant:]
    clean = significant > 0 and (tail.size == 0 or float(np.max(tail)) <= neg_thr)
    return significant, clean


def _candidate_quality(c: FaceDescriptor, cand: Element) -> tuple[bool, float]:
    """Whether the candidate's face spectrum is band-clean, and its signal."""
    w = al.quadratic_apply(c.c, cand)
    lams = np.array(sorted((p[0] for p in cg.face_spectral(c, w)), reverse=True))
    if lams.size == 0:
        return False, -np.inf
    _, clean = _spectrum_bands(lams)
    return clean, float(lams[0])


def _produce_candidate(
    c: FaceDescriptor,
    s: AffineSet,
    cone: ConeHandle,
    mode: str,
    wb: np.ndarray,
    g: np.ndarray,
    t_start: np.ndarray,
    rounds: int = 40,
) -> Element | None:
    """Polish, then enumerate support hypotheses with refine/repolish rounds.

    The concave polish restores dual-cone feasibility; the support refinement
    contracts the contamination geometrically but needs the support size of
    the genuine direction, which is searched from the smallest hypothesis up.
    A hypothesis is accepted only at a stationary point whose spectrum is
    band-clean with exactly the hypothesized number of significant
    eigenvalues. Returns a normalized valid direction, else None.
    """
    spec = c.spec

    def finalize(t: np.ndarray) -> Element | None:
        z_cand = project_W(s, wb @ t)
        zn = float(np.linalg.norm(z_cand))
        if zn <= rank_tolerance([1.0]):
            return None
        cand = Element(spec, z_cand / zn)
        if not _direction_is_valid(cone, c, mode, cand):
            return None
        return cand

    t0 = _polish_direction(c, wb, g, t_start)
    cand = finalize(t0)

    w0 = al.quadratic_apply(c.c, Element(spec, wb @ t0))
    lams0 = np.array(sorted((p[0] for p in cg.face_spectral(c, w0)), reverse=True))
    if lams0.size == 0:
        return cand
    n_sig, _ = _spectrum_bands(lams0)
    fallback = cand
    for support in range(1, min(max(n_sig, 1), 6) + 1):
        t = t0
        stall_fixes = 0
        for _ in range(rounds):
            t_new = _refine_support(c, wb, g, t, support)
            stalled = np.linalg.norm(t_new - t) <= 1e-12 * (1.0 + np.linalg.norm(t))
            t = t_new
            cand_round = finalize(t)
            if cand_round is not None:
                w_cand = al.quadratic_apply(c.c, cand_round)
                lams = np.array(
                    sorted((p[0] for p in cg.face_spectral(c, w_cand)), reverse=True)
                )
                got, clean = _spectrum_bands(lams)
                if clean and got == support:
                    return cand_round
                if fallback is None:
                    fallback = cand_round
            if stalled:
                pairs_now = cg.face_spectral(
                    c, al.quadratic_apply(c.c, Element(spec, wb @ t))
                )
                lams_now = np.array(sorted((p[0] for p in pairs_now), reverse=True))
                lam_min = float(lams_now[-1]) if lams_now.size else 0.0
                top_now = float(lams_now[0]) if lams_now.size else 0.0
                needs_fix = lam_min < -max(1e-12, NEG_BAND * max(top_now, 0.0))
                if needs_fix and stall_fixes < 2:
                    # restore cone feasibility locally, then keep refining
                    t = _polish_local(c, wb, g, t, mu=3.0 * abs(lam_min))
                    stall_fixes += 1
                    continue
                break
    return fallback


def find_reducing_direction(
    c: FaceDescriptor,
    s: AffineSet,
    cone: ConeHandle | None = None,
    mode: str = MODE_PPS,
    budget: int = DEFAULT_BUDGET,
) -> DirectionSearchReport:
    """Search for a reducing direction at face c.

    Runs Dykstra's algorithm between the closed cone C = { z : Q_c(z) ∈ F }
    and the affine set W ∩ { <z, c_sel> = 1 }, where c_sel is c (Slater mode)
    or c restricted to the non-polyhedral blocks (PPS mode). The Dykstra
    point is then polished by concave supergradient ascent of the minimum
    face eigenvalue over the target set, projected exactly onto W and
    normalized to unit length. Infeasibility is declared when the target
    affine set is empty, the iterates diverge, the gap stalls above
    DELTA_INFEAS, or the polished candidate fails the direction invariants.
    """
    spec = c.spec
    if cone is None:
        cone = cg.cone_of(spec)
    c_sel = _selected_idempotent(cone, c, mode)
    if mode == MODE_PPS and _nonpolyhedral_face_is_polyhedral(cone, c):
        # rank <= 1 on every non-polyhedral block: the face is polyhedral
        # as a cone and the PPS condition holds vacuously
        return DirectionSearchReport(False, None, 0, 0.0, "face is polyhedral")

    wb = s.w_basis
    g = wb.T @ c_sel.coords
    gn = float(np.linalg.norm(g))
    if gn <= 1e-12 * max(1.0, al.norm(c_sel)):
        return DirectionSearchReport(False, None, 0, 0.0, "target affine set is empty")

    def proj_target(v: np.ndarray) -> np.ndarray:
        t = wb.T @ v
        t = t + g * (1.0 - float(np.dot(g, t))) / gn**2
        return wb @ t

    x = wb @ (g / gn**2)  # least-norm point of the target set
    p = np.zeros(spec.dim)
    q = np.zeros(spec.dim)
    gap = np.inf
    history: list[float] = []
    reason = "budget exhausted"
    it = 0
    for it in range(1, budget + 1):
        y = _project_face_dual(spec, c, x + p)
        p = x + p - y
        x_new = proj_target(y + q)
        q = y + q - x_new
        x = x_new
        gap = float(np.linalg.norm(y - x))
        history.append(gap)
        if gap <= DELTA_GAP:
            reason = "converged"
            break
        if np.linalg.norm(x) > R_MAX:
            return DirectionSearchReport(False, None, it, gap, "iterates diverged")
        if len(history) > STALL_WINDOW:
            prev = history[-STALL_WINDOW - 1]
            if gap > DELTA_INFEAS and gap >= prev * (1.0 - 1e-12):
                return DirectionSearchReport(False, None, it, gap, "gap stalled")
            if gap >= prev * 0.7:
                # sublinear progress: hand over to the ascent polish
                reason = "slow progress"
                break

    # polish from the Dykstra point and from the least-norm target point;
    # among valid normalized candidates keep the one carrying the strongest
    # face signal (largest leading eigenvalue of Q_c z)
    best_direction = None
    best_signal = -np.inf
    for t_start in (wb.T @ x, g / gn**2):
        cand = _produce_candidate(c, s, cone, mode, wb, g, t_start)
        if cand is None:
            continue
        clean, signal = _candidate_quality(c, cand)
        if clean:
            return DirectionSearchReport(True, cand, it, gap, reason)
        if signal > best_signal:
            best_signal, best_direction = signal, cand
    if best_direction is None:
        return DirectionSearchReport(False, None, it, gap, "no valid direction found")
    return DirectionSearchReport(True, best_direction, it, gap, reason)


# Exposure keeps only the leading eigenvalue cluster of a reducing direction:
# a downward jump of more than one decade is read as the start of the
# low-order contamination chain left by the direction search.
RHO_CLUSTER = 0.1


def _cluster_cut(lams: np.ndarray) -> float:
    """Cut level separating the leading eigenvalue cluster from contamination."""
    lams = np.sort(np.asarray(lams))[::-1]
    lam_max = float(np.abs(lams).max()) if lams.size else 0.0
    neg = max(0.0, -float(lams.min())) if lams.size else 0.0
    threshold = max(
        al.TAU_RANK_FACTOR * max(1.0, lam_max),
        3.0 * float(np.sqrt(neg * max(lam_max, 1.0))),
    )
    if lams.size == 0 or lams[0] <= threshold:
        return threshold
    level = lams[0]
    for lam in lams[1:]:
        if lam <= max(threshold, RHO_CLUSTER * level):
            break
        level = lam
    return max(threshold, RHO_CLUSTER * level)


def _refine_support(
    c: FaceDescriptor,
    wb: np.ndarray,
    g: np.ndarray,
    t: np.ndarray,
    support: int,
) -> np.ndarray:
    """Sharpen a candidate direction against a hypothesized support size.

    Takes the top ``support`` eigenvectors of Q_c(z) inside V(c,1) as the
    cluster subalgebra T and solves the linear least-squares problem

        minimize || (Q_c - Q_{c_T}) W t ||^2   s.t.  <g, t> = 1,

    whose residual vanishes at any direction whose V(c,1)-part is supported
    exactly on T. One round reduces the contamination quadratically.
    """
    spec = c.spec
    z = wb @ np.asarray(t, dtype=float)
    w = al.quadratic_apply(c.c, Element(spec, z))
    pairs = sorted(cg.face_spectral(c, w), key=lambda p: p[0], reverse=True)
    if not pairs or support <= 0 or support >= len(pairs):
        return t
    c_top = Element(spec, np.sum([pairs[i][1].coords for i in range(support)], axis=0))
    cols = []
    for j in range(wb.shape[1]):
        col = Element(spec, wb[:, j])
        resid = al.quadratic_apply(c.c, col) - al.quadratic_apply(c_top, col)
        cols.append(resid.coords)
    m = np.column_stack(cols)
    k = wb.shape[1]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = m.T @ m
    kkt[:k, k] = g
    kkt[k, :k] = g
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    t_new = sol[:k]
    if not np.all(np.isfinite(t_new)) or np.linalg.norm(wb @ t_new) > R_MAX:
        return t
    return t_new


def _expose_clean(c: FaceDescriptor, z: Element) -> FaceDescriptor:
    """Exposure step with a contamination-aware zero threshold.

    A direction obtained at tolerance may retain a low-order mixture of later
    reducing directions, forming a geometrically decaying eigenvalue chain
    below the genuine part of the spectrum. Only the leading decade-separated
    cluster is removed from the face; everything below it is classified as
    zero. Classifying as zero only enlarges the face, which keeps the chain
    sound, and the following reduction steps pick up whatever was deferred.
    """
    w = al.quadratic_apply(c.c, z)
    pairs = cg.face_spectral(c, w)
    if not pairs:
        return c
    lams = np.array(sorted((p[0] for p in pairs), reverse=True))
    n_sig, clean = _spectrum_bands(lams)
    if clean:
        # band-clean spectrum: every significant eigenvalue is trustworthy
        cut = float(lams[n_sig - 1]) * 0.5 if n_sig else _cluster_cut(lams)
    else:
        cut = _cluster_cut(lams)
    coords = np.array(c.c.coords)
    for lam, idem in pairs:
        if lam > cut:
            coords -= idem.coords
    return FaceDescriptor(Element(c.spec, coords))


def run_facial_reduction(
    cone: ConeHandle,
    s: AffineSet,
    mode: str = MODE_PPS,
    budget: int = DEFAULT_BUDGET,
) -> ReductionChain:
    """Build a chain of faces K = F_1 ⊋ F_2 ⊋ ... until the constraint
    qualification of the requested mode holds (or the step cap is hit).

    The returned number of steps is an upper estimate, at solve tolerance, of
    d_PPS (PPS mode) or the singularity degree d_S (Slater mode).
    """
    cap = _mode_cap(cone, mode)
    faces = [al.face_identity(cone.spec)]
    directions: list[Element] = []
    cq_reached = False
    step_cap_hit = False
    while True:
        report = find_reducing_direction(faces[-1], s, cone, mode, budget)
        if not report.found:
            cq_reached = True
            break
        if len(directions) >= cap:
            step_cap_hit = True
            break
        new_face = _expose_clean(faces[-1], report.direction)
        if new_face.rank >= faces[-1].rank:
            # no strict rank decrease: a numerical stall, leave both flags unset
            break
        directions.append(report.direction)
        faces.append(new_face)
    return ReductionChain(
        mode=mode,
        faces=tuple(faces),
        directions=tuple(directions),
        cq_reached=cq_reached,
        step_cap_hit=step_cap_hit,
        dim_w=s.dim_w,
        rank_cap=cap,
    )


def pps_holds(cone: ConeHandle, s: AffineSet, budget: int = DEFAULT_BUDGET) -> bool:
    """Budgeted approximate test of the partial polyhedral Slater condition."""
    report = find_reducing_direction(
        al.face_identity(cone.spec), s, cone, MODE_PPS, budget
    )
    return not report.found


def trivial_intersection_certificate(
    cone: ConeHandle,
    s: AffineSet,
    budget: int = ASCENT_ITERS,
) -> Element | None:
    """Search for z ∈ (ri K*) ∩ L^perp certifying (L + a) ∩ K = {0}.

    Runs projected supergradient ascent of lambda_min over the unit ball of
    L^perp; the supergradient at z is the primitive idempotent of the minimal
    eigenvalue (deterministically the first in block order). Returns z when
    the final lambda_min exceeds TAU_INT, else None.
    """
    if not s.is_homogeneous():
        raise DomainError("trivial-intersection certificates require b = 0")
    spec = cone.spec
    rb = s.row_basis
    if rb.shape[1] == 0:
        return None

    def proj(v: np.ndarray) -> np.ndarray:
        v = rb @ (rb.T @ v)
        n = np.linalg.norm(v)
        return v / n if n > 1.0 else v

    z = proj(al.identity(spec).coords)
    if np.linalg.norm(z) < 1e-14:
        z = proj(np.ones(spec.dim))
    best = z
    best_val = cg.lambda_min(Element(spec, z)) if np.linalg.norm(z) > 0 else -np.inf
    for k in range(1, budget + 1):
        elem = Element(spec, z)
        dec = al.spectral(elem)
        pairs = list(dec.pairs())
        lams = np.array([p[0] for p in pairs])
        i_min = int(np.argmin(lams))
        if lams[i_min] > best_val:
            best_val = float(lams[i_min])
            best = z
        grad = pairs[i_min][1].coords
        z = proj(z + grad / np.sqrt(k))
    final = Element(spec, best)
    if cg.lambda_min(final) > TAU_INT:
        return final
    return None
