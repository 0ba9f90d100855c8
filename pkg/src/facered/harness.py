"""Independent verification harness: Dykstra distance oracle, instance
generators, probe sampling, exponent estimation and bound checking.

The oracle uses Dykstra's algorithm (with correction vectors), not plain
alternating projections, because the affine set is not a subspace through
the origin and the metric projection onto the intersection is required,
not merely a feasible point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import algebra as al
from . import conegeom as cg
from .affine import AffineSet, make_affine, project_affine
from .algebra import AlgebraSpec, Element
from .bounds import ErrorBoundCertificate
from .conegeom import ConeHandle, cone_of
from .errors import DomainError, InfeasibleProblemError

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITER = 200_000
FEAS_PROBE_ITER = 20_000
FEAS_DELTA = 1e-6

EPS_GRID_DEFAULT = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
N_RANDOM_DEFAULT = 64
N_ADVERSARIAL_DEFAULT = 8
ADVERSARIAL_STEPS = 200


def dykstra_project(x0, projectors, tol=DYKSTRA_TOL, max_iter=DYKSTRA_MAX_ITER):
    """Cyclic Dykstra iteration onto the intersection of closed convex sets.

    ``projectors`` maps a coordinate vector to its metric projection onto one
    set. Returns (point, info) where info carries iteration count, the final
    successive-iterate change and a convergence flag.
    """
    x = np.asarray(x0, dtype=float).copy()
    m = len(projectors)
    corrections = [np.zeros_like(x) for _ in range(m)]
    change = np.inf
    it = 0
    quiet = 0
    for it in range(1, max_iter + 1):
        x_prev = x.copy()
        for i, proj in enumerate(projectors):
            y = proj(x + corrections[i])
            corrections[i] = x + corrections[i] - y
            x = y
        change = float(np.linalg.norm(x - x_prev))
        # transient zero-change cycles occur before the corrections settle,
        # so convergence requires a sustained quiet stretch
        quiet = quiet + 1 if change <= tol else 0
        if quiet >= 3 and it >= 10:
            break
    converged = quiet >= 3
    return x, {"iterations": it, "change": change, "converged": converged}


def _cone_projector(spec: AlgebraSpec):
    def proj(v: np.ndarray) -> np.ndarray:
        out, _ = cg.project_cone_coords(spec, v)
        return out

    return proj


def _affine_projector(s: AffineSet):
    def proj(v: np.ndarray) -> np.ndarray:
        out, _ = project_affine(s, v)
        return out

    return proj


def probe_feasibility(cone: ConeHandle, s: AffineSet, max_iter=FEAS_PROBE_ITER) -> None:
    """Cheap feasibility probe; raises InfeasibleProblemError on apparent emptiness.

    Runs alternating projections from the origin and checks that the gap
    between the two sets' projections decays below FEAS_DELTA.
    """
    spec = cone.spec
    x = np.zeros(spec.dim)
    gap = np.inf
    proj_k = _cone_projector(spec)
    for _ in range(max_iter):
        y, _ = project_affine(s, x)
        x_new = proj_k(y)
        gap = float(np.linalg.norm(x_new - y))
        if gap <= FEAS_DELTA:
            return
        if np.linalg.norm(x_new - x) <= 1e-14 * (1.0 + np.linalg.norm(x)):
            break
        x = x_new
    if gap > FEAS_DELTA:
        raise InfeasibleProblemError(
            f"alternating projections stall at gap {gap:.3e}"
        )


def _face_projector(face: al.FaceDescriptor):
    def proj(v: np.ndarray) -> np.ndarray:
        return cg.project_face_coords(face, v)

    return proj


def dist_to_feasible(
    x: Element,
    cone: ConeHandle,
    s: AffineSet,
    tol: float = DYKSTRA_TOL,
    max_iter: int = DYKSTRA_MAX_ITER,
    check_feasible: bool = True,
    face: al.FaceDescriptor | None = None,
):
    """Distance from x to K ∩ (L + a) by Dykstra's alternating projections.

    When ``face`` (a face of K known to contain the feasible set, e.g. the
    last face of a sound reduction chain) is supplied, the cone projector is
    replaced by the face projector. The feasible set is unchanged but the
    intersection is regular, so the iteration converges linearly instead of
    at the degenerate sublinear rate. Returns (distance, info);
    info["approximate"] is set when the iteration stopped on the budget
    rather than the tolerance.
    """
    if check_feasible:
        probe_feasibility(cone, s)
    first = _cone_projector(cone.spec) if face is None else _face_projector(face)
    limit, info = dykstra_project(
        x.coords,
        [first, _affine_projector(s)],
        tol=tol,
        max_iter=max_iter,
    )
    info["approximate"] = not info["converged"]
    return float(np.linalg.norm(x.coords - limit)), info


def feasible_point(
    cone: ConeHandle,
    s: AffineSet,
    start: Element | None = None,
    face: al.FaceDescriptor | None = None,
) -> Element:
    """A point of K ∩ (L + a), computed as the Dykstra limit from ``start``.

    Passing the final face of a sound reduction chain regularizes the
    intersection and makes the limit accurate instead of budget-limited.
    """
    spec = cone.spec
    x0 = al.identity(spec) if start is None else start
    first = _cone_projector(spec) if face is None else _face_projector(face)
    limit, _ = dykstra_project(x0.coords, [first, _affine_projector(s)])
    return Element(spec, limit)


# ---------------------------------------------------------------------------
# instance generators


def sturm_family(n: int):
    """Semidefinite feasibility instance with singularity degree n - 1.

    Cone S^n_+ with the homogeneous constraints X_11 = 0 and
    X_kk = X_{k-1,k+1} for k = 2..n-1 (1-based): each facial reduction step
    kills one row/column, and the k-th equality only becomes active once
    row k-1 is dead, forcing exactly n - 1 sequential steps down to the
    rank-one face spanned by E_nn.
    """
    if n < 2:
        raise DomainError("sturm_family needs n >= 2")
    spec = al.make_spec(al.sym_block(n))
    first = np.zeros((n, n))
    first[0, 0] = 1.0
    rows = [al.svec(first)]
    for k in range(1, n - 1):
        m = np.zeros((n, n))
        m[k, k] = 1.0
        m[k - 1, k + 1] = m[k + 1, k - 1] = -0.5
        rows.append(al.svec(m))
    return cone_of(spec), make_affine(rows, np.zeros(len(rows)))


def random_element(spec: AlgebraSpec, rng) -> Element:
    return Element(spec, rng.standard_normal(spec.dim))


def random_psd_element(spec: AlgebraSpec, rng) -> Element:
    x = random_element(spec, rng)
    return al.jordan_product(x, x)


def random_frame(block, rng):
    """A random full frame of primitive idempotents for one block."""
    if block.kind == al.SYM:
        q, _ = np.linalg.qr(rng.standard_normal((block.n, block.n)))
        return [al.svec(np.outer(q[:, i], q[:, i])) for i in range(block.n)]
    if block.kind == al.SPIN:
        u = rng.standard_normal(block.n - 1)
        u /= np.linalg.norm(u)
        return [al.spin_canonical(0.5, 0.5 * u), al.spin_canonical(0.5, -0.5 * u)]
    return [row for row in np.eye(block.n)]


def random_face(spec: AlgebraSpec, rng, min_rank: int = 0) -> al.FaceDescriptor:
    """A random face descriptor with block ranks >= the requested total."""
    while True:
        parts = []
        total = 0
        for b in spec.blocks:
            frame = random_frame(b, rng)
            k = int(rng.integers(0, b.rank + 1))
            total += k
            part = np.zeros(b.dim)
            for i in range(k):
                part += frame[i]
            parts.append(part)
        if total >= min_rank:
            return al.face(al.from_blocks(spec, parts))


def _half_peirce_coupling(block, frame, i: int, j: int, rng):
    """Unit element coupling frame members i and j of one block, or None."""
    if block.kind == al.SYM:
        qi = _sym_frame_vector(block.n, frame[i])
        qj = _sym_frame_vector(block.n, frame[j])
        m = (np.outer(qi, qj) + np.outer(qj, qi)) / math.sqrt(2.0)
        return al.svec(m)
    if block.kind == al.SPIN:
        if block.n < 3:
            return None
        x0, u = al.spin_natural(frame[i])
        u = u / np.linalg.norm(u)
        v = rng.standard_normal(block.n - 1)
        v -= u * np.dot(u, v)
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            return None
        v *= 1.0 / (nv * math.sqrt(2.0))
        return al.spin_canonical(0.0, v)
    return None


def _sym_frame_vector(n: int, idem_coords: np.ndarray) -> np.ndarray:
    lam, q = np.linalg.eigh(al.smat(idem_coords))
    return q[:, int(np.argmax(lam))]


def designed_singularity(spec: AlgebraSpec, depth: int, seed, n_extra_rows: int = 0):
    """Instance with singularity structure of known depth, plus its anchor.

    Builds a sequential reduction chain inside the largest non-polyhedral
    block: the frame elements f_1..f_depth are killed one per step, with the
    i-th constraint row f_i - theta_i coupling(f_{i-1}, f_{i+1}) usable only
    after f_{i-1} is dead (the coupling would otherwise leave the dual of the
    current face). The anchor, interior to the final face, certifies the PPS
    condition there. Optional extra rows orthogonal to the anchor add generic
    directions to W without changing the chain.

    Returns (cone, affine_set, anchor_element).
    """
    rng = np.random.default_rng(seed)
    cone = cone_of(spec)
    np_blocks = [
        (i, b)
        for i, (b, poly) in enumerate(zip(spec.blocks, cone.polyhedral_mask))
        if not poly
    ]
    if depth > 0 and not np_blocks:
        raise DomainError("designed depth needs a non-polyhedral block")
    lead_index, lead = (
        max(np_blocks, key=lambda ib: ib[1].rank) if np_blocks else (None, None)
    )
    if depth > 0 and lead.rank - 1 < depth:
        raise DomainError(
            f"depth {depth} exceeds the chain capacity {lead.rank - 1} of the "
            "largest non-polyhedral block"
        )

    offsets = spec.offsets()

    def embed(i: int, part: np.ndarray) -> np.ndarray:
        out = np.zeros(spec.dim)
        lo, hi = offsets[i]
        out[lo:hi] = part
        return out

    rows = []
    anchor = np.zeros(spec.dim)
    frame = random_frame(lead, rng) if lead is not None else None
    for i, b in enumerate(spec.blocks):
        if i == lead_index and depth > 0:
            weights = rng.uniform(0.6, 1.5, size=lead.rank)
            for j in range(depth, lead.rank):
                anchor += weights[j] * embed(i, frame[j])
        else:
            # interior of the untouched block
            x = rng.standard_normal(b.dim)
            lo, hi = offsets[i]
            part = al.jordan_product(
                Element(al.make_spec(b), x), Element(al.make_spec(b), x)
            ).coords + 0.5 * al._block_identity(b)
            anchor[lo:hi] = part

    for step in range(depth):
        row = embed(lead_index, frame[step])
        if step >= 1:
            coupling = _half_peirce_coupling(lead, frame, step - 1, step + 1, rng)
            if coupling is not None:
                row -= float(rng.uniform(0.5, 1.5)) * embed(lead_index, coupling)
        rows.append(row)

    for _ in range(n_extra_rows):
        r = rng.standard_normal(spec.dim)
        r -= anchor * (np.dot(r, anchor) / np.dot(anchor, anchor))
        rows.append(r)

    if rows:
        a_mat = np.vstack(rows)
    else:
        a_mat = np.zeros((0, spec.dim))
    b_vec = a_mat @ anchor
    return cone, make_affine(a_mat, b_vec), Element(spec, anchor)


# ---------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class ProbeSample:
    eps: float
    x: Element
    dist_K: float
    dist_affine: float
    dist_feasible: float
    norm_x: float
    stream: str


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    residual: float
    sample_count: int
    exact: bool = False


def _in_slab(cone, s, x: np.ndarray, eps: float, norm_cap: float, slack=1.0005) -> bool:
    if np.linalg.norm(x) > norm_cap * slack:
        return False
    dist_k, dist_a = _slab_residuals(cone, s, x)
    return dist_k <= eps * slack and dist_a <= eps * slack


def _clip_to_slab(
    cone,
    s,
    x: np.ndarray,
    eps: float,
    norm_cap: float = np.inf,
    anchor: np.ndarray | None = None,
    rounds: int = 40,
) -> np.ndarray:
    """Project x into { dist_K <= eps } ∩ { dist_affine <= eps } ∩ { ||x|| <= cap }.

    Cyclic projections onto the three convex sets converge linearly (the
    slabs have overlapping interiors); if the budget runs out, the point is
    blended toward the feasible anchor, which lies in all three sets.
    """
    spec = cone.spec
    for _ in range(rounds):
        moved = False
        nx = np.linalg.norm(x)
        if nx > norm_cap:
            x = x * (norm_cap / nx)
            moved = True
        proj_a, dist_a = project_affine(s, x)
        if dist_a > eps:
            x = proj_a + (x - proj_a) * (eps / dist_a)
            moved = True
        proj_k, dist_k = cg.project_cone_coords(spec, x)
        if dist_k > eps:
            x = proj_k + (x - proj_k) * (eps / dist_k)
            moved = True
        if not moved:
            return x
    if anchor is not None:
        for _ in range(60):
            if _in_slab(cone, s, x, eps, norm_cap):
                return x
            x = 0.5 * (x + anchor)
        return anchor.copy()
    return x


def _slab_residuals(cone, s, x: np.ndarray):
    _, dist_k = cg.project_cone_coords(cone.spec, x)
    _, dist_a = project_affine(s, x)
    return dist_k, dist_a


def _adversarial_probe(
    cone,
    s,
    x0: np.ndarray,
    eps: float,
    rng,
    steps=ADVERSARIAL_STEPS,
    face=None,
    norm_cap: float = np.inf,
    anchor: np.ndarray | None = None,
):
    """Local maximizer of the distance-to-feasible over the bounded eps-slab.

    Projected coordinate ascent with an adaptive step size; the steering
    objective is a short alternating-projection estimate, with the accurate
    Dykstra oracle reserved for the returned point.
    """
    spec = cone.spec

    def cheap_dist(v: np.ndarray) -> float:
        y = v.copy()
        for _ in range(25):
            y, _ = project_affine(s, y)
            if face is None:
                y, _ = cg.project_cone_coords(spec, y)
            else:
                y = cg.project_face_coords(face, y)
        return float(np.linalg.norm(v - y))

    x = _clip_to_slab(cone, s, x0.copy(), eps, norm_cap, anchor)
    best = cheap_dist(x)
    step = max(eps ** 0.5, 10.0 * eps)
    dim = spec.dim
    order = rng.permutation(dim)
    for k in range(steps):
        i = order[k % dim]
        improved = False
        for sign in (1.0, -1.0):
            trial = x.copy()
            trial[i] += sign * step
            trial = _clip_to_slab(cone, s, trial, eps, norm_cap, anchor)
            val = cheap_dist(trial)
            if val > best * (1.0 + 1e-12):
                x, best = trial, val
                improved = True
                break
        step = step * 1.3 if improved else step * 0.7
        if step < 1e-3 * eps:
            step = max(eps ** 0.5, 10.0 * eps)
    return x


def make_probe_samples(
    cone: ConeHandle,
    s: AffineSet,
    eps_grid=EPS_GRID_DEFAULT,
    n_random: int = N_RANDOM_DEFAULT,
    n_adversarial: int = N_ADVERSARIAL_DEFAULT,
    seed=0,
    base_point: Element | None = None,
    face: al.FaceDescriptor | None = None,
    norm_cap: float | None = None,
) -> list[ProbeSample]:
    """Random and adversarial eps-feasible probes with oracle distances.

    Random probes take x = P_{L+a}(x* + eps g) + eps h around a feasible
    point x*, then clip so both residuals stay below eps. Adversarial probes
    run a projected coordinate ascent of the feasible-set distance over the
    slab intersected with a norm ball (the error-bound hypotheses require a
    bounded family), warm-started from the previous (larger) eps level.
    """
    rng = np.random.default_rng(seed)
    spec = cone.spec
    probe_feasibility(cone, s)
    x_star = (
        base_point
        if base_point is not None
        else feasible_point(cone, s, face=face)
    )
    if norm_cap is None:
        norm_cap = 2.0 * (1.0 + al.norm(x_star))
    samples: list[ProbeSample] = []
    best_prev: np.ndarray | None = None
    best_prev_proj: np.ndarray | None = None
    prev_eps = None
    for eps in sorted(eps_grid, reverse=True):
        if eps < 0:
            raise DomainError("eps values must be nonnegative")
        for trial in range(n_random):
            if eps == 0.0:
                x = x_star.coords.copy()
            else:
                g = rng.standard_normal(spec.dim)
                g /= np.linalg.norm(g)
                h = rng.standard_normal(spec.dim)
                h /= np.linalg.norm(h)
                x, _ = project_affine(s, x_star.coords + eps * g)
                x = x + eps * h
                x = _clip_to_slab(cone, s, x, eps, norm_cap, x_star.coords)
            samples.append(_finish_sample(cone, s, x, eps, "random", face))
        best_x, best_d = None, -np.inf
        hop_from = max(2, n_adversarial // 2)
        for trial in range(n_adversarial):
            if eps == 0.0:
                x0 = x_star.coords.copy()
                samples.append(_finish_sample(cone, s, x0, eps, "adversarial", face))
                continue
            if best_x is not None and trial >= hop_from:
                # basin hop: restart near the best maximizer found at this eps
                kick = rng.standard_normal(spec.dim)
                kick *= 0.3 * math.sqrt(eps) / np.linalg.norm(kick)
                x0 = best_x + kick
            elif trial % 2 == 1 and best_prev is not None and prev_eps:
                # linear continuation: rescale the previous level's best
                # maximizer around its own feasible projection, preserving
                # the worst-case direction as the slab tightens
                x0 = best_prev_proj + (eps / prev_eps) * (best_prev - best_prev_proj)
            elif face is not None and trial % 2 == 0:
                # seed along the half-Peirce space of the final face at the
                # composed residual scales eps^(1/2), eps^(1/4), ..., where
                # the nested sqrt terms of the error bound are attained
                j = 1 + (trial // 2) % 3
                scale = eps ** (2.0 ** (-j)) * max(al.norm(x_star), eps) ** (
                    1.0 - 2.0 ** (-j)
                )
                w = Element(spec, _half_peirce_direction(face, rng))
                completion = al.jordan_product(w, w)
                x0 = (
                    x_star.coords
                    + scale * w.coords
                    + 2.0 * scale**2 * completion.coords
                )
            else:
                g = rng.standard_normal(spec.dim)
                x0 = x_star.coords + eps * g / np.linalg.norm(g)
            x = _adversarial_probe(
                cone, s, x0, eps, rng, face=face, norm_cap=norm_cap,
                anchor=x_star.coords,
            )
            sample = _finish_sample(cone, s, x, eps, "adversarial", face)
            samples.append(sample)
            if sample.dist_feasible > best_d:
                best_d, best_x = sample.dist_feasible, x
        if eps > 0 and best_x is not None:
            first = _cone_projector(spec) if face is None else _face_projector(face)
            proj, _ = dykstra_project(best_x, [first, _affine_projector(s)])
            best_prev, best_prev_proj, prev_eps = best_x, proj, eps
    return samples


def _half_peirce_direction(face: al.FaceDescriptor, rng) -> np.ndarray:
    """A unit element of V(c, 1/2) for the given face (zero if trivial)."""
    spec = face.spec
    e = al.identity(spec)
    for _ in range(8):
        x = Element(spec, rng.standard_normal(spec.dim))
        w = (
            x
            - al.quadratic_apply(face.c, x)
            - al.quadratic_apply(e - face.c, x)
        )
        nw = al.norm(w)
        if nw > 1e-9:
            return w.coords / nw
    return np.zeros(spec.dim)


def _finish_sample(cone, s, x: np.ndarray, eps: float, stream: str, face=None) -> ProbeSample:
    dist_k, dist_a = _slab_residuals(cone, s, x)
    elem = Element(cone.spec, x)
    dist_f, _ = dist_to_feasible(elem, cone, s, check_feasible=False, face=face)
    return ProbeSample(
        eps=float(eps),
        x=elem,
        dist_K=dist_k,
        dist_affine=dist_a,
        dist_feasible=dist_f,
        norm_x=al.norm(elem),
        stream=stream,
    )


def estimate_exponent(samples) -> ExponentFit:
    """Least-squares slope of log(max dist_feasible) against log(eps).

    ``samples`` is either a list of ProbeSample or of (eps, dist) pairs.
    Requires at least 4 distinct eps values spanning 3 decades. Degenerate
    data (all distances below 1e-12) returns slope 1 flagged exact.
    """
    per_eps: dict[float, float] = {}
    for item in samples:
        if isinstance(item, ProbeSample):
            eps, dist = item.eps, item.dist_feasible
        else:
            eps, dist = item
        if eps <= 0:
            continue
        per_eps[eps] = max(per_eps.get(eps, 0.0), dist)
    if len(per_eps) < 4:
        raise DomainError("need at least 4 positive eps values")
    eps_vals = np.array(sorted(per_eps))
    if math.log10(eps_vals[-1] / eps_vals[0]) < 3.0 - 1e-9:
        raise DomainError("eps grid must span at least 3 decades")
    dists = np.array([per_eps[e] for e in eps_vals])
    if np.all(dists <= 1e-12):
        return ExponentFit(1.0, 0.0, 0.0, len(eps_vals), exact=True)
    keep = dists > 1e-15
    loge = np.log(eps_vals[keep])
    logd = np.log(dists[keep])
    slope, intercept = np.polyfit(loge, logd, 1)
    resid = float(np.sqrt(np.mean((logd - (slope * loge + intercept)) ** 2)))
    return ExponentFit(float(slope), float(intercept), resid, int(np.sum(keep)))


@dataclass(frozen=True)
class BoundCheckReport:
    kappa_star: float
    violations: list
    n_calibration: int
    n_holdout: int


def bound_check(
    certificate: ErrorBoundCertificate,
    samples,
    rho: float,
    margin: float = 0.10,
) -> BoundCheckReport:
    """Calibrate kappa* on half the samples and test the bound on the rest.

    kappa* is the largest ratio dist_feasible / ((1 + ||x||) phi(eps, ||x||))
    over the calibration half (samples interleaved by eps and stream so both
    halves span the grid); holdout samples exceeding kappa* (1 + margin)
    times the bound are reported as violations.
    """
    eligible = [
        sm for sm in samples if sm.eps <= 1.0 and sm.norm_x <= rho and sm.eps > 0
    ]
    groups: dict[tuple[float, str], list] = {}
    for sm in eligible:
        groups.setdefault((sm.eps, sm.stream), []).append(sm)
    calib, holdout = [], []
    # interleave within each (eps, stream) group, flipping the parity from
    # group to group so warm-started trial chains feed both halves
    for gi, key in enumerate(sorted(groups, key=lambda k: (-k[0], k[1]))):
        for j, sm in enumerate(groups[key]):
            (calib if (j + gi) % 2 == 0 else holdout).append(sm)
    if not calib:
        raise DomainError("empty calibration set")
    kappa_star = 0.0
    for sm in calib:
        denom = certificate.bound_value(sm.eps, sm.norm_x)
        if denom > 0:
            kappa_star = max(kappa_star, sm.dist_feasible / denom)
    violations = []
    for sm in holdout:
        denom = certificate.bound_value(sm.eps, sm.norm_x)
        if denom > 0 and sm.dist_feasible > kappa_star * (1.0 + margin) * denom:
            violations.append(sm)
    return BoundCheckReport(
        kappa_star=kappa_star,
        violations=violations,
        n_calibration=len(calib),
        n_holdout=len(holdout),
    )
