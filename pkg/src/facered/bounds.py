"""Facial residual functions, their diamond composition, Holderian
error-bound certificates, and intersection / doubly-nonnegative lifts."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import algebra as al
from .affine import AffineSet, make_affine
from .conegeom import ConeHandle, cone_of
from .errors import CertificateUnavailableError, DimensionMismatchError, DomainError
from .reduction import ReductionChain

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ResidualFunction:
    """psi(eps, t) = sum_i kappa_i eps^p_i t^q_i with kappa_i > 0, p_i in (0,1]."""

    terms: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        for kappa, p, q in self.terms:
            if kappa <= 0:
                raise DomainError("term coefficients must be positive")
            if not 0 < p <= 1:
                raise DomainError("eps exponents must lie in (0, 1]")
            if q < 0:
                raise DomainError("t exponents must be nonnegative")

    def value(self, eps: float, t: float) -> float:
        if eps < 0 or t < 0:
            raise DomainError("residual functions are defined on nonnegative inputs")
        return float(
            sum(kappa * eps**p * t**q for kappa, p, q in self.terms)
        )

    __call__ = value


def frf_symmetric(kappa: float) -> ResidualFunction:
    """The symmetric-cone facial residual function kappa eps + kappa sqrt(eps t)."""
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    return ResidualFunction(((float(kappa), 1.0, 0.0), (float(kappa), 0.5, 0.5)))


def frf_polyhedral(kappa: float) -> ResidualFunction:
    """The polyhedral facial residual function kappa eps (no t dependence)."""
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    return ResidualFunction(((float(kappa), 1.0, 0.0),))


def frf_sum(a: ResidualFunction, b: ResidualFunction) -> ResidualFunction:
    """Sum of residual functions with like-term grouping."""
    acc: dict[tuple[float, float], float] = {}
    for kappa, p, q in a.terms + b.terms:
        acc[(p, q)] = acc.get((p, q), 0.0) + kappa
    terms = tuple(
        (kappa, p, q) for (p, q), kappa in sorted(acc.items(), reverse=True)
    )
    return ResidualFunction(terms)


def diamond_eval(psi: ResidualFunction, phi_value_fn, eps: float, t: float) -> float:
    """One step of the diamond composition: psi(eps + phi(eps, t), t)."""
    if eps < 0 or t < 0:
        raise DomainError("diamond composition is defined on nonnegative inputs")
    return psi.value(eps + float(phi_value_fn(eps, t)), t)


def diamond_chain_eval(frfs, eps: float, t: float) -> float:
    """Evaluate psi_k diamond ... diamond psi_1 at (eps, t).

    ``frfs[0]`` is the innermost function (the first reduction step).
    """
    frfs = list(frfs)
    if not frfs:
        return float(eps)
    value = frfs[0].value(eps, t)
    for psi in frfs[1:]:
        value = psi.value(eps + value, t)
    return value


def _shape_of(frf: ResidualFunction) -> tuple[str, float]:
    """Classify a residual function as symmetric or polyhedral shaped."""
    terms = sorted(frf.terms, key=lambda trm: (trm[1], trm[2]))
    if len(terms) == 1 and terms[0][1:] == (1.0, 0.0):
        return "polyhedral", terms[0][0]
    if (
        len(terms) == 2
        and terms[0][1:] == (0.5, 0.5)
        and terms[1][1:] == (1.0, 0.0)
        and abs(terms[0][0] - terms[1][0]) <= 1e-12 * terms[1][0]
    ):
        return "symmetric", terms[1][0]
    raise DomainError("unsupported residual-function shape")


def closed_form_bound(frfs) -> ResidualFunction:
    """Closed-form upper bound for a diamond chain of symmetric/polyhedral FRFs.

    A single constant kappa is propagated through the chain recursion
    (kappa_new = kappa_l + kappa_l * kappa_prev + kappa_l * sqrt(kappa_prev)
    for symmetric steps; polyhedral steps contribute kappa_l * (1 +
    kappa_prev) and do not deepen the exponent ladder) and attached to the
    exponent pairs (2^-j, 1 - 2^-j). The result dominates the exact diamond
    evaluation pointwise on eps, t >= 0.
    """
    frfs = list(frfs)
    if not frfs:
        raise DomainError("need at least one residual function")
    shape0, kappa = _shape_of(frfs[0])
    depth = 1 if shape0 == "symmetric" else 0
    for frf in frfs[1:]:
        shape, k_l = _shape_of(frf)
        if shape == "symmetric":
            kappa = k_l + k_l * kappa + k_l * math.sqrt(kappa)
            depth += 1
        else:
            kappa = k_l * (1.0 + kappa)
    terms = tuple(
        (kappa, 2.0 ** (-j), 1.0 - 2.0 ** (-j)) for j in range(depth + 1)
    )
    return ResidualFunction(terms)


@dataclass(frozen=True)
class CertificateCaps:
    dim_w: int
    rank_cap: int
    observed_d: int


@dataclass(frozen=True)
class ErrorBoundCertificate:
    """Holderian error-bound certificate for a regularized reduction chain.

    Guarantees dist(x, feasible) <= kappa (1 + ||x||) phi(eps, ||x||) for some
    finite kappa whenever dist(x, K) <= eps and dist(x, L + a) <= eps; the
    exponent gamma = 2^-d governs the small-eps regime for bounded x.
    """

    mode: str
    d: int
    gamma: float
    phi: ResidualFunction
    caps: CertificateCaps
    face_ranks: tuple[int, ...]
    fitted_kappa: float | None = None

    def bound_value(self, eps: float, norm_x: float) -> float:
        """Shape of the bound at (eps, ||x||): (1 + ||x||) phi(eps, ||x||)."""
        return (1.0 + norm_x) * self.phi.value(eps, norm_x)

    def with_fitted_kappa(self, kappa: float) -> "ErrorBoundCertificate":
        return replace(self, fitted_kappa=float(kappa))


def _step_is_polyhedral_only(
    cone: ConeHandle, before, after
) -> bool:
    """Whether a reduction step cut rank only inside polyhedral blocks."""
    drops = [
        rb - ra for rb, ra in zip(before.block_ranks, after.block_ranks)
    ]
    return all(
        drop == 0 or poly
        for drop, poly in zip(drops, cone.polyhedral_mask)
    )


def make_certificate(
    chain: ReductionChain,
    kappas=None,
    cone: ConeHandle | None = None,
) -> ErrorBoundCertificate:
    """Certificate for a chain that reached its constraint qualification.

    Steps that cut only polyhedral blocks contribute linear residual
    functions; all other steps contribute the symmetric-cone shape. Per-step
    constants default to 1 (the exponent structure is the verifiable
    content; constants are calibration data).
    """
    if not chain.cq_reached:
        raise CertificateUnavailableError(
            "chain did not reach its constraint qualification"
        )
    d = chain.steps
    if kappas is None:
        kappas = [1.0] * d
    if len(kappas) != d:
        raise DomainError(f"expected {d} per-step constants, got {len(kappas)}")
    if cone is None:
        cone = cone_of(chain.faces[0].spec)
    frfs = []
    for i in range(d):
        if _step_is_polyhedral_only(cone, chain.faces[i], chain.faces[i + 1]):
            frfs.append(frf_polyhedral(kappas[i]))
        else:
            frfs.append(frf_symmetric(kappas[i]))
    if frfs:
        phi = closed_form_bound(frfs)
    else:
        phi = ResidualFunction(((1.0, 1.0, 0.0),))
    return ErrorBoundCertificate(
        mode=chain.mode,
        d=d,
        gamma=2.0 ** (-d),
        phi=phi,
        caps=CertificateCaps(
            dim_w=chain.dim_w, rank_cap=chain.rank_cap, observed_d=d
        ),
        face_ranks=chain.face_ranks,
    )


def certificate_to_text(cert: ErrorBoundCertificate) -> str:
    """Flat text record of a certificate (documented in the CLI module)."""
    lines = [
        f"mode={cert.mode}",
        f"d={cert.d}",
        f"gamma={cert.gamma:.17g}",
        f"caps.dim_w={cert.caps.dim_w}",
        f"caps.rank_cap={cert.caps.rank_cap}",
        f"faces={','.join(str(r) for r in cert.face_ranks)}",
    ]
    for kappa, p, q in cert.phi.terms:
        lines.append(f"term={kappa:.17g},{p:.17g},{q:.17g}")
    if cert.fitted_kappa is not None:
        lines.append(f"fitted_kappa={cert.fitted_kappa:.17g}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LiftedProblem:
    """Product-space reformulation of (K1 ∩ K2) ∩ (L + a)."""

    cone: ConeHandle
    affine: AffineSet
    inflate: float = SQRT2
    deflate: float = 1.0 / SQRT2

    def lift_point(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([x, x])


def intersection_lift(
    cone1: ConeHandle, cone2: ConeHandle, s: AffineSet
) -> LiftedProblem:
    """Lift (K1 ∩ K2, L, a) to (K1 x K2, L-hat, a-hat) over doubled coordinates.

    The lifted affine set is { (x, x) : x in L + a }, encoded as the original
    equations on the first copy plus identification equations x1 - x2 = 0.
    Residuals inflate by sqrt(2) and distances deflate by 1/sqrt(2) when
    mapped back, which the certificate constants absorb.
    """
    n1, n2 = cone1.spec.dim, cone2.spec.dim
    if n1 != n2:
        raise DimensionMismatchError(
            f"cones live on different ambient spaces ({n1} vs {n2})"
        )
    if s.dim != n1:
        raise DimensionMismatchError("affine set does not match the ambient space")
    spec = al.AlgebraSpec(cone1.spec.blocks + cone2.spec.blocks)
    cone = ConeHandle(spec, cone1.polyhedral_mask + cone2.polyhedral_mask)
    m = s.A.shape[0]
    a_hat = np.zeros((m + n1, 2 * n1))
    if m:
        a_hat[:m, :n1] = s.A
    a_hat[m:, :n1] = np.eye(n1)
    a_hat[m:, n1:] = -np.eye(n1)
    b_hat = np.concatenate([s.b, np.zeros(n1)])
    return LiftedProblem(cone, make_affine(a_hat, b_hat))


def doubly_nonnegative_problem(n: int, A, b) -> LiftedProblem:
    """Lifted formulation of a doubly-nonnegative feasibility problem.

    The doubly nonnegative cone is the intersection of the positive
    semidefinite matrices with the entrywise-nonnegative symmetric matrices;
    entrywise nonnegativity is invariant under the positive svec scaling,
    so the second factor is an orthant over the same coordinates. The PPS
    chain cap of the lift is n - 1.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    svec_dim = n * (n + 1) // 2
    psd = cone_of(al.make_spec(al.sym_block(n)))
    nonneg = cone_of(al.make_spec(al.orthant_block(svec_dim)))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        A = A.reshape(0, svec_dim)
    if A.shape[1] != svec_dim:
        raise DimensionMismatchError(
            f"expected {svec_dim} columns for S^{n} coordinates, got {A.shape[1]}"
        )
    return intersection_lift(psd, nonneg, make_affine(A, b))
