import math

import numpy as np
import pytest

from facered import algebra as al
from facered import affine as af
from facered import bounds as bd
from facered import conegeom as cg
from facered import harness as hn
from facered import reduction as rd
from facered.errors import (
    CertificateUnavailableError,
    DimensionMismatchError,
    DomainError,
)


def test_frf_symmetric_examples():
    f = bd.frf_symmetric(1.0)
    assert f.value(1.0, 1.0) == pytest.approx(2.0)
    assert f.value(0.0, 1e6) == 0.0
    assert bd.frf_symmetric(2.0).value(0.25, 4.0) == pytest.approx(2.5)
    with pytest.raises(DomainError):
        bd.frf_symmetric(0.0)


def test_frf_polyhedral_examples():
    assert bd.frf_polyhedral(1.0).value(0.5, 100.0) == pytest.approx(0.5)
    assert bd.frf_polyhedral(3.0).value(2.0, 0.0) == pytest.approx(6.0)
    with pytest.raises(DomainError):
        bd.frf_polyhedral(-1.0)


def test_frf_sum():
    a = bd.frf_symmetric(1.0)
    b = bd.frf_polyhedral(1.0)
    merged = bd.frf_sum(a, b)
    assert set(merged.terms) == {(2.0, 1.0, 0.0), (1.0, 0.5, 0.5)}
    # summing with an empty term list is the identity
    assert bd.frf_sum(a, bd.ResidualFunction(())).terms == tuple(
        sorted(a.terms, reverse=True)
    )
    # commutativity
    assert bd.frf_sum(b, a).terms == merged.terms
    # like-term grouping of two symmetric FRFs
    s = bd.frf_sum(bd.frf_symmetric(1.0), bd.frf_symmetric(2.0))
    assert set(s.terms) == set(bd.frf_symmetric(3.0).terms)


def test_frf_monotonicity_and_zero_axis():
    rng = np.random.default_rng(0)
    for f in (bd.frf_symmetric(1.7), bd.frf_polyhedral(0.4),
              bd.frf_sum(bd.frf_symmetric(0.3), bd.frf_polyhedral(2.0))):
        for t in np.logspace(-3, 3, 13):
            assert f.value(0.0, t) == 0.0
        prev = -1.0
        for eps in np.logspace(-8, 1, 20):
            v = f.value(eps, 1.0)
            assert v >= prev
            prev = v
        prev = -1.0
        for t in np.logspace(-3, 3, 20):
            v = f.value(0.1, t)
            assert v >= prev
            prev = v
        with pytest.raises(DomainError):
            f.value(-1.0, 1.0)


def test_diamond_eval_examples():
    psi = bd.frf_symmetric(1.0)
    # phi = 0 everywhere
    assert bd.diamond_eval(psi, lambda e, t: 0.0, 1.0, 1.0) == pytest.approx(2.0)
    # (psi <> psi)(1,1) = psi(1 + 2, 1) = 3 + sqrt(3), exact to 1e-12
    v = bd.diamond_eval(psi, psi.value, 1.0, 1.0)
    assert abs(v - (3.0 + math.sqrt(3.0))) <= 1e-12
    assert bd.diamond_chain_eval([psi, psi], 1.0, 1.0) == pytest.approx(v)
    # eps = 0 gives 0
    assert bd.diamond_eval(psi, psi.value, 0.0, 5.0) == 0.0
    with pytest.raises(DomainError):
        bd.diamond_eval(psi, psi.value, -1.0, 1.0)


def test_closed_form_bound_shapes():
    single = bd.closed_form_bound([bd.frf_symmetric(1.0)])
    assert set(single.terms) == {(1.0, 1.0, 0.0), (1.0, 0.5, 0.5)}
    double = bd.closed_form_bound([bd.frf_symmetric(1.0), bd.frf_symmetric(1.0)])
    assert set(double.terms) == {(3.0, 1.0, 0.0), (3.0, 0.5, 0.5), (3.0, 0.25, 0.75)}
    # polyhedral steps keep the ladder depth
    mixed = bd.closed_form_bound([bd.frf_polyhedral(1.0), bd.frf_polyhedral(2.0)])
    assert set(mixed.terms) == {(4.0, 1.0, 0.0)}
    with pytest.raises(DomainError):
        bd.closed_form_bound([bd.ResidualFunction(((1.0, 0.5, 0.0),))])


def test_closed_form_dominates_diamond():
    rng = np.random.default_rng(1)
    eps_grid = np.logspace(-8, 0, 20)
    t_grid = np.logspace(-2, 2, 20)
    for length in range(1, 6):
        kappas = rng.uniform(0.5, 2.0, size=length)
        frfs = [bd.frf_symmetric(k) for k in kappas]
        cf = bd.closed_form_bound(frfs)
        for eps in eps_grid:
            for t in t_grid:
                assert cf.value(eps, t) >= bd.diamond_chain_eval(frfs, eps, t) * (
                    1.0 - 1e-12
                )


def test_make_certificate():
    cone, s = hn.sturm_family(3)
    chain = rd.run_facial_reduction(cone, s, "pps")
    cert = bd.make_certificate(chain, cone=cone)
    assert cert.d == 2
    assert cert.gamma == pytest.approx(0.25)
    assert {(p, q) for _, p, q in cert.phi.terms} == {
        (1.0, 0.0),
        (0.5, 0.5),
        (0.25, 0.75),
    }
    assert cert.caps.dim_w == 2 and cert.caps.rank_cap == 2
    text = bd.certificate_to_text(cert)
    assert "gamma=0.25" in text and "d=2" in text

    # d = 0 certificate is linear with gamma 1
    spec = al.make_spec(al.sym_block(2))
    cone0 = cg.cone_of(spec)
    chain0 = rd.run_facial_reduction(cone0, af.make_affine(np.zeros((0, 3)), np.zeros(0)))
    cert0 = bd.make_certificate(chain0, cone=cone0)
    assert cert0.gamma == 1.0
    assert cert0.phi.value(0.3, 100.0) == pytest.approx(0.3)

    # unregularized chains cannot be certified
    fake = rd.ReductionChain(
        mode="pps",
        faces=chain.faces,
        directions=chain.directions,
        cq_reached=False,
        step_cap_hit=True,
        dim_w=2,
        rank_cap=2,
    )
    with pytest.raises(CertificateUnavailableError):
        bd.make_certificate(fake, cone=cone)


def test_intersection_lift_geometry():
    lifted = bd.doubly_nonnegative_problem(2, np.zeros((0, 3)), np.zeros(0))
    assert [b.kind for b in lifted.cone.spec.blocks] == [al.SYM, al.ORTHANT]
    assert lifted.affine.A.shape == (3, 6)
    assert lifted.inflate == pytest.approx(math.sqrt(2.0))
    # a nonnegative PSD matrix lifts to a feasible point
    m = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = al.svec(m)
    lifted_x = lifted.lift_point(x)
    from facered.affine import project_affine

    _, dist_a = project_affine(lifted.affine, lifted_x)
    assert dist_a <= 1e-12
    elem = al.element(lifted.cone.spec, lifted_x)
    assert cg.lambda_min(elem) >= 0.0

    with pytest.raises(DimensionMismatchError):
        bd.intersection_lift(
            cg.cone_of(al.make_spec(al.sym_block(2))),
            cg.cone_of(al.make_spec(al.orthant_block(2))),
            af.make_affine(np.zeros((0, 3)), np.zeros(0)),
        )


def test_product_distance_identity():
    # dist((x1,x2), C1 x C2)^2 = dist(x1,C1)^2 + dist(x2,C2)^2
    rng = np.random.default_rng(2)
    spec1 = al.make_spec(al.sym_block(2))
    spec2 = al.make_spec(al.orthant_block(3))
    product = al.make_spec(al.sym_block(2), al.orthant_block(3))
    for _ in range(200):
        x1 = rng.standard_normal(3)
        x2 = rng.standard_normal(3)
        d1 = cg.project_cone(al.element(spec1, x1))[1]
        d2 = cg.project_cone(al.element(spec2, x2))[1]
        dp = cg.project_cone(al.element(product, np.concatenate([x1, x2])))[1]
        assert dp**2 == pytest.approx(d1**2 + d2**2, abs=1e-10)


def test_dnn_certificate_cap():
    for n in (2, 3):
        _, base = hn.sturm_family(n)
        lifted = bd.doubly_nonnegative_problem(n, base.A, base.b)
        chain = rd.run_facial_reduction(lifted.cone, lifted.affine, "pps")
        assert chain.cq_reached
        cert = bd.make_certificate(chain, cone=lifted.cone)
        assert cert.d <= n - 1
        assert cert.gamma >= 2.0 ** (1 - n)
