import numpy as np
import pytest

from facered import algebra as al
from facered.errors import (
    DimensionMismatchError,
    DomainError,
    InvalidFaceError,
    SingularElementError,
)

from util import all_block_specs, eig2x2, random_element


def test_spec_dimensions_and_ranks():
    spec = al.make_spec(al.sym_block(3), al.spin_block(4), al.orthant_block(2))
    assert spec.dim == 6 + 4 + 2
    assert spec.rank == 3 + 2 + 2
    assert al.trace(al.identity(spec)) == pytest.approx(spec.rank)


def test_svec_roundtrip_and_inner_product():
    rng = np.random.default_rng(0)
    for n in (2, 3, 5):
        m = rng.standard_normal((n, n))
        m = m + m.T
        assert np.allclose(al.smat(al.svec(m)), m)
        m2 = rng.standard_normal((n, n))
        m2 = m2 + m2.T
        assert np.dot(al.svec(m), al.svec(m2)) == pytest.approx(np.trace(m @ m2))


def test_jordan_product_orthant_componentwise():
    spec = al.make_spec(al.orthant_block(2))
    x = al.element(spec, [1.0, 2.0])
    y = al.element(spec, [3.0, 4.0])
    assert np.allclose(al.jordan_product(x, y).coords, [3.0, 8.0])


def test_identity_element():
    rng = np.random.default_rng(1)
    for spec in all_block_specs():
        e = al.identity(spec)
        x = random_element(spec, rng)
        assert al.norm(al.jordan_product(e, x) - x) <= 1e-14 * max(1.0, al.norm(x))


def test_jordan_product_sym_2x2_oracle():
    # X = [[0,1],[1,0]], Y = [[1,0],[0,-1]] -> (XY + YX)/2 = 0
    spec = al.make_spec(al.sym_block(2))
    x = al.element(spec, al.svec(np.array([[0.0, 1.0], [1.0, 0.0]])))
    y = al.element(spec, al.svec(np.diag([1.0, -1.0])))
    assert al.norm(al.jordan_product(x, y)) <= 1e-15
    # random check against direct matrix arithmetic
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.standard_normal((2, 2))
        a = a + a.T
        b = rng.standard_normal((2, 2))
        b = b + b.T
        lhs = al.smat(
            al.jordan_product(
                al.element(spec, al.svec(a)), al.element(spec, al.svec(b))
            ).block(0)
        )
        assert np.allclose(lhs, (a @ b + b @ a) / 2.0)


def test_jordan_product_spec_mismatch():
    x = al.element(al.make_spec(al.orthant_block(2)), [1.0, 2.0])
    y = al.element(al.make_spec(al.orthant_block(3)), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatchError):
        al.jordan_product(x, y)


def test_nan_rejected():
    spec = al.make_spec(al.orthant_block(2))
    with pytest.raises(DomainError):
        al.element(spec, [np.nan, 0.0])


def test_jordan_axioms_random():
    rng = np.random.default_rng(3)
    for spec in all_block_specs():
        for _ in range(60):
            x = random_element(spec, rng)
            y = random_element(spec, rng)
            z = random_element(spec, rng)
            scale = al.norm(x) * al.norm(y) + 1.0
            assert (
                al.norm(al.jordan_product(x, y) - al.jordan_product(y, x))
                <= 1e-10 * scale
            )
            x2 = al.jordan_product(x, x)
            lhs = al.jordan_product(x, al.jordan_product(x2, y))
            rhs = al.jordan_product(x2, al.jordan_product(x, y))
            assert al.norm(lhs - rhs) <= 1e-10 * (al.norm(x) ** 3 * al.norm(y) + 1.0)
            assoc = al.inner(al.jordan_product(x, y), z) - al.inner(
                x, al.jordan_product(y, z)
            )
            assert abs(assoc) <= 1e-10 * (al.norm(x) * al.norm(y) * al.norm(z) + 1.0)


def test_spectral_orthant_example():
    spec = al.make_spec(al.orthant_block(2))
    dec = al.spectral(al.element(spec, [3.0, -1.0]))
    assert np.allclose(dec.eigenvalues, [3.0, -1.0])
    idems = dec.blocks[0].idempotents
    assert np.allclose(idems[0], [1.0, 0.0])
    assert np.allclose(idems[1], [0.0, 1.0])


def test_spectral_spin_example():
    # x = (1, (1, 0)) -> eigenvalues (2, 0), idempotents (1, (+-1, 0))/2
    spec = al.make_spec(al.spin_block(3))
    x = al.element(spec, al.spin_canonical(1.0, np.array([1.0, 0.0])))
    dec = al.spectral(x)
    assert np.allclose(dec.eigenvalues, [2.0, 0.0])
    for lam, c, _ in dec.pairs():
        assert al.norm(al.jordan_product(c, c) - c) <= 1e-14
        assert al.norm(c) == pytest.approx(1.0)
    assert al.norm(dec.reconstruct() - x) <= 1e-14


def test_spectral_sym_2x2_oracle():
    spec = al.make_spec(al.sym_block(2))
    x = al.element(spec, al.svec(np.array([[0.0, 1.0], [1.0, 0.0]])))
    dec = al.spectral(x)
    assert np.allclose(dec.eigenvalues, [1.0, -1.0])
    rng = np.random.default_rng(4)
    for _ in range(100):
        a, b, c = rng.standard_normal(3)
        elem = al.element(spec, al.svec(np.array([[a, b], [b, c]])))
        (l1, _), (l2, _) = eig2x2(a, b, c)
        assert np.allclose(al.spectral(elem).eigenvalues, [l1, l2], atol=1e-12)


def test_spectral_invariants_random():
    rng = np.random.default_rng(5)
    for spec in all_block_specs():
        for _ in range(100):
            x = random_element(spec, rng)
            dec = al.spectral(x)
            assert al.norm(dec.reconstruct() - x) <= 1e-9 * max(1.0, al.norm(x))
            pairs = list(dec.pairs())
            for i, (_, ci, bi) in enumerate(pairs):
                assert abs(al.norm(ci) - 1.0) <= 1e-9
                for j, (_, cj, bj) in enumerate(pairs):
                    if i < j and bi == bj:
                        assert al.norm(al.jordan_product(ci, cj)) <= 1e-9
            total = al.zero(spec)
            for _, ci, _ in pairs:
                total = total + ci
            assert al.norm(total - al.identity(spec)) <= 1e-9
            # eigenvalues descending per block
            for bs in dec.blocks:
                assert np.all(np.diff(bs.eigenvalues) <= 1e-12)


def test_spin_degenerate_frame_is_deterministic():
    spec = al.make_spec(al.spin_block(4))
    x = al.element(spec, al.spin_canonical(2.0, np.zeros(3)))
    dec = al.spectral(x)
    c_plus = dec.blocks[0].idempotents[0]
    assert np.allclose(c_plus, al.spin_canonical(0.5, np.array([0.5, 0.0, 0.0])))


def test_quadratic_apply():
    rng = np.random.default_rng(6)
    for spec in all_block_specs():
        x = random_element(spec, rng)
        e = al.identity(spec)
        assert al.norm(
            al.quadratic_apply(x, e) - al.jordan_product(x, x)
        ) <= 1e-12 * max(1.0, al.norm(x) ** 2)
    o = al.make_spec(al.orthant_block(2))
    q = al.quadratic_apply(al.element(o, [2.0, 3.0]), al.element(o, [1.0, 1.0]))
    assert np.allclose(q.coords, [4.0, 9.0])
    s2 = al.make_spec(al.sym_block(2))
    x = al.element(s2, al.svec(np.ones((2, 2))))
    y = al.element(s2, al.svec(np.diag([1.0, 0.0])))
    assert np.allclose(al.smat(al.quadratic_apply(x, y).block(0)), np.ones((2, 2)))


def test_peirce_split_examples_and_invariants():
    spec = al.make_spec(al.sym_block(2))
    c = al.face(al.element(spec, al.svec(np.diag([1.0, 0.0]))))
    x = al.element(spec, al.svec(np.array([[1.0, 2.0], [2.0, 3.0]])))
    x1, x2, x3 = al.peirce_split(c, x)
    assert np.allclose(al.smat(x1.block(0)), np.diag([1.0, 0.0]))
    assert np.allclose(al.smat(x2.block(0)), np.array([[0.0, 2.0], [2.0, 0.0]]))
    assert np.allclose(al.smat(x3.block(0)), np.diag([0.0, 3.0]))

    e = al.face_identity(spec)
    xe = al.peirce_split(e, x)
    assert al.norm(xe[0] - x) <= 1e-14 and al.norm(xe[1]) <= 1e-14
    zf = al.peirce_split(al.face_zero(spec), x)
    assert al.norm(zf[2] - x) <= 1e-14 and al.norm(zf[0]) <= 1e-14

    rng = np.random.default_rng(7)
    for spec in all_block_specs():
        frame = [c for _, c, _ in al.spectral(random_element(spec, rng)).pairs()]
        k = max(1, len(frame) // 2)
        cdesc = al.face(sum(frame[1:k], frame[0] * 1.0))
        x = random_element(spec, rng)
        x1, x2, x3 = al.peirce_split(cdesc, x)
        assert abs(al.inner(x1, x2)) <= 1e-10
        assert abs(al.inner(x1, x3)) <= 1e-10
        assert abs(al.inner(x2, x3)) <= 1e-10
        assert al.norm(al.jordan_product(cdesc.c, x1) - x1) <= 1e-9
        assert al.norm(al.jordan_product(cdesc.c, x2) - 0.5 * x2) <= 1e-9
        assert al.norm(al.jordan_product(cdesc.c, x3)) <= 1e-9


def test_peirce_half_space_products():
    # products of V(c,1/2) elements stay in V(c,1) + V(c,0)
    rng = np.random.default_rng(8)
    for spec in all_block_specs():
        e = al.identity(spec)
        frame = [c for _, c, _ in al.spectral(random_element(spec, rng)).pairs()]
        k = max(1, len(frame) // 2)
        cdesc = al.face(sum(frame[1:k], frame[0] * 1.0))
        for _ in range(50):
            u = random_element(spec, rng)
            v = random_element(spec, rng)
            uh = u - al.quadratic_apply(cdesc.c, u) - al.quadratic_apply(e - cdesc.c, u)
            vh = v - al.quadratic_apply(cdesc.c, v) - al.quadratic_apply(e - cdesc.c, v)
            prod = al.jordan_product(uh, vh)
            leak = prod - al.quadratic_apply(cdesc.c, prod) - al.quadratic_apply(
                e - cdesc.c, prod
            )
            assert al.norm(leak) <= 1e-9 * max(1.0, al.norm(uh) * al.norm(vh))


def test_half_peirce_trace_split():
    # tr(w0) = tr(w1) = tr(w^2)/2 for w in V(c,1/2)
    rng = np.random.default_rng(9)
    for spec in all_block_specs():
        e = al.identity(spec)
        frame = [c for _, c, _ in al.spectral(random_element(spec, rng)).pairs()]
        k = max(1, len(frame) // 2)
        cdesc = al.face(sum(frame[1:k], frame[0] * 1.0))
        for _ in range(50):
            w = random_element(spec, rng)
            w = w - al.quadratic_apply(cdesc.c, w) - al.quadratic_apply(e - cdesc.c, w)
            if al.norm(w) < 1e-12:
                continue
            w2 = al.jordan_product(w, w)
            w1, wh, w0 = al.peirce_split(cdesc, w2)
            assert al.norm(wh) <= 1e-9 * max(1.0, al.norm(w2))
            tr2 = al.trace(w2)
            assert abs(al.trace(w0) - tr2 / 2.0) <= 1e-9 * max(1.0, abs(tr2))
            assert abs(al.trace(w1) - tr2 / 2.0) <= 1e-9 * max(1.0, abs(tr2))


def test_face_descriptor_validation():
    spec = al.make_spec(al.sym_block(2))
    with pytest.raises(InvalidFaceError):
        al.face(al.element(spec, al.svec(np.diag([0.5, 0.0]))))
    c = al.face(al.element(spec, al.svec(np.diag([1.0, 0.0]))))
    assert c.block_ranks == (1,)
    assert al.face_identity(spec).rank == 2
    assert al.face_zero(spec).rank == 0


def test_inverse_in_face():
    spec = al.make_spec(al.orthant_block(2))
    e = al.face_identity(spec)
    inv = al.inverse_in_face(e, al.element(spec, [2.0, 4.0]))
    assert np.allclose(inv.coords, [0.5, 0.25])

    s2 = al.make_spec(al.sym_block(2))
    e2 = al.face_identity(s2)
    inv2 = al.inverse_in_face(e2, al.element(s2, al.svec(np.diag([2.0, 1.0]))))
    assert np.allclose(al.smat(inv2.block(0)), np.diag([0.5, 1.0]))

    # x = c is the identity of V(c,1)
    c = al.face(al.element(s2, al.svec(np.diag([1.0, 0.0]))))
    assert al.norm(al.inverse_in_face(c, c.c) - c.c) <= 1e-12

    # singular element
    with pytest.raises(SingularElementError):
        al.inverse_in_face(e2, al.element(s2, al.svec(np.diag([1.0, 0.0]))))
    # outside the subalgebra
    with pytest.raises(DomainError):
        al.inverse_in_face(c, al.element(s2, al.svec(np.diag([0.0, 1.0]))))

    # x o inverse = c on random faces
    rng = np.random.default_rng(10)
    for spec in all_block_specs():
        frame = [cc for _, cc, _ in al.spectral(random_element(spec, rng)).pairs()]
        k = max(1, len(frame) - 1)
        cdesc = al.face(sum(frame[1:k], frame[0] * 1.0))
        x = al.quadratic_apply(cdesc.c, random_element(spec, rng))
        x = al.jordan_product(x, x) + 0.1 * cdesc.c  # interior of the face
        inv = al.inverse_in_face(cdesc, x)
        assert al.norm(al.jordan_product(x, inv) - cdesc.c) <= 1e-8


def test_schur_complement_examples():
    s2 = al.make_spec(al.sym_block(2))
    c = al.face(al.element(s2, al.svec(np.diag([1.0, 0.0]))))
    x = al.element(s2, al.svec(np.array([[2.0, 1.0], [1.0, 1.0]])))
    out = al.schur_complement(c, x)
    assert np.allclose(al.smat(out.block(0)), np.diag([1.0, 0.0]), atol=1e-12)

    s3 = al.make_spec(al.sym_block(3))
    c3 = al.face(al.element(s3, al.svec(np.diag([1.0, 1.0, 0.0]))))
    out3 = al.schur_complement(c3, al.element(s3, al.svec(np.eye(3))))
    assert np.allclose(al.smat(out3.block(0)), np.diag([1.0, 1.0, 0.0]), atol=1e-12)

    with pytest.raises(SingularElementError):
        al.schur_complement(c, al.element(s2, al.svec(np.diag([1.0, 0.0]))))


def test_schur_complement_interior_criterion():
    # x in ri K iff the Schur complement is in ri F (checked on samples)
    rng = np.random.default_rng(11)
    s3 = al.make_spec(al.sym_block(3))
    c = al.face(al.element(s3, al.svec(np.diag([1.0, 1.0, 0.0]))))
    for _ in range(50):
        m = rng.standard_normal((3, 3))
        x = al.element(s3, al.svec(m @ m.T + 0.05 * np.eye(3)))
        out = al.schur_complement(c, x)
        reduced = al.smat(out.block(0))[:2, :2]
        assert np.linalg.eigvalsh(reduced).min() > 0
