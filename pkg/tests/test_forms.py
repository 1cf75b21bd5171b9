"""Pointwise exterior algebra and G2 metric tests."""

import math
from fractions import Fraction

import numpy as np
import pytest

from g2glue import forms
from g2glue.forms import (
    AXES6,
    AXES7,
    ConstForm,
    KForm6,
    KForm7,
    NotStable,
    Omega0,
    assemble_cylindrical,
    basis_indices,
    gram_from_3form,
    hodge_star,
    is_g2_form,
    metric_from_3form,
    omega0,
    phi0,
    split_cylindrical,
    su3_tangent_residual,
)

RNG = np.random.default_rng(20240817)


def random_form(axes, degree, rng=RNG, scale=1.0):
    vec = scale * rng.standard_normal(len(basis_indices(axes, degree)))
    return ConstForm.fromvector(axes, degree, vec)


def random_spd(n, rng=RNG):
    m = rng.standard_normal((n, n))
    return m @ m.T + n * np.eye(n)


# -- wedge / contraction basics -------------------------------------------

def test_wedge_signs():
    a = KForm7(1, {(1,): 1.0})
    b = KForm7(1, {(2,): 1.0})
    assert a.wedge(b).coeffs == {(1, 2): 1.0}
    assert b.wedge(a).coeffs == {(1, 2): -1.0}
    assert not a.wedge(a).coeffs


def test_wedge_graded_commutativity():
    for ka, kb in [(1, 2), (2, 2), (2, 3), (3, 3), (1, 3)]:
        a = random_form(AXES7, ka)
        b = random_form(AXES7, kb)
        lhs = a.wedge(b)
        rhs = b.wedge(a).scale((-1.0) ** (ka * kb))
        diff = lhs - rhs
        assert diff.norm() < 1e-12


def test_wedge_associativity():
    a, b, c = (random_form(AXES7, k) for k in (1, 2, 3))
    assert (a.wedge(b).wedge(c) - a.wedge(b.wedge(c))).norm() < 1e-12


def test_contraction_antiderivation():
    # i_v(a ^ b) = (i_v a) ^ b + (-1)^deg(a) a ^ (i_v b)
    a = random_form(AXES7, 2)
    b = random_form(AXES7, 3)
    for ax in (1, 4, 7):
        lhs = a.wedge(b).contract(ax)
        rhs = a.contract(ax).wedge(b) + a.wedge(b.contract(ax)).scale((-1.0) ** 2)
        assert (lhs - rhs).norm() < 1e-12


def test_pullback_functorial():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((7, 7))
    b = rng.standard_normal((7, 7))
    f = random_form(AXES7, 3, rng)
    # (AB)* f = B* (A* f)
    lhs = f.pullback(a @ b)
    rhs = f.pullback(a).pullback(b)
    assert (lhs - rhs).norm() < 1e-9 * max(1.0, lhs.norm())


def test_pullback_respects_wedge():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((7, 7))
    f = random_form(AXES7, 2, rng)
    g = random_form(AXES7, 1, rng)
    lhs = f.wedge(g).pullback(a)
    rhs = f.pullback(a).wedge(g.pullback(a))
    assert (lhs - rhs).norm() < 1e-10 * max(1.0, lhs.norm())


# -- model form and calibration -------------------------------------------

def test_gram_phi0_exact():
    b = gram_from_3form(phi0(exact=True))
    for i in range(7):
        for j in range(7):
            assert b[i, j] == (6 if i == j else 0)


def test_metric_phi0_exact_identity():
    g = metric_from_3form(phi0(exact=True))
    assert g.mat.dtype == object
    for i in range(7):
        for j in range(7):
            assert g.mat[i, j] == (1 if i == j else 0)


def test_metric_scaling_exact():
    # coefficient scale lambda^3 gives metric scale lambda^2, exactly
    for lam in (Fraction(1, 2), Fraction(2), Fraction(3, 5)):
        g = metric_from_3form(phi0(exact=True).scale(lam ** 3))
        for i in range(7):
            for j in range(7):
                assert g.mat[i, j] == (lam ** 2 if i == j else 0)


def test_star_phi0_expansion():
    g = metric_from_3form(phi0())
    sp = hodge_star(g, phi0())
    want = {(2, 3, 4, 5): 1.0, (2, 3, 6, 7): 1.0, (4, 5, 6, 7): 1.0,
            (1, 3, 5, 7): 1.0, (1, 2, 4, 7): -1.0, (1, 2, 5, 6): -1.0,
            (1, 3, 4, 6): -1.0}
    assert set(sp.coeffs) == set(want)
    for idx, c in want.items():
        assert abs(sp.coeffs[idx] - c) < 1e-14


def test_phi_wedge_star_phi():
    g = metric_from_3form(phi0())
    sp = hodge_star(g, phi0())
    top = phi0().wedge(sp)
    assert abs(top.coeffs[AXES7] - 7.0) < 1e-12


def test_gram_pullback_equivariance():
    rng = np.random.default_rng(99)
    p = phi0()
    b0 = gram_from_3form(p)
    for _ in range(100):
        a = rng.standard_normal((7, 7))
        if abs(np.linalg.det(a)) < 1e-3:
            continue
        b = gram_from_3form(p.pullback(a))
        want = np.linalg.det(a) * a.T @ b0 @ a
        assert np.abs(b - want).max() <= 1e-9 * np.abs(want).max()


def test_metric_pullback_gives_ata():
    rng = np.random.default_rng(5)
    for _ in range(25):
        a = rng.standard_normal((7, 7))
        if abs(np.linalg.det(a)) < 1e-2:
            continue
        g = metric_from_3form(phi0().pullback(a))
        want = a.T @ a
        assert np.abs(np.asarray(g.mat, dtype=float) - want).max() < 1e-9 * np.abs(want).max()


def test_degenerate_form_rejected():
    with pytest.raises(NotStable):
        metric_from_3form(KForm7(3, {(1, 2, 3): 1.0}))
    assert not is_g2_form(KForm7(3, {(1, 2, 3): 1.0}))


def test_stability_open():
    rng = np.random.default_rng(11)
    pert = random_form(AXES7, 3, rng, scale=1e-3)
    assert is_g2_form(phi0() + pert)


# -- Hodge star ------------------------------------------------------------

@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 6, 7])
def test_double_star_identity(degree):
    rng = np.random.default_rng(degree)
    for _ in range(5):
        g = random_spd(7, rng)
        al = random_form(AXES7, degree, rng)
        ss = hodge_star(g, hodge_star(g, al))
        assert (ss - al).norm() < 1e-10 * max(1.0, al.norm())


def test_star_defining_property():
    # a ^ *b == <a, b>_g vol_g, with the pairing computed from minors
    rng = np.random.default_rng(3)
    g = random_spd(7, rng)
    ginv = np.linalg.inv(g)
    a = random_form(AXES7, 3, rng)
    b = random_form(AXES7, 3, rng)
    pairing = 0.0
    for ia, ca in a.coeffs.items():
        for ib, cb in b.coeffs.items():
            rows = [i - 1 for i in ia]
            cols = [i - 1 for i in ib]
            pairing += ca * cb * np.linalg.det(ginv[np.ix_(rows, cols)])
    lhs = a.wedge(hodge_star(g, b)).coeffs.get(AXES7, 0.0)
    want = pairing * math.sqrt(np.linalg.det(g))
    assert abs(lhs - want) < 1e-10 * max(1.0, abs(want))


def test_star_exact_at_identity():
    g = metric_from_3form(phi0(exact=True))
    w = random_form(AXES7, 2)
    exact_w = ConstForm(AXES7, 2, {i: Fraction(str(round(c, 3))) for i, c in w.coeffs.items()})
    ss = hodge_star(g, hodge_star(g, exact_w))
    assert ss.coeffs == exact_w.coeffs  # Fraction arithmetic all the way


# -- cylindrical splitting -------------------------------------------------

def test_split_assemble_roundtrip():
    for sign in (1, -1):
        big, small = split_cylindrical(phi0(), sign)
        back = assemble_cylindrical(big, small, sign)
        assert (back - phi0()).norm() < 1e-15


def test_split_phi0_model_pieces():
    big, small = split_cylindrical(phi0(), 1)
    assert (big - Omega0()).norm() < 1e-15
    assert (small - omega0()).norm() < 1e-15


def test_split_sign_flip():
    phi_minus = assemble_cylindrical(Omega0(), omega0(), -1)
    big, small = split_cylindrical(phi_minus, -1)
    assert (small - omega0()).norm() < 1e-15


# -- SU(3) tangent relations ----------------------------------------------

def test_su3_residual_zero_tangent():
    r1, r2 = su3_tangent_residual(Omega0(), omega0(), KForm6(3), KForm6(2))
    assert r1 == 0.0 and r2 == 0.0


def test_su3_residual_omega_direction():
    # (sigma, tau) = (0, omega0) violates the volume-matching relation:
    # tau ^ omega^2 = omega^3 = 6 vol
    r1, r2 = su3_tangent_residual(Omega0(), omega0(), KForm6(3), omega0())
    assert abs(r1 - 6.0) < 1e-10
    # Omega0 ^ omega0 = 0, so the 5-form relation is untouched
    assert r2 < 1e-12


def test_su3_kernel_via_nullspace():
    # build the joint linear map (sigma, tau) -> (r1 coefficient, 5-form)
    # and check su3_tangent_residual vanishes along its numeric kernel
    big, small = Omega0(), omega0()
    n3 = len(basis_indices(AXES6, 3))
    n2 = len(basis_indices(AXES6, 2))
    cols = []
    for j in range(n3 + n2):
        sv = np.zeros(n3)
        tv = np.zeros(n2)
        if j < n3:
            sv[j] = 1.0
        else:
            tv[j - n3] = 1.0
        sigma = ConstForm.fromvector(AXES6, 3, sv)
        tau = ConstForm.fromvector(AXES6, 2, tv)
        g6 = np.eye(6)
        six = sigma.wedge(hodge_star(g6, big)) - tau.wedge(small).wedge(small)
        five = sigma.wedge(small) + big.wedge(tau)
        col = [six.coeffs.get(AXES6, 0.0)]
        col += [five.coeffs.get(i, 0.0) for i in basis_indices(AXES6, 5)]
        cols.append(col)
    mat = np.array(cols).T
    _, s, vt = np.linalg.svd(mat)
    kernel = vt[(s < 1e-10).sum() * 0 + (s > 1e-10).sum():]
    assert kernel.shape[0] == (n3 + n2) - np.linalg.matrix_rank(mat)
    rng = np.random.default_rng(17)
    mix = kernel.T @ rng.standard_normal(kernel.shape[0])
    sigma = ConstForm.fromvector(AXES6, 3, mix[:n3])
    tau = ConstForm.fromvector(AXES6, 2, mix[n3:])
    r1, r2 = su3_tangent_residual(big, small, sigma, tau)
    assert r1 < 1e-10 and r2 < 1e-10


def test_su3_rejects_degenerate_structure():
    with pytest.raises(NotStable):
        su3_tangent_residual(Omega0(), KForm6(2), KForm6(3), KForm6(2))


def test_reversed_orientation_still_stable():
    # Omega0 - dt ^ omega0 is the mirror-image structure; its induced
    # metric is still the identity thanks to the signed ninth root
    phi_minus = assemble_cylindrical(Omega0(), omega0(), -1)
    g = metric_from_3form(phi_minus)
    assert np.abs(np.asarray(g.mat, dtype=float) - np.eye(7)).max() < 1e-12
