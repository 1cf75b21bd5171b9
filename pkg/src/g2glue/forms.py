"""Constant-coefficient exterior algebra on R^7 and the G2 pointwise calculus.

Conventions used throughout the package:

  * coordinates are x^1 .. x^7; x^1 is the cylinder coordinate t and
    x^2 .. x^7 span the 6-torus cross-section,
  * the reference volume form is dx^1 ^ ... ^ dx^7,
  * the model 3-form is

        phi0 = dx^123 + dx^145 + dx^167 + dx^246 - dx^257 - dx^347 - dx^356,

    which splits as Omega0 + dx^1 ^ omega0 with
    omega0 = dx^23 + dx^45 + dx^67 and
    Omega0 = dx^246 - dx^257 - dx^347 - dx^356 (the real part of the
    complex volume form for z1 = x2 + i x3, z2 = x4 + i x5, z3 = x6 + i x7),
  * a 3-form phi induces the symmetric bilinear form

        B_ij * vol = (e_i . phi) ^ (e_j . phi) ^ phi

    (``.`` is contraction) and the candidate metric g = s * B with
    s = KAPPA * det(B)^(-1/9), KAPPA = 36^(-1/9).  The calibration makes
    g(phi0) the identity: B(phi0) = 6 * Id exactly, so s = 1/6 there.

Coefficients may be floats or ``fractions.Fraction``; all structural
operations (wedge, contraction, pullback, the bilinear form B) are exact on
Fraction input, and the metric normalization stays exact whenever
36 * det(B) is the ninth power of a rational, which covers the calibration
checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import ratmat

AXES7 = (1, 2, 3, 4, 5, 6, 7)
AXES6 = (2, 3, 4, 5, 6, 7)

# Calibration constant for the induced metric, fixed so that phi0 gives
# the Euclidean metric.
KAPPA = float(36.0 ** (-1.0 / 9.0))


class NotStable(ValueError):
    """The 3-form does not lie in the open orbit defining a metric."""


@lru_cache(maxsize=None)
def basis_indices(axes: tuple[int, ...], k: int) -> tuple[tuple[int, ...], ...]:
    """Increasing multi-indices of length k drawn from ``axes``."""
    return tuple(itertools.combinations(axes, k))


@lru_cache(maxsize=None)
def basis_position(axes: tuple[int, ...], k: int) -> dict[tuple[int, ...], int]:
    return {idx: p for p, idx in enumerate(basis_indices(axes, k))}


def _merge_sign(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """Sign and sorted index of dx^a ^ dx^b, or (0, ()) if they collide."""
    if set(a) & set(b):
        return 0, ()
    merged = a + b
    order = sorted(range(len(merged)), key=lambda i: merged[i])
    sign = 1
    perm = list(order)
    # count inversions by selection
    for i in range(len(perm)):
        j = perm.index(i)
        if j != i:
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign, tuple(sorted(merged))


class ConstForm:
    """A constant-coefficient k-form over a fixed ordered index set.

    Coefficients are stored sparsely as {increasing multi-index: scalar}.
    Instances are treated as immutable.
    """

    __slots__ = ("axes", "degree", "coeffs")

    def __init__(self, axes: tuple[int, ...], degree: int, coeffs: dict | None = None):
        if not 0 <= degree <= len(axes):
            raise ValueError(f"degree {degree} out of range for {len(axes)} axes")
        self.axes = tuple(axes)
        self.degree = degree
        clean = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or tuple(sorted(idx)) != idx or any(i not in axes for i in idx):
                raise ValueError(f"bad multi-index {idx} for degree {degree}")
            if c != 0:
                clean[idx] = c
        self.coeffs = clean

    # -- ring structure ----------------------------------------------------

    def __add__(self, other: "ConstForm") -> "ConstForm":
        self._check_compatible(other)
        out = dict(self.coeffs)
        for idx, c in other.coeffs.items():
            out[idx] = out.get(idx, 0) + c
        return ConstForm(self.axes, self.degree, out)

    def __sub__(self, other: "ConstForm") -> "ConstForm":
        return self + other.scale(-1)

    def scale(self, s) -> "ConstForm":
        return ConstForm(self.axes, self.degree, {i: s * c for i, c in self.coeffs.items()})

    __rmul__ = scale

    def __neg__(self) -> "ConstForm":
        return self.scale(-1)

    def _check_compatible(self, other: "ConstForm") -> None:
        if self.axes != other.axes or self.degree != other.degree:
            raise ValueError("forms live on different spaces or degrees")

    def __eq__(self, other) -> bool:
        return (isinstance(other, ConstForm) and self.axes == other.axes
                and self.degree == other.degree and self.coeffs == other.coeffs)

    def __repr__(self) -> str:
        if not self.coeffs:
            return f"ConstForm(axes={self.axes}, degree={self.degree}, 0)"
        terms = " + ".join(f"{c}*dx^{''.join(map(str, i))}" for i, c in sorted(self.coeffs.items()))
        return f"ConstForm({terms})"

    # -- exterior operations ----------------------------------------------

    def wedge(self, other: "ConstForm") -> "ConstForm":
        if self.axes != other.axes:
            raise ValueError("forms live on different spaces")
        out: dict = {}
        for ia, ca in self.coeffs.items():
            for ib, cb in other.coeffs.items():
                sign, idx = _merge_sign(ia, ib)
                if sign:
                    out[idx] = out.get(idx, 0) + sign * ca * cb
        return ConstForm(self.axes, self.degree + other.degree, out)

    def contract(self, axis: int) -> "ConstForm":
        """Interior product with the coordinate vector e_axis."""
        out: dict = {}
        for idx, c in self.coeffs.items():
            if axis in idx:
                p = idx.index(axis)
                rest = idx[:p] + idx[p + 1:]
                out[rest] = out.get(rest, 0) + ((-1) ** p) * c
        return ConstForm(self.axes, self.degree - 1, out)

    def pullback(self, a: np.ndarray) -> "ConstForm":
        """Pullback under the linear map with matrix ``a`` in these axes.

        (A* alpha)(v_1, .., v_k) = alpha(A v_1, .., A v_k), so the new
        coefficient on dx^J is sum_I alpha_I det(A[I, J]).
        """
        n = len(self.axes)
        a = np.asarray(a)
        if a.shape != (n, n):
            raise ValueError(f"matrix must be {n}x{n}")
        pos = {ax: i for i, ax in enumerate(self.axes)}
        exact = a.dtype == object
        out: dict = {}
        for jdx in basis_indices(self.axes, self.degree):
            cols = [pos[j] for j in jdx]
            acc = None
            for idx, c in self.coeffs.items():
                rows = [pos[i] for i in idx]
                sub = a[np.ix_(rows, cols)]
                d = ratmat.det(sub) if exact else np.linalg.det(sub.astype(float))
                term = c * d
                acc = term if acc is None else acc + term
            if acc is not None and acc != 0:
                out[jdx] = acc
        return ConstForm(self.axes, self.degree, out)

    # -- coefficient vector bridge ----------------------------------------

    def tovector(self, dtype=float) -> np.ndarray:
        idx = basis_indices(self.axes, self.degree)
        if dtype is object:
            v = np.empty(len(idx), dtype=object)
            for p, i in enumerate(idx):
                v[p] = self.coeffs.get(i, 0)
            return v
        v = np.zeros(len(idx), dtype=dtype)
        for p, i in enumerate(idx):
            v[p] = self.coeffs.get(i, 0.0)
        return v

    @classmethod
    def fromvector(cls, axes: tuple[int, ...], degree: int, vec) -> "ConstForm":
        idx = basis_indices(axes, degree)
        return cls(axes, degree, {i: vec[p] for p, i in enumerate(idx) if vec[p] != 0})

    def is_exact_rational(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.coeffs.values())

    def norm(self) -> float:
        return math.sqrt(float(sum(c * c for c in self.coeffs.values())))


class KForm7(ConstForm):
    """Constant k-form on R^7 in coordinates x^1..x^7."""

    def __init__(self, degree: int, coeffs: dict | None = None):
        super().__init__(AXES7, degree, coeffs)


class KForm6(ConstForm):
    """Constant k-form on the cross-section, coordinates x^2..x^7."""

    def __init__(self, degree: int, coeffs: dict | None = None):
        super().__init__(AXES6, degree, coeffs)


@dataclass(frozen=True)
class Metric7:
    """Symmetric positive definite 7x7 metric on R^7."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat)
        if m.shape != (7, 7):
            raise ValueError("metric must be 7x7")
        if m.dtype != object:
            m = np.asarray(m, dtype=float)
            if not np.allclose(m, m.T, atol=1e-12):
                raise ValueError("metric must be symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise ValueError("metric must be positive definite")
        object.__setattr__(self, "mat", m)


# -- model forms -----------------------------------------------------------

_PHI0_TERMS = {(1, 2, 3): 1, (1, 4, 5): 1, (1, 6, 7): 1,
               (2, 4, 6): 1, (2, 5, 7): -1, (3, 4, 7): -1, (3, 5, 6): -1}


def phi0(exact: bool = False) -> KForm7:
    """The flat G2 model 3-form; Fraction coefficients when ``exact``."""
    one = Fraction(1) if exact else 1.0
    return KForm7(3, {i: one * c for i, c in _PHI0_TERMS.items()})


def omega0(exact: bool = False) -> KForm6:
    one = Fraction(1) if exact else 1.0
    return KForm6(2, {(2, 3): one, (4, 5): one, (6, 7): one})


def Omega0(exact: bool = False) -> KForm6:
    one = Fraction(1) if exact else 1.0
    return KForm6(3, {(2, 4, 6): one, (2, 5, 7): -one, (3, 4, 7): -one, (3, 5, 6): -one})


# -- induced bilinear form and metric --------------------------------------

def gram_from_3form(phi: ConstForm) -> np.ndarray:
    """Matrix B with (e_i . phi) ^ (e_j . phi) ^ phi = B_ij * vol.

    Exact (object dtype, Fraction entries) when the input has rational
    coefficients; float otherwise.
    """
    if phi.degree != 3:
        raise ValueError("the bilinear form is defined for 3-forms")
    axes = phi.axes
    n = len(axes)
    top = tuple(axes)
    exact = phi.is_exact_rational()
    b = np.empty((n, n), dtype=object) if exact else np.zeros((n, n))
    contr = [phi.contract(ax) for ax in axes]
    for i in range(n):
        for j in range(i, n):
            w = contr[i].wedge(contr[j]).wedge(phi)
            c = w.coeffs.get(top, Fraction(0) if exact else 0.0)
            b[i, j] = c
            b[j, i] = c
    return b


def _exact_ninth_root(q: Fraction) -> Fraction | None:
    """Rational r with r^9 == q, if one exists."""
    if q == 0:
        return Fraction(0)
    sign = 1 if q > 0 else -1
    q = abs(q)

    def iroot9(n: int) -> int | None:
        r = round(n ** (1.0 / 9.0))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** 9 == n:
                return c
        return None

    rn = iroot9(q.numerator)
    rd = iroot9(q.denominator)
    if rn is None or rd is None:
        return None
    return sign * Fraction(rn, rd)


def metric_from_3form(phi: ConstForm) -> Metric7:
    """Metric induced by a stable 3-form on R^7.

    g = s * B with s = KAPPA * det(B)^(-1/9) (real ninth root, carrying the
    sign of det B so orientation-reversing images still give a positive
    matrix).  Raises NotStable when det B = 0 or the result is not
    positive definite.

    On Fraction input the scale s is computed exactly whenever 36 * det(B)
    is a rational ninth power; otherwise the result falls back to floats.
    """
    if len(phi.axes) != 7:
        raise ValueError("induced metric wants a 3-form on R^7")
    b = gram_from_3form(phi)
    if b.dtype == object:
        detb = ratmat.det(b)
        if detb == 0:
            raise NotStable("degenerate 3-form: det B = 0")
        root = _exact_ninth_root(36 * detb)
        if root is not None:
            g = (1 / root) * b
            gf = ratmat.tofloat(g)
        else:
            s = math.copysign(KAPPA * abs(float(detb)) ** (-1.0 / 9.0), float(detb))
            g = s * ratmat.tofloat(b)
            gf = g
    else:
        detb = float(np.linalg.det(b))
        if detb == 0 or not math.isfinite(detb):
            raise NotStable("degenerate 3-form: det B = 0")
        s = math.copysign(KAPPA * abs(detb) ** (-1.0 / 9.0), detb)
        g = s * b
        gf = g
    if np.linalg.eigvalsh(gf).min() <= 0:
        raise NotStable("3-form is outside the open orbit: metric not definite")
    return Metric7(g)


def is_g2_form(phi: ConstForm) -> bool:
    """Whether phi is a 3-form on R^7 inducing a positive definite metric."""
    if phi.degree != 3 or len(phi.axes) != 7:
        return False
    try:
        metric_from_3form(phi)
    except NotStable:
        return False
    return True


# -- Hodge star ------------------------------------------------------------

def _minor_det(m: np.ndarray, rows, cols, exact: bool):
    sub = m[np.ix_(rows, cols)]
    return ratmat.det(sub) if exact else float(np.linalg.det(sub))


def _perm_sign(first: tuple[int, ...], axes: tuple[int, ...]) -> int:
    """Sign of the permutation (first, axes \\ first) of ``axes``."""
    rest = tuple(ax for ax in axes if ax not in first)
    seq = first + rest
    pos = {v: i for i, v in enumerate(sorted(seq))}
    perm = [pos[v] for v in seq]
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        clen = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


def _sqrt_exact(q):
    if isinstance(q, Fraction):
        rn = math.isqrt(q.numerator)
        rd = math.isqrt(q.denominator)
        if rn * rn == q.numerator and rd * rd == q.denominator:
            return Fraction(rn, rd)
    return math.sqrt(float(q))


def hodge_star(metric, alpha: ConstForm) -> ConstForm:
    """Hodge star of alpha, defined by a ^ (*b) = <a, b>_g vol_g.

    ``metric`` is a Metric7 or a raw symmetric matrix over alpha's axes.
    The computation raises indices with minors of g^{-1}:

        (*b)_J = sqrt(det g) * sign(Jc, J) * sum_I det(g^{-1}[Jc, I]) b_I.

    Exact on Fraction input when det g is a perfect rational square (in
    particular for the identity metric).
    """
    g = metric.mat if isinstance(metric, Metric7) else np.asarray(metric)
    axes = alpha.axes
    n = len(axes)
    if g.shape != (n, n):
        raise ValueError("metric size does not match form axes")
    exact = g.dtype == object and alpha.is_exact_rational()
    if exact:
        ginv = ratmat.inv(g)
        detg = ratmat.det(g)
        scale = _sqrt_exact(detg)
        if not isinstance(scale, Fraction):
            exact = False
    if not exact:
        g = ratmat.tofloat(g) if g.dtype == object else np.asarray(g, dtype=float)
        ginv = np.linalg.inv(g)
        detg = float(np.linalg.det(g))
        scale = math.sqrt(detg)
    k = alpha.degree
    pos = {ax: i for i, ax in enumerate(axes)}
    out: dict = {}
    if not exact and alpha.coeffs:
        # One batched determinant call over all (J, I) minor pairs.
        jdxs = basis_indices(axes, n - k)
        jcs = [tuple(ax for ax in axes if ax not in jdx) for jdx in jdxs]
        sgns = np.array([_perm_sign(jc, axes) for jc in jcs], dtype=float)
        rows = np.array([[pos[i] for i in jc] for jc in jcs], dtype=int)
        rows = rows.reshape(len(jdxs), k)
        idxs = list(alpha.coeffs)
        cols = np.array([[pos[i] for i in idx] for idx in idxs], dtype=int)
        cols = cols.reshape(len(idxs), k)
        bvec = np.array([alpha.coeffs[idx] for idx in idxs], dtype=complex)
        if np.isrealobj(np.asarray(list(alpha.coeffs.values()))):
            bvec = bvec.real
        minors = ginv[rows[:, None, :, None], cols[None, :, None, :]]
        dets = np.linalg.det(minors) if k else np.ones((len(jdxs), len(idxs)))
        vals = scale * sgns * (dets @ bvec)
        for jdx, val in zip(jdxs, vals):
            if val != 0:
                out[jdx] = val
        return ConstForm(axes, n - k, out)
    for jdx in basis_indices(axes, n - k):
        jc = tuple(ax for ax in axes if ax not in jdx)
        sgn = _perm_sign(jc, axes)
        acc = None
        rows = [pos[i] for i in jc]
        for idx, c in alpha.coeffs.items():
            cols = [pos[i] for i in idx]
            term = c * _minor_det(ginv, rows, cols, exact)
            acc = term if acc is None else acc + term
        if acc is not None:
            val = scale * sgn * acc
            if val != 0:
                out[jdx] = val
    return ConstForm(axes, n - k, out)


# -- cylindrical splitting -------------------------------------------------

def split_cylindrical(phi: ConstForm, sign: int) -> tuple[KForm6, KForm6]:
    """Split phi = Omega + sign * dx^1 ^ omega into cross-section forms."""
    if len(phi.axes) != 7:
        raise ValueError("expected a form on R^7")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    omega_part = phi.contract(1)
    big = {i: c for i, c in phi.coeffs.items() if 1 not in i}
    om = {i: sign * c for i, c in omega_part.coeffs.items()}
    return KForm6(phi.degree, big), KForm6(phi.degree - 1, om)


def assemble_cylindrical(big: ConstForm, small: ConstForm, sign: int) -> KForm7:
    """Inverse of split_cylindrical: Omega + sign * dx^1 ^ omega on R^7."""
    if big.axes != AXES6 or small.axes != AXES6:
        raise ValueError("expected cross-section forms")
    if small.degree != big.degree - 1:
        raise ValueError("degree mismatch between the two pieces")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    out = {i: c for i, c in big.coeffs.items()}
    for i, c in small.coeffs.items():
        out[(1,) + i] = sign * c
    return KForm7(big.degree, out)


# -- SU(3) tangent relations on the cross-section --------------------------

def su3_tangent_residual(big: KForm6, small: KForm6, sigma: KForm6, tau: KForm6
                         ) -> tuple[float, float]:
    """Residuals of the two linear relations cutting out the tangent cone of
    cross-section structures at (big, small) = (Omega, omega).

    r1 is |c| where sigma ^ *Omega - tau ^ omega^2 = c * vol_X, and r2 is
    the metric norm of the 5-form sigma ^ omega + Omega ^ tau.  The
    cross-section metric comes from the induced 7D metric of
    Omega + dx^1 ^ omega (which must be definite).
    """
    if (big.degree, small.degree, sigma.degree, tau.degree) != (3, 2, 3, 2):
        raise ValueError("expected degrees (3, 2) for the structure and (3, 2) for the tangent")
    phi = assemble_cylindrical(big, small, 1)
    g7 = metric_from_3form(phi).mat
    if g7.dtype == object:
        g7 = ratmat.tofloat(g7)
    g6 = np.asarray(g7, dtype=float)[1:, 1:]

    star_big = hodge_star(g6, _asfloat6(big))
    vol_scale = math.sqrt(float(np.linalg.det(g6)))
    top = AXES6

    six_form = _asfloat6(sigma).wedge(star_big) - _asfloat6(tau).wedge(_asfloat6(small)).wedge(_asfloat6(small))
    r1 = abs(six_form.coeffs.get(top, 0.0)) / vol_scale

    five_form = _asfloat6(sigma).wedge(_asfloat6(small)) + _asfloat6(big).wedge(_asfloat6(tau))
    r2 = _metric_norm(g6, five_form)
    return r1, r2


def _asfloat6(f: ConstForm) -> ConstForm:
    return ConstForm(f.axes, f.degree, {i: float(c) for i, c in f.coeffs.items()})


def _metric_norm(g: np.ndarray, f: ConstForm) -> float:
    """Norm sqrt(<f, f>_g) using minors of g^{-1}."""
    ginv = np.linalg.inv(g)
    pos = {ax: i for i, ax in enumerate(f.axes)}
    acc = 0.0
    for ia, ca in f.coeffs.items():
        for ib, cb in f.coeffs.items():
            rows = [pos[i] for i in ia]
            cols = [pos[i] for i in ib]
            acc += ca * cb * float(np.linalg.det(ginv[np.ix_(rows, cols)]))
    return math.sqrt(max(acc, 0.0))


# -- vectorized pointwise kernels ------------------------------------------
#
# The same maps as gram_from_3form / metric_from_3form / hodge_star, but
# acting on arrays of coefficient rows at once.  These back the sampled
# torsion pipeline, where the metric varies from grid point to grid point.

@lru_cache(maxsize=1)
def _gram_tensors() -> tuple[np.ndarray, np.ndarray]:
    """Structure constants for the batched bilinear form.

    Returns (ct, qt) with

        ct[i]       : (21, 35) matrix of e_{i+1} contraction on 3-forms,
        qt[u, v, c] : coefficient of vol in dx^U ^ dx^V ^ dx^C for the
                      2-form bases U, V and 3-form basis C,

    so that B_ij(c) = (ct[i] c)^T (qt . c) (ct[j] c).
    """
    basis3 = basis_indices(AXES7, 3)
    basis2 = basis_indices(AXES7, 2)
    pos2 = basis_position(AXES7, 2)
    pos3 = basis_position(AXES7, 3)
    ct = np.zeros((7, 21, 35))
    for a, ia in enumerate(basis3):
        for p, ax in enumerate(ia):
            rest = ia[:p] + ia[p + 1:]
            ct[ax - 1, pos2[rest], a] = (-1.0) ** p
    qt = np.zeros((21, 21, 35))
    for u, iu in enumerate(basis2):
        for v, iv in enumerate(basis2):
            s1, merged = _merge_sign(iu, iv)
            if s1 == 0:
                continue
            rest = tuple(ax for ax in AXES7 if ax not in merged)
            s2, _ = _merge_sign(merged, rest)
            qt[u, v, pos3[rest]] = s1 * s2
    return ct, qt


def gram_batch(coeffs: np.ndarray) -> np.ndarray:
    """Bilinear forms B for a batch of 3-forms.

    ``coeffs`` has shape (..., 35), rows ordered like
    basis_indices(AXES7, 3); the result has shape (..., 7, 7) and agrees
    with gram_from_3form row by row.
    """
    c = np.asarray(coeffs, dtype=float)
    ct, qt = _gram_tensors()
    u = np.einsum("iuc,...c->...iu", ct, c)
    q = np.einsum("uvc,...c->...uv", qt, c)
    return np.einsum("...iu,...uv,...jv->...ij", u, q, u)


def metric_batch(coeffs: np.ndarray) -> np.ndarray:
    """Induced metrics, shape (..., 7, 7), for a batch of stable 3-forms.

    Raises NotStable if any row is degenerate or lies outside the
    positive-definite orbit.
    """
    b = gram_batch(coeffs)
    det = np.linalg.det(b)
    if not np.all(np.isfinite(det)) or np.any(np.abs(det) < 1e-250):
        raise NotStable("degenerate 3-form in batch")
    s = np.copysign(KAPPA * np.abs(det) ** (-1.0 / 9.0), det)
    g = s[..., None, None] * b
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotStable("batch contains a 3-form with indefinite induced form") from None
    return g


@lru_cache(maxsize=1)
def _star3_index() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rows, cols, signs) index arrays for the batched star on 3-forms.

    rows[j]  : 0-based axis triple complementary to the j-th 4-form index,
    cols[i]  : 0-based axis triple of the i-th 3-form index,
    signs[j] : sign of the permutation (complement, j-th 4-index).
    """
    basis4 = basis_indices(AXES7, 4)
    basis3 = basis_indices(AXES7, 3)
    rows = np.zeros((35, 3), dtype=np.intp)
    signs = np.zeros(35)
    for j, jdx in enumerate(basis4):
        jc = tuple(ax for ax in AXES7 if ax not in jdx)
        rows[j] = [ax - 1 for ax in jc]
        signs[j] = _perm_sign(jc, AXES7)
    cols = np.array([[ax - 1 for ax in idx] for idx in basis3], dtype=np.intp)
    return rows, cols, signs


def _det3(m: np.ndarray) -> np.ndarray:
    """Determinants of an (..., 3, 3) stack, cofactor expansion."""
    return (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]))


def star3_batch(metrics: np.ndarray, coeffs: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Hodge star of a batch of 3-forms, one metric per row.

    ``metrics`` is (..., 7, 7) positive definite, ``coeffs`` (..., 35);
    returns 4-form coefficient rows (..., 35) matching hodge_star.
    """
    g = np.asarray(metrics, dtype=float)
    c = np.asarray(coeffs)
    lead = c.shape[:-1]
    g = g.reshape(-1, 7, 7)
    c = c.reshape(-1, 35)
    rows, cols, signs = _star3_index()
    ginv = np.linalg.inv(g)
    scale = np.sqrt(np.linalg.det(g))
    out = np.empty_like(c)
    for lo in range(0, c.shape[0], chunk):
        hi = min(lo + chunk, c.shape[0])
        sub = ginv[lo:hi][:, rows[:, None, :, None], cols[None, :, None, :]]
        minors = _det3(sub)                       # (n, 35 out, 35 in)
        out[lo:hi] = scale[lo:hi, None] * signs * np.einsum("nji,ni->nj", minors, c[lo:hi])
    return out.reshape(lead + (35,))
