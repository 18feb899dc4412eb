"""Triangular sets and the fast kernels of the residue ring R_T.

Elements of R_T = F_p[X_1..X_n]/<T_1..T_n> are dense coefficient tensors on
the monomial basis {X_1^a_1 ... X_n^a_n : a_i < d_i}; arrays are laid out
with the X_1 axis last (= fastest in C order).  The four production kernels
(multiplication, transposed multiplication, modular composition, power
projection) accept n in {1, 2} only; higher towers are still constructible
and reducible, and a slow generic multiplier backs the few places that need
them (trace tables of tall chains, raw-input reduction).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    BoundsExceedRingDegree,
    CharacteristicTooSmall,
    NotInSubalgebra,
    NotSeparating,
    UnsupportedArity,
    VariableNotInRing,
    ZeroDivisor,
)
from .fpcore import (
    Poly,
    PreparedConv,
    PrimeField,
    div_series,
    extend_form_values,
    is_squarefree,
    poly_from_power_sums,
    poly_gcd,
    poly_invmod,
    poly_rem,
    rev_coeffs,
    squarefree_part,
)

# running count of (transposed) ring multiplications, for the structural
# operation-count checks on the blocked kernels
_MUL_COUNT = 0


def mul_count():
    return _MUL_COUNT


class TriangularSet:
    """Monic reduced triangular set T_1(X_1), ..., T_n(X_1..X_n).

    polys[i] is the coefficient tensor of T_{i+1}: axis 0 indexes the
    X_{i+1} exponent (length d_{i+1} + 1) and the remaining axes are
    X_i, ..., X_1.  Leading coefficient must be the constant 1.
    """

    __slots__ = ("field", "vars", "polys", "d", "delta", "_cache")

    def __init__(self, field: PrimeField, polys, vars=None):
        self.field = field
        arrs = []
        d = []
        for i, raw in enumerate(polys):
            a = field.arr(raw)
            if a.ndim != i + 1:
                raise ValueError("polynomial %d must have %d axes" % (i + 1, i + 1))
            if a.shape[0] < 2:
                raise ValueError("T_%d must have positive main degree" % (i + 1))
            want = tuple(d[i - 1 :: -1])
            if a.shape[1:] != want:
                raise ValueError(
                    "T_%d lower-variable axes %r do not match multidegree %r"
                    % (i + 1, a.shape[1:], want)
                )
            top = a[-1]
            unit = np.zeros_like(top)
            unit[(0,) * top.ndim] = 1
            if not np.array_equal(top, unit):
                raise ValueError("T_%d is not monic in its main variable" % (i + 1))
            arrs.append(a)
            d.append(a.shape[0] - 1)
        if not arrs:
            raise ValueError("a triangular set needs at least one polynomial")
        self.polys = tuple(arrs)
        self.d = tuple(d)
        self.delta = math.prod(d)
        if vars is None:
            vars = tuple("X%d" % (i + 1) for i in range(len(d)))
        self.vars = tuple(vars)
        if len(self.vars) != len(d):
            raise ValueError("variable list does not match the chain length")
        self._cache = {}

    @property
    def n(self):
        return len(self.d)

    @property
    def shape(self):
        return tuple(self.d[::-1])

    @property
    def t1(self) -> Poly:
        return Poly(self.field, self.polys[0])

    def __eq__(self, other):
        return (
            isinstance(other, TriangularSet)
            and other.field.p == self.field.p
            and other.vars == self.vars
            and other.d == self.d
            and all(np.array_equal(a, b) for a, b in zip(other.polys, self.polys))
        )

    def __hash__(self):
        return hash((self.field.p, self.vars, self.d))

    def __repr__(self):
        return "TriangularSet(p=%d, vars=%s, d=%s)" % (self.field.p, self.vars, self.d)

    def sort_key(self):
        key = [self.delta]
        for a in self.polys:
            key.append(tuple(int(c) for c in a.reshape(-1)))
        return tuple(key)

    # -- cached reduction helpers --------------------------------------
    def _r1mat(self, width):
        """Rows X_1^j mod T_1 for j < width, as a (width x d1) matrix."""
        d1 = self.d[0]
        cached = self._cache.get("r1mat")
        if cached is None or cached.shape[0] < width:
            size = max(width, 2 * d1, 8)
            rows = self.field.zeros((size, d1))
            t1 = self.polys[0][:d1]
            for j in range(size):
                if j < d1:
                    rows[j, j] = 1
                else:
                    prev = rows[j - 1]
                    top = prev[d1 - 1]
                    rows[j, 1:] = prev[: d1 - 1]
                    rows[j] = (rows[j] - top * t1) % self.field.p
            self._cache["r1mat"] = rows
            cached = rows
        return cached[:width]

    def _red1(self, arr):
        """Reduce the last axis modulo T_1."""
        d1 = self.d[0]
        w = arr.shape[-1]
        if w <= d1:
            if w == d1:
                return arr
            out = self.field.zeros(arr.shape[:-1] + (d1,))
            out[..., :w] = arr
            return out
        flat = arr.reshape(-1, w)
        out = self.field.matmul(flat, self._r1mat(w))
        return out.reshape(arr.shape[:-1] + (d1,))

    def _rev2(self):
        out = self._cache.get("rev2")
        if out is None:
            out = self.polys[1][::-1].copy()
            self._cache["rev2"] = out
        return out

    def _mul_trunc2(self, a, b, k):
        """(a * b) over S = F_p[X_1]/<T_1>, truncated to X_2-degree < k."""
        prod = self.field.nd_conv(a, b)[:k]
        return self._red1(prod)

    def _invrev2(self, prec):
        """Series inverse of the X_2-reversal of T_2 over S, to prec terms."""
        cached = self._cache.get("invrev2")
        if cached is not None and cached.shape[0] >= prec:
            return cached[:prec]
        d1 = self.d[0]
        f = self._rev2()
        g = self.field.zeros((1, d1))
        g[0, 0] = 1
        k = 1
        while k < prec:
            k2 = min(2 * k, prec)
            fg = self._mul_trunc2(f[:k2], g, k2)
            t = (-fg) % self.field.p
            t[0, 0] = (t[0, 0] + 2) % self.field.p
            g = self._mul_trunc2(g, t, k2)
            k = k2
        if g.shape[0] < prec:
            pad = self.field.zeros((prec - g.shape[0], d1))
            g = np.concatenate([g, pad])
        self._cache["invrev2"] = g
        return g

    def _pack2(self, arr):
        """Kronecker-pack a row tensor with column stride 2*d1 - 1."""
        w = 2 * self.d[0] - 1
        out = self.field.zeros((arr.shape[0], w))
        out[:, : arr.shape[1]] = arr
        return out.reshape(-1)

    def _unpack2(self, vec, rows):
        w = 2 * self.d[0] - 1
        out = self.field.zeros(rows * w)
        m = min(len(vec), rows * w)
        out[:m] = vec[:m]
        return out.reshape(rows, w)

    def _rem2_preps(self):
        preps = self._cache.get("rem2prep")
        if preps is None:
            d2, d1 = self.d[1], self.d[0]
            w = 2 * d1 - 1
            qlen = d2 - 1
            inv_packed = self._pack2(self._invrev2(qlen))
            t2_packed = self._pack2(self.polys[1].reshape(d2 + 1, d1))
            preps = (
                PreparedConv(self.field, inv_packed, qlen * w),
                PreparedConv(self.field, t2_packed, qlen * w),
            )
            self._cache["rem2prep"] = preps
        return preps

    def _rem2(self, arr):
        """Reduce the X_2 axis modulo T_2 (rows already reduced mod T_1)."""
        d2, d1 = self.d[1], self.d[0]
        e = arr.shape[0]
        if e <= d2:
            if e == d2:
                return arr
            out = self.field.zeros((d2, d1))
            out[:e] = arr
            return out
        qlen = e - d2
        rev = arr[::-1]
        if e == 2 * d2 - 1 and not self.field.big and self.delta >= 512:
            prep_inv, prep_t2 = self._rem2_preps()
            qrev = self._red1(self._unpack2(prep_inv.conv(self._pack2(rev[:qlen])), qlen))
            q = qrev[::-1]
            qt2 = self._red1(self._unpack2(prep_t2.conv(self._pack2(q)), d2))
            return (arr[:d2] - qt2) % self.field.p
        qrev = self._mul_trunc2(rev[:qlen], self._invrev2(qlen), qlen)
        q = qrev[::-1]
        qt2 = self.field.nd_conv(q, self.polys[1])[:d2]
        qt2 = self._red1(qt2)
        return (arr[:d2] - qt2) % self.field.p


class ResidueElement:
    """Element of R_T on the monomial basis, X_1 axis last."""

    __slots__ = ("tset", "coeffs")

    def __init__(self, tset: TriangularSet, coeffs):
        self.tset = tset
        a = tset.field.arr(coeffs)
        if a.shape != tset.shape:
            raise ValueError("coefficient tensor has shape %r, ring needs %r" % (a.shape, tset.shape))
        self.coeffs = a

    @classmethod
    def zero(cls, tset):
        return cls(tset, tset.field.zeros(tset.shape))

    @classmethod
    def one(cls, tset):
        a = tset.field.zeros(tset.shape)
        a[(0,) * len(tset.shape)] = 1
        return cls(tset, a)

    @classmethod
    def constant(cls, tset, c):
        a = tset.field.zeros(tset.shape)
        a[(0,) * len(tset.shape)] = c % tset.field.p
        return cls(tset, a)

    @classmethod
    def from_poly(cls, tset, poly: Poly):
        """Univariate rings only: the class of a polynomial in X_1."""
        if tset.n != 1:
            raise UnsupportedArity("from_poly needs a univariate ring")
        r = poly_rem(poly, tset.t1) if poly.degree >= tset.d[0] else poly
        a = tset.field.zeros(tset.shape)
        a[: len(r.coeffs)] = r.coeffs
        return cls(tset, a)

    def to_poly(self) -> Poly:
        if self.tset.n != 1:
            raise UnsupportedArity("to_poly needs a univariate ring")
        return Poly(self.tset.field, self.coeffs)

    def is_zero(self):
        return not np.any(self.coeffs)

    def is_one(self):
        return ResidueElement.one(self.tset) == self

    def __eq__(self, other):
        return (
            isinstance(other, ResidueElement)
            and other.tset.field.p == self.tset.field.p
            and other.coeffs.shape == self.coeffs.shape
            and bool(np.all(other.coeffs == self.coeffs))
        )

    def __hash__(self):
        return hash((self.tset.field.p, tuple(int(c) for c in self.coeffs.reshape(-1))))

    def __add__(self, other):
        return ResidueElement(self.tset, (self.coeffs + other.coeffs) % self.tset.field.p)

    def __sub__(self, other):
        return ResidueElement(self.tset, (self.coeffs - other.coeffs) % self.tset.field.p)

    def __neg__(self):
        return ResidueElement(self.tset, (-self.coeffs) % self.tset.field.p)

    def scale(self, c):
        return ResidueElement(self.tset, self.coeffs * (c % self.tset.field.p) % self.tset.field.p)

    def __repr__(self):
        return "ResidueElement(%r)" % (self.coeffs,)


class LinearForm:
    """K-linear form on R_T, stored by its values on the monomial basis."""

    __slots__ = ("tset", "values")

    def __init__(self, tset: TriangularSet, values):
        self.tset = tset
        a = tset.field.arr(values)
        if a.shape != tset.shape:
            raise ValueError("value tensor has shape %r, ring needs %r" % (a.shape, tset.shape))
        self.values = a

    def apply(self, elt: ResidueElement) -> int:
        p = self.tset.field.p
        return int(np.sum(self.values.reshape(-1) * elt.coeffs.reshape(-1) % p) % p)

    def scale(self, c):
        return LinearForm(self.tset, self.values * (c % self.tset.field.p) % self.tset.field.p)

    def __add__(self, other):
        return LinearForm(self.tset, (self.values + other.values) % self.tset.field.p)

    def __eq__(self, other):
        return (
            isinstance(other, LinearForm)
            and other.tset.field.p == self.tset.field.p
            and other.values.shape == self.values.shape
            and bool(np.all(other.values == self.values))
        )

    def __repr__(self):
        return "LinearForm(%r)" % (self.values,)


class DegreeBounds:
    """Degree bounds f = (f_1[, f_2]) of a composition/projection problem."""

    __slots__ = ("f", "delta_f")

    def __init__(self, f):
        f = tuple(int(x) for x in f)
        if len(f) not in (1, 2):
            raise UnsupportedArity("bounds must cover one or two variables")
        if any(x < 1 for x in f):
            raise ValueError("degree bounds must be positive")
        self.f = f
        self.delta_f = math.prod(f)

    def validate_for(self, tset):
        """Enforce the cost assumption delta_f <= delta_T when wanted."""
        if self.delta_f > tset.delta:
            raise BoundsExceedRingDegree(
                "delta_f = %d exceeds the ring degree %d" % (self.delta_f, tset.delta)
            )

    def __repr__(self):
        return "DegreeBounds(%r)" % (self.f,)


# ---------------------------------------------------------------------------
# reduction of raw (unreduced) polynomials


def raw_from_terms(field, terms, nvars):
    """Dense tensor (axes X_nvars .. X_1) from {(e_1..e_k): coeff} terms."""
    ext = [1] * nvars
    for exps in terms:
        if len(exps) > nvars:
            raise VariableNotInRing("term uses variable %d of %d" % (len(exps), nvars))
        for i, e in enumerate(exps):
            ext[i] = max(ext[i], e + 1)
    arr = field.zeros(tuple(ext[::-1]))
    for exps, c in terms.items():
        idx = [0] * nvars
        for i, e in enumerate(exps):
            idx[i] = e
        arr[tuple(idx[::-1])] = c % field.p
    return arr


def reduce(raw, tset: TriangularSet) -> ResidueElement:
    """Canonical representative of a raw multivariate polynomial in R_T.

    raw may be a Poly (univariate in X_1), a dense ndarray with axes
    X_k..X_1 for k <= n, or a {(e_1..e_k): coeff} mapping.
    """
    field = tset.field
    n = tset.n
    if isinstance(raw, ResidueElement):
        if raw.tset.shape != tset.shape:
            raise VariableNotInRing("element comes from a different ring shape")
        return ResidueElement(tset, raw.coeffs)
    if isinstance(raw, Poly):
        raw = raw.coeffs if raw.degree >= 0 else field.zeros(1)
    if isinstance(raw, dict):
        raw = raw_from_terms(field, raw, n)
    arr = field.arr(raw)
    if arr.ndim > n:
        raise VariableNotInRing("input uses %d variables, ring has %d" % (arr.ndim, n))
    while arr.ndim < n:
        arr = arr[None, ...]
    arr = _tw_reduce(arr, tset, n)
    return ResidueElement(tset, arr)


def _tw_reduce(arr, tset, level):
    """Reduce axes X_1..X_level of arr modulo T_1..T_level."""
    field = tset.field
    arr = tset._red1(arr) if arr.shape[-1] != tset.d[0] else arr
    for i in range(2, level + 1):
        di = tset.d[i - 1]
        ax = arr.ndim - i
        size = arr.shape[ax]
        if size < di + 1:
            if size < di:
                pad_shape = list(arr.shape)
                pad_shape[ax] = di - size
                arr = np.concatenate([arr, field.zeros(tuple(pad_shape))], axis=ax)
            continue
        if i == 2 and arr.ndim == 2:
            arr = tset._rem2(arr)
            continue
        ti = tset.polys[i - 1]
        work = np.moveaxis(arr, ax, 0).copy()
        lead_shape = work.shape[1 : work.ndim - (i - 1)]
        for e in range(size - 1, di - 1, -1):
            for lead in np.ndindex(lead_shape):
                c = work[(e,) + lead]
                if not np.any(c):
                    continue
                for j in range(di):
                    tij = ti[j]
                    if not np.any(tij):
                        continue
                    prod = _tw_mul_raw(c, tij, tset, i - 1)
                    tgt = work[(e - di + j,) + lead]
                    work[(e - di + j,) + lead] = (tgt - prod) % field.p
                work[(e,) + lead] = 0
        arr = np.moveaxis(work[:di], 0, ax)
    return arr


def _tw_mul_raw(a, b, tset, level):
    """Reduced product of two reduced coefficient tensors at a tower level."""
    field = tset.field
    if level == 1:
        return tset._red1(field.conv(a, b).reshape(1, -1))[0]
    full = field.nd_conv(a, b)
    return _tw_reduce(full, tset, level)


def tower_mul(a, b, tset, level=None):
    """Generic (slow) multiplication, any number of variables."""
    lv = tset.n if level is None else level
    return _tw_mul_raw(a, b, tset, lv)


# ---------------------------------------------------------------------------
# the four kernels (n in {1, 2})


def _require_small_arity(tset, what):
    if tset.n > 2:
        raise UnsupportedArity("%s supports up to two variables, got %d" % (what, tset.n))


def ring_mul(a: ResidueElement, b: ResidueElement, tset: TriangularSet = None) -> ResidueElement:
    """Product AB in R_T."""
    tset = tset or a.tset
    _require_small_arity(tset, "ring_mul")
    global _MUL_COUNT
    _MUL_COUNT += 1
    field = tset.field
    if tset.n == 1:
        prod = field.conv(a.coeffs, b.coeffs)
        return ResidueElement(tset, tset._red1(prod.reshape(1, -1))[0])
    prod = field.nd_conv(a.coeffs, b.coeffs)
    prod = tset._red1(prod)
    return ResidueElement(tset, tset._rem2(prod))


class _PreparedMul:
    """A fixed ring element held transform-side for repeated products."""

    __slots__ = ("tset", "prep")

    def __init__(self, elt: ResidueElement, tset: TriangularSet):
        self.tset = tset
        if tset.n == 1:
            self.prep = PreparedConv(tset.field, elt.coeffs, tset.d[0])
        else:
            w = 2 * tset.d[0] - 1
            self.prep = PreparedConv(tset.field, tset._pack2(elt.coeffs), tset.d[1] * w)

    def mul(self, b: ResidueElement) -> ResidueElement:
        global _MUL_COUNT
        _MUL_COUNT += 1
        tset = self.tset
        if tset.n == 1:
            prod = self.prep.conv(b.coeffs)
            return ResidueElement(tset, tset._red1(prod.reshape(1, -1))[0])
        d2 = tset.d[1]
        prod = tset._unpack2(self.prep.conv(tset._pack2(b.coeffs)), 2 * d2 - 1)
        prod = tset._red1(prod)
        return ResidueElement(tset, tset._rem2(prod))


def transposed_mul(a: ResidueElement, ell: LinearForm, tset: TriangularSet = None) -> LinearForm:
    """The form a . ell with (a . ell)(b) = ell(ab)."""
    tset = tset or a.tset
    _require_small_arity(tset, "transposed_mul")
    global _MUL_COUNT
    _MUL_COUNT += 1
    field = tset.field
    p = field.p
    if tset.n == 1:
        d = tset.d[0]
        ext = extend_form_values(ell.values, tset.t1, 2 * d - 1)
        return LinearForm(tset, field.corr(ext, a.coeffs))
    d2, d1 = tset.d[1], tset.d[0]
    t1 = tset.t1
    width1 = 4 * d1 - 3
    ext = np.stack([extend_form_values(ell.values[j], t1, width1) for j in range(d2)])
    rev2 = tset._rev2()
    # numerator of the X_2-direction generating series, coefficients are
    # extended X_1 value rows acted on by correlation with T_2 coefficients
    w_num = width1 - (d1 - 1)
    num = field.zeros((d2, w_num))
    for t in range(d2):
        acc = field.zeros(w_num)
        for k in range(t + 1):
            c = rev2[k]
            if np.any(c):
                acc = (acc + field.corr(ext[t - k], c)) % p
        num[t] = acc
    inv2 = tset._invrev2(2 * d2 - 1)
    w_ext = w_num - (d1 - 1)  # = 2*d1 - 1
    table = field.zeros((2 * d2 - 1, w_ext))
    for u in range(2 * d2 - 1):
        acc = field.zeros(w_ext)
        for t in range(min(u, d2 - 1) + 1):
            c = inv2[u - t]
            if np.any(c):
                acc = (acc + field.corr(num[t], c)) % p
        table[u] = acc
    out = field.zeros((d2, d1))
    for b in range(d2):
        acc = field.zeros(d1)
        for l in range(d2):
            row = a.coeffs[l]
            if np.any(row):
                acc = (acc + field.corr(table[l + b], row)) % p
        out[b] = acc
    return LinearForm(tset, out)


# -- blocked modular composition / power projection --------------------------

LAST_COMPOSE_STATS = {}


def _block_sizes(f):
    eps_p = [max(1, math.isqrt(fi - 1) + 1) if fi > 1 else 1 for fi in f]
    eps = [-(-fi // ep) for fi, ep in zip(f, eps_p)]
    return eps, eps_p


def _coerce_f_tensor(field, f_coeffs, bounds):
    arr = f_coeffs.coeffs if isinstance(f_coeffs, Poly) else field.arr(f_coeffs)
    if arr.ndim not in (1, 2):
        raise UnsupportedArity("composition input must involve one or two variables")
    if bounds is None:
        bounds = DegreeBounds(arr.shape[::-1] if arr.ndim == 2 else (max(arr.shape[0], 1),))
    if arr.ndim != len(bounds.f):
        raise ValueError("coefficient tensor arity does not match bounds")
    want = bounds.f[::-1] if arr.ndim == 2 else (bounds.f[0],)
    if any(s > w for s, w in zip(arr.shape, want)):
        raise ValueError("coefficient tensor exceeds its declared bounds")
    if arr.shape != tuple(want):
        out = field.zeros(tuple(want))
        out[tuple(slice(0, s) for s in arr.shape)] = arr
        arr = out
    return arr, bounds


def _power_grid(g, tset, e1p, e2p, need_g1, need_g2):
    """All G_1^{j1} G_2^{j2} for j1 < e1p, j2 < e2p, plus gamma powers."""
    one = ResidueElement.one(tset)
    big = tset.delta >= 512 and not tset.field.big
    g1 = g[0]
    m1 = _PreparedMul(g1, tset) if big and e1p > 2 else None
    g2 = g[1] if len(g) == 2 else None
    m2 = _PreparedMul(g2, tset) if big and g2 is not None and e2p > 2 else None

    def by_g1(x):
        return m1.mul(x) if m1 is not None else ring_mul(x, g1, tset)

    def by_g2(x):
        return m2.mul(x) if m2 is not None else ring_mul(x, g2, tset)

    grid = [[None] * e1p for _ in range(e2p)]
    grid[0][0] = one
    for j1 in range(1, e1p):
        grid[0][j1] = by_g1(grid[0][j1 - 1])
    for j2 in range(1, e2p):
        grid[j2][0] = by_g2(grid[j2 - 1][0])
        for j1 in range(1, e1p):
            grid[j2][j1] = by_g1(grid[j2][j1 - 1])
    gamma1 = None
    if need_g1:
        gamma1 = g1 if e1p == 1 else by_g1(grid[0][e1p - 1])
    gamma2 = None
    if need_g2:
        gamma2 = g2 if e2p == 1 else by_g2(grid[e2p - 1][0])
    cols = [grid[j2][j1].coeffs.reshape(-1) for j2 in range(e2p) for j1 in range(e1p)]
    mg = np.stack(cols, axis=1)
    return grid, mg, gamma1, gamma2


def mod_compose(f_coeffs, g, tset: TriangularSet, bounds: DegreeBounds = None):
    """F(G_1[, G_2]) in R_T by the blocked baby-step/giant-step scheme.

    f_coeffs: coefficient vector (one variable) or tensor with the second
    variable on axis 0 (two variables).
    """
    _require_small_arity(tset, "mod_compose")
    field = tset.field
    g = list(g)
    if len(g) not in (1, 2):
        raise UnsupportedArity("need one or two composition arguments")
    arr, bounds = _coerce_f_tensor(field, f_coeffs, bounds)
    if len(g) != len(bounds.f):
        raise ValueError("argument count does not match bounds")
    f1 = bounds.f[0]
    f2 = bounds.f[1] if len(bounds.f) == 2 else 1
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    (e1, e2), (e1p, e2p) = _block_sizes([f1, f2])
    before = _MUL_COUNT
    grid, mg, gamma1, gamma2 = _power_grid(g, tset, e1p, e2p, e1 > 1, e2 > 1)
    fpad = field.zeros((e2 * e2p, e1 * e1p))
    fpad[:f2, :f1] = arr
    v = fpad.reshape(e2, e2p, e1, e1p).transpose(1, 3, 0, 2).reshape(e2p * e1p, e2 * e1)
    phi = field.matmul(mg, v)
    cells = [
        [ResidueElement(tset, phi[:, i2 * e1 + i1].reshape(tset.shape)) for i2 in range(e2)]
        for i1 in range(e1)
    ]
    big = tset.delta >= 512 and not field.big
    mg1 = _PreparedMul(gamma1, tset) if big and e1 > 2 else None
    mg2 = _PreparedMul(gamma2, tset) if big and e2 > 2 else None
    outer = []
    for i1 in range(e1):
        acc = cells[i1][e2 - 1]
        for i2 in range(e2 - 2, -1, -1):
            acc = (mg2.mul(acc) if mg2 is not None else ring_mul(acc, gamma2, tset)) + cells[i1][i2]
        outer.append(acc)
    result = outer[e1 - 1]
    for i1 in range(e1 - 2, -1, -1):
        result = (mg1.mul(result) if mg1 is not None else ring_mul(result, gamma1, tset)) + outer[i1]
    LAST_COMPOSE_STATS.clear()
    LAST_COMPOSE_STATS.update(
        muls=_MUL_COUNT - before, e1=e1, e2=e2, e1p=e1p, e2p=e2p, bound=e1 * e2 + e1p * e2p + 2
    )
    return result


def power_project(ell: LinearForm, g, tset: TriangularSet, bounds):
    """Value table ell(G_1^{c1} G_2^{c2}) for c_i < f_i.

    Returns a length-f_1 vector for one argument, an (f_2, f_1) table for
    two (same axis convention as composition inputs).
    """
    _require_small_arity(tset, "power_project")
    field = tset.field
    g = list(g)
    if len(g) not in (1, 2):
        raise UnsupportedArity("need one or two projection arguments")
    if not isinstance(bounds, DegreeBounds):
        bounds = DegreeBounds(bounds if isinstance(bounds, (tuple, list)) else (bounds,))
    if len(g) != len(bounds.f):
        raise ValueError("argument count does not match bounds")
    f1 = bounds.f[0]
    f2 = bounds.f[1] if len(bounds.f) == 2 else 1
    (e1, e2), (e1p, e2p) = _block_sizes([f1, f2])
    before = _MUL_COUNT
    grid, mg, gamma1, gamma2 = _power_grid(g, tset, e1p, e2p, e1 > 1, e2 > 1)
    forms = [[None] * e1 for _ in range(e2)]
    forms[0][0] = ell
    for i2 in range(1, e2):
        forms[i2][0] = transposed_mul(gamma2, forms[i2 - 1][0], tset)
    for i2 in range(e2):
        for i1 in range(1, e1):
            forms[i2][i1] = transposed_mul(gamma1, forms[i2][i1 - 1], tset)
    ml = np.stack(
        [forms[i2][i1].values.reshape(-1) for i2 in range(e2) for i1 in range(e1)]
    )
    w = field.matmul(ml, mg)
    table = (
        w.reshape(e2, e1, e2p, e1p).transpose(0, 2, 1, 3).reshape(e2 * e2p, e1 * e1p)
    )[:f2, :f1]
    LAST_COMPOSE_STATS.clear()
    LAST_COMPOSE_STATS.update(
        muls=_MUL_COUNT - before, e1=e1, e2=e2, e1p=e1p, e2p=e2p, bound=e1 * e2 + e1p * e2p + 2
    )
    if len(bounds.f) == 1:
        return table[0].copy()
    return table


# ---------------------------------------------------------------------------
# traces and characteristic polynomials


def _power_sum_table(poly: Poly, count):
    """Power sums of a monic polynomial: rev(P')/rev(P) as a series."""
    field = poly.field
    d = poly.degree
    num = rev_coeffs(field, poly.derivative().coeffs, max(d - 1, 0))
    den = rev_coeffs(field, poly.coeffs, d)
    return div_series(num, den, count, field)


def trace_form(tset: TriangularSet) -> LinearForm:
    """Values of the trace of multiplication maps on the monomial basis."""
    _require_small_arity(tset, "trace_form")
    cached = tset._cache.get("trace")
    if cached is not None:
        return LinearForm(tset, cached)
    field = tset.field
    if tset.n == 1:
        vals = _power_sum_table(tset.t1, tset.d[0])
        tset._cache["trace"] = vals
        return LinearForm(tset, vals)
    d2, d1 = tset.d[1], tset.d[0]
    # tau_2(X_2^j) over S via the reversed-derivative series of T_2
    t2 = tset.polys[1]
    deriv = t2[1:] * np.arange(1, d2 + 1, dtype=field.dtype).reshape(-1, *([1] * (t2.ndim - 1))) % field.p
    rev_deriv = np.zeros_like(t2[:d2])
    rev_deriv[: deriv.shape[0]] = deriv[::-1]
    v = tset._mul_trunc2(rev_deriv, tset._invrev2(d2), d2)
    t1 = tset.t1
    tau1 = _power_sum_table(t1, d1)
    ext = extend_form_values(tau1, t1, 2 * d1 - 1)
    table = field.zeros((d2, d1))
    for j in range(d2):
        table[j] = field.corr(ext, v[j])
    tset._cache["trace"] = table
    return LinearForm(tset, table)


def trace_table(tset: TriangularSet) -> np.ndarray:
    """Trace values on the monomial basis for a chain of any height."""
    if tset.n <= 2:
        return trace_form(tset).values
    field = tset.field
    n = tset.n
    # level-by-level: start with the bottom pair, then climb
    lower = TriangularSet(field, tset.polys[:2], tset.vars[:2])
    table = trace_form(lower).values
    for lev in range(3, n + 1):
        dlev = tset.d[lev - 1]
        sub = TriangularSet(field, tset.polys[: lev - 1], tset.vars[: lev - 1])
        tl = tset.polys[lev - 1]
        # tau_lev(X_lev^j) as elements of the level below, via the reversed
        # derivative series of T_lev
        deriv = tl[1:] * np.arange(1, dlev + 1, dtype=field.dtype).reshape(
            -1, *([1] * (tl.ndim - 1))
        ) % field.p
        rev_t = tl[::-1]
        rev_d = np.zeros_like(tl[:dlev])
        rev_d[: deriv.shape[0]] = deriv[::-1]
        v = _tower_series_quotient(rev_d, rev_t, dlev, sub)
        out = field.zeros((dlev,) + table.shape)
        for j in range(dlev):
            for idx in np.ndindex(table.shape):
                m = field.zeros(table.shape)
                m[idx] = 1
                prod = _tw_mul_raw(v[j], m, sub, sub.n)
                out[(j,) + idx] = int(np.sum(table * prod % field.p) % field.p)
        table = out
    return table


def _tower_series_quotient(num, den, prec, sub: TriangularSet):
    """num/den as a main-variable power series with tower coefficients."""
    field = sub.field
    # Newton inversion of den (den[0] must be the constant 1)
    g = field.zeros((1,) + sub.shape)
    g[(0,) * (1 + len(sub.shape))] = 1
    k = 1

    def mul_trunc(a, b, kk):
        rows = min(a.shape[0] + b.shape[0] - 1, kk)
        out = field.zeros((rows,) + sub.shape)
        for i in range(a.shape[0]):
            if not np.any(a[i]):
                continue
            for j in range(b.shape[0]):
                if i + j >= kk:
                    break
                if not np.any(b[j]):
                    continue
                out[i + j] = (out[i + j] + _tw_mul_raw(a[i], b[j], sub, sub.n)) % field.p
        return out

    while k < prec:
        k2 = min(2 * k, prec)
        fg = mul_trunc(den[:k2], g, k2)
        t = (-fg) % field.p
        t[(0,) * (1 + len(sub.shape))] = (t[(0,) * (1 + len(sub.shape))] + 2) % field.p
        g = mul_trunc(g, t, k2)
        k = k2
    if g.shape[0] < prec:
        g = np.concatenate([g, field.zeros((prec - g.shape[0],) + sub.shape)])
    return mul_trunc(num, g, prec)


def char_poly(a: ResidueElement, tset: TriangularSet = None) -> Poly:
    """Characteristic polynomial of multiplication by a, via traces."""
    tset = tset or a.tset
    _require_small_arity(tset, "char_poly")
    field = tset.field
    delta = tset.delta
    if field.p <= delta:
        raise CharacteristicTooSmall("char_poly needs p > %d" % delta)
    tr = trace_form(tset)
    sums = power_project(tr, [a], tset, DegreeBounds((delta + 1,)))
    return poly_from_power_sums([int(x) for x in sums], delta, field)


# ---------------------------------------------------------------------------
# inverse modular composition and inversion


def _express_in_subalgebra(bs, a: ResidueElement, tset: TriangularSet, chi: Poly):
    """Polynomials H with b = H(a), or None if some b is not in K[a].

    Works from the squarefree part of chi, so a need not be separating.
    """
    field = tset.field
    q_poly = squarefree_part(chi)
    q = q_poly.degree
    sums = _power_sum_table(chi, q)
    revq = rev_coeffs(field, q_poly.coeffs, q)
    n1 = field.conv(sums, revq)[:q]
    if len(n1) < q:
        n1 = np.concatenate([n1, field.zeros(q - len(n1))])
    n1_rev = Poly(field, n1[::-1].copy())
    try:
        inv1 = poly_invmod(n1_rev, q_poly)
    except Exception:
        return None
    tr = trace_form(tset)
    out = []
    for b in bs:
        ell_b = transposed_mul(b, tr, tset)
        t = power_project(ell_b, [a], tset, DegreeBounds((q,)))
        nb = field.conv(field.arr(t), revq)[:q]
        if len(nb) < q:
            nb = np.concatenate([nb, field.zeros(q - len(nb))])
        nb_rev = Poly(field, nb[::-1].copy())
        h = poly_rem(nb_rev * inv1, q_poly)
        if mod_compose(h, [a], tset, DegreeBounds((max(h.degree + 1, 1),))) != b:
            return None
        out.append(h)
    return out


def inverse_mod_compose(a: ResidueElement, b: ResidueElement, tset: TriangularSet = None):
    """U with b = U(a) in R_T, for separating a; verified by composition.

    Returns (U, True); raises NotSeparating / NotInSubalgebra otherwise.
    """
    tset = tset or a.tset
    chi = char_poly(a, tset)
    if not is_squarefree(chi):
        raise NotSeparating("characteristic polynomial of a is not squarefree")
    res = _express_in_subalgebra([b], a, tset, chi)
    if res is None:
        raise NotInSubalgebra("b is not a polynomial in a")
    return res[0], True


def invert_element(a: ResidueElement, tset: TriangularSet = None) -> ResidueElement:
    """Inverse of a in R_T through its characteristic polynomial."""
    tset = tset or a.tset
    chi = char_poly(a, tset)
    c0 = int(chi.coeffs[0]) if chi.degree >= 0 else 0
    if c0 == 0:
        raise ZeroDivisor("element is a zero divisor")
    field = tset.field
    cofactor = Poly(field, chi.coeffs[1:])  # (chi - chi(0)) / X
    w = mod_compose(cofactor, [a], tset, DegreeBounds((max(cofactor.degree + 1, 1),)))
    return w.scale(-field.inv(c0) % field.p)
