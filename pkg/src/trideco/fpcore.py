"""Prime fields F_p and dense univariate polynomial arithmetic.

Coefficients live in numpy int64 arrays reduced into [0, p) whenever
p < 2**31 (products then fit in int64); larger word-size primes fall back
to object arrays and big-integer Kronecker multiplication.  Everything
above fpcore is built from the primitives here, so this is the one module
tuned for speed: NTT-based multiplication, Newton series inversion,
subproduct trees, and an exact blocked matrix product.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    BothZero,
    CharacteristicTooSmall,
    DegreeExceedsCharacteristic,
    DivisionByZeroPoly,
    EmptyLeafSet,
    LengthMismatch,
    NonCoprimeModuli,
)

_INT63 = 1 << 63

# ---------------------------------------------------------------------------
# primality / factoring (word-size only)

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime_u64(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 2**64."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n):
    if n % 2 == 0:
        return 2
    for c in range(1, 64):
        x = y = 2
        d = 1
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d
    raise RuntimeError("rho failed for %d" % n)


_FACTOR_CACHE = {}


def factorize(n: int) -> dict:
    """Prime factorization of a word-size integer, as {prime: exponent}."""
    if n in _FACTOR_CACHE:
        return dict(_FACTOR_CACHE[n])
    out = {}
    stack = [n]
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime_u64(m):
            out[m] = out.get(m, 0) + 1
            continue
        for q in (2, 3, 5, 7, 11, 13):
            if m % q == 0:
                out[q] = out.get(q, 0)
                while m % q == 0:
                    out[q] += 1
                    m //= q
                break
        if m > 1:
            if is_prime_u64(m):
                out[m] = out.get(m, 0) + 1
            else:
                d = _pollard_rho(m)
                stack.append(d)
                stack.append(m // d)
    _FACTOR_CACHE[n] = dict(out)
    return out


_ROOT_CACHE = {}


def primitive_root(p: int) -> int:
    if p in _ROOT_CACHE:
        return _ROOT_CACHE[p]
    fac = factorize(p - 1)
    g = 2
    while True:
        if all(pow(g, (p - 1) // q, p) != 1 for q in fac):
            _ROOT_CACHE[p] = g
            return g
        g += 1


# ---------------------------------------------------------------------------
# NTT machinery (primes < 2**31 only).  Butterfly products use Montgomery
# reduction with R = 2**32 in uint64 arithmetic: t + m*p stays below 2**64
# for any p < 2**31, and the expensive vectorized % disappears.

_NTT_TABLES = {}
_MASK32 = np.uint64(0xFFFFFFFF)


def _ntt_tables(p, size, root_of_unity):
    key = (p, size)
    tab = _NTT_TABLES.get(key)
    if tab is not None:
        return tab
    bits = size.bit_length() - 1
    rev = np.zeros(size, dtype=np.intp)
    for i in range(1, size):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
    r_mod = (1 << 32) % p
    stages = []
    inv_stages = []
    half = 1
    while half < size:
        w = pow(root_of_unity, size // (2 * half), p)
        winv = pow(w, p - 2, p)
        ws = np.empty(half, dtype=np.uint64)
        wsinv = np.empty(half, dtype=np.uint64)
        acc = acc_inv = r_mod  # Montgomery form of 1
        for j in range(half):
            ws[j] = acc
            wsinv[j] = acc_inv
            acc = acc * w % p
            acc_inv = acc_inv * winv % p
        stages.append(ws)
        inv_stages.append(wsinv)
        half *= 2
    nprime = np.uint64((-pow(p, -1, 1 << 32)) % (1 << 32))
    scale = np.uint64(pow(size, p - 2, p) * r_mod % p)
    tab = (rev, stages, inv_stages, scale, nprime)
    _NTT_TABLES[key] = tab
    return tab


def _redc(t, pu, nprime):
    """Montgomery reduction: t * 2^-32 mod p for t < p * 2^32 (uint64)."""
    m = ((t & _MASK32) * nprime) & _MASK32
    u = (t + m * pu) >> np.uint64(32)
    return u - pu * (u >= pu)


def _ntt(vec, p, tables, inverse):
    rev, stages, inv_stages, scale, nprime = tables
    pu = np.uint64(p)
    x = vec.astype(np.uint64)[rev]
    use = inv_stages if inverse else stages
    half = 1
    for ws in use:
        x = x.reshape(-1, 2 * half)
        lo = x[:, :half]
        hi = _redc(x[:, half:] * ws, pu, nprime)
        diff = lo + (pu - hi)
        x[:, half:] = diff - pu * (diff >= pu)
        tot = lo + hi
        x[:, :half] = tot - pu * (tot >= pu)
        x = x.reshape(-1)
        half *= 2
    if inverse:
        x = _redc(x * scale, pu, nprime)
    return x.astype(np.int64)


def _ntt_conv(a, b, p, root2k, max_len):
    """Product via NTT; root2k is a primitive max_len-th root of unity."""
    n = len(a) + len(b) - 1
    size = 1 << (n - 1).bit_length()
    tab = _ntt_tables(p, size, pow(root2k, max_len // size, p))
    fa = np.zeros(size, dtype=np.int64)
    fa[: len(a)] = a
    fb = np.zeros(size, dtype=np.int64)
    fb[: len(b)] = b
    fa = _ntt(fa, p, tab, False)
    fb = _ntt(fb, p, tab, False)
    return _ntt(fa * fb % p, p, tab, True)[:n]


# three NTT primes for fields without enough roots of unity
_CRT_PRIMES = (2013265921, 1811939329, 469762049)
_CRT_ADICITY = (27, 26, 26)
_CRT_ROOT2K = tuple(
    pow(g, (q - 1) >> k, q) for (q, k, g) in zip(_CRT_PRIMES, _CRT_ADICITY, (31, 13, 3))
)
_Q1, _Q2, _Q3 = _CRT_PRIMES
_INV_Q1_MOD_Q2 = pow(_Q1, _Q2 - 2, _Q2)
_INV_Q1Q2_MOD_Q3 = pow(_Q1 * _Q2 % _Q3, _Q3 - 2, _Q3)


def _crt3_conv(a, b, p):
    n = len(a) + len(b) - 1
    assert n * (p - 1) * (p - 1) < _Q1 * _Q2 * _Q3
    r = []
    for q, k, w in zip(_CRT_PRIMES, _CRT_ADICITY, _CRT_ROOT2K):
        r.append(_ntt_conv(a % q, b % q, q, w, 1 << k))
    r1, r2, r3 = r
    t1 = (r2 - r1) * _INV_Q1_MOD_Q2 % _Q2
    x12 = r1 + _Q1 * t1  # < q1*q2 < 2**62
    t2 = (r3 - x12 % _Q3) * _INV_Q1Q2_MOD_Q3 % _Q3
    return (x12 % p + (_Q1 * _Q2 % p) * t2) % p


def _conv_big(a, b, p):
    """Kronecker-substitution product through Python big integers."""
    la, lb = len(a), len(b)
    bits = 2 * p.bit_length() + min(la, lb).bit_length() + 1
    nbytes = (bits + 7) // 8
    pa = b"".join(int(c).to_bytes(nbytes, "little") for c in a)
    pb = b"".join(int(c).to_bytes(nbytes, "little") for c in b)
    prod = int.from_bytes(pa, "little") * int.from_bytes(pb, "little")
    raw = prod.to_bytes((la + lb) * nbytes, "little")
    out = np.empty(la + lb - 1, dtype=object)
    for i in range(la + lb - 1):
        out[i] = int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") % p
    return out


class PreparedConv:
    """A fixed convolution factor held in the transform domain.

    Profitable when the same polynomial multiplies many partners of bounded
    length; falls back to a plain product when no NTT applies.
    """

    __slots__ = ("field", "coeffs", "n_max", "size", "mode", "hats", "tabs")

    def __init__(self, field, coeffs, max_other_len):
        self.field = field
        self.coeffs = np.asarray(coeffs)
        self.n_max = len(self.coeffs) + max_other_len - 1
        p = field.p
        self.hats = None
        self.tabs = None
        self.size = 0
        if field.big or self.n_max <= 256:
            self.mode = "plain"
            return
        self.size = 1 << (self.n_max - 1).bit_length()
        if self.size <= field.ntt_profile.max_len:
            self.mode = "direct"
            tab = _ntt_tables(
                p, self.size, pow(field._max_ntt_root(), field.ntt_profile.max_len // self.size, p)
            )
            buf = np.zeros(self.size, dtype=np.int64)
            buf[: len(self.coeffs)] = self.coeffs
            self.hats = _ntt(buf, p, tab, False)
            self.tabs = tab
        elif p < (1 << 31):
            self.mode = "3prime"
            self.hats = []
            self.tabs = []
            for q, k, w in zip(_CRT_PRIMES, _CRT_ADICITY, _CRT_ROOT2K):
                tab = _ntt_tables(q, self.size, pow(w, (1 << k) // self.size, q))
                buf = np.zeros(self.size, dtype=np.int64)
                buf[: len(self.coeffs)] = self.coeffs % q
                self.hats.append(_ntt(buf, q, tab, False))
                self.tabs.append(tab)
        else:
            self.mode = "plain"

    def conv(self, other):
        n = len(self.coeffs) + len(other) - 1
        assert n <= max(self.n_max, 1)
        p = self.field.p
        if self.mode == "plain":
            return self.field.conv(self.coeffs, other)
        if self.mode == "direct":
            buf = np.zeros(self.size, dtype=np.int64)
            buf[: len(other)] = other
            fb = _ntt(buf, p, self.tabs, False)
            return _ntt(self.hats * fb % p, p, self.tabs, True)[:n]
        out = []
        for q, hat, tab in zip(_CRT_PRIMES, self.hats, self.tabs):
            buf = np.zeros(self.size, dtype=np.int64)
            buf[: len(other)] = other % q
            fb = _ntt(buf, q, tab, False)
            out.append(_ntt(hat * fb % q, q, tab, True)[:n])
        r1, r2, r3 = out
        t1 = (r2 - r1) * _INV_Q1_MOD_Q2 % _Q2
        x12 = r1 + _Q1 * t1
        t2 = (r3 - x12 % _Q3) * _INV_Q1Q2_MOD_Q3 % _Q3
        return (x12 % p + (_Q1 * _Q2 % p) * t2) % p


class NttProfile:
    """Roots-of-unity budget of a field: largest power-of-two transform."""

    __slots__ = ("two_adicity", "max_len")

    def __init__(self, p):
        m = p - 1
        k = 0
        while m % 2 == 0:
            m //= 2
            k += 1
        self.two_adicity = k
        self.max_len = 1 << k

    def __repr__(self):
        return "NttProfile(two_adicity=%d)" % self.two_adicity


class PrimeField:
    """Arithmetic context for F_p, p a word-size prime (2 <= p < 2**63)."""

    __slots__ = ("p", "big", "ntt_profile", "_root2k")

    def __init__(self, p: int):
        if not isinstance(p, int) or not (2 <= p < _INT63):
            raise ValueError("modulus must be an integer in [2, 2**63)")
        if not is_prime_u64(p):
            raise ValueError("%d is not prime" % p)
        self.p = p
        self.big = p >= (1 << 31)
        self.ntt_profile = NttProfile(p)
        self._root2k = None

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("PrimeField", self.p))

    def __repr__(self):
        return "PrimeField(%d)" % self.p

    # -- scalars ------------------------------------------------------
    def inv(self, x: int) -> int:
        x = int(x) % self.p
        if x == 0:
            raise ZeroDivisionError("0 is not invertible")
        return pow(x, self.p - 2, self.p)

    def inverses(self, xs):
        """Batch inversion of nonzero scalars (Montgomery's trick)."""
        xs = [int(x) % self.p for x in xs]
        pref = [1]
        for x in xs:
            pref.append(pref[-1] * x % self.p)
        inv_all = self.inv(pref[-1])
        out = [0] * len(xs)
        for i in range(len(xs) - 1, -1, -1):
            out[i] = pref[i] * inv_all % self.p
            inv_all = inv_all * xs[i] % self.p
        return out

    # -- arrays -------------------------------------------------------
    @property
    def dtype(self):
        return object if self.big else np.int64

    def arr(self, data):
        a = np.asarray(data, dtype=self.dtype)
        return a % self.p

    def zeros(self, shape):
        return np.zeros(shape, dtype=self.dtype)

    def _max_ntt_root(self):
        if self._root2k is None:
            g = primitive_root(self.p)
            self._root2k = pow(g, (self.p - 1) >> self.ntt_profile.two_adicity, self.p)
        return self._root2k

    def conv(self, a, b):
        """Full product of two coefficient vectors (no reduction step)."""
        la, lb = len(a), len(b)
        if la == 0 or lb == 0:
            return self.zeros(0)
        p = self.p
        if self.big:
            return _conv_big(a, b, p)
        n = la + lb - 1
        small = min(la, lb)
        if small <= 48 or n <= 128:
            if small * (p - 1) * (p - 1) < _INT63:
                return np.convolve(a, b) % p
            hi, lo = divmod(np.asarray(a, dtype=np.int64), 1 << 15)
            return (np.convolve(hi, b) % p * (1 << 15) + np.convolve(lo, b)) % p
        size = 1 << (n - 1).bit_length()
        if size <= self.ntt_profile.max_len:
            return _ntt_conv(
                np.asarray(a, np.int64),
                np.asarray(b, np.int64),
                p,
                self._max_ntt_root(),
                self.ntt_profile.max_len,
            )
        return _crt3_conv(np.asarray(a, np.int64), np.asarray(b, np.int64), p)

    def corr(self, a, v):
        """Correlation sum_t v[t]*a[i+t] for i = 0 .. len(a)-len(v)."""
        c = self.conv(a, v[::-1])
        return c[len(v) - 1 : len(a)]

    def matmul(self, A, B):
        return modmatmul(A, B, self.p)

    def nd_conv(self, a, b):
        """Full multidimensional convolution via Kronecker packing."""
        if a.ndim == 1:
            return self.conv(a, b)
        widths = [sa + sb - 1 for sa, sb in zip(a.shape, b.shape)]
        pa = np.zeros((a.shape[0],) + tuple(widths[1:]), dtype=self.dtype)
        pa[tuple(slice(0, s) for s in a.shape)] = a
        pb = np.zeros((b.shape[0],) + tuple(widths[1:]), dtype=self.dtype)
        pb[tuple(slice(0, s) for s in b.shape)] = b
        flat = self.conv(pa.reshape(-1), pb.reshape(-1))
        total = 1
        for w in widths:
            total *= w
        out = np.zeros(total, dtype=self.dtype)
        m = min(total, len(flat))
        out[:m] = flat[:m]
        return out.reshape(widths)


# ---------------------------------------------------------------------------
# exact matrix product mod p

STRASSEN_THRESHOLD = 256
_STRASSEN_ENABLED = False


def set_strassen(enabled: bool):
    global _STRASSEN_ENABLED
    _STRASSEN_ENABLED = bool(enabled)


def _matmul_limbs(A, B, p):
    # float64 dgemm on 15/16-bit limbs; every partial sum stays below 2**53
    k = A.shape[1]
    if k == 0:
        return np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    if k * (p - 1) * (p - 1) < (1 << 53):
        C = np.rint(A.astype(np.float64) @ B.astype(np.float64)).astype(np.int64)
        return C % p
    out = None
    for s in range(0, k, 1 << 20):
        As = A[:, s : s + (1 << 20)]
        Bs = B[s : s + (1 << 20)]
        a_hi, a_lo = np.divmod(As, 1 << 15)
        b_hi, b_lo = np.divmod(Bs, 1 << 16)
        a_hi = a_hi.astype(np.float64)
        a_lo = a_lo.astype(np.float64)
        b_hi = b_hi.astype(np.float64)
        b_lo = b_lo.astype(np.float64)
        c = np.rint(a_hi @ b_hi).astype(np.int64) % p * ((1 << 31) % p) % p
        c = (c + np.rint(a_hi @ b_lo).astype(np.int64) % p * (1 << 15)) % p
        c = (c + np.rint(a_lo @ b_hi).astype(np.int64) % p * (1 << 16)) % p
        c = (c + np.rint(a_lo @ b_lo).astype(np.int64) % p) % p
        out = c if out is None else (out + c) % p
    return out


def _strassen(A, B, p):
    n, k = A.shape
    m = B.shape[1]
    if max(n, k, m) <= STRASSEN_THRESHOLD:
        return _matmul_limbs(A, B, p)
    h = (max(n, k, m) + 1) // 2
    Ap = np.zeros((2 * h, 2 * h), dtype=np.int64)
    Bp = np.zeros((2 * h, 2 * h), dtype=np.int64)
    Ap[:n, :k] = A
    Bp[:k, :m] = B
    a11, a12, a21, a22 = Ap[:h, :h], Ap[:h, h:], Ap[h:, :h], Ap[h:, h:]
    b11, b12, b21, b22 = Bp[:h, :h], Bp[:h, h:], Bp[h:, :h], Bp[h:, h:]
    m1 = _strassen((a11 + a22) % p, (b11 + b22) % p, p)
    m2 = _strassen((a21 + a22) % p, b11, p)
    m3 = _strassen(a11, (b12 - b22) % p, p)
    m4 = _strassen(a22, (b21 - b11) % p, p)
    m5 = _strassen((a11 + a12) % p, b22, p)
    m6 = _strassen((a21 - a11) % p, (b11 + b12) % p, p)
    m7 = _strassen((a12 - a22) % p, (b21 + b22) % p, p)
    C = np.zeros((2 * h, 2 * h), dtype=np.int64)
    C[:h, :h] = (m1 + m4 - m5 + m7) % p
    C[:h, h:] = (m3 + m5) % p
    C[h:, :h] = (m2 + m4) % p
    C[h:, h:] = (m1 - m2 + m3 + m6) % p
    return C[:n, :m]


def modmatmul(A, B, p):
    """Exact C = A @ B mod p.  Classical blocked product; optional Strassen
    recursion above STRASSEN_THRESHOLD when enabled via set_strassen()."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if A.dtype == object or B.dtype == object or p >= (1 << 31):
        return np.dot(A.astype(object), B.astype(object)) % p
    if _STRASSEN_ENABLED and max(A.shape[0], A.shape[1], B.shape[1]) > STRASSEN_THRESHOLD:
        return _strassen(A % p, B % p, p)
    return _matmul_limbs(A % p, B % p, p)


# ---------------------------------------------------------------------------
# polynomials


class Poly:
    """Dense univariate polynomial over F_p.

    coeffs[i] is the coefficient of X**i; the array is trimmed so the last
    entry is nonzero (the zero polynomial is the empty array).
    """

    __slots__ = ("field", "coeffs")

    def __init__(self, field: PrimeField, coeffs):
        self.field = field
        a = field.arr(coeffs)
        n = len(a)
        while n > 0 and a[n - 1] == 0:
            n -= 1
        self.coeffs = a[:n]

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, field):
        return cls(field, [])

    @classmethod
    def one(cls, field):
        return cls(field, [1])

    @classmethod
    def x(cls, field):
        return cls(field, [0, 1])

    @classmethod
    def constant(cls, field, c):
        return cls(field, [c % field.p])

    @classmethod
    def from_roots(cls, field, roots):
        leaves = [cls(field, [(-r) % field.p, 1]) for r in roots]
        if not leaves:
            return cls.one(field)
        while len(leaves) > 1:
            nxt = [
                poly_mul(leaves[i], leaves[i + 1]) if i + 1 < len(leaves) else leaves[i]
                for i in range(0, len(leaves), 2)
            ]
            leaves = nxt
        return leaves[0]

    # -- basics -------------------------------------------------------
    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return len(self.coeffs) == 0

    def is_one(self):
        return len(self.coeffs) == 1 and self.coeffs[0] == 1

    def __eq__(self, other):
        return (
            isinstance(other, Poly)
            and other.field.p == self.field.p
            and len(other.coeffs) == len(self.coeffs)
            and bool(np.all(other.coeffs == self.coeffs))
        )

    def __hash__(self):
        return hash((self.field.p, tuple(int(c) for c in self.coeffs)))

    def __repr__(self):
        if self.is_zero():
            return "Poly<0 mod %d>" % self.field.p
        terms = []
        for i in range(self.degree, -1, -1):
            c = int(self.coeffs[i])
            if c:
                terms.append("%d*X^%d" % (c, i))
        return "Poly<%s mod %d>" % (" + ".join(terms), self.field.p)

    def lead(self):
        if self.is_zero():
            raise ValueError("zero polynomial has no leading coefficient")
        return int(self.coeffs[-1])

    def is_monic(self):
        return not self.is_zero() and self.coeffs[-1] == 1

    def monic(self):
        if self.is_zero():
            raise ValueError("cannot normalize the zero polynomial")
        if self.is_monic():
            return self
        inv = self.field.inv(self.lead())
        return Poly(self.field, self.coeffs * inv % self.field.p)

    def scale(self, c):
        return Poly(self.field, self.coeffs * (c % self.field.p) % self.field.p)

    def __add__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.field.zeros(n)
        a[: len(self.coeffs)] = self.coeffs
        a[: len(other.coeffs)] = (a[: len(other.coeffs)] + other.coeffs) % self.field.p
        return Poly(self.field, a)

    def __sub__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.field.zeros(n)
        a[: len(self.coeffs)] = self.coeffs
        a[: len(other.coeffs)] = (a[: len(other.coeffs)] - other.coeffs) % self.field.p
        return Poly(self.field, a)

    def __neg__(self):
        return Poly(self.field, (-self.coeffs) % self.field.p)

    def __mul__(self, other):
        return poly_mul(self, other)

    def shift(self, k):
        """Multiply by X**k."""
        if self.is_zero():
            return self
        a = self.field.zeros(len(self.coeffs) + k)
        a[k:] = self.coeffs
        return Poly(self.field, a)

    def derivative(self):
        if self.degree < 1:
            return Poly.zero(self.field)
        idx = np.arange(1, len(self.coeffs), dtype=self.field.dtype)
        return Poly(self.field, self.coeffs[1:] * idx % self.field.p)

    def evaluate(self, x):
        acc = 0
        p = self.field.p
        x = int(x) % p
        for c in self.coeffs[::-1]:
            acc = (acc * x + int(c)) % p
        return acc

    def evaluate_many(self, xs):
        p = self.field.p
        acc = np.zeros(len(xs), dtype=self.field.dtype)
        xs = np.asarray(xs, dtype=self.field.dtype) % p
        for c in self.coeffs[::-1]:
            acc = (acc * xs + c) % p
        return acc

    def reversed(self, k=None):
        """rev(f, k) = X**k * f(1/X); k defaults to deg(f)."""
        if k is None:
            k = max(self.degree, 0)
        return Poly(self.field, rev_coeffs(self.field, self.coeffs, k))


def _trim(field, arr):
    return Poly(field, arr)


def rev_coeffs(field, coeffs, k):
    """Coefficient array of X**k * f(1/X) for f given by coeffs (len <= k+1)."""
    a = field.zeros(k + 1)
    a[: len(coeffs)] = coeffs
    return a[::-1].copy()


def poly_add(a: Poly, b: Poly) -> Poly:
    return a + b


def poly_sub(a: Poly, b: Poly) -> Poly:
    return a - b


def poly_mul(a: Poly, b: Poly) -> Poly:
    if a.field.p != b.field.p:
        raise ValueError("operands live in different fields")
    if a.is_zero() or b.is_zero():
        return Poly.zero(a.field)
    return Poly(a.field, a.field.conv(a.coeffs, b.coeffs))


# -- series helpers ---------------------------------------------------------


def inv_series(f, n, field):
    """First n coefficients of 1/f for a coefficient array with f[0] != 0."""
    p = field.p
    g = field.zeros(1)
    g[0] = field.inv(int(f[0]))
    k = 1
    f = np.asarray(f)
    while k < n:
        k2 = min(2 * k, n)
        fg = field.conv(f[:k2], g)[:k2]
        # g <- g*(2 - f*g) mod x^k2
        t = (-fg) % p
        t[0] = (t[0] + 2) % p
        g = field.conv(g, t)[:k2]
        k = k2
    if len(g) < n:
        g = np.concatenate([g, field.zeros(n - len(g))])
    return g[:n]


def div_series(a, b, n, field):
    """First n coefficients of a/b (b[0] invertible)."""
    if len(a) == 0:
        return field.zeros(n)
    binv = inv_series(b, n, field)
    out = field.conv(a[:n], binv)[:n]
    if len(out) < n:
        out = np.concatenate([out, field.zeros(n - len(out))])
    return out


def log_series(f, n, field):
    """log of a series with f[0] == 1, to n terms; needs p > n-1."""
    p = field.p
    if n - 1 >= p:
        raise CharacteristicTooSmall("series log needs p > %d" % (n - 1))
    if len(f) < n:
        f = np.concatenate([f, field.zeros(n - len(f))])
    df = f[1:n] * np.arange(1, n, dtype=field.dtype) % p
    q = div_series(df, f[:n], n - 1, field)
    out = field.zeros(n)
    if n > 1:
        invs = field.inverses(range(1, n))
        out[1:] = q * field.arr(invs) % p
    return out


def exp_series(s, n, field):
    """exp of a series with s[0] == 0, to n terms (Newton); needs p > n-1."""
    p = field.p
    if n - 1 >= p:
        raise CharacteristicTooSmall("series exp needs p > %d" % (n - 1))
    if len(s) < n:
        s = np.concatenate([field.arr(s), field.zeros(n - len(s))])
    e = field.zeros(1)
    e[0] = 1
    k = 1
    while k < n:
        k2 = min(2 * k, n)
        l = log_series(e, k2, field)
        t = (s[:k2] - l) % p
        t[0] = (t[0] + 1) % p
        e = field.conv(e, t)[:k2]
        k = k2
    if len(e) < n:
        e = np.concatenate([e, field.zeros(n - len(e))])
    return e[:n]


# -- division, gcd ----------------------------------------------------------

_DIVREM_SERIES_MIN = 48


def poly_divrem(a: Poly, b: Poly):
    """Euclidean division: a = q*b + r with deg r < deg b."""
    if b.is_zero():
        raise DivisionByZeroPoly("division by the zero polynomial")
    field = a.field
    p = field.p
    da, db = a.degree, b.degree
    if da < db:
        return Poly.zero(field), a
    if db == 0:
        inv = field.inv(b.lead())
        return Poly(field, a.coeffs * inv % p), Poly.zero(field)
    qlen = da - db + 1
    if qlen >= _DIVREM_SERIES_MIN and db >= _DIVREM_SERIES_MIN:
        ra = rev_coeffs(field, a.coeffs, da)
        rb = rev_coeffs(field, b.coeffs, db)
        qr = div_series(ra, rb, qlen, field)
        q = qr[::-1].copy()
        qb = field.conv(q, b.coeffs)[:db]
        r = (a.coeffs[:db] - qb) % p
        return Poly(field, q), Poly(field, r)
    r = a.coeffs.copy()
    q = field.zeros(qlen)
    lead_inv = None if b.is_monic() else field.inv(b.lead())
    bl = b.coeffs[:db]
    for k in range(qlen - 1, -1, -1):
        c = int(r[k + db])
        if lead_inv is not None:
            c = c * lead_inv % p
        if c:
            q[k] = c
            r[k : k + db] = (r[k : k + db] - c * bl) % p
        r[k + db] = 0
    return Poly(field, q), Poly(field, r[:db])


def poly_rem(a: Poly, b: Poly) -> Poly:
    return poly_divrem(a, b)[1]


def poly_quo(a: Poly, b: Poly) -> Poly:
    q, r = poly_divrem(a, b)
    if not r.is_zero():
        raise ValueError("division is not exact")
    return q


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd; gcd(a, 0) = monic(a)."""
    if a.is_zero() and b.is_zero():
        raise BothZero("gcd(0, 0) is undefined")
    while not b.is_zero():
        a, b = b, poly_rem(a, b)
    return a.monic()


def poly_xgcd(a: Poly, b: Poly):
    """Monic g and u, v with u*a + v*b = g."""
    if a.is_zero() and b.is_zero():
        raise BothZero("xgcd(0, 0) is undefined")
    field = a.field
    r0, r1 = a, b
    u0, u1 = Poly.one(field), Poly.zero(field)
    v0, v1 = Poly.zero(field), Poly.one(field)
    while not r1.is_zero():
        q, r = poly_divrem(r0, r1)
        r0, r1 = r1, r
        u0, u1 = u1, u0 - poly_mul(q, u1)
        v0, v1 = v1, v0 - poly_mul(q, v1)
    c = field.inv(r0.lead())
    return r0.scale(c), u0.scale(c), v0.scale(c)


def poly_invmod(a: Poly, m: Poly) -> Poly:
    g, u, _ = poly_xgcd(a, m)
    if g.degree != 0:
        raise NonCoprimeModuli("element is not invertible modulo the modulus")
    return poly_rem(u, m)


# -- squarefree decomposition (Yun) -----------------------------------------


def squarefree_decomposition(a: Poly):
    """a = prod C_k**r_k with C_k monic squarefree pairwise coprime and the
    r_k strictly increasing.  Needs deg(a) < p."""
    if a.is_zero() or not a.is_monic():
        raise ValueError("input must be monic and nonzero")
    field = a.field
    if a.degree >= field.p:
        raise DegreeExceedsCharacteristic(
            "degree %d >= characteristic %d" % (a.degree, field.p)
        )
    if a.degree == 0:
        return []
    da = a.derivative()
    g = poly_gcd(a, da)
    if g.degree == 0:
        return [(a, 1)]
    v = poly_quo(a, g)
    w = poly_quo(da, g)
    out = []
    i = 1
    while v.degree > 0:
        z = w - v.derivative()
        h = poly_gcd(v, z) if not z.is_zero() else v.monic()
        if h.degree > 0:
            out.append((h, i))
        v = poly_quo(v, h)
        if v.degree == 0:
            break
        w = poly_quo(z, h)
        i += 1
    return out


def squarefree_part(a: Poly) -> Poly:
    g = poly_gcd(a, a.derivative()) if a.degree >= 1 else Poly.one(a.field)
    if g.degree == 0:
        return a.monic()
    return poly_quo(a.monic(), g)


def is_squarefree(a: Poly) -> bool:
    if a.degree <= 1:
        return True
    return poly_gcd(a, a.derivative()).degree == 0


# -- subproduct tree --------------------------------------------------------


class SubproductTree:
    """Binary tree of partial products; levels[0] is [root], levels[-1] the
    padded leaves (padding uses the constant polynomial 1)."""

    __slots__ = ("levels", "leaf_count")

    def __init__(self, levels, leaf_count):
        self.levels = levels
        self.leaf_count = leaf_count

    @property
    def root(self):
        return self.levels[0][0]


def build_subproduct_tree(leaves) -> SubproductTree:
    leaves = list(leaves)
    if not leaves:
        raise EmptyLeafSet("subproduct tree needs at least one leaf")
    field = leaves[0].field
    for f in leaves:
        if not f.is_monic():
            raise ValueError("all leaves must be monic")
    s = len(leaves)
    size = 1 << max(0, (s - 1).bit_length())
    padded = leaves + [Poly.one(field)] * (size - s)
    levels = [padded]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        levels.append([poly_mul(prev[2 * i], prev[2 * i + 1]) for i in range(len(prev) // 2)])
    levels.reverse()
    return SubproductTree(levels, s)


def multi_reduce(a: Poly, moduli) -> list:
    """a mod m for every m in moduli, descending a subproduct tree."""
    moduli = list(moduli)
    tree = build_subproduct_tree(moduli)
    rems = [poly_rem(a, tree.root)]
    for level in tree.levels[1:]:
        rems = [poly_rem(rems[i // 2], node) for i, node in enumerate(level)]
    return rems[: len(moduli)]


def crt_combine(residues, moduli) -> Poly:
    """Unique polynomial of degree < sum(deg) matching every residue."""
    residues = list(residues)
    moduli = list(moduli)
    if len(residues) != len(moduli):
        raise LengthMismatch("residue and modulus counts differ")
    if not moduli:
        raise EmptyLeafSet("nothing to combine")
    for r, m in zip(residues, moduli):
        if r.degree >= m.degree and m.degree > 0:
            raise ValueError("residue degree must be below its modulus degree")

    def rec(lo, hi):
        if hi - lo == 1:
            return residues[lo], moduli[lo]
        mid = (lo + hi) // 2
        xl, ml = rec(lo, mid)
        xr, mr = rec(mid, hi)
        if ml.degree == 0:
            return xr, mr
        if mr.degree == 0:
            return xl, ml
        g, u, _ = poly_xgcd(ml, mr)
        if g.degree != 0:
            raise NonCoprimeModuli("moduli share a nontrivial factor")
        t = poly_rem(poly_mul(xr - xl, u), mr)
        return xl + poly_mul(ml, t), poly_mul(ml, mr)

    return rec(0, len(moduli))[0]


# -- power sums -> polynomial -----------------------------------------------


def poly_from_power_sums(s, d: int, field: PrimeField) -> Poly:
    """Monic polynomial of degree d with prescribed power sums.

    s lists s_1..s_d; a leading s_0 entry is accepted and ignored when
    len(s) > d.  Uses rev(chi) = exp(-sum s_i T^i / i), so p > d is required.
    """
    if field.p <= d:
        raise CharacteristicTooSmall("need p > %d" % d)
    s = [int(x) % field.p for x in s]
    if len(s) > d:
        s = s[1 : d + 1]
    if len(s) < d:
        raise LengthMismatch("need at least %d power sums" % d)
    if d == 0:
        return Poly.one(field)
    series = field.zeros(d + 1)
    series[1:] = field.arr(s)
    series = (-series) % field.p
    if d >= 1:
        invs = field.arr(field.inverses(range(1, d + 1)))
        series[1:] = series[1:] * invs % field.p
    e = exp_series(series, d + 1, field)
    return Poly(field, e[::-1].copy())


# -- transposed multiple reduction ------------------------------------------


def form_numerator(values, modulus: Poly):
    """Numerator N with sum values[j] T^j = N / rev(modulus) as power series."""
    field = modulus.field
    d = modulus.degree
    if len(values) != d:
        raise LengthMismatch("form table must match the modulus degree")
    if d == 0:
        return field.zeros(0)
    rm = rev_coeffs(field, modulus.coeffs, d)
    return field.conv(field.arr(values), rm)[:d]


def extend_form_values(values, modulus: Poly, length: int):
    """values[j] = ell(X^j mod modulus) extended to j < length."""
    field = modulus.field
    d = modulus.degree
    if d == 0:
        return field.zeros(length)
    num = form_numerator(values, modulus)
    rm = rev_coeffs(field, modulus.coeffs, d)
    return div_series(num, rm, length, field)


def transposed_multi_reduce(forms, moduli, e: int):
    """output[j] = sum_i ell_i(X^j mod R_i) for j < e.

    forms[i] is the value table of ell_i on the monomial basis of
    K[X]/<R_i>.  Fractions N_i/rev(R_i) are summed up a subproduct tree of
    the reversed moduli, then expanded by one series division.
    """
    moduli = list(moduli)
    forms = list(forms)
    if len(forms) != len(moduli):
        raise LengthMismatch("form and modulus counts differ")
    if not moduli:
        raise EmptyLeafSet("no moduli to sum over")
    field = moduli[0].field
    for f, m in zip(forms, moduli):
        if len(f) != m.degree:
            raise LengthMismatch("form table must match its modulus degree")

    def rec(lo, hi):
        if hi - lo == 1:
            m = moduli[lo]
            num = Poly(field, form_numerator(forms[lo], m))
            den = Poly(field, rev_coeffs(field, m.coeffs, max(m.degree, 0)))
            return num, den
        mid = (lo + hi) // 2
        nl, dl = rec(lo, mid)
        nr, dr = rec(mid, hi)
        return poly_mul(nl, dr) + poly_mul(nr, dl), poly_mul(dl, dr)

    num, den = rec(0, len(moduli))
    return div_series(num.coeffs, den.coeffs, e, field)
