"""Univariate representations and triangular <-> univariate conversions.

A univariate representation (P, U_1..U_n, mu) encodes a zero-dimensional
set V through x -> mu(x) and x_i = U_i(mu(x)); P is squarefree and all the
set-theoretic work happens in K[X]/<P>.  Conversions to and from triangular
sets proceed one variable at a time; every conversion returns an opaque
receipt so elements can be pushed and pulled along the same tower without
recomputing it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    CharacteristicTooSmall,
    NotEquiprojectable,
    NotSeparating,
    RadicalitySuspect,
    RetryBudgetExhausted,
    StaleConversionData,
)
from .fpcore import (
    Poly,
    PrimeField,
    crt_combine,
    is_squarefree,
    poly_gcd,
    poly_invmod,
    poly_mul,
    poly_quo,
    poly_rem,
    rev_coeffs,
    squarefree_decomposition,
)
from .tring import (
    DegreeBounds,
    LinearForm,
    ResidueElement,
    TriangularSet,
    _express_in_subalgebra,
    _tower_series_quotient,
    char_poly,
    mod_compose,
    power_project,
    reduce as ring_reduce,
    trace_form,
)

DEFAULT_RETRY_BUDGET = 64

_MASK64 = (1 << 64) - 1


class Rng:
    """Deterministic splitmix64 stream; same seed, same draws, always."""

    __slots__ = ("_state",)

    def __init__(self, seed: int = 0):
        self._state = seed & _MASK64

    def _next(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, k: int) -> int:
        """Uniform draw in [0, k) by rejection."""
        if k <= 0:
            raise ValueError("bound must be positive")
        limit = ((1 << 64) // k) * k
        while True:
            v = self._next()
            if v < limit:
                return v % k

    def fork(self):
        return Rng(self._next())


class RetryStats:
    """Attempt counts of every Las Vegas loop, for the statistical checks."""

    def __init__(self):
        self.attempts = []
        self.exhausted = 0

    def record(self, n):
        self.attempts.append(n)

    def record_exhausted(self):
        self.exhausted += 1

    def reset(self):
        self.attempts.clear()
        self.exhausted = 0

    @property
    def mean(self):
        return sum(self.attempts) / len(self.attempts) if self.attempts else 0.0

    @property
    def max(self):
        return max(self.attempts) if self.attempts else 0


RETRY_STATS = RetryStats()


def random_form(field: PrimeField, n: int, delta: int, rng: Rng, fix_last=False):
    """Random separating-form candidate, coefficients in {0..delta^2-1}."""
    bound = max(delta * delta, 1)
    if field.p <= delta * delta:
        raise CharacteristicTooSmall(
            "p = %d is not above delta^2 = %d" % (field.p, delta * delta)
        )
    out = [rng.below(bound) for _ in range(n)]
    if fix_last:
        out[-1] = 1
    return tuple(out)


class UnivariateRep:
    """(P, U_1..U_n, mu) with P squarefree and x_i = U_i(mu(x)) on V."""

    __slots__ = ("field", "vars", "p", "u", "mu")

    def __init__(self, field, vars, p: Poly, u, mu):
        self.field = field
        self.vars = tuple(vars)
        if not p.is_monic():
            raise ValueError("P must be monic")
        self.p = p
        u = tuple(u)
        if len(u) != len(self.vars):
            raise ValueError("one parametrization per variable")
        for ui in u:
            if ui.degree >= max(p.degree, 1) and p.degree >= 1:
                raise ValueError("parametrization degree must be below deg P")
        self.u = tuple(poly_rem(ui, p) if p.degree >= 1 else Poly.zero(field) for ui in u)
        self.mu = tuple(int(m) % field.p for m in mu)
        if len(self.mu) != len(self.vars):
            raise ValueError("one form coefficient per variable")

    @classmethod
    def empty(cls, field, vars):
        n = len(vars)
        return cls(field, vars, Poly.one(field), [Poly.zero(field)] * n, [0] * n)

    @property
    def degree(self):
        return self.p.degree

    @property
    def n(self):
        return len(self.vars)

    def is_empty(self):
        return self.p.degree == 0

    def validate(self):
        """Full invariant check: squarefree P and the section identity."""
        if not is_squarefree(self.p):
            raise ValueError("P is not squarefree")
        if self.p.degree == 0:
            return True
        acc = Poly.zero(self.field)
        for m, ui in zip(self.mu, self.u):
            acc = acc + ui.scale(m)
        if not poly_rem(acc - Poly.x(self.field), self.p).is_zero():
            raise ValueError("section identity sum mu_i U_i = X fails")
        return True

    def permuted(self, order):
        """Relabel coordinates to a new variable order; P is unchanged."""
        order = tuple(order)
        if sorted(order) != sorted(self.vars):
            raise ValueError("order must permute the variable set")
        idx = [self.vars.index(v) for v in order]
        return UnivariateRep(
            self.field, order, self.p, [self.u[i] for i in idx], [self.mu[i] for i in idx]
        )

    def __eq__(self, other):
        return (
            isinstance(other, UnivariateRep)
            and other.field.p == self.field.p
            and other.vars == self.vars
            and other.p == self.p
            and other.u == self.u
            and other.mu == self.mu
        )

    def __repr__(self):
        return "UnivariateRep(p=%d, vars=%s, deg=%d, mu=%s)" % (
            self.field.p,
            self.vars,
            self.degree,
            self.mu,
        )


def _uni_tset(p: Poly) -> TriangularSet:
    return TriangularSet(p.field, [p.coeffs], vars=("_Z",))


def _poly_elt(tset: TriangularSet, p: Poly) -> ResidueElement:
    return ResidueElement.from_poly(tset, p)


# ---------------------------------------------------------------------------
# change of separating form


def change_separating(u: UnivariateRep, nu) -> UnivariateRep:
    """Rewrite u on the linear form nu, or raise NotSeparating."""
    field = u.field
    nu = tuple(int(x) % field.p for x in nu)
    if len(nu) != u.n:
        raise ValueError("form arity mismatch")
    if u.is_empty():
        return UnivariateRep(field, u.vars, Poly.one(field), u.u, nu)
    if field.p <= u.degree:
        raise CharacteristicTooSmall("change of form needs p > deg P")
    ts = _uni_tset(u.p)
    n_poly = Poly.zero(field)
    for c, ui in zip(nu, u.u):
        n_poly = n_poly + ui.scale(c)
    n_poly = poly_rem(n_poly, u.p)
    n_elt = _poly_elt(ts, n_poly)
    q = char_poly(n_elt, ts)
    if not is_squarefree(q):
        raise NotSeparating("candidate form does not separate the set")
    exprs = _express_in_subalgebra([_poly_elt(ts, ui) for ui in u.u], n_elt, ts, q)
    if exprs is None:
        raise NotSeparating("coordinates are not polynomials in the new form")
    return UnivariateRep(field, u.vars, q, exprs, nu)


# ---------------------------------------------------------------------------
# set-theoretic merges (Las Vegas over a shared separating form)


def _merge(u: UnivariateRep, v: UnivariateRep, rng: Rng, max_retries):
    field = u.field
    if field.p != v.field.p or u.vars != v.vars:
        raise ValueError("representations live in different settings")
    if u.is_empty():
        return v, UnivariateRep.empty(field, u.vars)
    if v.is_empty():
        return u, u
    delta = u.degree + v.degree
    for attempt in range(1, max_retries + 1):
        lam = random_form(field, u.n, delta, rng)
        try:
            up = change_separating(u, lam)
            vp = change_separating(v, lam)
        except NotSeparating:
            continue
        s = poly_gcd(up.p, vp.p)
        p2 = poly_quo(up.p, s)
        q2 = poly_quo(vp.p, s)
        if s.degree > 0:
            t_side = [poly_rem(ui, s) for ui in up.u]
            w_side = [poly_rem(vi, s) for vi in vp.u]
            if any(a != b for a, b in zip(t_side, w_side)):
                continue  # lambda collides across V and W
        else:
            t_side = [Poly.zero(field)] * u.n
        RETRY_STATS.record(attempt)
        union_p = poly_mul(poly_mul(p2, s), q2)
        union_u = []
        for i in range(u.n):
            union_u.append(
                crt_combine(
                    [poly_rem(up.u[i], p2), t_side[i], poly_rem(vp.u[i], q2)],
                    [p2, s, q2],
                )
            )
        union = UnivariateRep(field, u.vars, union_p, union_u, lam)
        diff = UnivariateRep(field, u.vars, p2, [poly_rem(ui, p2) for ui in up.u], lam)
        return union, diff
    RETRY_STATS.record_exhausted()
    raise RetryBudgetExhausted("no separating form found for the merge")


def merge_union(u, v, rng, max_retries=DEFAULT_RETRY_BUDGET) -> UnivariateRep:
    return _merge(u, v, rng, max_retries)[0]


def merge_difference(u, v, rng, max_retries=DEFAULT_RETRY_BUDGET) -> UnivariateRep:
    return _merge(u, v, rng, max_retries)[1]


# ---------------------------------------------------------------------------
# conversion receipts


@dataclass
class _Stage:
    """One level of a conversion tower.

    Bidirectional bridge between K[X]/<base> and the two-variable ring
    R_pair: `lift` is the image of X in R_pair (expanding one axis into
    two), proj_low/proj_high are the images of the pair variables in
    K[X]/<base> (merging two axes into one).
    """

    pair: TriangularSet
    base: Poly
    lift: ResidueElement
    proj_low: Poly
    proj_high: Poly

    def merge_axes(self, arr):
        field = self.pair.field
        base_ts = _uni_tset(self.base)
        g = [_poly_elt(base_ts, self.proj_low), _poly_elt(base_ts, self.proj_high)]
        bounds = DegreeBounds((self.pair.d[0], self.pair.d[1]))
        lead = arr.shape[:-2]
        out = field.zeros(lead + (self.base.degree,))
        for idx in np.ndindex(lead):
            out[idx] = mod_compose(arr[idx], g, base_ts, bounds).coeffs
        return out

    def expand_axis(self, arr):
        field = self.pair.field
        lead = arr.shape[:-1]
        out = field.zeros(lead + self.pair.shape)
        bounds = DegreeBounds((arr.shape[-1],))
        for idx in np.ndindex(lead):
            out[idx] = mod_compose(arr[idx], [self.lift], self.pair, bounds).coeffs
        return out


@dataclass
class _NormStage:
    """Change of separating form at the univariate level."""

    p_orig: Poly
    p_norm: Poly
    x_norm_in_orig: Poly  # image of the normalized variable mod p_orig
    x_orig_in_norm: Poly

    def to_orig(self, g: Poly) -> Poly:
        ts = _uni_tset(self.p_orig)
        return mod_compose(g, [_poly_elt(ts, self.x_norm_in_orig)], ts).to_poly()

    def to_norm(self, g: Poly) -> Poly:
        ts = _uni_tset(self.p_norm)
        return mod_compose(g, [_poly_elt(ts, self.x_orig_in_norm)], ts).to_poly()


@dataclass
class ConversionReceipt:
    """Pairing data between a UnivariateRep and a TriangularSet.

    stages run bottom-up: stages[0] merges the two lowest variables.
    """

    urep: UnivariateRep
    triset: TriangularSet
    stages: list
    norm: _NormStage = None


def push_element(a: ResidueElement, receipt: ConversionReceipt) -> Poly:
    """Image of a in K[X]/<P> along the receipt's tower."""
    t = receipt.triset
    if a.tset.shape != t.shape or a.tset.field.p != t.field.p or a.tset != t:
        raise StaleConversionData("element does not belong to the receipt's ring")
    arr = a.coeffs
    for stage in receipt.stages:
        arr = stage.merge_axes(arr)
    while arr.ndim > 1:
        arr = arr[0]  # length-one leading axes from a univariate chain
    g = Poly(t.field, arr)
    if receipt.norm is not None:
        g = receipt.norm.to_orig(g)
    return g


def pull_element(g: Poly, receipt: ConversionReceipt) -> ResidueElement:
    """Preimage in R_T of a residue class mod P."""
    t = receipt.triset
    if g.field.p != t.field.p:
        raise StaleConversionData("element does not belong to the receipt's field")
    if g.degree >= max(receipt.urep.degree, 1):
        raise StaleConversionData("degree exceeds the receipt's modulus")
    if receipt.norm is not None:
        g = receipt.norm.to_norm(g)
    width = receipt.stages[-1].base.degree if receipt.stages else t.d[0]
    arr = t.field.zeros(width)
    arr[: len(g.coeffs)] = g.coeffs
    for stage in reversed(receipt.stages):
        arr = stage.expand_axis(arr)
    while arr.ndim < t.n:
        arr = arr[None, ...]
    return ResidueElement(t, arr)


# ---------------------------------------------------------------------------
# triangular set -> univariate representation


def urep_from_triset(T: TriangularSet, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET):
    """Univariate representation of V(T), with its conversion receipt."""
    field = T.field
    n = T.n
    if n == 1:
        p = T.t1
        if not is_squarefree(p):
            raise RadicalitySuspect("T_1 is not squarefree")
        x_mod = poly_rem(Poly.x(field), p)
        u = UnivariateRep(field, T.vars, p, [x_mod], [1])
        return u, ConversionReceipt(u, T, [])
    chain = [np.array(T.polys[0]), *(np.array(a) for a in T.polys[1:])]
    stages = []
    weight = None  # composite form coefficients over the original variables
    for level in range(n - 1):
        pair = TriangularSet(field, chain[:2], vars=("_A", "_B"))
        chi = None
        n_elt = None
        for attempt in range(1, max_retries + 1):
            lam = random_form(field, 2, pair.delta, rng)
            n_elt = ring_reduce({(1, 0): lam[0], (0, 1): lam[1]}, pair)
            chi = char_poly(n_elt, pair)
            if is_squarefree(chi):
                RETRY_STATS.record(attempt)
                break
        else:
            RETRY_STATS.record_exhausted()
            raise RadicalitySuspect(
                "no separating form for an intermediate pair; input may not be radical"
            )
        coords = [
            ring_reduce({(1, 0): 1}, pair),
            ring_reduce({(0, 1): 1}, pair),
        ]
        exprs = _express_in_subalgebra(coords, n_elt, pair, chi)
        if exprs is None:
            raise RadicalitySuspect("coordinate recovery failed on a separating form")
        u_a, u_b = exprs
        stages.append(_Stage(pair, chi, n_elt, u_a, u_b))
        if weight is None:
            weight = [lam[0], lam[1]] + [0] * (n - 2)
        else:
            weight = [c * lam[0] % field.p for c in weight]
            weight[level + 1] = lam[1]
        stage = stages[-1]
        chain = [np.array(chi.coeffs)] + [stage.merge_axes(arr) for arr in chain[2:]]
    p_final = Poly(field, chain[0])
    receipt = ConversionReceipt(None, T, stages)
    us = []
    for i in range(n):
        coord = ring_reduce({(0,) * i + (1,): 1}, T)
        arr = coord.coeffs
        for stage in stages:
            arr = stage.merge_axes(arr)
        us.append(Poly(field, arr))
    u = UnivariateRep(field, T.vars, p_final, us, weight)
    receipt.urep = u
    return u, receipt


# ---------------------------------------------------------------------------
# univariate representation -> triangular set


def _tower_exp_neg_sums(s_rows, d, q_poly: Poly):
    """Monic main-variable polynomial with prescribed tower power sums.

    s_rows[c-1] holds the power-sum parametrization S_c mod Q; returns the
    (d+1, deg Q) coefficient tensor of the degree-d fiber polynomial.
    """
    field = q_poly.field
    q = max(q_poly.degree, 1)
    if field.p <= d:
        raise CharacteristicTooSmall("fiber interpolation needs p > %d" % d)
    sub = _uni_tset(q_poly)
    # series L = -sum_{c>=1} S_c T^c / c, then E = exp(L) by Newton
    L = field.zeros((d + 1, q))
    for c in range(1, d + 1):
        row = s_rows[c - 1]
        L[c, : len(row.coeffs)] = row.coeffs
        L[c] = (-L[c] * field.inv(c)) % field.p

    def pad_rows(a, k):
        if a.shape[0] >= k:
            return a[:k]
        return np.concatenate([a, field.zeros((k - a.shape[0], q))])

    def mul_trunc(a, b, k):
        prod = field.nd_conv(a, b)[:k]
        return pad_rows(sub._red1(prod), k)

    def series_inv(f, k):
        g = field.zeros((1, q))
        g[0, 0] = 1
        m = 1
        while m < k:
            m2 = min(2 * m, k)
            fg = mul_trunc(pad_rows(f, m2), g, m2)
            t = (-fg) % field.p
            t[0, 0] = (t[0, 0] + 2) % field.p
            g = mul_trunc(g, t, m2)
            m = m2
        return pad_rows(g, k)

    def series_log(f, k):
        out = field.zeros((k, q))
        if k <= 1:
            return out
        fp = pad_rows(f, k)
        df = fp[1:] * np.arange(1, k, dtype=field.dtype).reshape(-1, 1) % field.p
        quot = mul_trunc(df, series_inv(fp, k - 1), k - 1)
        for j in range(1, k):
            out[j] = quot[j - 1] * field.inv(j) % field.p
        return out

    e = field.zeros((1, q))
    e[0, 0] = 1
    m = 1
    while m < d + 1:
        m2 = min(2 * m, d + 1)
        lg = series_log(e, m2)
        t = (pad_rows(L, m2) - lg) % field.p
        t[0, 0] = (t[0, 0] + 1) % field.p
        e = mul_trunc(e, t, m2)
        m = m2
    return pad_rows(e, d + 1)[::-1].copy()  # coefficient of X^j is e[d-j]


def triset_from_urep(u: UnivariateRep, order, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET):
    """Triangular set generating the ideal of u's set, for a variable order.

    Requires the set to be equiprojectable for that order.
    """
    field = u.field
    if u.is_empty():
        raise ValueError("the empty set has no triangular set")
    uu = u.permuted(order)
    n = uu.n
    # normalize: coefficient of the top variable becomes 1
    norm = None
    if uu.mu[-1] != 1:
        if uu.mu[-1] != 0:
            # rescale: nu = c^-1 mu has P1(X) = c^-deg P(cX) and U1(y) = U(cy)
            c = uu.mu[-1]
            cinv = field.inv(c)
            dg = uu.degree
            p1 = Poly(
                field,
                [int(uu.p.coeffs[j]) * pow(cinv, dg - j, field.p) % field.p for j in range(dg + 1)],
            )
            new_u = []
            for ui in uu.u:
                new_u.append(
                    Poly(
                        field,
                        [int(cc) * pow(c, j, field.p) % field.p for j, cc in enumerate(ui.coeffs)],
                    )
                )
            new_mu = [m * cinv % field.p for m in uu.mu]
            normalized = UnivariateRep(field, uu.vars, p1, new_u, new_mu)
            RETRY_STATS.record(1)
        else:
            normalized = None
            for attempt in range(1, max_retries + 1):
                nu = random_form(field, n, uu.degree, rng, fix_last=True)
                try:
                    normalized = change_separating(uu, nu)
                except NotSeparating:
                    continue
                RETRY_STATS.record(attempt)
                break
            if normalized is None:
                RETRY_STATS.record_exhausted()
                raise RetryBudgetExhausted("no normalized separating form found")
        norm = _NormStage(
            p_orig=uu.p,
            p_norm=normalized.p,
            x_norm_in_orig=_combine_form(normalized.mu, uu.u, uu.p),
            x_orig_in_norm=_combine_form(uu.mu, normalized.u, normalized.p),
        )
        uu = normalized

    cur_p = uu.p
    cur_u = list(uu.u)
    cur_mu = list(uu.mu)
    built = []  # higher fiber polynomials, bottom axis = deg(cur_p)
    stages = []
    for i in range(n, 1, -1):
        delta_i = cur_p.degree
        ts_cur = _uni_tset(cur_p)
        found = None
        budget = 1 if i == 2 else max_retries
        for attempt in range(1, budget + 1):
            if i == 2:
                mup = (1,)
            else:
                mup = random_form(field, i - 1, delta_i, rng, fix_last=True)
            n_poly = Poly.zero(field)
            for c, ui in zip(mup, cur_u[: i - 1]):
                n_poly = n_poly + ui.scale(c)
            n_poly = poly_rem(n_poly, cur_p)
            n_elt = _poly_elt(ts_cur, n_poly)
            chi = char_poly(n_elt, ts_cur)
            sq = squarefree_decomposition(chi)
            if len(sq) != 1:
                continue
            q_poly, d_i = sq[0]
            exprs = _express_in_subalgebra(
                [_poly_elt(ts_cur, ui) for ui in cur_u[: i - 1]], n_elt, ts_cur, chi
            )
            if exprs is None:
                continue
            found = (mup, n_poly, n_elt, q_poly, d_i, exprs)
            RETRY_STATS.record(attempt)
            break
        if found is None:
            if i == 2:
                raise NotEquiprojectable(
                    "fiber cardinalities over the first coordinate are not uniform"
                )
            RETRY_STATS.record_exhausted()
            raise NotEquiprojectable(
                "no level form produced the uniform fiber structure; the set may "
                "not be equiprojectable for this order"
            )
        mup, n_poly, n_elt, q_poly, d_i, exprs = found
        q = max(q_poly.degree, 1)
        # fiber power sums S_c with S_c(mu'(w)) = sum of x_i^c over the fiber
        u_top = poly_rem(cur_u[i - 1], cur_p)
        tab = power_project(
            trace_form(ts_cur),
            [_poly_elt(ts_cur, u_top), n_elt],
            ts_cur,
            DegreeBounds((d_i + 1, q)),
        )
        revq = rev_coeffs(field, q_poly.coeffs, q)
        dq_inv = poly_invmod(q_poly.derivative(), q_poly)
        s_rows = []
        for c in range(1, d_i + 1):
            series = field.arr([int(tab[k][c]) for k in range(q)])
            num = field.conv(series, revq)[:q]
            if len(num) < q:
                num = np.concatenate([num, field.zeros(q - len(num))])
            s_rows.append(poly_rem(Poly(field, num[::-1].copy()) * dq_inv, q_poly))
        c_arr = _tower_exp_neg_sums(s_rows, d_i, q_poly)
        pair = TriangularSet(field, [q_poly.coeffs, c_arr], vars=("_A", "_B"))
        # image of the old urep variable inside the new pair ring
        low = Poly.zero(field)
        for c, h in zip(cur_mu[: i - 1], exprs):
            low = low + h.scale(c)
        low = poly_rem(low, q_poly)
        raw = field.zeros((2, q))
        raw[0, : len(low.coeffs)] = low.coeffs
        raw[1, 0] = 1
        lift = ring_reduce(raw, pair)
        stages.append(_Stage(pair, cur_p, lift, n_poly, u_top))
        # remap previously built fiber polynomials onto the new bottom ring
        new_built = [c_arr]
        stage = stages[-1]
        for arr in built:
            new_built.append(stage.expand_axis(arr))
        built = new_built
        cur_p = q_poly
        cur_u = list(exprs)
        cur_mu = list(mup)
    chain = [np.array(cur_p.coeffs)] + built
    tset = TriangularSet(field, chain, vars=order)
    receipt = ConversionReceipt(u, tset, stages[::-1], norm=norm)
    return tset, receipt


def _combine_form(mu, us, modulus: Poly) -> Poly:
    acc = Poly.zero(modulus.field)
    for c, ui in zip(mu, us):
        acc = acc + ui.scale(c)
    return poly_rem(acc, modulus)
