"""Converse reductions: the fast kernels recovered from decompositions.

Modular composition is obtained by two changes of order on graph chains;
power projection by rewriting the form as a trace multiple, decomposing a
four-variable graph chain, and finishing with one transposed multiple
reduction.  These paths exist to cross-validate the production kernels,
not to replace them.
"""

from __future__ import annotations

import numpy as np

from .errors import MalformedResultChain, NonCoprimeModuli, ZeroDivisor
from .fpcore import (
    Poly,
    multi_reduce,
    poly_invmod,
    poly_rem,
    rev_coeffs,
    transposed_multi_reduce,
)
from .solve import P1Problem, solve_p1
from .tring import (
    LinearForm,
    ResidueElement,
    TriangularSet,
    invert_element,
    ring_mul,
    trace_table,
    transposed_mul,
)
from .urep import DEFAULT_RETRY_BUDGET, Rng, _poly_elt, _uni_tset


def _fresh_names(taken, want):
    out = []
    for base in want:
        name = base
        while name in taken or name in out:
            name = "_" + name
        out.append(name)
    return tuple(out)


def _as_bivariate(tset: TriangularSet, elts):
    """Lift a univariate input with a dummy second variable T_2 = X_2."""
    if tset.n == 2:
        return tset, list(elts)
    if tset.n != 1:
        raise ValueError("expected one or two variables")
    field = tset.field
    d1 = tset.d[0]
    dummy = field.zeros((2, d1))
    dummy[1, 0] = 1
    (extra,) = _fresh_names(tset.vars, ("X2",))
    lifted = TriangularSet(field, [tset.polys[0], dummy], vars=(tset.vars[0], extra))
    out = []
    for e in elts:
        if isinstance(e, ResidueElement):
            out.append(ResidueElement(lifted, e.coeffs[None, :]))
        elif isinstance(e, LinearForm):
            out.append(LinearForm(lifted, e.values[None, :]))
        else:
            raise TypeError("cannot lift %r" % (e,))
    return lifted, out


def _graph_poly(tset: TriangularSet, value: ResidueElement):
    """Coefficient tensor of NewVar - value over tset's ring."""
    field = tset.field
    arr = field.zeros((2,) + tset.shape)
    arr[0] = (-value.coeffs) % field.p
    arr[1][(0,) * len(tset.shape)] = 1
    return arr


def modcomp_via_decomposition(
    f_poly: Poly, g: ResidueElement, tset: TriangularSet, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET
) -> ResidueElement:
    """F(G) mod <T> computed with two equiprojectable decompositions."""
    orig = tset
    tset, (g,) = _as_bivariate(tset, [g])
    field = tset.field
    if f_poly.degree > tset.delta:
        raise ValueError("deg F must not exceed the ring degree")
    v1, v2 = tset.vars
    yname, zname = _fresh_names(tset.vars, ("Y", "Z"))
    chain_y = TriangularSet(
        field, [tset.polys[0], tset.polys[1], _graph_poly(tset, g)], vars=(v1, v2, yname)
    )
    dec1 = solve_p1(
        P1Problem([chain_y], [], (v1, v2, yname), (yname, v1, v2)), rng, max_retries
    )
    r_list = [Poly(field, comp.polys[0]) for comp in dec1.components]
    f_parts = multi_reduce(f_poly, r_list)
    graphs = []
    for comp, f_i in zip(dec1.components, f_parts):
        arr = field.zeros((2,) + comp.shape)
        neg = (-f_i.coeffs) % field.p
        arr[0][(0,) * (len(comp.shape) - 1) + (slice(0, len(neg)),)] = neg
        arr[1][(0,) * len(comp.shape)] = 1
        graphs.append(
            TriangularSet(field, list(comp.polys) + [arr], vars=comp.vars + (zname,))
        )
    dec2 = solve_p1(
        P1Problem(graphs, [], (yname, v1, v2, zname), (v1, v2, yname, zname)),
        rng,
        max_retries,
    )
    if len(dec2) != 1:
        raise MalformedResultChain("expected a single chain, got %d" % len(dec2))
    final = dec2.components[0]
    if final.d != tset.d + (1, 1):
        raise MalformedResultChain("result multidegree %r is not %r" % (final.d, tset.d + (1, 1)))
    if not np.array_equal(final.polys[2], _graph_poly(tset, g)):
        raise MalformedResultChain("middle graph polynomial was not preserved")
    k_arr = (-final.polys[3][0, 0]) % field.p
    k = ResidueElement(tset, k_arr)
    if orig.n == 1:
        return ResidueElement(orig, k.coeffs[0])
    return k


def form_to_trace_multiplier(ell, f_poly: Poly, g_inv: Poly) -> Poly:
    """A with ell = A . tau on K[X]/<F>, given the inverse of F'.

    ell may be a LinearForm on the quotient or a plain value sequence.
    """
    field = f_poly.field
    d = f_poly.degree
    values = ell.values if isinstance(ell, LinearForm) else field.arr(list(ell))
    if len(values) != d:
        raise ValueError("form table must have deg F entries")
    rev_f = rev_coeffs(field, f_poly.coeffs, d)
    rev_b = field.conv(values, rev_f)[:d]
    if len(rev_b) < d:
        rev_b = np.concatenate([rev_b, field.zeros(d - len(rev_b))])
    b_poly = Poly(field, rev_b[::-1].copy())
    return poly_rem(b_poly * g_inv, f_poly)


def form_to_trace_multiplier_bivariate(ell: LinearForm, tset: TriangularSet) -> ResidueElement:
    """A with ell = A . tr for a bivariate triangular set (radical input)."""
    if tset.n != 2:
        raise ValueError("expected a bivariate triangular set")
    field = tset.field
    d2, d1 = tset.d[1], tset.d[0]
    t1 = tset.t1
    try:
        g1 = poly_invmod(t1.derivative(), t1)
    except NonCoprimeModuli:
        raise ZeroDivisor("T_1' is not invertible; the input is not radical")
    # factor ell through the bottom level: one trace multiplier per X_2 slot
    lam = field.zeros((d2, d1))
    for i2 in range(d2):
        lam[i2] = _as_len(
            form_to_trace_multiplier(list(ell.values[i2]), t1, g1).coeffs, d1, field
        )
    # then one application over the tower: rev(B) = (sum lam T^i) rev(T2)
    rev_b = tset._mul_trunc2(lam, tset._rev2(), d2)
    if rev_b.shape[0] < d2:
        rev_b = np.concatenate([rev_b, field.zeros((d2 - rev_b.shape[0], d1))])
    b_elt = ResidueElement(tset, rev_b[::-1].copy())
    t2 = tset.polys[1]
    deriv = t2[1:] * np.arange(1, d2 + 1, dtype=field.dtype).reshape(-1, 1) % field.p
    g2 = invert_element(ResidueElement(tset, deriv), tset)
    return ring_mul(b_elt, g2, tset)


def _as_len(coeffs, n, field):
    out = field.zeros(n)
    out[: len(coeffs)] = coeffs
    return out


def powproj_via_decomposition(
    ell: LinearForm,
    g: ResidueElement,
    tset: TriangularSet,
    f: int,
    rng: Rng,
    max_retries=DEFAULT_RETRY_BUDGET,
):
    """[ell(G^c) for c < f] through one four-variable decomposition."""
    orig = tset
    tset, lifted = _as_bivariate(tset, [g, ell])
    g, ell = lifted
    field = tset.field
    if f > tset.delta:
        raise ValueError("f must not exceed the ring degree")
    a_mult = form_to_trace_multiplier_bivariate(ell, tset)
    v1, v2 = tset.vars
    yname, zname = _fresh_names(tset.vars, ("Y", "Z"))
    chain = TriangularSet(
        field,
        [tset.polys[0], tset.polys[1], _graph_poly(tset, a_mult)],
        vars=(v1, v2, yname),
    )
    z_arr = field.zeros((2,) + (1,) + tset.shape)
    z_arr[0, 0] = (-g.coeffs) % field.p
    z_arr[1][(0, 0, 0)] = 1
    chain4 = TriangularSet(
        field, list(chain.polys) + [z_arr], vars=(v1, v2, yname, zname)
    )
    dec = solve_p1(
        P1Problem([chain4], [], (v1, v2, yname, zname), (zname, yname, v1, v2)),
        rng,
        max_retries,
    )
    forms = []
    moduli = []
    total_trace_one = 0
    for comp in dec.components:
        r_i = Poly(field, comp.polys[0])
        table = trace_table(comp)
        total_trace_one = (total_trace_one + int(table[(0,) * comp.n])) % field.p
        d_y = comp.d[1]
        d_z = comp.d[0]
        if d_y >= 2:
            vals = table[(0,) * (comp.n - 2) + (1,)][:d_z].copy()
        else:
            # Y reduces to -S_i(Z); push the trace restriction through it
            s0 = (-comp.polys[1][0]) % field.p
            uni = _uni_tset(r_i)
            tau_z = LinearForm(uni, table[(0,) * (comp.n - 1)][:d_z].copy())
            a_y = _poly_elt(uni, Poly(field, s0))
            vals = transposed_mul(a_y, tau_z, uni).values
        forms.append([int(v) for v in vals])
        moduli.append(r_i)
    assert total_trace_one == tset.delta % field.p, "component traces must partition"
    out = transposed_multi_reduce(forms, moduli, f)
    return out
