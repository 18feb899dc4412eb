"""Brute-force references over completely split point sets.

Everything here works by enumerating rational points, so it is only valid
for triangular sets that split into distinct linear factors fiber by fiber.
The production algorithms never need this; the test suites lean on it for
ground truth and for generating random instances with known answers.
"""

from __future__ import annotations

import numpy as np

from .errors import NotEquiprojectable, NotSplit
from .fpcore import Poly, PrimeField, poly_gcd, poly_mul, poly_quo, poly_rem
from .tring import LinearForm, ResidueElement, TriangularSet


class PointSet:
    """Finite set of rational points of F_p^n, kept sorted and distinct."""

    __slots__ = ("field", "n", "points")

    def __init__(self, field: PrimeField, n: int, points):
        self.field = field
        self.n = n
        pts = sorted({tuple(int(c) % field.p for c in pt) for pt in points})
        for pt in pts:
            if len(pt) != n:
                raise ValueError("point arity mismatch")
        self.points = tuple(pts)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (
            isinstance(other, PointSet)
            and other.field.p == self.field.p
            and other.n == self.n
            and other.points == self.points
        )

    def __repr__(self):
        return "PointSet(p=%d, n=%d, %r)" % (self.field.p, self.n, self.points)


# ---------------------------------------------------------------------------
# root finding


def _roots_scan(poly: Poly):
    p = poly.field.p
    xs = np.arange(p, dtype=poly.field.dtype)
    vals = poly.evaluate_many(xs)
    return [int(x) for x in xs[vals == 0]]


def _roots_split(poly: Poly, rng_state):
    """Equal-degree-one splitting for split squarefree polynomials."""
    field = poly.field
    p = field.p
    if poly.degree == 0:
        return []
    if poly.degree == 1:
        return [(-int(poly.coeffs[0])) * field.inv(int(poly.coeffs[1])) % p]
    # x^p - x check doubles as the split test
    xp = _powmod_x(poly, p)
    if not (xp - Poly.x(field)).is_zero() and poly_gcd(xp - Poly.x(field), poly).degree != poly.degree:
        raise NotSplit("polynomial does not split into distinct linear factors")
    work = [poly.monic()]
    roots = []
    while work:
        f = work.pop()
        if f.degree == 1:
            roots.append((-int(f.coeffs[0])) * field.inv(int(f.coeffs[1])) % p)
            continue
        while True:
            shift = rng_state.integers(0, p)
            g = Poly(field, [int(shift), 1])
            h = _powmod(g, (p - 1) // 2, f) - Poly.one(field)
            if h.is_zero():
                continue
            d = poly_gcd(h, f)
            if 0 < d.degree < f.degree:
                work.append(d)
                work.append(poly_quo(f, d))
                break
    return roots


def _powmod(base: Poly, e: int, mod: Poly) -> Poly:
    result = Poly.one(base.field)
    base = poly_rem(base, mod)
    while e:
        if e & 1:
            result = poly_rem(poly_mul(result, base), mod)
        base = poly_rem(poly_mul(base, base), mod)
        e >>= 1
    return result


def _powmod_x(mod: Poly, e: int) -> Poly:
    return _powmod(Poly.x(mod.field), e, mod)


def poly_roots(poly: Poly, require_split=True):
    """All roots in F_p; raises NotSplit when multiplicity or an
    irreducible factor would hide points."""
    field = poly.field
    if poly.degree <= 0:
        return []
    if field.p <= 100000:
        roots = _roots_scan(poly)
    else:
        roots = _roots_split(poly, np.random.default_rng(0xC0FFEE))
    if require_split and len(roots) != poly.degree:
        raise NotSplit(
            "found %d rational simple roots for degree %d" % (len(roots), poly.degree)
        )
    return sorted(roots)


# ---------------------------------------------------------------------------
# enumerate / interpolate


def _eval_lower(arr, point, field):
    """Evaluate the trailing axes (X_k..X_1 order) of arr at a point prefix."""
    p = field.p
    out = arr
    for x in point:  # point = (x_1, x_2, ...): fold the last axis first
        acc = np.zeros(out.shape[:-1], dtype=field.dtype)
        for c in range(out.shape[-1] - 1, -1, -1):
            acc = (acc * x + out[..., c]) % p
        out = acc
    return out


def enumerate_points(tset: TriangularSet) -> PointSet:
    """All delta_T rational points of a split triangular set."""
    field = tset.field

    def rec(prefix, level):
        if level == tset.n:
            return [prefix]
        arr = tset.polys[level]
        coeffs = _eval_lower(arr, prefix, field)
        fiber = Poly(field, coeffs)
        if fiber.degree != tset.d[level]:
            raise NotSplit("fiber polynomial degenerates at %r" % (prefix,))
        out = []
        for r in poly_roots(fiber):
            out.extend(rec(prefix + (r,), level + 1))
        return out

    pts = rec((), 0)
    ps = PointSet(field, tset.n, pts)
    if len(ps) != tset.delta:
        raise NotSplit("expected %d distinct points, got %d" % (tset.delta, len(ps)))
    return ps


def _lagrange_matrix(field, nodes):
    """Rows = coefficient vectors of the Lagrange basis polynomials."""
    k = len(nodes)
    master = Poly.from_roots(field, nodes)
    rows = field.zeros((k, k))
    dm = master.derivative()
    for i, a in enumerate(nodes):
        q, _ = _divide_out(master, a)
        w = field.inv(dm.evaluate(a))
        rows[i, : len(q.coeffs)] = q.coeffs * w % field.p
    return rows


def _divide_out(poly: Poly, root):
    return (
        Poly(poly.field, _synthetic(poly.coeffs, root, poly.field.p)),
        None,
    )


def _synthetic(coeffs, root, p):
    n = len(coeffs)
    out = [0] * (n - 1)
    acc = 0
    for i in range(n - 1, 0, -1):
        acc = (acc * root + int(coeffs[i])) % p
        out[i - 1] = acc
    return out


def interpolate_values(field, points, values, n):
    """Tensor of the interpolating polynomial of a function on a split
    equiprojectable set; axes X_n..X_1, reduced degrees fiberwise."""
    pairs = list(zip(points, values))

    def rec(prs, level):
        if level == 0:
            assert len(prs) == 1
            return field.arr([prs[0][1] % field.p])[0]
        groups = {}
        for pt, v in prs:
            groups.setdefault(pt[0], []).append((pt[1:], v))
        nodes = sorted(groups)
        subs = [rec(groups[a], level - 1) for a in nodes]
        shapes = {s.shape for s in subs}
        if len(shapes) != 1:
            raise NotEquiprojectable("fiber shapes differ at level %d" % level)
        stacked = np.stack(subs)  # (k, upper-axes...)
        lm = _lagrange_matrix(field, nodes)  # (k, k)
        flat = stacked.reshape(len(nodes), -1)
        coeffs = field.matmul(lm.T, flat)  # (k, prod)
        out = coeffs.reshape((len(nodes),) + subs[0].shape)
        # new X_level axis must sit last: (upper..., k)
        return np.moveaxis(out, 0, -1)

    arr = rec([(pt, v) for pt, v in pairs], n)
    return arr


def interpolate_triset(pset: PointSet, order=None) -> TriangularSet:
    """The triangular set cutting out an equiprojectable split point set."""
    field = pset.field
    n = pset.n
    vars = order if order is not None else tuple("X%d" % (i + 1) for i in range(n))

    def rec(points, level):
        # points: tuples of length n - level
        firsts = sorted({pt[0] for pt in points})
        t1 = Poly.from_roots(field, firsts)
        chain = [np.array(t1.coeffs)]
        if len(points[0]) == 1:
            if len(points) != len(firsts):
                raise NotEquiprojectable("duplicate abscissae")
            return chain, [(a,) for a in firsts]
        groups = {}
        for pt in points:
            groups.setdefault(pt[0], []).append(pt[1:])
        subchains = {}
        sizes = set()
        for a in firsts:
            sub, _ = rec(groups[a], level + 1)
            subchains[a] = sub
            sizes.add(tuple(x.shape for x in sub))
        if len(sizes) != 1:
            raise NotEquiprojectable("fiber multidegrees differ")
        lifted = []
        for j in range(len(subchains[firsts[0]])):
            stacked = np.stack([subchains[a][j] for a in firsts])  # (k, main+1, lower...)
            lm = _lagrange_matrix(field, firsts)
            flat = stacked.reshape(len(firsts), -1)
            coeffs = field.matmul(lm.T, flat).reshape(stacked.shape)
            lifted.append(np.moveaxis(coeffs, 0, -1))
        return chain + lifted, None

    if len(pset) == 0:
        raise ValueError("cannot interpolate the empty set")
    chain, _ = rec(list(pset.points), 0)
    return TriangularSet(field, chain, vars)


def naive_equi_decompose(pset: PointSet, order=None):
    """Partition by iterated fiber-cardinality refinement, top level down."""
    parts = [pset.points]
    for i in range(pset.n - 1, 0, -1):
        nxt = []
        for part in parts:
            counts = {}
            for pt in part:
                counts[pt[:i]] = counts.get(pt[:i], 0) + 1
            byr = {}
            for pt in part:
                byr.setdefault(counts[pt[:i]], []).append(pt)
            for r in sorted(byr):
                nxt.append(tuple(byr[r]))
        parts = nxt
    out = [PointSet(pset.field, pset.n, part) for part in parts]
    out.sort(key=lambda s: (len(s), s.points))
    return out


# ---------------------------------------------------------------------------
# pointwise kernels


def element_values(elt: ResidueElement, pset: PointSet):
    """Evaluate a residue element at every point."""
    field = elt.tset.field
    out = []
    for pt in pset.points:
        out.append(int(_eval_lower(elt.coeffs, pt, field)))
    return out


def values_to_element(tset: TriangularSet, pset: PointSet, values) -> ResidueElement:
    arr = interpolate_values(tset.field, pset.points, values, tset.n)
    full = tset.field.zeros(tset.shape)
    full[tuple(slice(0, s) for s in arr.shape)] = arr
    return ResidueElement(tset, full)


def naive_modcomp(f_coeffs, g_list, tset: TriangularSet, pset: PointSet = None) -> ResidueElement:
    """Composition by per-point evaluation and interpolation back."""
    field = tset.field
    pset = pset or enumerate_points(tset)
    arr = np.atleast_2d(field.arr(f_coeffs))
    gvals = [element_values(g, pset) for g in g_list]
    out = []
    for k in range(len(pset)):
        y1 = gvals[0][k]
        y2 = gvals[1][k] if len(g_list) == 2 else 0
        acc = 0
        for row in arr[::-1]:
            inner = 0
            for c in row[::-1]:
                inner = (inner * y1 + int(c)) % field.p
            acc = (acc * y2 + inner) % field.p
        out.append(acc)
    return values_to_element(tset, pset, out)


def naive_powproj(ell: LinearForm, g_list, f, tset: TriangularSet, pset: PointSet = None):
    """Projection by explicit powering in R_T (no blocking tricks)."""
    field = tset.field
    pset = pset or enumerate_points(tset)
    f = tuple(f)
    gvals = [np.array(element_values(g, pset), dtype=field.dtype) for g in g_list]
    out = np.zeros(f[::-1] if len(f) == 2 else f, dtype=np.int64)
    # interpolate the basis dual: evaluate ell on interpolated power functions
    for idx in np.ndindex(*f[::-1]) if len(f) == 2 else ((c,) for c in range(f[0])):
        if len(f) == 2:
            c2, c1 = idx
            vals = [
                pow(int(a), c1, field.p) * pow(int(b), c2, field.p) % field.p
                for a, b in zip(gvals[0], gvals[1])
            ]
            out[c2, c1] = ell.apply(values_to_element(tset, pset, vals))
        else:
            (c1,) = idx
            vals = [pow(int(a), c1, field.p) for a in gvals[0]]
            out[c1] = ell.apply(values_to_element(tset, pset, vals))
    return out


def naive_trace(tset: TriangularSet, pset: PointSet = None) -> LinearForm:
    """Trace as a point sum: tr(m) = sum of m over the zero set."""
    field = tset.field
    pset = pset or enumerate_points(tset)
    vals = field.zeros(tset.shape)
    for idx in np.ndindex(*tset.shape):
        total = 0
        for pt in pset.points:
            term = 1
            for axis, e in enumerate(idx):
                var = tset.n - 1 - axis  # axis 0 is X_n
                term = term * pow(pt[var], int(e), field.p) % field.p
            total = (total + term) % field.p
        vals[idx] = total
    return LinearForm(tset, vals)


def naive_charpoly(a: ResidueElement, tset: TriangularSet, pset: PointSet = None) -> Poly:
    pset = pset or enumerate_points(tset)
    return Poly.from_roots(tset.field, element_values(a, pset))


# ---------------------------------------------------------------------------
# random instances with known ground truth


def random_point_set(field, n, count, rng, box=None) -> PointSet:
    """count distinct points with coordinates below box (default p)."""
    box = box or field.p
    pts = set()
    while len(pts) < count:
        pts.add(tuple(int(rng.below(box)) for _ in range(n)))
    return PointSet(field, n, pts)


def random_split_tsets(field, n, count, rng, box=None):
    """Random points -> equiprojectable parts -> triangular sets."""
    pset = random_point_set(field, n, count, rng, box)
    parts = naive_equi_decompose(pset)
    return pset, [interpolate_triset(part) for part in parts]


def urep_from_points(field, pset: PointSet, rng, vars=None):
    """Univariate representation of a split point set by interpolation."""
    from .urep import UnivariateRep, random_form
    from .fpcore import crt_combine

    n = pset.n
    vars = vars or tuple("X%d" % (i + 1) for i in range(n))
    if len(pset) == 0:
        return UnivariateRep.empty(field, vars)
    while True:
        mu = random_form(field, n, len(pset), rng)
        vals = [sum(m * c for m, c in zip(mu, pt)) % field.p for pt in pset.points]
        if len(set(vals)) == len(vals):
            break
    mods = [Poly(field, [-v, 1]) for v in vals]
    parts = [
        crt_combine([Poly(field, [pt[i]]) for pt in pset.points], mods) for i in range(n)
    ]
    return UnivariateRep(field, vars, Poly.from_roots(field, vals), parts, mu)


def random_equiprojectable_points(field, n, dvec, rng) -> PointSet:
    """A split equiprojectable set with fiber degrees dvec = (d_1..d_n)."""

    def rec(level):
        if level == len(dvec):
            return [()]
        vals = set()
        while len(vals) < dvec[level]:
            vals.add(int(rng.below(field.p)))
        out = []
        for v in sorted(vals):
            for tail in rec(level + 1):
                out.append((v,) + tail)
        return out

    return PointSet(field, n, rec(0))
