"""Fiber decompositions: splitting by projection-fiber cardinality and the
full equiprojectable decomposition with change of basis.

phi_split is the workhorse: given a univariate representation of V and a
coordinate projection, it separates the image with a random form, reads the
fiber cardinalities off the squarefree decomposition of a characteristic
polynomial, and recovers the factors of P by a gcd descent down a
subproduct tree (never forming any C_k(N) at full size).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RetryBudgetExhausted, StaleConversionData
from .fpcore import (
    Poly,
    build_subproduct_tree,
    crt_combine,
    is_squarefree,
    multi_reduce,
    poly_gcd,
    poly_mul,
    poly_rem,
    squarefree_decomposition,
)
from .tring import (
    ResidueElement,
    TriangularSet,
    _express_in_subalgebra,
    char_poly,
    mod_compose,
)
from .urep import (
    DEFAULT_RETRY_BUDGET,
    RETRY_STATS,
    ConversionReceipt,
    Rng,
    UnivariateRep,
    _poly_elt,
    _uni_tset,
    pull_element,
    push_element,
    random_form,
    triset_from_urep,
)


@dataclass(frozen=True)
class Projection:
    """Coordinate projection onto the first m variables of the current order."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("projection keeps at least one coordinate")


@dataclass
class FiberSplit:
    """Partition of a set by fiber cardinality: parts[k] = (r_k, urep_k)."""

    parts: list
    mu: tuple

    @property
    def ureps(self):
        return [u for _, u in self.parts]


# optional test hook: receives (level, [deg K], [deg gamma]) per descent level
DESCENT_MONITOR = None


def gamma(a: Poly, q: Poly, n_mod_q: Poly) -> Poly:
    """gcd(a(N) mod q, q) by one modular composition and one gcd."""
    field = q.field
    if q.degree == 0:
        return Poly.one(field)
    if a.degree <= 0:
        return Poly.one(field) if not a.is_zero() else q.monic()
    ts = _uni_tset(q)
    comp = mod_compose(a, [_poly_elt(ts, n_mod_q)], ts)
    val = comp.to_poly()
    if val.is_zero():
        return q.monic()
    return poly_gcd(val, q)


def phi_split(
    u: UnivariateRep, phi: Projection, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET
) -> FiberSplit:
    """Split V by the cardinality of its projection fibers.

    Steps: separate the image with a random form nu (verified through
    inverse modular composition of the kept coordinates), take the
    squarefree decomposition of the characteristic polynomial of
    N = sum nu_i U_i, then descend a subproduct tree of its squarefree
    factors computing gamma values, and finally reduce the coordinates.
    """
    field = u.field
    m = phi.m
    if m > u.n:
        raise ValueError("projection keeps more coordinates than there are")
    delta = u.degree
    if delta == 0:
        return FiberSplit([], u.mu)
    if delta == 1:
        return FiberSplit([(1, u)], u.mu)
    ts = _uni_tset(u.p)
    chi = None
    n_poly = None
    for attempt in range(1, max_retries + 1):
        nu = random_form(field, m, delta, rng)
        n_poly = Poly.zero(field)
        for c, ui in zip(nu, u.u[:m]):
            n_poly = n_poly + ui.scale(c)
        n_poly = poly_rem(n_poly, u.p)
        n_elt = _poly_elt(ts, n_poly)
        chi = char_poly(n_elt, ts)
        exprs = _express_in_subalgebra(
            [_poly_elt(ts, ui) for ui in u.u[:m]], n_elt, ts, chi
        )
        if exprs is not None:
            RETRY_STATS.record(attempt)
            break
    else:
        RETRY_STATS.record_exhausted()
        raise RetryBudgetExhausted("no form separating the projected image found")
    sq = squarefree_decomposition(chi)
    mults = [r for _, r in sq]
    assert mults == sorted(set(mults)), "multiplicities must strictly increase"
    assert sum(c.degree * r for c, r in sq) == delta
    for c, _ in sq:
        assert is_squarefree(c)
    # subproduct-tree descent computing P_k = gcd(C_k(N), P)
    tree = build_subproduct_tree([c for c, _ in sq])
    root_gamma = gamma(tree.root, u.p, poly_rem(n_poly, u.p))
    levels = [[(root_gamma, poly_rem(n_poly, root_gamma))]]
    for level in tree.levels[1:]:
        prev = levels[-1]
        nxt = []
        for i, node in enumerate(level):
            g_parent, n_parent = prev[i // 2]
            if g_parent.degree == 0 or node.degree == 0:
                nxt.append((Poly.one(field), Poly.zero(field)))
                continue
            g_child = gamma(node, g_parent, n_parent)
            nxt.append((g_child, poly_rem(n_parent, g_child)))
        deg_k = sum(max(n.degree, 0) for n in level)
        deg_g = sum(max(g.degree, 0) for g, _ in nxt)
        assert deg_k <= delta and deg_g <= delta
        if DESCENT_MONITOR is not None:
            DESCENT_MONITOR(
                len(levels),
                [max(n.degree, 0) for n in level],
                [max(g.degree, 0) for g, _ in nxt],
            )
        levels.append(nxt)
    leaves = [g for g, _ in levels[-1]][: len(sq)]
    prod = Poly.one(field)
    for pk in leaves:
        prod = poly_mul(prod, pk)
    assert prod == u.p, "leaf factors must rebuild P"
    parts = []
    for (c_k, r_k), p_k in zip(sq, leaves):
        assert p_k.degree == c_k.degree * r_k, "fiber counting went wrong"
        us = [poly_rem(x, p_k) for x in multi_reduce_columns(u.u, p_k)]
        parts.append((r_k, UnivariateRep(field, u.vars, p_k, us, u.mu)))
    return FiberSplit(parts, u.mu)


def multi_reduce_columns(us, modulus):
    return [poly_rem(ui, modulus) for ui in us]


def equi_split(u: UnivariateRep, order, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET):
    """The canonical partition of V into equiprojectable parts."""
    uu = u.permuted(order)
    parts = [uu]
    for i in range(uu.n - 1, 0, -1):
        nxt = []
        for part in parts:
            split = phi_split(part, Projection(i), rng, max_retries)
            nxt.extend(split.ureps)
        parts = nxt
    return [p for p in parts if not p.is_empty()]


@dataclass
class Decomposition:
    """A family of pairwise-coprime triangular sets with conversion data."""

    components: tuple
    order: tuple
    receipts: tuple
    base: UnivariateRep

    def __len__(self):
        return len(self.components)

    @property
    def delta(self):
        return sum(t.delta for t in self.components)

    def part_moduli(self):
        return [r.urep.p for r in self.receipts]

    def __eq__(self, other):
        return (
            isinstance(other, Decomposition)
            and other.order == self.order
            and list(other.components) == list(self.components)
        )


def decompose_to_trisets(
    u: UnivariateRep, order, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET
) -> Decomposition:
    """Equiprojectable decomposition as triangular sets, canonically sorted."""
    order = tuple(order)
    parts = equi_split(u, order, rng, max_retries)
    converted = []
    for part in parts:
        tset, receipt = triset_from_urep(part, order, rng, max_retries)
        converted.append((tset, receipt))
    converted.sort(key=lambda tr: tr[0].sort_key())
    return Decomposition(
        components=tuple(t for t, _ in converted),
        order=order,
        receipts=tuple(r for _, r in converted),
        base=u.permuted(order),
    )


def split_element(a: Poly, dec: Decomposition):
    """Images of a in each component ring (multi-reduce, then pull)."""
    if not dec.components:
        return []
    base_p = dec.base.p
    if a.degree >= max(base_p.degree, 1):
        raise StaleConversionData("element degree exceeds the decomposition modulus")
    mods = dec.part_moduli()
    rems = multi_reduce(a, mods)
    return [pull_element(r, rc) for r, rc in zip(rems, dec.receipts)]


def combine_elements(parts, dec: Decomposition) -> Poly:
    """Preimage in K[X]/<P> of a tuple of component elements."""
    parts = list(parts)
    if len(parts) != len(dec.components):
        raise StaleConversionData("one element per component required")
    residues = [push_element(p, rc) for p, rc in zip(parts, dec.receipts)]
    return crt_combine(residues, dec.part_moduli())
