"""Front-door solvers: set combination with change of order, and
quasi-inverses.

Both reduce to univariate representations, do the set-theoretic work with
univariate polynomials, and convert back under the target order.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .errors import CharacteristicTooSmall
from .fpcore import Poly, poly_gcd, poly_quo, poly_rem, poly_invmod
from .decomp import Decomposition, decompose_to_trisets, split_element
from .tring import ResidueElement, TriangularSet
from .urep import (
    DEFAULT_RETRY_BUDGET,
    Rng,
    UnivariateRep,
    merge_difference,
    merge_union,
    push_element,
    urep_from_triset,
)


@dataclass
class P1Problem:
    """Union of the plus-sets minus the union of the minus-sets, re-ordered."""

    plus: list
    minus: list
    source_order: tuple
    target_order: tuple

    def __post_init__(self):
        self.plus = list(self.plus)
        self.minus = list(self.minus)
        self.source_order = tuple(self.source_order)
        self.target_order = tuple(self.target_order)
        sets = self.plus + self.minus
        if not sets:
            raise ValueError("at least one input set is required")
        field = sets[0].field
        for t in sets:
            if t.field.p != field.p:
                raise ValueError("all sets must share the field")
            if t.vars != self.source_order:
                raise ValueError("all sets must be given for the source order")
        if sorted(self.target_order) != sorted(self.source_order):
            raise ValueError("target order must permute the same variables")

    @property
    def delta1(self):
        return sum(t.delta for t in self.plus) + sum(t.delta for t in self.minus)


@dataclass
class P2Answer:
    """Quasi-inverse data: where F vanishes, where it is a unit, and there
    its inverse component by component."""

    on_zero: Decomposition
    off_zero: Decomposition
    inverses: list


def _union_family(ureps, rng, max_retries):
    """Balanced divide-and-conquer union of a family of representations."""
    if not ureps:
        return None
    if len(ureps) == 1:
        return ureps[0]
    half = (len(ureps) + 1) // 2
    left = _union_family(ureps[:half], rng, max_retries)
    right = _union_family(ureps[half:], rng, max_retries)
    return merge_union(left, right, rng, max_retries)


def solve_p1(problem: P1Problem, rng: Rng, max_retries=DEFAULT_RETRY_BUDGET) -> Decomposition:
    """Equiprojectable decomposition of U(plus) - U(minus), target order."""
    field = (problem.plus + problem.minus)[0].field
    delta1 = problem.delta1
    if field.p <= delta1 * delta1:
        raise CharacteristicTooSmall(
            "p = %d is not above delta_1^2 = %d" % (field.p, delta1 * delta1)
        )
    plus_reps = [urep_from_triset(t, rng, max_retries)[0] for t in problem.plus]
    minus_reps = [urep_from_triset(t, rng, max_retries)[0] for t in problem.minus]
    acc = _union_family(plus_reps, rng, max_retries)
    if acc is None:
        acc = UnivariateRep.empty(field, problem.source_order)
    neg = _union_family(minus_reps, rng, max_retries)
    if neg is not None:
        acc = merge_difference(acc, neg, rng, max_retries)
    return decompose_to_trisets(acc, problem.target_order, rng, max_retries)


def solve_p2(
    tset: TriangularSet,
    f_elt: ResidueElement,
    target_order,
    rng: Rng,
    max_retries=DEFAULT_RETRY_BUDGET,
) -> P2Answer:
    """Split V(T) into the locus where F vanishes and where it is a unit;
    on the latter return F's inverse in every component."""
    field = tset.field
    delta = tset.delta
    if field.p <= delta * delta:
        raise CharacteristicTooSmall(
            "p = %d is not above delta_T^2 = %d" % (field.p, delta * delta)
        )
    u, receipt = urep_from_triset(tset, rng, max_retries)
    f_star = push_element(f_elt, receipt)
    p_on = poly_gcd(u.p, f_star) if not f_star.is_zero() else u.p.monic()
    p_off = poly_quo(u.p, p_on)
    g_star = None
    if p_off.degree > 0:
        g_star = poly_invmod(poly_rem(f_star, p_off), p_off)
    u_on = UnivariateRep(field, u.vars, p_on, [poly_rem(x, p_on) for x in u.u], u.mu)
    u_off = UnivariateRep(field, u.vars, p_off, [poly_rem(x, p_off) for x in u.u], u.mu)
    dec_on = decompose_to_trisets(u_on, target_order, rng, max_retries)
    dec_off = decompose_to_trisets(u_off, target_order, rng, max_retries)
    inverses = split_element(g_star, dec_off) if g_star is not None else []
    return P2Answer(on_zero=dec_on, off_zero=dec_off, inverses=inverses)
