import numpy as np
import pytest

from trideco.errors import (
    BothZero,
    CharacteristicTooSmall,
    DegreeExceedsCharacteristic,
    DivisionByZeroPoly,
    EmptyLeafSet,
    LengthMismatch,
    NonCoprimeModuli,
)
from trideco.fpcore import (
    Poly,
    PrimeField,
    build_subproduct_tree,
    crt_combine,
    extend_form_values,
    is_squarefree,
    modmatmul,
    multi_reduce,
    poly_divrem,
    poly_from_power_sums,
    poly_gcd,
    poly_mul,
    poly_rem,
    poly_xgcd,
    squarefree_decomposition,
    transposed_multi_reduce,
)

F7 = PrimeField(7)
F13 = PrimeField(13)
F10007 = PrimeField(10007)
FBIG = PrimeField(962592769)


def schoolbook_mul(a, b):
    p = a.field.p
    if a.is_zero() or b.is_zero():
        return Poly.zero(a.field)
    acc = np.zeros(a.degree + b.degree + 1, dtype=np.int64)
    for i, c in enumerate(a.coeffs):
        acc[i : i + len(b.coeffs)] = (acc[i : i + len(b.coeffs)] + int(c) * b.coeffs) % p
    return Poly(a.field, acc)


def random_poly(field, deg, rng, monic=False):
    c = list(rng.integers(0, field.p, deg + 1))
    if monic:
        c[-1] = 1
    return Poly(field, c)


def test_prime_field_validation():
    with pytest.raises(ValueError):
        PrimeField(1)
    with pytest.raises(ValueError):
        PrimeField(91)  # 7 * 13
    with pytest.raises(ValueError):
        PrimeField(1 << 63)
    assert PrimeField(2).p == 2
    assert FBIG.ntt_profile.two_adicity == 21


def test_poly_mul_examples():
    a = Poly(F7, [1, 1])
    assert poly_mul(a, a) == Poly(F7, [1, 2, 1])
    assert poly_mul(a, Poly.zero(F7)).is_zero()


def test_poly_mul_degree_1000_matches_schoolbook():
    rng = np.random.default_rng(7)
    a = random_poly(FBIG, 1000, rng)
    b = random_poly(FBIG, 1000, rng)
    assert poly_mul(a, b) == schoolbook_mul(a, b)


def test_poly_mul_schoolbook_agreement_many():
    rng = np.random.default_rng(11)
    for _ in range(500):
        p = [F7, F13, F10007, FBIG][int(rng.integers(0, 4))]
        a = random_poly(p, int(rng.integers(0, 512)), rng)
        b = random_poly(p, int(rng.integers(0, 512)), rng)
        assert poly_mul(a, b) == schoolbook_mul(a, b)


def test_poly_mul_associative():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = random_poly(F10007, int(rng.integers(0, 40)), rng)
        b = random_poly(F10007, int(rng.integers(0, 40)), rng)
        c = random_poly(F10007, int(rng.integers(0, 40)), rng)
        assert poly_mul(poly_mul(a, b), c) == poly_mul(a, poly_mul(b, c))


def test_divrem_examples():
    q, r = poly_divrem(Poly(F7, [1, 0, 1]), Poly(F7, [-1, 1]))
    assert q == Poly(F7, [1, 1]) and r == Poly(F7, [2])
    a = Poly(F13, [3, 1, 4, 1])
    q, r = poly_divrem(a, a)
    assert q.is_one() and r.is_zero()
    q, r = poly_divrem(Poly.zero(F13), a)
    assert q.is_zero() and r.is_zero()
    with pytest.raises(DivisionByZeroPoly):
        poly_divrem(a, Poly.zero(F13))


def test_divrem_identity_random():
    rng = np.random.default_rng(5)
    for _ in range(200):
        f = [F13, FBIG][int(rng.integers(0, 2))]
        a = random_poly(f, int(rng.integers(0, 200)), rng)
        b = random_poly(f, int(rng.integers(0, 60)), rng)
        if b.is_zero():
            continue
        q, r = poly_divrem(a, b)
        assert poly_mul(q, b) + r == a
        assert r.degree < b.degree


def test_gcd_examples():
    a = poly_mul(Poly(F13, [-1, 1]), Poly(F13, [-2, 1]))
    b = poly_mul(Poly(F13, [-2, 1]), Poly(F13, [-3, 1]))
    assert poly_gcd(a, b) == Poly(F13, [-2, 1])
    c = Poly(F13, [3, 0, 2])
    assert poly_gcd(c, Poly.zero(F13)) == c.monic()
    with pytest.raises(BothZero):
        poly_gcd(Poly.zero(F13), Poly.zero(F13))


def test_xgcd_bezout():
    g, u, v = poly_xgcd(Poly(F7, [1, 0, 1]), Poly(F7, [0, 2]))
    assert g.is_one()
    assert poly_mul(u, Poly(F7, [1, 0, 1])) + poly_mul(v, Poly(F7, [0, 2])) == g
    rng = np.random.default_rng(9)
    for _ in range(100):
        a = random_poly(F10007, int(rng.integers(0, 30)), rng)
        b = random_poly(F10007, int(rng.integers(0, 30)), rng)
        if a.is_zero() and b.is_zero():
            continue
        g, u, v = poly_xgcd(a, b)
        assert poly_mul(u, a) + poly_mul(v, b) == g
        if not a.is_zero():
            assert poly_rem(a, g).is_zero()
        if not b.is_zero():
            assert poly_rem(b, g).is_zero()


def test_squarefree_decomposition_examples():
    x1 = Poly(F13, [-1, 1])
    x2 = Poly(F13, [-2, 1])
    a = poly_mul(poly_mul(x1, x1), x2)
    assert squarefree_decomposition(a) == [(x2, 1), (x1, 2)]
    sqf = Poly(F13, [1, 1, 0, 1])
    assert is_squarefree(sqf)
    assert squarefree_decomposition(sqf) == [(sqf, 1)]
    x3 = Poly(F13, [-3, 1])
    cube = poly_mul(poly_mul(x3, x3), x3)
    assert squarefree_decomposition(cube) == [(x3, 3)]


def test_squarefree_decomposition_properties():
    rng = np.random.default_rng(21)
    for _ in range(60):
        parts = []
        deg_total = 0
        for mult in range(1, 4):
            d = int(rng.integers(0, 3))
            if d:
                parts.append((random_poly(F10007, d, rng, monic=True), mult))
                deg_total += d * mult
        if not parts or deg_total == 0:
            continue
        prod = Poly.one(F10007)
        for c, m in parts:
            for _ in range(m):
                prod = poly_mul(prod, c)
        out = squarefree_decomposition(prod)
        rebuilt = Poly.one(F10007)
        for c, m in out:
            assert is_squarefree(c)
            assert c.is_monic()
            for _ in range(m):
                rebuilt = poly_mul(rebuilt, c)
        assert rebuilt == prod
        mults = [m for _, m in out]
        assert mults == sorted(set(mults))
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert poly_gcd(out[i][0], out[j][0]).is_one()


def test_squarefree_rejects_large_degree():
    f = PrimeField(5)
    a = Poly(f, [1] * 7)  # degree 6 >= 5
    with pytest.raises(DegreeExceedsCharacteristic):
        squarefree_decomposition(a.monic())


def test_subproduct_tree():
    leaves = [Poly(F13, [-1, 1]), Poly(F13, [-2, 1])]
    t = build_subproduct_tree(leaves)
    assert t.root == poly_mul(*leaves)
    three = [Poly(F13, [-a, 1]) for a in (1, 2, 3)]
    t3 = build_subproduct_tree(three)
    assert len(t3.levels[-1]) == 4
    prod = Poly.one(F13)
    for leaf in three:
        prod = poly_mul(prod, leaf)
    assert t3.root == prod
    rng = np.random.default_rng(2)
    eight = [random_poly(F10007, int(rng.integers(1, 5)), rng, monic=True) for _ in range(8)]
    t8 = build_subproduct_tree(eight)
    fold = Poly.one(F10007)
    for leaf in eight:
        fold = poly_mul(fold, leaf)
    assert t8.root == fold
    # invariants: node products and constant degree sums
    for j in range(len(t8.levels) - 1):
        total = sum(max(f.degree, 0) for f in t8.levels[j])
        assert total == fold.degree
        for i, node in enumerate(t8.levels[j]):
            assert node == poly_mul(t8.levels[j + 1][2 * i], t8.levels[j + 1][2 * i + 1])
    with pytest.raises(EmptyLeafSet):
        build_subproduct_tree([])


def test_multi_reduce():
    mods = [Poly(F13, [-1, 1]), Poly(F13, [-2, 1])]
    assert [r.coeffs.tolist() for r in multi_reduce(Poly.x(F13), mods)] == [[1], [2]]
    m = Poly(F13, [1, 2, 1])
    a = Poly(F13, [5, 6])
    assert multi_reduce(a, [m]) == [a]
    rng = np.random.default_rng(4)
    mods = []
    used = set()
    while len(mods) < 16:
        r = int(rng.integers(0, F10007.p))
        if r not in used:
            used.add(r)
            mods.append(Poly(F10007, [-r, 1]))
    a = random_poly(F10007, 120, rng)
    assert multi_reduce(a, mods) == [poly_rem(a, m) for m in mods]


def test_crt_combine():
    mods = [Poly(F13, [-1, 1]), Poly(F13, [-2, 1])]
    x = crt_combine([Poly(F13, [1]), Poly(F13, [2])], mods)
    assert x == Poly.x(F13)
    m = Poly(F13, [1, 1, 1])
    r = Poly(F13, [5, 6])
    assert crt_combine([r], [m]) == r
    rng = np.random.default_rng(14)
    mods = [random_poly(F10007, int(rng.integers(1, 6)), rng, monic=True) for _ in range(5)]
    ok = True
    for i in range(len(mods)):
        for j in range(i + 1, len(mods)):
            ok = ok and poly_gcd(mods[i], mods[j]).is_one()
    if ok:
        prod = Poly.one(F10007)
        for m in mods:
            prod = poly_mul(prod, m)
        a = random_poly(F10007, prod.degree + 5, rng)
        back = crt_combine(multi_reduce(a, mods), mods)
        assert back == poly_rem(a, prod)
    with pytest.raises(NonCoprimeModuli):
        m1 = Poly(F13, [-1, 1])
        crt_combine([Poly(F13, [1]), Poly(F13, [2])], [m1, m1])


def test_poly_from_power_sums():
    assert poly_from_power_sums([3, 5], 2, F13) == Poly(F13, [2, -3, 1])
    assert poly_from_power_sums([0, 0, 0, 0], 4, F13) == Poly(F13, [0, 0, 0, 0, 1])
    # with an s_0 entry prepended
    assert poly_from_power_sums([2, 3, 5], 2, F13) == Poly(F13, [2, -3, 1])
    with pytest.raises(CharacteristicTooSmall):
        poly_from_power_sums([1] * 20, 20, F13)
    with pytest.raises(LengthMismatch):
        poly_from_power_sums([1], 2, F13)


def test_power_sums_roundtrip():
    rng = np.random.default_rng(31)
    f = F10007
    for _ in range(25):
        d = int(rng.integers(1, 51))
        roots = list(rng.choice(f.p, size=d, replace=False))
        target = Poly.from_roots(f, roots)
        sums = [int(sum(pow(int(r), i, f.p) for r in roots) % f.p) for i in range(1, d + 1)]
        assert poly_from_power_sums(sums, d, f) == target


def test_extend_form_values():
    # ell on F13[X]/(X^2+1): values (a, b); X^2 -> -1 so the extension is periodic
    m = Poly(F13, [1, 0, 1])
    ext = extend_form_values([3, 4], m, 6)
    assert ext.tolist() == [3, 4, 10, 9, 3, 4]


def test_transposed_multi_reduce():
    m = Poly(F13, [4, 5, 1])
    vals = [7, 11]
    out = transposed_multi_reduce([vals], [m], 2)
    assert out.tolist() == vals
    a, b = 5, 3
    out = transposed_multi_reduce(
        [[a], [b]], [Poly(F13, [-1, 1]), Poly(F13, [-2, 1])], 3
    )
    assert out.tolist() == [(a + b) % 13, (a + 2 * b) % 13, (a + 4 * b) % 13]
    with pytest.raises(LengthMismatch):
        transposed_multi_reduce([[1, 2]], [Poly(F13, [-1, 1])], 2)


def test_transposed_multi_reduce_vs_naive():
    rng = np.random.default_rng(8)
    f = F10007
    for _ in range(30):
        k = int(rng.integers(1, 5))
        mods = []
        total = 0
        while len(mods) < k and total < 64:
            d = int(rng.integers(1, 9))
            m = random_poly(f, d, rng, monic=True)
            if all(poly_gcd(m, other).is_one() for other in mods):
                mods.append(m)
                total += d
        forms = [list(rng.integers(0, f.p, m.degree)) for m in mods]
        e = total + int(rng.integers(0, 10))
        out = transposed_multi_reduce(forms, mods, e)
        for j in range(e):
            xj = Poly(f, [0] * j + [1])
            want = 0
            for vals, m in zip(forms, mods):
                r = poly_rem(xj, m)
                want = (want + sum(int(v) * int(c) for v, c in zip(vals, r.coeffs))) % f.p
            assert int(out[j]) == want


def test_modmatmul_paths():
    rng = np.random.default_rng(12)
    for p in (13, 10007, 65537, 962592769):
        A = rng.integers(0, p, (40, 333))
        B = rng.integers(0, p, (333, 17))
        ref = (np.dot(A.astype(object), B.astype(object)) % p).astype(np.int64)
        assert np.array_equal(modmatmul(A, B, p), ref)


def test_big_prime_object_path():
    f = PrimeField((1 << 61) - 1)
    rng = np.random.default_rng(1)
    a = Poly(f, [int(x) for x in rng.integers(0, 1 << 60, 40)])
    b = Poly(f, [int(x) for x in rng.integers(0, 1 << 60, 35)])
    prod = poly_mul(a, b)
    ref = [0] * (a.degree + b.degree + 1)
    for i, c in enumerate(a.coeffs):
        for j, d in enumerate(b.coeffs):
            ref[i + j] = (ref[i + j] + int(c) * int(d)) % f.p
    assert prod.coeffs.tolist() == ref
    q, r = poly_divrem(a, b)
    assert poly_mul(q, b) + r == a
