"""Command-line front end: triangular-set files, solver verbs, benchmarks.

File format (TriSetFile): a `prime:` line, a `vars:` line, then chains of
`poly i: <expr>` lines separated by `---`.  Expressions are sums of terms,
each term a product of an integer and variable powers (`3*X1^2*X2`).
Identical seeds give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time

import numpy as np

from .decomp import decompose_to_trisets
from .errors import MathError, ParseError
from .fpcore import Poly, PrimeField
from .duality import modcomp_via_decomposition, powproj_via_decomposition
from .oracle import (
    enumerate_points,
    interpolate_triset,
    naive_equi_decompose,
    naive_modcomp,
    naive_powproj,
    naive_trace,
    random_equiprojectable_points,
    random_point_set,
)
from .solve import P1Problem, solve_p1, solve_p2
from .tring import (
    DegreeBounds,
    LinearForm,
    ResidueElement,
    TriangularSet,
    char_poly,
    mod_compose,
    power_project,
    reduce as ring_reduce,
    ring_mul,
    trace_form,
)
from .urep import Rng, urep_from_triset

# ---------------------------------------------------------------------------
# expression text


def _tokenize(text, line_no):
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*^":
            tokens.append((c, c))
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("int", int(text[i:j])))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("var", text[i:j]))
            i = j
            continue
        raise ParseError("unexpected character %r" % c, line_no)
    return tokens


def parse_expr(text, vars, field, line_no=None):
    """Parse a polynomial expression into {exponent tuple: coefficient}."""
    vars = list(vars)
    tokens = _tokenize(text, line_no)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def parse_factor():
        kind, val = take()
        if kind == "int":
            return val % field.p, {}
        if kind == "var":
            if val not in vars:
                raise ParseError("unknown variable %r" % val, line_no)
            e = 1
            if peek()[0] == "^":
                take()
                kind2, val2 = take()
                if kind2 != "int":
                    raise ParseError("exponent must be an integer", line_no)
                e = val2
            return 1, {vars.index(val): e}
        raise ParseError("expected a coefficient or a variable", line_no)

    def parse_term():
        coeff, exps = parse_factor()
        while peek()[0] == "*":
            take()
            c2, e2 = parse_factor()
            coeff = coeff * c2 % field.p
            for k, v in e2.items():
                exps[k] = exps.get(k, 0) + v
        return coeff, exps

    terms = {}
    sign = 1
    if peek()[0] in ("+", "-"):
        sign = -1 if take()[0] == "-" else 1
    while True:
        coeff, exps = parse_term()
        key = tuple(exps.get(i, 0) for i in range(len(vars)))
        key = key[: max([i + 1 for i, e in enumerate(key) if e] or [0])]
        terms[key] = (terms.get(key, 0) + sign * coeff) % field.p
        kind, _ = peek()
        if kind is None:
            break
        if kind not in ("+", "-"):
            raise ParseError("expected '+' or '-' between terms", line_no)
        sign = -1 if take()[0] == "-" else 1
    return {k: v for k, v in terms.items() if v}


def format_tensor(arr, vars):
    """Canonical text of a coefficient tensor (axes highest variable first)."""
    n = len(vars)
    terms = []
    idxs = sorted(np.ndindex(*arr.shape), reverse=True)
    for idx in idxs:
        c = int(arr[idx])
        if c == 0:
            continue
        exps = idx[::-1]  # exponent of vars[0] first
        factors = []
        for v, e in zip(vars, exps):
            if e == 1:
                factors.append(v)
            elif e > 1:
                factors.append("%s^%d" % (v, e))
        if not factors:
            terms.append(str(c))
        elif c == 1:
            terms.append("*".join(factors))
        else:
            terms.append("*".join([str(c)] + factors))
    return " + ".join(terms) if terms else "0"


def format_element(elt: ResidueElement) -> str:
    return format_tensor(elt.coeffs, elt.tset.vars)


# ---------------------------------------------------------------------------
# TriSetFile


def parse_trisetfile(text):
    """Parse a TriSetFile into (field, vars, [TriangularSet chains])."""
    field = None
    vars = None
    chains = []
    current = []
    current_start = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("prime:"):
            if field is not None:
                raise ParseError("duplicate prime header", line_no)
            try:
                field = PrimeField(int(line[len("prime:") :].strip()))
            except ValueError as e:
                raise ParseError(str(e), line_no)
            continue
        if line.startswith("vars:"):
            if vars is not None:
                raise ParseError("duplicate vars header", line_no)
            names = [v.strip() for v in line[len("vars:") :].split("<")]
            if any(not v for v in names) or len(set(names)) != len(names):
                raise ParseError("malformed variable list", line_no)
            vars = tuple(names)
            continue
        if line == "---":
            if current:
                chains.append((current, current_start))
                current = []
            continue
        if line.startswith("poly"):
            if field is None or vars is None:
                raise ParseError("poly line before prime/vars headers", line_no)
            head, _, expr = line.partition(":")
            try:
                k = int(head[len("poly") :].strip())
            except ValueError:
                raise ParseError("malformed poly index", line_no)
            if k != len(current) + 1:
                raise ParseError("expected poly %d" % (len(current) + 1), line_no)
            if not current:
                current_start = line_no
            current.append((parse_expr(expr, vars, field, line_no), line_no))
            continue
        raise ParseError("unrecognized line %r" % line, line_no)
    if field is None or vars is None:
        raise ParseError("missing prime/vars headers", 1)
    if current:
        chains.append((current, current_start))
    out = []
    for chain, start in chains:
        arrays = []
        degs = []
        for i, (terms, line_no) in enumerate(chain):
            if not terms:
                raise ParseError("poly %d is zero" % (i + 1), line_no)
            main_deg = max(k[i] if len(k) > i else 0 for k in terms)
            for k in terms:
                if len(k) > i + 1:
                    raise ParseError(
                        "poly %d uses a variable above %s" % (i + 1, vars[i]), line_no
                    )
                for j, e in enumerate(k[:i]):
                    if e >= degs[j]:
                        raise ParseError(
                            "poly %d is not reduced in %s" % (i + 1, vars[j]), line_no
                        )
            arr = field.zeros((main_deg + 1,) + tuple(degs[::-1]))
            for k, c in terms.items():
                idx = list(k) + [0] * (i + 1 - len(k))
                arr[(idx[i],) + tuple(idx[:i][::-1])] = c
            arrays.append(arr)
            degs.append(main_deg)
        try:
            out.append(TriangularSet(field, arrays, vars=vars[: len(arrays)]))
        except ValueError as e:
            raise ParseError("%s (chain at line %d)" % (e, start), start)
    return field, vars, out


def format_trisetfile(field, vars, chains):
    lines = ["prime: %d" % field.p, "vars: %s" % " < ".join(vars)]
    for k, chain in enumerate(chains):
        if k:
            lines.append("---")
        for i, arr in enumerate(chain.polys):
            lines.append("poly %d: %s" % (i + 1, format_tensor(arr, vars[: i + 1])))
    return "\n".join(lines) + "\n"


def _load_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trisetfile(fh.read())


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verbs


def _cmd_decompose(args, target_from="order"):
    field, vars, chains = _load_file(args.infile)
    if not chains:
        raise ParseError("input file holds no chains", 1)
    target = tuple(v.strip() for v in getattr(args, target_from).split(",")) if getattr(
        args, target_from
    ) else vars
    prob = P1Problem(chains, [], vars, target)
    dec = solve_p1(prob, Rng(args.seed), args.max_retries)
    _emit(format_trisetfile(field, target, list(dec.components)), args.out)
    return 0


def _cmd_quasi_inverse(args):
    field, vars, chains = _load_file(args.infile)
    if len(chains) != 1:
        raise ParseError("quasi-inverse expects exactly one chain", 1)
    tset = chains[0]
    target = tuple(v.strip() for v in args.target_order.split(",")) if args.target_order else vars
    f_elt = ring_reduce(parse_expr(args.elem, vars, field), tset)
    ans = solve_p2(tset, f_elt, target, Rng(args.seed), args.max_retries)
    lines = ["on-zero:"]
    lines.append(format_trisetfile(field, target, list(ans.on_zero.components)).rstrip("\n"))
    lines.append("off-zero:")
    lines.append(format_trisetfile(field, target, list(ans.off_zero.components)).rstrip("\n"))
    for i, inv in enumerate(ans.inverses):
        lines.append("inverse %d: %s" % (i + 1, format_element(inv)))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_modcomp(args):
    field, vars, chains = _load_file(args.infile)
    if len(chains) != 1:
        raise ParseError("modcomp expects exactly one chain", 1)
    tset = chains[0]
    fterms = parse_expr(args.fun, ("Y",), field)
    fdeg = max([k[0] if k else 0 for k in fterms] or [0])
    fc = field.zeros(fdeg + 1)
    for k, c in fterms.items():
        fc[k[0] if k else 0] = c
    g = ring_reduce(parse_expr(args.g, vars, field), tset)
    if args.via == "decomposition":
        out = modcomp_via_decomposition(Poly(field, fc), g, tset, Rng(args.seed), args.max_retries)
    else:
        out = mod_compose(fc, [g], tset)
    _emit(format_element(out) + "\n", args.out)
    return 0


def _cmd_powproj(args):
    field, vars, chains = _load_file(args.infile)
    if len(chains) != 1:
        raise ParseError("powproj expects exactly one chain", 1)
    tset = chains[0]
    vals = [int(v) for v in args.ell.split(",")]
    if len(vals) != tset.delta:
        raise ParseError("form table needs %d values" % tset.delta, 1)
    ell = LinearForm(tset, np.array(vals).reshape(tset.shape))
    g = ring_reduce(parse_expr(args.g, vars, field), tset)
    if args.via == "decomposition":
        out = powproj_via_decomposition(ell, g, tset, args.count, Rng(args.seed), args.max_retries)
    else:
        out = power_project(ell, [g], tset, DegreeBounds((args.count,)))
    _emit(",".join(str(int(v)) for v in out) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# selfcheck


def _selfcheck(args):
    from .oracle import element_values, naive_charpoly

    rng = Rng(args.seed)
    nprng = np.random.default_rng(args.seed)
    field = PrimeField(10007)
    count = args.count
    failures = 0

    def report(name, ok):
        nonlocal failures
        print("%s %s" % ("PASS" if ok else "FAIL", name))
        if not ok:
            failures += 1

    ok = True
    for _ in range(count):
        d1, d2 = int(rng.below(5)) + 1, int(rng.below(5)) + 1
        pts = random_equiprojectable_points(field, 2, (d1, d2), rng)
        tset = interpolate_triset(pts)
        g = ResidueElement(tset, nprng.integers(0, field.p, tset.shape))
        f1 = int(rng.below(tset.delta)) + 1
        fc = nprng.integers(0, field.p, f1)
        ok &= mod_compose(fc, [g], tset) == naive_modcomp(fc, [g], tset, pts)
    report("modcomp vs pointwise oracle (%d instances)" % count, ok)

    ok = True
    for _ in range(count):
        d1, d2 = int(rng.below(5)) + 1, int(rng.below(5)) + 1
        pts = random_equiprojectable_points(field, 2, (d1, d2), rng)
        tset = interpolate_triset(pts)
        g = ResidueElement(tset, nprng.integers(0, field.p, tset.shape))
        ell = LinearForm(tset, nprng.integers(0, field.p, tset.shape))
        f1 = int(rng.below(tset.delta)) + 1
        got = power_project(ell, [g], tset, DegreeBounds((f1,)))
        want = naive_powproj(ell, [g], (f1,), tset, pts)
        ok &= list(map(int, got)) == list(map(int, want))
    report("powproj vs pointwise oracle (%d instances)" % count, ok)

    ok = True
    for _ in range(count):
        d1, d2 = int(rng.below(5)) + 1, int(rng.below(5)) + 1
        pts = random_equiprojectable_points(field, 2, (d1, d2), rng)
        tset = interpolate_triset(pts)
        a = ResidueElement(tset, nprng.integers(0, field.p, tset.shape))
        ok &= char_poly(a, tset) == naive_charpoly(a, tset, pts)
        ok &= trace_form(tset) == naive_trace(tset, pts)
    report("charpoly/trace vs point sums (%d instances)" % count, ok)

    ok = True
    for _ in range(count):
        pts = random_point_set(field, 2, int(rng.below(8)) + 1, rng, box=6)
        family = [interpolate_triset(q) for q in naive_equi_decompose(pts)]
        prob = P1Problem(family, [], family[0].vars, family[0].vars)
        dec = solve_p1(prob, rng)
        want = sorted(
            (interpolate_triset(q) for q in naive_equi_decompose(pts)),
            key=lambda t: t.sort_key(),
        )
        ok &= list(dec.components) == want
    report("decompose vs combinatorial oracle (%d instances)" % count, ok)

    ok = True
    for _ in range(count):
        pts = random_equiprojectable_points(field, 2, (int(rng.below(3)) + 1, int(rng.below(3)) + 1), rng)
        tset = interpolate_triset(pts)
        f_elt = ResidueElement(tset, nprng.integers(0, field.p, tset.shape))
        ans = solve_p2(tset, f_elt, tset.vars, rng)
        vals = element_values(f_elt, pts)
        on = {pt for pt, v in zip(pts.points, vals) if v == 0}
        ok &= ans.on_zero.delta == len(on)
        ok &= ans.off_zero.delta == len(pts) - len(on)
        for comp, inv in zip(ans.off_zero.components, ans.inverses):
            fc = ring_reduce(f_elt.coeffs, comp)
            ok &= ring_mul(fc, inv, comp).is_one()
    report("quasi-inverse vs pointwise evaluation (%d instances)" % count, ok)

    return 1 if failures else 0


# ---------------------------------------------------------------------------
# bench


def _bench_cell(op, n, d, field, seed):
    rng = Rng(seed)
    nprng = np.random.default_rng(seed)
    if op == "modcomp":
        if n != 2:
            raise ValueError("modcomp bench is bivariate: use --n 2")
        t1 = list(nprng.integers(0, field.p, d)) + [1]
        t2 = nprng.integers(0, field.p, (d + 1, d))
        t2[d] = 0
        t2[d, 0] = 1
        tset = TriangularSet(field, [t1, t2])
        g = ResidueElement(tset, nprng.integers(0, field.p, tset.shape))
        fc = nprng.integers(0, field.p, tset.delta)
        start = time.perf_counter()
        mod_compose(fc, [g], tset)
        return tset.delta, time.perf_counter() - start
    if op == "quasi-inverse":
        pts = random_equiprojectable_points(field, n, (d,) * n, rng)
        tset = interpolate_triset(pts)
        from .oracle import element_values

        while True:
            f_elt = ResidueElement(tset, nprng.integers(0, field.p, tset.shape))
            if all(v != 0 for v in element_values(f_elt, pts)):
                break
        start = time.perf_counter()
        solve_p2(tset, f_elt, tset.vars, rng)
        return tset.delta, time.perf_counter() - start
    if op == "decompose":
        delta = math.comb(d + n - 1, n)
        pts = random_point_set(field, n, delta, rng)
        family = [interpolate_triset(q) for q in naive_equi_decompose(pts)]
        prob = P1Problem(family, [], family[0].vars, family[0].vars)
        start = time.perf_counter()
        solve_p1(prob, rng)
        return delta, time.perf_counter() - start
    raise ValueError("unknown bench op %r" % op)


def _cmd_bench(args):
    field = PrimeField(args.prime)
    ns = [int(x) for x in str(args.n).split(",")]
    ds = [int(x) for x in str(args.d).split(",")]
    cells = [(n, d) for n in ns for d in ds]
    rows = []
    threads = int(os.environ.get("TRIDECO_THREADS", "1"))
    if threads > 1 and len(cells) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(lambda nd: _bench_cell(args.op, nd[0], nd[1], field, args.seed), cells)
            )
    else:
        results = [_bench_cell(args.op, n, d, field, args.seed) for n, d in cells]
    for (n, d), (delta, seconds) in zip(cells, results):
        rows.append((n, d, delta, args.op, seconds, args.seed))
    header = ("n", "d", "delta", "op", "seconds", "seed")
    widths = [6, 6, 8, 14, 12, 8]
    print("".join(str(h).rjust(w) for h, w in zip(header, widths)))
    for row in rows:
        cells_txt = [str(row[0]), str(row[1]), str(row[2]), row[3], "%.4f" % row[4], str(row[5])]
        print("".join(c.rjust(w) for c, w in zip(cells_txt, widths)))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([row[0], row[1], row[2], row[3], "%.6f" % row[4], row[5]])
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="trideco", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, infile=True):
        if infile:
            sp.add_argument("--in", dest="infile", required=True, help="TriSetFile input")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-retries", type=int, default=64)
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    sp = sub.add_parser("decompose", help="equiprojectable decomposition of a union of chains")
    common(sp)
    sp.add_argument("--order", default=None, help="target order, e.g. X1,X2")
    sp.set_defaults(func=lambda a: _cmd_decompose(a, "order"))

    sp = sub.add_parser("change-order", help="rewrite chains under a new variable order")
    common(sp)
    sp.add_argument("--target-order", required=True, help="new order, e.g. X2,X1")
    sp.set_defaults(func=lambda a: _cmd_decompose(a, "target_order"))

    sp = sub.add_parser("quasi-inverse", help="split V(T) by a polynomial and invert it")
    common(sp)
    sp.add_argument("--elem", required=True, help="the polynomial F, over the chain's vars")
    sp.add_argument("--target-order", default=None)
    sp.set_defaults(func=_cmd_quasi_inverse)

    sp = sub.add_parser("modcomp", help="modular composition F(G) mod <T>")
    common(sp)
    sp.add_argument("--fun", required=True, help="univariate F in the variable Y")
    sp.add_argument("--g", required=True, help="the argument G, over the chain's vars")
    sp.add_argument("--via", choices=("kernel", "decomposition"), default="kernel")
    sp.set_defaults(func=_cmd_modcomp)

    sp = sub.add_parser("powproj", help="power projection values ell(G^c)")
    common(sp)
    sp.add_argument("--ell", required=True, help="form values on the basis, comma separated")
    sp.add_argument("--g", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--via", choices=("kernel", "decomposition"), default="kernel")
    sp.set_defaults(func=_cmd_powproj)

    sp = sub.add_parser("selfcheck", help="run oracle-vs-fast comparisons")
    sp.add_argument("--count", type=int, default=25)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_selfcheck)

    sp = sub.add_parser("bench", help="wall-clock timings over an (n, d) grid")
    sp.add_argument("--op", choices=("decompose", "quasi-inverse", "modcomp"), required=True)
    sp.add_argument("--n", required=True, help="variable counts, comma separated")
    sp.add_argument("--d", required=True, help="main degrees, comma separated")
    sp.add_argument("--prime", type=int, default=962592769)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", default=None)
    sp.set_defaults(func=_cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return 3
    except MathError as e:
        print("%s: %s" % (type(e).__name__, e), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
