"""Generate the embedded nested quadrature table for the standard normal.

Builds the nested rule sequence of sizes 1, 3, 9, 19, 35 by successive
Patterson-style extensions of the one-point rule: each step adds the roots
of the monic even polynomial orthogonal (against the normal density times
the current node polynomial) to all lower odd powers, then recomputes
interpolatory weights from the moment equations.

Run with no arguments; prints a Python dict literal to paste into
``src/sparsegrids/_nested_normal_table.py``.  All arithmetic in mpmath
with 60 digits; output rounded to 17 significant digits.
"""

from mpmath import mp, mpf, matrix, lu_solve, polyroots, sqrt

mp.dps = 60

EXTENSIONS = [2, 6, 10, 16]  # 1 -> 3 -> 9 -> 19 -> 35


def normal_moment(j):
    """E[x^j] for x ~ N(0,1): (j-1)!! for even j, 0 for odd."""
    if j % 2 == 1:
        return mpf(0)
    m = mpf(1)
    for k in range(1, j, 2):
        m *= k
    return m


def poly_mul(p, q):
    out = [mpf(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def nodes_poly(nodes):
    p = [mpf(1)]
    for x in nodes:
        p = poly_mul(p, [-x, mpf(1)])
    return p


def extend(nodes, m):
    """Return the m new (symmetric) nodes extending the current set."""
    pold = nodes_poly(nodes)
    # E(x) = x^m + sum_{j even < m} c_j x^j ; impose orthogonality of
    # E * P_old against x^k for k = 1, 3, ..., m-1 (even k vanish by parity).
    unknown_pows = list(range(0, m, 2))
    conds = list(range(1, m, 2))
    A = matrix(len(conds), len(unknown_pows))
    b = matrix(len(conds), 1)
    for r, k in enumerate(conds):
        for c, j in enumerate(unknown_pows):
            A[r, c] = sum(pi * normal_moment(i + j + k) for i, pi in enumerate(pold))
        b[r] = -sum(pi * normal_moment(i + m + k) for i, pi in enumerate(pold))
    coef = lu_solve(A, b)
    # roots of E in u = x^2
    epoly = {j: coef[c] for c, j in enumerate(unknown_pows)}
    epoly[m] = mpf(1)
    ucoeffs = [epoly.get(2 * i, mpf(0)) for i in range(m // 2, -1, -1)]
    uroots = polyroots(ucoeffs, maxsteps=200, extraprec=200)
    new = []
    for u in uroots:
        assert abs(u.imag) < mpf(10) ** -40, f"complex extension root {u}"
        u = u.real
        assert u > 0, f"nonpositive extension root {u}"
        x = sqrt(u)
        new.extend([x, -x])
    return new


def weights_for(nodes):
    """Interpolatory weights from the even-moment equations."""
    nonneg = sorted(x for x in nodes if x >= 0)
    k = len(nonneg)
    A = matrix(k, k)
    b = matrix(k, 1)
    for r in range(k):
        for c, x in enumerate(nonneg):
            # symmetric pair counts twice except the origin
            mult = 1 if x == 0 else 2
            A[r, c] = mult * x ** (2 * r)
        b[r] = normal_moment(2 * r)
    w = lu_solve(A, b)
    full = {}
    for c, x in enumerate(nonneg):
        full[x] = w[c]
        if x != 0:
            full[-x] = w[c]
    ordered = sorted(full)
    return ordered, [full[x] for x in ordered]


def check(nodes, weights, degree):
    for j in range(0, degree + 1):
        terms = [w * x**j for x, w in zip(nodes, weights)]
        scale = max([mpf(1)] + [abs(t) for t in terms])
        err = abs(sum(terms) - normal_moment(j)) / scale
        assert err < mpf(10) ** -35, (j, err)


def main():
    nodes = [mpf(0)]
    levels = {}
    degrees = {1: 1, 3: 5, 9: 15, 19: 29, 35: 51}
    xs, ws = weights_for(nodes)
    check(xs, ws, degrees[1])
    levels[1] = (xs, ws)
    for m in EXTENSIONS:
        nodes = nodes + extend(nodes, m)
        xs, ws = weights_for(nodes)
        check(xs, ws, degrees[len(nodes)])
        levels[len(nodes)] = (xs, ws)
        prev = None
    # nestedness check
    for a, b in [(1, 3), (3, 9), (9, 19), (19, 35)]:
        sa = set(mp.nstr(x, 30) for x in levels[a][0])
        sb = set(mp.nstr(x, 30) for x in levels[b][0])
        assert sa <= sb, (a, b)
    print("# generated by scripts/gen_nested_gauss_table.py -- do not edit")
    print("NESTED_NORMAL_RULES = {")
    for size in sorted(levels):
        xs, ws = levels[size]
        print(f"    {size}: (")
        print("        [")
        for x in xs:
            print(f"            {mp.nstr(x, 17)},")
        print("        ],")
        print("        [")
        for w in ws:
            print(f"            {mp.nstr(w, 17)},")
        print("        ],")
        print("    ),")
    print("}")


if __name__ == "__main__":
    main()
