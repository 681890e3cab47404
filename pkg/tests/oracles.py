"""Brute-force reference implementations the tests pin the package against.

Everything here is written for obviousness, not speed: plain recursion over
explicit clique lists, double loops over clique pairs, full subset scans.
None of it shares code with the package's solvers.
"""

import math
from itertools import combinations, product


def brute_cliques(g):
    """All one-vertex-per-part cliques, ascending tuples, by direct product scan."""
    out = []
    for combo in product(*(g.part_range(i) for i in range(g.r))):
        if all(g.has_edge(a, b) for a, b in combinations(combo, 2)):
            out.append(tuple(combo))
    return out


def brute_has_factor(g) -> bool:
    """Does a set of disjoint cliques cover every vertex? First-free-vertex recursion."""
    cliques = brute_cliques(g)
    total = g.vertex_count

    def rec(covered):
        if len(covered) == total:
            return True
        v = min(set(range(total)) - covered)
        for K in cliques:
            if v in K and not covered & set(K):
                if rec(covered | set(K)):
                    return True
        return False

    return rec(frozenset())


def brute_count_factors(g) -> int:
    """Exact factor count; each factor is counted once because the recursion
    always extends the lowest uncovered vertex."""
    cliques = brute_cliques(g)
    total = g.vertex_count

    def rec(covered):
        if len(covered) == total:
            return 1
        v = min(set(range(total)) - covered)
        return sum(
            rec(covered | set(K)) for K in cliques if v in K and not covered & set(K)
        )

    return rec(frozenset())


def brute_factors(g):
    """Every factor, as a sorted tuple of cliques."""
    cliques = brute_cliques(g)
    total = g.vertex_count
    out = []

    def rec(covered, chosen):
        if len(covered) == total:
            out.append(tuple(sorted(chosen)))
            return
        v = min(set(range(total)) - covered)
        for K in cliques:
            if v in K and not covered & set(K):
                rec(covered | set(K), chosen + [K])

    rec(frozenset(), [])
    return out


def brute_min_star(g) -> int:
    best = math.inf
    for i in range(g.r):
        for j in range(g.r):
            if i == j:
                continue
            for v in g.part_range(i):
                d = sum(1 for u in g.part_range(j) if g.has_edge(v, u))
                best = min(best, d)
    return int(best)


def brute_janson(cliques, p):
    """(lambda, delta_bar) from first principles.

    lambda sums survival probabilities; delta_bar sums, over ordered clique
    pairs sharing at least one vertex (diagonal included), the probability
    that both survive, i.e. p to the size of the union of their edge sets.
    """
    esets = [frozenset(frozenset(e) for e in combinations(K, 2)) for K in cliques]
    lam = sum(p ** len(es) for es in esets)
    delta = 0.0
    for a, A in enumerate(cliques):
        for b, B in enumerate(cliques):
            if set(A) & set(B):
                delta += p ** len(esets[a] | esets[b])
    return lam, delta


def brute_survival_variance(cliques, p):
    """Exact variance of the surviving-clique count under edge percolation."""
    esets = [frozenset(frozenset(e) for e in combinations(K, 2)) for K in cliques]
    second = 0.0
    for a in range(len(cliques)):
        for b in range(len(cliques)):
            second += p ** len(esets[a] | esets[b])
    mean = sum(p ** len(es) for es in esets)
    return second - mean * mean


def brute_regular_pair(g, X, Y, epsilon) -> bool:
    """Full scan over all admissible subset pairs. Sides of ~7 at most."""
    X, Y = list(X), list(Y)
    lx, ly = len(X), len(Y)
    density = sum(g.has_edge(x, y) for x in X for y in Y) / (lx * ly)
    a_min = max(1, math.ceil(epsilon * lx - 1e-9))
    b_min = max(1, math.ceil(epsilon * ly - 1e-9))
    cols = []
    for y in Y:
        m = 0
        for t, x in enumerate(X):
            if g.has_edge(x, y):
                m |= 1 << t
        cols.append(m)
    for amask in range(1, 1 << lx):
        sa = amask.bit_count()
        if sa < a_min:
            continue
        degs = [(c & amask).bit_count() for c in cols]
        for bmask in range(1, 1 << ly):
            sb = bmask.bit_count()
            if sb < b_min:
                continue
            e_ab = sum(degs[t] for t in range(ly) if (bmask >> t) & 1)
            if abs(e_ab / (sa * sb) - density) >= epsilon:
                return False
    return True


def pair_density(g, A, B) -> float:
    return sum(g.has_edge(a, b) for a in A for b in B) / (len(A) * len(B))
