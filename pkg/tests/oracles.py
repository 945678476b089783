"""Brute-force reference implementations on explicit element sets.

Nothing here imports branchlab; groups are sets of permutation tuples with
the right action x^g = g[x], so the product "g then h" is h[g].
"""

from __future__ import annotations

import itertools
import math


def compose(g, h):
    return tuple(h[i] for i in g)


def inverse(g):
    out = [0] * len(g)
    for i, j in enumerate(g):
        out[j] = i
    return tuple(out)


def closure(gens, degree):
    ident = tuple(range(degree))
    gens = [tuple(int(v) for v in g) for g in gens]
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = compose(x, g)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(seen)


def all_subgroups(elements):
    """Every subgroup of a finite p-group, as frozensets.

    Each non-trivial subgroup of a p-group is generated by a maximal subgroup
    and one more element, so growing by single elements reaches all of them.
    """
    elements = list(elements)
    degree = len(elements[0])
    trivial = frozenset([tuple(range(degree))])
    found = {trivial}
    frontier = [trivial]
    while frontier:
        nxt = []
        for H in frontier:
            gens = _small_gens(H, degree)
            done = set(H)
            for g in elements:
                if g in done:
                    continue
                done.update(compose(h, g) for h in H)  # <H, hg> = <H, g>
                K = closure(gens + [g], degree)
                if K not in found:
                    found.add(K)
                    nxt.append(K)
        frontier = nxt
    return found


def _small_gens(H, degree):
    gens = []
    span = frozenset([tuple(range(degree))])
    for h in sorted(H):
        if h not in span:
            gens.append(h)
            span = closure(gens, degree)
            if len(span) == len(H):
                break
    return gens


def index_exponent(n, p):
    e = 0
    while n > 1:
        assert n % p == 0
        n //= p
        e += 1
    return e


def orbits(gens, degree):
    parent = list(range(degree))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gens:
        for i, j in enumerate(g):
            a, b = find(i), find(int(j))
            if a != b:
                parent[a] = b
    return len({find(i) for i in range(degree)})


def double_cosets(G, U, V):
    """|U\\G/V| by listing the sets U g V."""
    seen = set()
    count = 0
    for g in G:
        if g in seen:
            continue
        count += 1
        for u in U:
            ug = compose(u, g)
            for v in V:
                seen.add(compose(ug, v))
    return count


def min_parts(p, m):
    """Fewest powers of p summing to p^m when one part must equal 1 (plain search)."""
    target = p ** m
    best = math.inf
    powers = [p ** i for i in range(m)]

    def go(rest, top, used):
        nonlocal best
        if used >= best:
            return
        if rest == 0:
            best = used
            return
        for i in range(top, -1, -1):
            if powers[i] <= rest:
                go(rest - powers[i], i, used + 1)

    go(target - 1, m - 1, 1)
    return best


def frattini_rank(elements, p):
    """d_p via |G : G' G^p| on an explicit element set."""
    elements = list(elements)
    degree = len(elements[0])
    seeds = [tuple(range(degree))]
    for g in elements:
        x = g
        for _ in range(p - 1):
            x = compose(x, g)
        seeds.append(x)
    for g, h in itertools.product(elements, repeat=2):
        seeds.append(compose(compose(inverse(g), inverse(h)), compose(g, h)))
    N = closure(list(set(seeds)), degree)
    return index_exponent(len(elements) // len(N), p)
