"""Coloured rooted subtrees, their embeddings, and one stage of the small/large search.

Every vertex of a coloured subtree carries its own colour, so colours are just
positions: an embedding is determined by where a group element sends the
vertex set, and the coloured stabilizer is the pointwise stabilizer.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from branchlab import kernels as K
from branchlab.errors import BudgetExceeded, LevelTooLarge, NotFound
from branchlab.lattice import EnumerationJob, run_enumeration
from branchlab.pcgroup import PcGroup
from branchlab.permgroup import (
    COSET_CAP,
    CosetSpace,
    PermGroup,
    SubgroupHandle,
    block_stabilizer,
    double_coset_count,
    index,
    is_subgroup,
    level_stabilizer,
    prime_power,
)
from branchlab.selfsim import Vertex


def _vertex(v) -> Vertex:
    if isinstance(v, Vertex):
        return v
    if isinstance(v, str):
        return Vertex.parse(v)
    return Vertex(tuple(v))


@dataclass(frozen=True)
class ColouredSubtree:
    vertices: frozenset
    p: int

    def __post_init__(self):
        vs = frozenset(_vertex(v) for v in self.vertices)
        object.__setattr__(self, "vertices", vs)
        if Vertex(()) not in vs:
            raise ValueError("a subtree must contain the root")
        for v in vs:
            if v.level and v.parent() not in vs:
                raise ValueError(f"vertex {v} has no parent in the tree")
            if any(x >= self.p or x < 0 for x in v.word):
                raise ValueError(f"vertex {v} is not a vertex of the {self.p}-regular tree")

    @classmethod
    def of(cls, words, p: int) -> "ColouredSubtree":
        """Parent closure of the given vertices."""
        vs = {Vertex(())}
        for w in words:
            w = _vertex(w)
            for i in range(w.level + 1):
                vs.add(Vertex(w.word[:i]))
        return cls(frozenset(vs), p)

    @classmethod
    def path(cls, depth: int, p: int, digit: int = 0) -> "ColouredSubtree":
        return cls.of([Vertex((digit,) * depth)], p)

    @classmethod
    def ball(cls, depth: int, p: int) -> "ColouredSubtree":
        """All vertices of level at most ``depth``."""
        vs = [Vertex(w) for j in range(depth + 1) for w in itertools.product(range(p), repeat=j)]
        return cls(frozenset(vs), p)

    @property
    def depth(self) -> int:
        return max(v.level for v in self.vertices)

    @property
    def is_complete(self) -> bool:
        return all(v.parent().child(x) in self.vertices
                   for v in self.vertices if v.level for x in range(self.p))

    def sorted_vertices(self) -> list[Vertex]:
        return sorted(self.vertices, key=lambda v: (v.level, v.word))

    def restricted(self, level: int) -> "ColouredSubtree":
        return ColouredSubtree(frozenset(v for v in self.vertices if v.level <= level), self.p)

    def union(self, extra) -> "ColouredSubtree":
        return ColouredSubtree(self.vertices | frozenset(_vertex(v) for v in extra), self.p)

    def to_json(self) -> list[str]:
        return [str(v) for v in self.sorted_vertices()]

    @classmethod
    def from_json(cls, data, p: int) -> "ColouredSubtree":
        return cls(frozenset(Vertex.parse(w) for w in data), p)

    def __len__(self):
        return len(self.vertices)


def complete(S: ColouredSubtree) -> ColouredSubtree:
    """Smallest complete subtree containing S: add every sibling."""
    extra = {v.parent().child(x) for v in S.vertices if v.level for x in range(S.p)}
    return S.union(extra)


@dataclass(frozen=True)
class AntiChain:
    vertices: frozenset
    p: int

    def __post_init__(self):
        vs = frozenset(_vertex(v) for v in self.vertices)
        object.__setattr__(self, "vertices", vs)
        for a in vs:
            for b in vs:
                if a != b and a.is_prefix_of(b):
                    raise ValueError(f"{a} and {b} are comparable")

    @classmethod
    def level(cls, j: int, p: int) -> "AntiChain":
        return cls(frozenset(Vertex(w) for w in itertools.product(range(p), repeat=j)), p)

    @property
    def maximal(self) -> bool:
        # every leaf-ward path meets the set iff the cylinder measures sum to one
        if not self.vertices:
            return False
        depth = max(v.level for v in self.vertices)
        return sum(self.p ** (depth - v.level) for v in self.vertices) == self.p ** depth

    def restrict(self, S: ColouredSubtree) -> ColouredSubtree:
        """Vertices of S lying on or above the anti-chain."""
        keep = [v for v in S.vertices if any(v.is_prefix_of(a) for a in self.vertices)]
        return ColouredSubtree(frozenset(keep) | {Vertex(())}, S.p)


@dataclass(frozen=True)
class Embedding:
    source: ColouredSubtree
    placement: tuple  # images of source.sorted_vertices(), in that order

    def image(self, v) -> Vertex:
        return self.placement[self.source.sorted_vertices().index(_vertex(v))]

    def as_tree(self) -> ColouredSubtree:
        return ColouredSubtree(frozenset(self.placement), self.source.p)

    def key(self) -> tuple:
        return tuple(v.word for v in self.placement)


def vertex_image(g, v: Vertex, p: int, level: int) -> Vertex:
    """Image of a vertex under a permutation of the level-``level`` leaves."""
    if v.level > level:
        raise LevelTooLarge(f"vertex {v} lies below level {level}")
    block = p ** (level - v.level)
    return Vertex.from_index(int(g[v.index(p) * block]) // block, v.level, p)


def _leaf_perm(g):
    return g.images if hasattr(g, "images") else np.asarray(g)


def apply(g, S, level: int) -> Embedding:
    """Embedding S^g; ``S`` may itself be an embedding, which is then moved on."""
    g = _leaf_perm(g)
    p = S.source.p if isinstance(S, Embedding) else S.p
    if isinstance(S, Embedding):
        return Embedding(S.source, tuple(vertex_image(g, v, p, level) for v in S.placement))
    return Embedding(S, tuple(vertex_image(g, v, p, level) for v in S.sorted_vertices()))


def _check_within(S_vertices, level: int):
    for v in S_vertices:
        if v.level > level:
            raise LevelTooLarge(f"vertex {v} lies below the quotient level {level}")


def _quotient_level(Q: PermGroup, p: int) -> int:
    if Q.degree == 1:
        return 0
    pe = prime_power(Q.degree)
    if pe is None or pe[0] != p:
        raise ValueError("the group does not act on the leaves of a p-regular tree")
    return pe[1]


def _deepest(vertices) -> list[Vertex]:
    vs = set(vertices)
    return [v for v in vs if not any(v != w and v.is_prefix_of(w) for w in vs)]


def _fix_vertices(Q: PermGroup, vertices, p: int) -> PermGroup:
    level = _quotient_level(Q, p)
    _check_within(vertices, level)
    H = Q
    # fixing a vertex fixes its ancestors, so only the deepest ones matter
    for v in sorted(_deepest(vertices), key=lambda v: (v.level, v.word)):
        if not v.level:
            continue
        size = p ** (level - v.level)
        x = v.index(p)
        if all(int(g[x * size]) // size == x for g in H.generators):
            continue
        H = block_stabilizer(H, x, size)
    return H


def embedding_stabilizer(Q: PermGroup, S: ColouredSubtree) -> PermGroup:
    return _fix_vertices(Q, S.vertices, S.p)


def antichain_stabilizer(Q: PermGroup, A: AntiChain) -> PermGroup:
    return _fix_vertices(Q, A.vertices, A.p)


def orbit_count_on_embeddings(U, S: ColouredSubtree, level: int | None = None, Q: PermGroup | None = None,
                              cap: int = COSET_CAP, stabilizer: PermGroup | None = None) -> int:
    """Number of U-orbits on S^Q, as the double coset count |U\\Q/Q_S|."""
    if isinstance(U, SubgroupHandle):
        Q = U.parent
        U = U.group
    if Q is None:
        raise ValueError("the ambient quotient is needed when U is not a subgroup handle")
    if level is not None and level != _quotient_level(Q, S.p):
        raise LevelTooLarge(f"quotient acts on level {_quotient_level(Q, S.p)}, not {level}")
    V = stabilizer if stabilizer is not None else embedding_stabilizer(Q, S)
    return double_coset_count(Q, U, V, cap)


def embedding_orbit(Q: PermGroup, S: ColouredSubtree) -> list[Embedding]:
    """All embeddings S^g, g in Q (materialised; oracle use only)."""
    level = _quotient_level(Q, S.p)
    start = apply(Q.identity(), S, level)
    seen = {start.key(): start}
    queue = [start]
    for e in queue:
        for g in Q.generators:
            f = apply(g, e, level)
            if f.key() not in seen:
                seen[f.key()] = f
                queue.append(f)
    return list(seen.values())


def continuity_check(U, S_small: ColouredSubtree, S_big: ColouredSubtree, Q: PermGroup | None = None) -> dict:
    """Orbit counts for a complete tree and its extension by one sibling set."""
    a = orbit_count_on_embeddings(U, S_small, Q=Q)
    b = orbit_count_on_embeddings(U, S_big, Q=Q)
    return {"small": a, "big": b, "pass": a <= b <= S_small.p * a}


def subgroup_level(Q: PermGroup, U: PermGroup) -> int:
    """Smallest j such that the level-j stabilizer lies in U."""
    L = _quotient_level(Q, Q.pc().layout.p)
    for j in range(L + 1):
        if is_subgroup(U, level_stabilizer(Q, j)):
            return j
    return L


def antichain_bound_holds(orbits: int, n: int, k: int, lam: int, p: int) -> bool:
    """orbits <= n * p^((k - p*lam - 1)/p + 5), compared exactly after raising to the p-th power."""
    e = k - p * lam - 1 + 5 * p
    if e >= 0:
        return orbits ** p <= n ** p * p ** e
    return orbits ** p * p ** (-e) <= n ** p


def antichain_bound_value(n: int, k: int, lam: int, p: int) -> float:
    return n * float(p) ** ((k - p * lam - 1) / p + 5)


# one stage of the small/large search -----------------------------------------

def _sibling_sets(root: Vertex, p: int, max_level: int):
    """Child sets of every vertex at or below ``root`` whose children stay within max_level."""
    out = []
    frontier = [root]
    while frontier:
        v = frontier.pop()
        if v.level < max_level:
            out.append(v)
            frontier.extend(v.child(x) for x in range(p))
    return sorted(out, key=lambda v: (v.level, v.word))


def stage_family(S_prev: ColouredSubtree, v: Vertex, max_level: int) -> list[ColouredSubtree]:
    """Complete trees containing S_prev whose new vertices lie below v, down to max_level."""
    p = S_prev.p
    parents = _sibling_sets(v, p, max_level)
    results = {}

    def grow(tree: ColouredSubtree, i: int):
        if i == len(parents):
            results[tuple(tree.to_json())] = tree
            return
        u = parents[i]
        kids = [u.child(x) for x in range(p)]
        if all(k in tree.vertices for k in kids) or u not in tree.vertices:
            grow(tree, i + 1)
            return
        grow(tree, i + 1)
        grow(tree.union(kids), i + 1)

    grow(S_prev, 0)
    return [results[k] for k in sorted(results, key=lambda key: (len(key), key))]


def _tree_distance_one(a: ColouredSubtree, b: ColouredSubtree) -> bool:
    small, big = (a, b) if len(a) < len(b) else (b, a)
    diff = big.vertices - small.vertices
    if not small.vertices <= big.vertices or len(diff) != big.p:
        return False
    parents = {d.parent() for d in diff}
    return len(parents) == 1


@dataclass
class StageResult:
    candidates: list
    small: list
    large: list
    boundary_pair: tuple | None
    witness: dict | None
    profiles: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "candidates": [t.to_json() for t in self.candidates],
            "small": [t.to_json() for t in self.small],
            "large": [t.to_json() for t in self.large],
            "boundary_pair": None if self.boundary_pair is None
            else {"small": self.boundary_pair[0].to_json(), "large": self.boundary_pair[1].to_json()},
            "witness": self.witness,
            "profiles": {json.dumps(k): v for k, v in self.profiles.items()},
        }


_STAGE_STATE = {}


def _stage_init(Q, keys, p):
    _STAGE_STATE["Q"] = Q
    _STAGE_STATE["subs"] = [(m, Q.subgroup_from_pc(Q.pc(p), _from_key(Q, p, key))) for m, key in keys]


def _from_key(Q, p, key):
    return PcGroup.from_key(Q.pc(p).layout, key)


def _profile(tree_json, p):
    Q = _STAGE_STATE["Q"]
    S = ColouredSubtree.from_json(tree_json, p)
    space = CosetSpace(Q, embedding_stabilizer(Q, S))
    best: dict[int, tuple[int, int]] = {}
    for i, (m, U) in enumerate(_STAGE_STATE["subs"]):
        o = space.orbit_count(U)
        if m not in best or o > best[m][0]:
            best[m] = (o, i)
    return best


def stage_search(Q: PermGroup, S_prev: ColouredSubtree, ell: int, ell_prime: int, f: dict, *,
                 path_vertex: Vertex | None = None, n_from: int = 1, max_trees: int = 4096,
                 time_budget: float | None = None, jobs: int = 1, mode: str = "conjugacy",
                 memory_budget: int = 2 ** 30) -> StageResult:
    """Classify the trees of one stage as small or large and find an adjacent pair.

    A tree is large when some subgroup of index p^n (n >= n_from, n in f) has
    more than f(n) orbits on its embeddings into the level-``ell_prime`` quotient Q.
    """
    p = S_prev.p
    L = _quotient_level(Q, p)
    if ell_prime > L:
        raise LevelTooLarge(f"stage depth {ell_prime} exceeds the quotient level {L}")
    if not 0 <= ell < ell_prime:
        raise ValueError("need 0 <= ell < ell_prime")
    v = path_vertex if path_vertex is not None else Vertex((0,) * (ell + 1))
    if v not in S_prev.vertices:
        raise ValueError(f"path vertex {v} is not in the previous tree")
    family = stage_family(S_prev, v, ell_prime)
    if len(family) > max_trees:
        raise BudgetExceeded(f"{len(family)} candidate trees exceed the budget of {max_trees}")
    start = time.monotonic()
    max_m = max(f)
    res = run_enumeration(EnumerationJob(Q, p, max_m, mode, memory_budget))
    keys = [(r.m, r.canonical_key) for r in res.records]
    trees_json = [t.to_json() for t in family]
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_stage_init, initargs=(Q, keys, p)) as pool:
            profiles = list(pool.map(_profile, trees_json, itertools.repeat(p)))
    else:
        _stage_init(Q, keys, p)
        profiles = []
        for tj in trees_json:
            profiles.append(_profile(tj, p))
            if time_budget is not None and time.monotonic() - start > time_budget:
                raise BudgetExceeded("stage search ran out of time")
    small, large, excess = [], [], {}
    for t, prof in zip(family, profiles):
        bad = [(m, o, i) for m, (o, i) in sorted(prof.items()) if m >= n_from and m in f and o > f[m]]
        if bad:
            large.append(t)
            excess[t] = bad[0]
        else:
            small.append(t)
    pair = None
    for s in small:
        for b in large:
            if _tree_distance_one(s, b):
                pair = (s, b)
                break
        if pair:
            break
    witness = None
    if pair is not None:
        m, o, i = excess[pair[1]]
        view = Q.pc(p)
        key = keys[i][1]
        witness = {"m": m, "orbits_large": o, "f": f[m], "key": key.hex(),
                   "orbits_small": _profile(pair[0].to_json(), p)[m][0]}
        U = Q.subgroup_from_pc(view, _from_key(Q, p, key))
        witness["orbits_small_for_witness"] = orbit_count_on_embeddings(U, pair[0], Q=Q)
    out = StageResult(family, small, large, pair, witness,
                      {tuple(t.to_json()): {m: o for m, (o, _) in prof.items()} for t, prof in zip(family, profiles)})
    if pair is None:
        err = NotFound("no adjacent small/large pair at this scale"
                       + (" (every tree is small)" if not large else ""))
        err.result = out
        raise err
    return out


def smax_witness(Q: PermGroup, S_prev: ColouredSubtree, ell: int, ell_prime: int,
                 path_vertex: Vertex | None = None) -> dict:
    """Orbit count of the anti-chain stabilizer on the fullest tree of the stage.

    Checks orbits * (Q : St(ell)) >= (Q : Q_A) for the anti-chain made of the
    level-ell vertices other than the parent of v, the siblings of v, and the
    descendants of v on level ell_prime.
    """
    p = S_prev.p
    v = path_vertex if path_vertex is not None else Vertex((0,) * (ell + 1))
    desc = [Vertex(v.word + w) for w in itertools.product(range(p), repeat=ell_prime - v.level)]
    s_max = S_prev.union(list(itertools.chain.from_iterable(
        [Vertex(v.word + w) for w in itertools.product(range(p), repeat=j)]
        for j in range(ell_prime - v.level + 1))))
    level_ell = [Vertex(w) for w in itertools.product(range(p), repeat=ell) if Vertex(w) != v.parent()]
    sibs = [v.parent().child(x) for x in range(p) if x != v.word[-1]]
    A = AntiChain(frozenset(level_ell + sibs + desc), p)
    GA = antichain_stabilizer(Q, A)
    orbits = orbit_count_on_embeddings(GA, s_max, Q=Q)
    idx_A = index(Q, GA)
    N_ell = index(Q, level_stabilizer(Q, ell))
    return {"antichain_size": len(A.vertices), "maximal": A.maximal, "orbits": orbits, "index_A": idx_A,
            "N_ell": N_ell, "pass": orbits * N_ell >= idx_A, "s_max_size": len(s_max)}
