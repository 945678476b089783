"""Permutation groups: stabilizer chains plus a polycyclic view for p-groups.

Two independent routes answer order and membership questions.  The
deterministic Schreier-Sims chain works for any group; p-groups are
additionally relabelled into the iterated wreath product and handled by the
polycyclic tables of :mod:`branchlab.pcgroup`, which is what the enumeration
code uses.  Tests cross-check the two.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from branchlab import kernels as K
from branchlab.errors import (
    BadPermutation,
    CosetSpaceTooLarge,
    DegreeMismatch,
    NotAMember,
    NotAPGroup,
    NotASubgroup,
)
from branchlab.pcgroup import PcGroup, TreeLayout, wreath_relabel

DTYPE = K.DTYPE
COSET_CAP = 2 ** 20
ELEMENT_TABLE_THRESHOLD = 2 ** 16


def as_perm(x, degree=None):
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim != 1 or (degree is not None and a.shape[0] != degree):
        raise DegreeMismatch(f"permutation of length {a.shape[0]} where degree {degree} expected")
    return a


def is_identity(x):
    return bool(np.all(x == np.arange(x.shape[0])))


def prime_power(n):
    """(p, e) with n == p**e for a prime p, or None."""
    if n < 2:
        return None
    p = 2
    while p * p <= n and n % p:
        p += 1
    if n % p:
        p = n
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return (p, e) if n == 1 else None


class StabChain:
    """Base, strong generators and transversals from deterministic Schreier-Sims.

    Base points are chosen as the smallest point moved by the first strong
    generator fixing all earlier base points.
    """

    def __init__(self, gens, degree):
        self.degree = degree
        self.base: list[int] = []
        self.levels: list[list[np.ndarray]] = []
        self.transversals: list[dict[int, np.ndarray]] = []
        strong = [g for g in gens if not is_identity(g)]
        for g in strong:
            if all(g[b] == b for b in self.base):
                self.base.append(int(np.flatnonzero(g != np.arange(degree))[0]))
        for i in range(len(self.base)):
            self.levels.append([g for g in strong if all(g[b] == b for b in self.base[:i])])
            self.transversals.append(self._orbit(i))
        self._run()

    def _orbit(self, i):
        b = self.base[i]
        trans = {b: np.arange(self.degree, dtype=DTYPE)}
        queue = [b]
        for x in queue:
            ux = trans[x]
            for s in self.levels[i]:
                y = int(s[x])
                if y not in trans:
                    trans[y] = s[ux]
                    queue.append(y)
        return trans

    def strip(self, g, start=0):
        for level in range(start, len(self.base)):
            b = int(g[self.base[level]])
            u = self.transversals[level].get(b)
            if u is None:
                return g, level
            g = K.inv(u)[g]
        return g, len(self.base)

    def _add_level(self, point):
        self.base.append(point)
        self.levels.append([])
        self.transversals.append({point: np.arange(self.degree, dtype=DTYPE)})

    def _run(self):
        i = len(self.base) - 1
        while i >= 0:
            jumped = False
            trans = self.transversals[i]
            for b in sorted(trans):
                ub = trans[b]
                for s in self.levels[i]:
                    usb = trans[int(s[b])]
                    cand = s[ub]
                    if np.array_equal(cand, usb):
                        continue
                    h, j = self.strip(K.inv(usb)[cand], i + 1)
                    if j == len(self.base):
                        if is_identity(h):
                            continue
                        self._add_level(int(np.flatnonzero(h != np.arange(self.degree))[0]))
                    for level in range(i + 1, j + 1):
                        self.levels[level].append(h)
                        self.transversals[level] = self._orbit(level)
                    i = j
                    jumped = True
                    break
                if jumped:
                    break
            if not jumped:
                i -= 1

    @property
    def order(self) -> int:
        out = 1
        for t in self.transversals:
            out *= len(t)
        return out

    def orbit_sizes(self):
        return [len(t) for t in self.transversals]

    def contains(self, g):
        h, j = self.strip(g)
        return j == len(self.base) and is_identity(h)

    def strong_generators(self):
        seen = {}
        for level in self.levels:
            for g in level:
                seen.setdefault(g.tobytes(), g)
        return list(seen.values())

    def elements(self):
        """All group elements (product over transversals)."""
        reps = [list(t.values()) for t in self.transversals]
        ident = np.arange(self.degree, dtype=DTYPE)
        for combo in itertools.product(*reversed(reps)):
            x = ident
            for u in combo:
                x = u[x]
            yield x


@dataclass
class PcView:
    """A p-group relabelled into W_L: ``to_leaf[point]`` is the leaf of a point."""

    layout: TreeLayout
    to_leaf: np.ndarray | None
    from_leaf: np.ndarray | None
    group: PcGroup

    def to_layout(self, x):
        x = np.asarray(x, dtype=DTYPE)
        if self.to_leaf is None:
            return x
        y = self.layout.identity()
        y[self.to_leaf] = self.to_leaf[x]
        return y

    def from_layout(self, y):
        y = np.asarray(y, dtype=DTYPE)
        if self.to_leaf is None:
            return y
        return self.from_leaf[y[self.to_leaf]].astype(DTYPE)

    def with_group(self, group: PcGroup) -> "PcView":
        return PcView(self.layout, self.to_leaf, self.from_leaf, group)


class PermGroup:
    """Permutation group given by generators; immutable after construction."""

    def __init__(self, generators, degree=None, *, _pc=None):
        gens = [np.asarray(g, dtype=DTYPE) for g in generators]
        if degree is None:
            if not gens:
                raise DegreeMismatch("degree needed for a group without generators")
            degree = int(gens[0].shape[0])
        self.degree = int(degree)
        for g in gens:
            if g.ndim != 1 or g.shape[0] != self.degree:
                raise DegreeMismatch(f"generator of length {g.shape[0]} in a group of degree {self.degree}")
            if not np.array_equal(np.sort(g), np.arange(self.degree)):
                raise BadPermutation("generator is not a permutation")
            g.setflags(write=False)
        self.generators = tuple(gens)
        self._pc = {} if _pc is None else {_pc.layout.p: _pc}

    def __repr__(self):
        return f"PermGroup(degree={self.degree}, ngens={len(self.generators)}, order={self.order})"

    # structure -------------------------------------------------------------
    @cached_property
    def chain(self) -> StabChain:
        return StabChain(list(self.generators), self.degree)

    @cached_property
    def standard_prime(self):
        """p if the degree is p^L and every generator lies in W_L, else None."""
        pe = prime_power(self.degree)
        if pe is None:
            return None
        layout = TreeLayout(*pe)
        if all(layout.contains(g) for g in self.generators):
            return pe[0]
        return None

    @cached_property
    def order(self) -> int:
        p = self.standard_prime
        if p is not None:
            return self.pc(p).group.order
        return self.chain.order

    def identity(self):
        return np.arange(self.degree, dtype=DTYPE)

    def pc(self, p=None) -> PcView:
        """Polycyclic view of a p-group (raises NotAPGroup otherwise)."""
        if p is None:
            p = self.prime
        view = self._pc.get(p)
        if view is not None:
            return view
        if self.standard_prime == p:
            layout = TreeLayout(p, prime_power(self.degree)[1])
            view = PcView(layout, None, None, PcGroup.from_gens(layout, self.generators))
        else:
            L, to_leaf = wreath_relabel(self.generators, self.degree, p)
            layout = TreeLayout(p, L)
            from_leaf = np.full(layout.degree, -1, dtype=np.int64)
            from_leaf[to_leaf] = np.arange(self.degree)
            view = PcView(layout, to_leaf, from_leaf, PcGroup.trivial(layout))
            gens = [view.to_layout(g) for g in self.generators]
            if not all(layout.contains(g) for g in gens):
                raise NotAPGroup(f"group is not a {p}-group")
            view = view.with_group(PcGroup.from_gens(layout, gens))
        self._pc[p] = view
        return view

    @cached_property
    def prime(self):
        p = self.standard_prime
        if p is not None:
            return p
        pe = prime_power(self.chain.order)
        if pe is None:
            raise NotAPGroup(f"order {self.chain.order} is not a prime power")
        return pe[0]

    def is_p_group(self, p=None) -> bool:
        n = self.order
        if n == 1:
            return True
        pe = prime_power(n)
        return pe is not None and (p is None or pe[0] == p)

    def _pc_if_pgroup(self):
        p = self.standard_prime
        if p is not None:
            return self.pc(p)
        if self._pc:
            return next(iter(self._pc.values()))
        return None

    def contains(self, g) -> bool:
        g = as_perm(g, self.degree)
        view = self._pc_if_pgroup()
        if view is not None:
            y = view.to_layout(g)
            return view.layout.contains(y) and view.group.contains(y)
        return self.chain.contains(g)

    def subgroup_from_pc(self, view: PcView, group: PcGroup) -> "PermGroup":
        gens = [view.from_layout(g) for g in group.gens]
        return PermGroup(gens, self.degree, _pc=view.with_group(group))

    def elements(self):
        if self.order > ELEMENT_TABLE_THRESHOLD:
            raise CosetSpaceTooLarge(f"refusing to list {self.order} elements")
        view = self._pc_if_pgroup()
        if view is not None:
            return [view.from_layout(x) for x in view.group.elements()]
        return list(self.chain.elements())

    # serialization ---------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "generators": [[int(v) for v in g] for g in self.generators],
            "order": str(self.order),
        }

    @classmethod
    def from_json(cls, data) -> "PermGroup":
        if isinstance(data, str):
            data = json.loads(data)
        g = cls(data["generators"], data["degree"])
        if "order" in data and int(data["order"]) != g.order:
            raise ValueError("stored order does not match the generators")
        return g


@dataclass(frozen=True)
class SubgroupHandle:
    parent: PermGroup
    group: PermGroup
    index_exp: int

    @classmethod
    def make(cls, parent: PermGroup, group: PermGroup, p: int) -> "SubgroupHandle":
        idx = index(parent, group)
        pe = prime_power(idx)
        if idx == 1:
            return cls(parent, group, 0)
        if pe is None or pe[0] != p:
            raise NotAPGroup(f"index {idx} is not a power of {p}")
        return cls(parent, group, pe[1])


# operations ---------------------------------------------------------------

def sgs_build(gens, degree=None) -> PermGroup:
    g = PermGroup(gens, degree)
    g.chain
    return g


def contains(G: PermGroup, g) -> bool:
    return G.contains(g)


def is_subgroup(G: PermGroup, U: PermGroup) -> bool:
    if U.degree != G.degree:
        return False
    return all(G.contains(u) for u in U.generators)


def index(G: PermGroup, U: PermGroup) -> int:
    if not is_subgroup(G, U):
        raise NotASubgroup("generators of U are not all in G")
    return G.order // U.order


def same_group(A: PermGroup, B: PermGroup) -> bool:
    return A.order == B.order and is_subgroup(A, B)


def _p_view(G: PermGroup, p=None):
    try:
        return G.pc(p)
    except NotAPGroup:
        return None


def normal_closure(G: PermGroup, seeds) -> PermGroup:
    seeds = [as_perm(s, G.degree) for s in seeds]
    for s in seeds:
        if not G.contains(s):
            raise NotAMember("seed is not an element of G")
    view = _p_view(G) if G.is_p_group() and G.order > 1 else None
    if view is not None:
        N = view.group.normal_closure([view.to_layout(s) for s in seeds])
        return G.subgroup_from_pc(view, N)
    gens = [s for s in seeds if not is_identity(s)]
    N = PermGroup(gens, G.degree)
    changed = True
    while changed:
        changed = False
        for n in list(N.generators):
            for g in G.generators:
                c = K.conjugate(n, g)
                if not N.chain.contains(c):
                    N = PermGroup(list(N.generators) + [c], G.degree)
                    changed = True
    return N


def derived_subgroup(G: PermGroup) -> PermGroup:
    comms = [K.commutator(a, b) for a, b in itertools.combinations(G.generators, 2)]
    return normal_closure(G, comms) if comms else PermGroup([], G.degree)


def _require_p(G: PermGroup, p: int) -> PcView:
    if not G.is_p_group(p):
        raise NotAPGroup(f"order {G.order} is not a power of {p}")
    return G.pc(p)


def frattini_p(G: PermGroup, p: int) -> PermGroup:
    view = _require_p(G, p)
    return G.subgroup_from_pc(view, view.group.frattini)


def dp(G: PermGroup, p: int) -> int:
    return _require_p(G, p).group.dp()


def orbit_partition(U: PermGroup, points=None):
    labels = K.orbit_labels(list(U.generators), U.degree)
    cells: dict[int, list[int]] = {}
    for x in (range(U.degree) if points is None else points):
        cells.setdefault(int(labels[x]), []).append(x)
    return list(cells.values())


def orbit_count(U: PermGroup, points=None) -> int:
    if points is None:
        return K.orbit_count(list(U.generators), U.degree)
    return len(orbit_partition(U, points))


def normalizer(G: PermGroup, U: PermGroup) -> PermGroup:
    if not is_subgroup(G, U):
        raise NotASubgroup("U is not a subgroup of G")
    view = G.pc()
    Upc = view.group.subgroup([view.to_layout(u) for u in U.generators])
    _, _, schreier = conjugacy_data(view, Upc)
    N = view.group.subgroup(list(Upc.gens) + schreier)
    return G.subgroup_from_pc(view, N)


def conjugacy_data(view: PcView, U: PcGroup):
    from branchlab.pcgroup import conjugacy_orbit

    return conjugacy_orbit(U, view.group.gens)


class CosetSpace:
    """Right cosets of V in G with the action of G, for repeated double coset counts."""

    def __init__(self, G: PermGroup, V: PermGroup, cap: int = COSET_CAP):
        if not is_subgroup(G, V):
            raise NotASubgroup("V is not a subgroup of G")
        self.G = G
        self.size = G.order // V.order
        if self.size > cap:
            raise CosetSpaceTooLarge(f"{self.size} cosets exceed the cap of {cap}")
        self.pc = G.is_p_group()
        if self.pc:
            view = G.pc()
            self.view = view
            Vpc = view.group.subgroup([view.to_layout(v) for v in V.generators])
            canon = Vpc.coset_rep
            ggens = view.group.gens
            start = canon(view.layout.identity())
        else:
            velems = {v.tobytes() for v in V.elements()}
            velist = [np.frombuffer(b, dtype=DTYPE) for b in sorted(velems)]

            def canon(x):
                return min((x[v] for v in velist), key=lambda a: a.tobytes())

            ggens = list(G.generators)
            start = canon(G.identity())
        self._canon = canon
        index_of = {start.tobytes(): 0}
        reps = [start]
        acts = [[] for _ in ggens]
        for r in reps:
            for j, g in enumerate(ggens):
                c = canon(g[r])
                k = c.tobytes()
                if k not in index_of:
                    index_of[k] = len(reps)
                    reps.append(c)
                acts[j].append(index_of[k])
        if len(reps) != self.size:
            raise AssertionError("coset enumeration is inconsistent with the group orders")
        self.reps = reps
        self.index_of = index_of
        self.gen_actions = [np.asarray(a, dtype=DTYPE) for a in acts]

    def action(self, x) -> np.ndarray:
        """Permutation of the cosets induced by an element of G (given on G's points)."""
        if self.pc:
            perm = np.arange(self.size, dtype=DTYPE)
            for j, c in self.view.group.exponents(self.view.to_layout(x)):
                for _ in range(c):
                    perm = self.gen_actions[j][perm]
            return perm
        act = np.empty(self.size, dtype=DTYPE)
        for i, r in enumerate(self.reps):
            act[i] = self.index_of[self._canon(np.asarray(x)[r]).tobytes()]
        return act

    def orbit_count(self, U: PermGroup) -> int:
        if not is_subgroup(self.G, U):
            raise NotASubgroup("U is not a subgroup of G")
        return K.orbit_count([self.action(u) for u in U.generators], self.size)


def double_coset_count(G: PermGroup, U: PermGroup, V: PermGroup, cap: int = COSET_CAP) -> int:
    """|U\\G/V|, as the number of U-orbits on the right cosets of V."""
    if not is_subgroup(G, U):
        raise NotASubgroup("double coset arguments must be subgroups of G")
    return CosetSpace(G, V, cap).orbit_count(U)


def point_stabilizer(G: PermGroup, x: int) -> PermGroup:
    """Stabilizer of one point, from Schreier generators of its orbit."""
    return block_stabilizer(G, x, 1)


def block_stabilizer(G: PermGroup, x: int, size: int) -> PermGroup:
    """Setwise stabilizer of the aligned block ``[x*size, (x+1)*size)``.

    Only meaningful when the aligned blocks of this size form a block system
    of G, as the vertices of one level do for groups in tree layout.
    """
    gens = list(G.generators)
    trans = {x: G.identity()}
    queue = [x]
    for y in queue:
        for s in gens:
            z = int(s[y * size]) // size
            if z not in trans:
                trans[z] = s[trans[y]]
                queue.append(z)
    schreier = []
    seen = set()
    for y, ty in trans.items():
        for s in gens:
            c = K.inv(trans[int(s[y * size]) // size])[s[ty]]
            if not is_identity(c):
                k = c.tobytes()
                if k not in seen:
                    seen.add(k)
                    schreier.append(c)
    if G.is_p_group() and G.order > 1:
        view = G.pc()
        target = view.group.exp - (prime_power(len(trans))[1] if len(trans) > 1 else 0)
        S = view.group.subgroup([view.to_layout(c) for c in schreier], target=target)
        S = PcGroup.from_gens(view.layout, S.burnside_basis(), target=target)
        return G.subgroup_from_pc(view, S)
    return PermGroup(schreier, G.degree)


def pointwise_stabilizer(G: PermGroup, points) -> PermGroup:
    H = G
    for x in points:
        if all(int(g[x]) == x for g in H.generators):
            continue
        H = point_stabilizer(H, int(x))
    return H


def level_stabilizer(G: PermGroup, j: int) -> PermGroup:
    """Kernel of the action on level-j vertices of a group in standard layout."""
    view = G.pc()
    if view.to_leaf is not None:
        raise NotAPGroup("level stabilizers need a group in standard tree layout")
    lay = view.layout
    off = lay.level_offset(j)
    depths = view.group.depths()
    gens = [g for t, g in zip(depths, view.group.gens) if t >= off]
    sub = PcGroup.from_gens(lay, gens, target=len(gens))
    return G.subgroup_from_pc(view, sub)


def random_element(G: PermGroup, rng) -> np.ndarray:
    """Uniform random element (p-groups through the pc sequence)."""
    if G.is_p_group() and G.order > 1:
        view = G.pc()
        x = view.layout.identity()
        for u in view.group.gens:
            e = int(rng.integers(view.layout.p))
            if e:
                x = K.mul(x, K.power(u, e))
        return view.from_layout(x)
    x = G.identity()
    for _ in range(20):
        x = G.generators[int(rng.integers(len(G.generators)))][x] if G.generators else x
    return x
