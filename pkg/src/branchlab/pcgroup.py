"""Polycyclic machinery for p-groups inside the iterated wreath product.

Every permutation p-group handled by branchlab is (after relabelling its
points, see :func:`wreath_relabel`) a subgroup of ``W_L``, the group of
automorphisms of the p-regular tree of depth L whose local action at each
vertex is a rotation ``x -> x + r``.  Reading the rotations vertex by vertex
(BFS order) gives a subnormal series of ``W_L`` with factors of order p.  A
subgroup then has a unique reduced induced sequence, which serves as an exact
canonical key and gives orders, membership and coset representatives without
a stabilizer chain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from branchlab import kernels as K
from branchlab.errors import NotAPGroup

DTYPE = K.DTYPE


@dataclass(frozen=True)
class TreeLayout:
    p: int
    L: int

    @property
    def degree(self):
        return self.p ** self.L

    @property
    def nvert(self):
        return (self.p ** self.L - 1) // (self.p - 1)

    def level_offset(self, j):
        """BFS index of the first vertex on level j."""
        return (self.p ** j - 1) // (self.p - 1)

    @cached_property
    def arrays(self):
        return K.layout_arrays(self.p, self.L)

    def identity(self):
        return np.arange(self.degree, dtype=DTYPE)

    def contains(self, x):
        """Whether the leaf permutation x lies in W_L."""
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.degree,):
            return False
        if not np.array_equal(np.sort(x), np.arange(self.degree)):
            return False
        return np.array_equal(K.from_portrait(portrait(x, self), self.p, self.L), x)

    def empty_table(self):
        return K.PcTable(self.p, self.L)


def portrait(x, layout):
    starts, cb = layout.arrays
    return ((np.asarray(x)[starts] // cb) % layout.p).astype(np.uint8)


def pack_portraits(rows, p):
    rows = np.asarray(rows, dtype=np.uint8)
    if p == 2:
        return np.packbits(rows, axis=1).tobytes()
    return rows.tobytes()


def unpack_portraits(key, layout):
    n = layout.nvert
    if layout.p == 2:
        width = (n + 7) // 8
        raw = np.frombuffer(key, dtype=np.uint8).reshape(-1, width)
        return np.unpackbits(raw, axis=1)[:, :n]
    return np.frombuffer(key, dtype=np.uint8).reshape(-1, n)


class PcGroup:
    """A subgroup of W_L held as a reduced PcTable (immutable by convention)."""

    def __init__(self, layout, table):
        self.layout = layout
        self.table = table
        self._key = None

    # construction -----------------------------------------------------------
    @classmethod
    def from_gens(cls, layout, gens, normalizers=None, target=None):
        t = layout.empty_table()
        t.extend([np.asarray(g, dtype=DTYPE) for g in gens], normalizers, target)
        t.reduce()
        return cls(layout, t)

    @classmethod
    def trivial(cls, layout):
        return cls(layout, layout.empty_table())

    @classmethod
    def from_key(cls, layout, key, trusted=True):
        """Rebuild from a key; trusted keys are already reduced and closed."""
        t = layout.empty_table()
        for row in unpack_portraits(key, layout):
            t.add(K.from_portrait(row, layout.p, layout.L))
        if trusted:
            t.close(target=t.size)
        else:
            t.close()
            t.reduce()
        g = cls(layout, t)
        if trusted:
            g._key = bytes(key)
        return g

    def burnside_basis(self):
        """A minimal generating set (lifts of a basis of U/Phi(U))."""
        return self.frattini_basis()[1]

    # basic data --------------------------------------------------------------
    @property
    def exp(self):
        """log_p of the order."""
        return self.table.size

    @property
    def order(self):
        return self.layout.p ** self.table.size

    @property
    def gens(self):
        return self.table.gens()

    def depths(self):
        return self.table.depths()

    @property
    def key(self):
        if self._key is None:
            self._key = self.table.key_bytes()
        return self._key

    def __eq__(self, other):
        return isinstance(other, PcGroup) and self.layout == other.layout and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"PcGroup(p={self.layout.p}, L={self.layout.L}, order=p^{self.exp})"

    def contains(self, x):
        return self.table.contains(np.asarray(x, dtype=DTYPE))

    def contains_group(self, other):
        return all(self.table.contains(g) for g in other.gens)

    def exponents(self, x):
        """Pairs (i, c) with x = gens[i1]^c1 * gens[i2]^c2 * ... (first factor applied first)."""
        starts, cb = self.layout.arrays
        p = self.layout.p
        where = {t: i for i, t in enumerate(self.depths())}
        invs = self._gen_inverses
        x = np.array(x, dtype=DTYPE)
        out = []
        while True:
            lab = (x[starts] // cb) % p
            nz = np.flatnonzero(lab)
            if nz.size == 0:
                return out
            t = int(nz[0])
            if t not in where:
                raise ValueError("element is not in the group")
            i, c = where[t], int(lab[t])
            out.append((i, c))
            for _ in range(c):
                x = x[invs[i]]

    @cached_property
    def _gen_inverses(self):
        return [K.inv(g) for g in self.gens]

    def coset_rep(self, x):
        """Canonical representative of the right coset ``self * x``."""
        return self.table.residue(np.asarray(x, dtype=DTYPE))

    def elements(self):
        gens = self.gens
        p = self.layout.p
        ident = self.layout.identity()
        for exps in itertools.product(range(p), repeat=len(gens)):
            x = ident
            for g, e in zip(gens, exps):
                if e:
                    x = K.mul(x, K.power(g, e))
            yield x

    # subgroup constructions -------------------------------------------------
    def subgroup(self, gens, normalizers=None, target=None):
        return PcGroup.from_gens(self.layout, gens, normalizers, target)

    def normal_closure(self, seeds):
        return PcGroup.from_gens(self.layout, seeds, normalizers=self.gens)

    def conjugate(self, g):
        return PcGroup(self.layout, self.table.conjugated(np.asarray(g, dtype=DTYPE)))

    def derived(self):
        gens = self.gens
        seeds = [K.commutator(a, b) for a, b in itertools.combinations(gens, 2)]
        return PcGroup.from_gens(self.layout, seeds, normalizers=gens)

    @cached_property
    def frattini(self):
        gens = self.gens
        p = self.layout.p
        seeds = [K.power(u, p) for u in gens]
        seeds += [K.commutator(a, b) for a, b in itertools.combinations(gens, 2)]
        return PcGroup.from_gens(self.layout, seeds, normalizers=gens)

    def dp(self):
        return self.exp - self.frattini.exp

    def frattini_basis(self):
        """Table of Phi(U) and a list of elements spanning U/Phi(U)."""
        phi = self.frattini
        t = phi.table.copy()
        basis = []
        for u in self.gens:
            if t.add(u) >= 0:
                basis.append(u)
        return phi, basis

    def maximal_subgroups(self):
        """All maximal subgroups, one per hyperplane of U/Phi(U), deterministic order."""
        phi, basis = self.frattini_basis()
        d = len(basis)
        p = self.layout.p
        out = []
        for lam in hyperplane_functionals(d, p):
            kernel = kernel_basis(lam, p)
            t = phi.table.copy()
            for v in kernel:
                x = self.layout.identity()
                for b, e in zip(basis, v):
                    if e:
                        x = K.mul(x, K.power(b, int(e)))
                t.add(x)
            t.close(target=phi.exp + d - 1)
            t.reduce()
            out.append(PcGroup(self.layout, t))
        return out

    def orbit_count(self, degree=None):
        return K.orbit_count(self.gens, degree or self.layout.degree)


def hyperplane_functionals(d, p):
    """Nonzero functionals on F_p^d up to scalars (first nonzero entry 1)."""
    for q in range(d):
        for tail in itertools.product(range(p), repeat=d - q - 1):
            yield (0,) * q + (1,) + tail


def kernel_basis(lam, p):
    d = len(lam)
    q = next(i for i, c in enumerate(lam) if c)
    basis = []
    for j in range(d):
        if j == q:
            continue
        v = [0] * d
        v[j] = 1
        v[q] = (-lam[j]) % p
        basis.append(v)
    return basis


def conjugacy_orbit(U, gens):
    """Orbit of U under conjugation by ``gens``.

    Returns ``(members, transversal, stabilizer_gens)``: members maps key to
    PcGroup, transversal maps key to a conjugating element from U, and the
    Schreier generators generate the normalizer.
    """
    layout = U.layout
    ident = layout.identity()
    members = {U.key: U}
    trans = {U.key: ident}
    queue = [U]
    schreier = []
    gens = [np.asarray(g, dtype=DTYPE) for g in gens]
    while queue:
        V = queue.pop()
        tv = trans[V.key]
        for g in gens:
            W = V.conjugate(g)
            tw = K.mul(tv, g)
            if W.key in members:
                schreier.append(K.mul(tw, K.inv(trans[W.key])))
            else:
                members[W.key] = W
                trans[W.key] = tw
                queue.append(W)
    return members, trans, schreier


# relabelling arbitrary p-groups into the wreath layout ----------------------

def _minimal_block(gens, n, a, b):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    parent[find(b)] = find(a)
    queue = [(a, b)]
    while queue:
        x, y = queue.pop()
        for g in gens:
            u, v = find(int(g[x])), find(int(g[y]))
            if u != v:
                parent[max(u, v)] = min(u, v)
                queue.append((u, v))
    root = find(a)
    return [x for x in range(n) if find(x) == root], [find(x) for x in range(n)]


def _label_transitive(gens, n, p):
    """Word index (big-endian base p) of each point so the action lies in W."""
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    if n % p:
        raise NotAPGroup(f"orbit of size {n} is not a power of {p}")
    classes = None
    for y in range(1, n):
        block, roots = _minimal_block(gens, n, 0, y)
        if len(block) == p:
            classes = roots
            break
    if classes is None:
        raise NotAPGroup("no block system with blocks of size p")
    reps = sorted(set(classes))
    bindex = {r: i for i, r in enumerate(reps)}
    point_block = np.array([bindex[c] for c in classes], dtype=np.int64)
    nb = len(reps)
    block_gens = []
    for g in gens:
        bg = np.empty(nb, dtype=np.int64)
        bg[point_block] = point_block[np.asarray(g)]
        block_gens.append(bg)
    block_label = _label_transitive(block_gens, nb, p)

    # transversal of block stabilizer of B0 (block of point 0)
    b0 = point_block[0]
    ident = np.arange(n, dtype=np.int64)
    trans = {b0: ident}
    queue = [b0]
    while queue:
        b = queue.pop()
        for g in gens:
            c = int(point_block[int(g[np.flatnonzero(point_block == b)[0]])])
            if c not in trans:
                trans[c] = np.asarray(g, dtype=np.int64)[trans[b]]
                queue.append(c)
    members0 = np.flatnonzero(point_block == b0)
    h = None
    for b, tb in trans.items():
        for g in gens:
            g = np.asarray(g, dtype=np.int64)
            c = int(point_block[int(g[tb[members0[0]]])])
            tc = trans[c]
            tci = np.empty_like(tc)
            tci[tc] = ident
            s = tci[g[tb]]  # t_b * g * t_c^-1
            if any(s[x] != x for x in members0):
                h = s
                break
        if h is not None:
            break
    local = {}
    if h is None:
        raise NotAPGroup("block stabilizer acts trivially on its block")
    x = 0
    for i in range(p):
        local[x] = i
        x = int(h[x])
    if x != 0 or len(local) != p:
        raise NotAPGroup("block stabilizer is not cyclic of order p on its block")
    labels = np.empty(n, dtype=np.int64)
    for b, tb in trans.items():
        tbi = np.empty_like(tb)
        tbi[tb] = ident
        for x in np.flatnonzero(point_block == b):
            labels[x] = block_label[b] * p + local[int(tbi[x])]
    return labels


def wreath_relabel(gens, n, p):
    """Embed a permutation p-group on n points into W_L.

    Returns ``(L, to_leaf)`` with ``to_leaf[point]`` the leaf index; leaves not
    hit are fixed by every relabelled generator.
    """
    gens = [np.asarray(g, dtype=np.int64) for g in gens]
    labels = K.orbit_labels([g.astype(DTYPE) for g in gens], n) if n else np.zeros(0, dtype=np.int64)
    orbits = {}
    for x in range(n):
        orbits.setdefault(int(labels[x]), []).append(x)
    pieces = []
    for pts in orbits.values():
        m = len(pts)
        a = 0
        while p ** a < m:
            a += 1
        if p ** a != m:
            raise NotAPGroup(f"orbit of size {m} is not a power of {p}")
        index = {x: i for i, x in enumerate(pts)}
        local_gens = [np.array([index[int(g[x])] for x in pts], dtype=np.int64) for g in gens]
        pieces.append((-m, pts[0], pts, _label_transitive(local_gens, m, p)))
    pieces.sort(key=lambda t: (t[0], t[1]))
    total = sum(-t[0] for t in pieces)
    L = 1
    while p ** L < total:
        L += 1
    to_leaf = np.empty(n, dtype=np.int64)
    offset = 0
    for negm, _, pts, lab in pieces:
        for x, w in zip(pts, lab):
            to_leaf[x] = offset + int(w)
        offset += -negm
    return L, to_leaf
