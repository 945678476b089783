"""Pure numpy implementation of the hot kernels.

Mirrors the compiled ``_kernels`` extension function for function; selected
by :mod:`branchlab.kernels` when the extension is missing or when the
environment variable ``BRANCHLAB_PURE=1`` is set.

Permutations are ``int32`` arrays acting on the right: ``x ** g == g[x]`` and
the product ``g*h`` (first g, then h) is ``h[g]``.
"""

from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

BACKEND = "python"
DTYPE = np.int32


@lru_cache(maxsize=None)
def layout_arrays(p, L):
    """First leaf and child block size of every internal vertex, BFS order."""
    starts = []
    cbs = []
    for j in range(L):
        block = p ** (L - j)
        for v in range(p ** j):
            starts.append(v * block)
            cbs.append(block // p)
    starts = np.array(starts, dtype=np.int64)
    cbs = np.array(cbs, dtype=np.int64)
    starts.setflags(write=False)
    cbs.setflags(write=False)
    return starts, cbs


def mul(a, b):
    return b[a]


def inv(a):
    out = np.empty_like(a)
    out[a] = np.arange(a.shape[0], dtype=a.dtype)
    return out


def power(a, e):
    n = a.shape[0]
    if e == 0:
        return np.arange(n, dtype=DTYPE)
    if e < 0:
        a = inv(a)
        e = -e
    out = a.copy()
    for _ in range(e - 1):
        out = a[out]
    return out


def commutator(a, b):
    """[a, b] = a^-1 b^-1 a b."""
    ai = inv(a)
    bi = inv(b)
    return b[a[bi[ai]]]


def conjugate(a, g):
    """a^g = g^-1 a g."""
    return g[a[inv(g)]]


def orbit_labels(gens, n):
    """Connected-component label of every point under the generators."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    gens = [np.asarray(g) for g in gens]
    if not gens:
        return np.arange(n, dtype=np.int64)
    rows = np.concatenate([np.arange(n)] * len(gens))
    cols = np.concatenate(gens)
    graph = coo_matrix((np.ones(rows.shape[0], dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=True, connection="weak")
    # relabel by first occurrence so results match the compiled kernel
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.shape[0])
    return remap[labels].astype(np.int64)


def orbit_count(gens, n):
    if n == 0:
        return 0
    return int(orbit_labels(gens, n).max()) + 1


def portrait(x, starts, cb, p):
    return ((x[starts] // cb) % p).astype(np.uint8)


def from_portrait(labels, p, L):
    """Leaf permutation of the wreath element with the given vertex rotations."""
    n = p ** L
    leaves = np.arange(n, dtype=np.int64)
    img = np.zeros(n, dtype=np.int64)
    offset = 0
    for j in range(L):
        below = p ** (L - j - 1)
        prefix = leaves // (below * p)
        digit = (leaves // below) % p
        img += ((digit + labels[offset + prefix]) % p) * below
        offset += p ** j
    return img.astype(DTYPE)


class PcTable:
    """Induced polycyclic sequence of a subgroup of the iterated wreath product.

    Row ``t`` (a BFS vertex index) holds, when present, an element whose first
    non-zero portrait label sits at vertex ``t`` and equals 1.
    """

    def __init__(self, p, L):
        self.p = p
        self.L = L
        self.degree = p ** L
        self.starts, self.cb = layout_arrays(p, L)
        self.nvert = self.starts.shape[0]
        self.elem = np.zeros((self.nvert, self.degree), dtype=DTYPE)
        self.einv = np.zeros((self.nvert, self.degree), dtype=DTYPE)
        self.present = np.zeros(self.nvert, dtype=np.uint8)
        self.size = 0
        self._pending = []

    def copy(self):
        out = PcTable.__new__(PcTable)
        out.p, out.L, out.degree = self.p, self.L, self.degree
        out.starts, out.cb, out.nvert = self.starts, self.cb, self.nvert
        out.elem = self.elem.copy()
        out.einv = self.einv.copy()
        out.present = self.present.copy()
        out.size = self.size
        out._pending = list(self._pending)
        return out

    def labels(self, x):
        return (x[self.starts] // self.cb) % self.p

    def sift(self, x):
        """Return ``(residue, depth, label)``; depth is -1 when x is in the table."""
        x = np.array(x, dtype=DTYPE)
        while True:
            lab = (x[self.starts] // self.cb) % self.p
            nz = np.flatnonzero(lab)
            if nz.size == 0:
                return x, -1, 0
            t = int(nz[0])
            c = int(lab[t])
            if not self.present[t]:
                return x, t, c
            row = self.einv[t]
            for _ in range(c):
                x = x[row]

    def contains(self, x):
        return self.sift(x)[1] < 0

    def residue(self, x):
        """Canonical representative of the right coset ``<table> * x``."""
        x = np.array(x, dtype=DTYPE)
        for t in np.flatnonzero(self.present):
            c = int((x[self.starts[t]] // self.cb[t]) % self.p)
            row = self.einv[t]
            for _ in range(c):
                x = x[row]
        return x

    def _store(self, t, u):
        self.elem[t] = u
        self.einv[t] = inv(u)
        self.present[t] = 1
        self.size += 1
        self._pending.append(t)

    def add(self, x):
        r, t, c = self.sift(x)
        if t < 0:
            return -1
        if c != 1:
            r = power(r, pow(c, -1, self.p))
        self._store(t, r)
        return t

    def close(self, normalizers=None, target=None):
        """Close under p-th powers, commutators and optional conjugations."""
        normalizers = [np.asarray(g, dtype=DTYPE) for g in (normalizers or ())]
        ninv = [inv(g) for g in normalizers]
        p = self.p
        while self._pending:
            if target is not None and self.size >= target:
                self._pending.clear()
                break
            t = self._pending.pop()
            u = self.elem[t]
            ui = self.einv[t]
            cands = [power(u, p)]
            for s in np.flatnonzero(self.present):
                if s != t:
                    e = self.elem[s]
                    ei = self.einv[s]
                    cands.append(u[e[ui[ei]]])
            for g, gi in zip(normalizers, ninv):
                cands.append(g[u[gi]])
            for y in cands:
                self.add(y)
                if target is not None and self.size >= target:
                    break

    def extend(self, gens, normalizers=None, target=None):
        for g in gens:
            self.add(np.asarray(g, dtype=DTYPE))
            if target is not None and self.size >= target:
                break
        self.close(normalizers, target)

    def conjugated(self, g):
        """Reduced table of the conjugate subgroup by g."""
        out = PcTable(self.p, self.L)
        gi = inv(np.asarray(g, dtype=DTYPE))
        for t in self.depths():
            out.add(g[self.elem[t][gi]])
        out.close(target=self.size)
        out.reduce()
        return out

    def reduce(self):
        """Bring the table to its unique reduced (canonical) form."""
        ds = [int(t) for t in np.flatnonzero(self.present)]
        for a in range(len(ds) - 1, -1, -1):
            s = ds[a]
            u = self.elem[s].copy()
            changed = False
            for t in ds[a + 1:]:
                c = int((u[self.starts[t]] // self.cb[t]) % self.p)
                if c:
                    row = self.einv[t]
                    for _ in range(c):
                        u = u[row]
                    changed = True
            if changed:
                self.elem[s] = u
                self.einv[s] = inv(u)

    def key_bytes(self):
        """Packed portraits of the stored rows (bit-packed rows when p = 2)."""
        rows = self.portraits()
        if self.p == 2:
            return np.packbits(rows, axis=1).tobytes()
        return rows.tobytes()

    def depths(self):
        return [int(t) for t in np.flatnonzero(self.present)]

    def gens(self):
        return [self.elem[t].copy() for t in self.depths()]

    def portraits(self):
        ds = np.flatnonzero(self.present)
        if ds.size == 0:
            return np.zeros((0, self.nvert), dtype=np.uint8)
        sub = self.elem[ds]
        return ((sub[:, self.starts] // self.cb) % self.p).astype(np.uint8)
