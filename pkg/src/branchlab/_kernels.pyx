# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: permutation arithmetic, portrait sifting, pc closure,
orbit labelling.  API-identical to ``_kernels_py``."""

import numpy as np

from branchlab._kernels_py import layout_arrays, from_portrait, portrait

BACKEND = "cython"
DTYPE = np.int32

cdef dict _LAYOUTS = {}


cdef tuple _layout(int p, int L):
    key = (p, L)
    hit = _LAYOUTS.get(key)
    if hit is None:
        starts, cb = layout_arrays(p, L)
        hit = (starts, cb, starts.astype(DTYPE), cb.astype(DTYPE))
        _LAYOUTS[key] = hit
    return hit


cdef inline void _compose(const int[:] a, const int[:] b, int[:] out, int n) noexcept nogil:
    # out = a*b  (first a, then b)
    cdef int i
    for i in range(n):
        out[i] = b[a[i]]


def mul(const int[:] a, const int[:] b):
    cdef int n = a.shape[0]
    out = np.empty(n, dtype=DTYPE)
    cdef int[:] o = out
    _compose(a, b, o, n)
    return out


def inv(const int[:] a):
    cdef int n = a.shape[0]
    cdef int i
    out = np.empty(n, dtype=DTYPE)
    cdef int[:] o = out
    for i in range(n):
        o[a[i]] = i
    return out


def power(a, long e):
    cdef int n = a.shape[0]
    cdef int i
    cdef long k
    if e == 0:
        return np.arange(n, dtype=DTYPE)
    if e < 0:
        a = inv(a)
        e = -e
    cdef const int[:] av = a
    out = np.array(a, dtype=DTYPE)
    cdef int[:] o = out
    for k in range(e - 1):
        for i in range(n):
            o[i] = av[o[i]]
    return out


def commutator(const int[:] a, const int[:] b):
    cdef int n = a.shape[0]
    cdef int i
    ai = inv(a)
    bi = inv(b)
    cdef int[:] aiv = ai
    cdef int[:] biv = bi
    out = np.empty(n, dtype=DTYPE)
    cdef int[:] o = out
    for i in range(n):
        o[i] = b[a[biv[aiv[i]]]]
    return out


def conjugate(const int[:] a, const int[:] g):
    cdef int n = a.shape[0]
    cdef int i
    gi = inv(g)
    cdef int[:] giv = gi
    out = np.empty(n, dtype=DTYPE)
    cdef int[:] o = out
    for i in range(n):
        o[i] = g[a[giv[i]]]
    return out


cdef int _find(long[:] parent, long i) noexcept nogil:
    cdef long root = i
    cdef long nxt
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


def orbit_labels(gens, long n):
    cdef long i, a, b
    parent_arr = np.arange(n, dtype=np.int64)
    cdef long[:] parent = parent_arr
    cdef const int[:] g
    for gen in gens:
        g = np.ascontiguousarray(gen, dtype=DTYPE)
        for i in range(n):
            a = _find(parent, i)
            b = _find(parent, g[i])
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    out = np.empty(n, dtype=np.int64)
    cdef long[:] o = out
    remap_arr = np.full(n, -1, dtype=np.int64)
    cdef long[:] remap = remap_arr
    cdef long nxt = 0
    for i in range(n):
        a = _find(parent, i)
        if remap[a] < 0:
            remap[a] = nxt
            nxt += 1
        o[i] = remap[a]
    return out


def orbit_count(gens, long n):
    if n == 0:
        return 0
    return int(orbit_labels(gens, n).max()) + 1


cdef class PcTable:
    """Induced polycyclic sequence of a subgroup of the iterated wreath product."""

    cdef public int p, L, degree, nvert, size
    cdef public object starts, cb, elem, einv, present
    cdef int[:] _starts
    cdef int[:] _cb
    cdef int[:, :] _elem
    cdef int[:, :] _einv
    cdef unsigned char[:] _present
    cdef int[:] _tmp
    cdef int[:] _buf
    cdef object _buf_arr
    cdef list _pending

    def __init__(self, int p, int L, bint _empty=False):
        self.p = p
        self.L = L
        self.degree = p ** L
        self.starts, self.cb, s32, c32 = _layout(p, L)
        self.nvert = self.starts.shape[0]
        self._starts = s32
        self._cb = c32
        self._tmp = np.empty(self.degree, dtype=DTYPE)
        self._buf_arr = np.empty(self.degree, dtype=DTYPE)
        self._buf = self._buf_arr
        self._pending = []
        self.size = 0
        if not _empty:
            self._set_storage(np.zeros((self.nvert, self.degree), dtype=DTYPE),
                              np.zeros((self.nvert, self.degree), dtype=DTYPE),
                              np.zeros(self.nvert, dtype=np.uint8))

    cdef void _set_storage(self, elem, einv, present):
        self.elem = elem
        self.einv = einv
        self.present = present
        self._elem = elem
        self._einv = einv
        self._present = present

    def copy(self):
        cdef PcTable out = PcTable(self.p, self.L, True)
        out._set_storage(self.elem.copy(), self.einv.copy(), self.present.copy())
        out.size = self.size
        out._pending = list(self._pending)
        return out

    def labels(self, x):
        return (x[self.starts] // self.cb) % self.p

    cdef int _sift_inplace(self, int[:] x, int* label) noexcept nogil:
        cdef int t, c, k, i
        cdef int n = self.degree
        for t in range(self.nvert):
            c = (x[self._starts[t]] // self._cb[t]) % self.p
            if c != 0:
                if not self._present[t]:
                    label[0] = c
                    return t
                for k in range(c):
                    for i in range(n):
                        self._tmp[i] = x[self._einv[t, i]]
                    for i in range(n):
                        x[i] = self._tmp[i]
        label[0] = 0
        return -1

    def sift(self, x):
        r = np.array(x, dtype=DTYPE)
        cdef int[:] rv = r
        cdef int c = 0
        cdef int t = self._sift_inplace(rv, &c)
        return r, t, c

    def residue(self, x):
        r = np.array(x, dtype=DTYPE)
        cdef int[:] xv = r
        cdef int t, c, k, i
        cdef int n = self.degree
        for t in range(self.nvert):
            if not self._present[t]:
                continue
            c = (xv[self._starts[t]] // self._cb[t]) % self.p
            for k in range(c):
                for i in range(n):
                    self._tmp[i] = xv[self._einv[t, i]]
                for i in range(n):
                    xv[i] = self._tmp[i]
        return r

    def contains(self, x):
        self._buf_arr[:] = x
        cdef int c = 0
        return self._sift_inplace(self._buf, &c) < 0

    cdef int _store_from(self, int[:] r, int t, int c):
        # store r^(c^-1 mod p) at depth t
        cdef int e = 1, k, i
        cdef int n = self.degree
        while (e * c) % self.p != 1:
            e += 1
        for i in range(n):
            self._elem[t, i] = r[i]
        for k in range(e - 1):
            for i in range(n):
                self._elem[t, i] = r[self._elem[t, i]]
        for i in range(n):
            self._einv[t, self._elem[t, i]] = i
        self._present[t] = 1
        self.size += 1
        self._pending.append(t)
        return t

    cdef int _add_buffer(self, int[:] x):
        # x is clobbered
        cdef int c = 0
        cdef int t = self._sift_inplace(x, &c)
        if t < 0:
            return -1
        return self._store_from(x, t, c)

    def add(self, x):
        self._buf_arr[:] = x
        return self._add_buffer(self._buf)

    def close(self, normalizers=None, target=None):
        cdef int tgt = -1 if target is None else int(target)
        cdef int n = self.degree
        cdef int i, k, s, t, r
        cdef int p = self.p
        if normalizers:
            garr = np.ascontiguousarray(np.array(list(normalizers), dtype=DTYPE).reshape(len(normalizers), n))
        else:
            garr = np.zeros((0, n), dtype=DTYPE)
        ginv_arr = np.empty_like(garr)
        for k in range(garr.shape[0]):
            ginv_arr[k][garr[k]] = np.arange(n, dtype=DTYPE)
        cdef int[:, :] G = garr
        cdef int[:, :] Gi = ginv_arr
        cdef int ng = garr.shape[0]
        cand_arr = np.empty(n, dtype=DTYPE)
        cdef int[:] cand = cand_arr
        cdef int nv = self.nvert
        while self._pending:
            if tgt >= 0 and self.size >= tgt:
                self._pending.clear()
                break
            t = self._pending.pop()
            # p-th power
            for i in range(n):
                cand[i] = self._elem[t, i]
            for k in range(p - 1):
                for i in range(n):
                    cand[i] = self._elem[t, cand[i]]
            self._add_buffer(cand)
            if tgt >= 0 and self.size >= tgt:
                continue
            for s in range(nv):
                if s == t or not self._present[s]:
                    continue
                # [e_s, u_t] = e^-1 u^-1 e u
                for i in range(n):
                    cand[i] = self._elem[t, self._elem[s, self._einv[t, self._einv[s, i]]]]
                self._add_buffer(cand)
                if tgt >= 0 and self.size >= tgt:
                    break
            if tgt >= 0 and self.size >= tgt:
                continue
            for r in range(ng):
                for i in range(n):
                    cand[i] = G[r, self._elem[t, Gi[r, i]]]
                self._add_buffer(cand)
                if tgt >= 0 and self.size >= tgt:
                    break

    def extend(self, gens, normalizers=None, target=None):
        for g in gens:
            self.add(g)
            if target is not None and self.size >= target:
                break
        self.close(normalizers, target)

    def conjugated(self, g):
        cdef PcTable out = PcTable(self.p, self.L)
        garr = np.ascontiguousarray(g, dtype=DTYPE)
        cdef int[:] gv = garr
        gi = inv(garr)
        cdef int[:] giv = gi
        cdef int n = self.degree
        cdef int t, i
        cand_arr = np.empty(n, dtype=DTYPE)
        cdef int[:] cand = cand_arr
        for t in range(self.nvert):
            if not self._present[t]:
                continue
            for i in range(n):
                cand[i] = gv[self._elem[t, giv[i]]]
            out._add_buffer(cand)
        out.close(target=self.size)
        out.reduce()
        return out

    def reduce(self):
        cdef int a, b, s, t, c, k, i
        cdef int n = self.degree
        cdef bint changed
        ds = [int(t) for t in np.flatnonzero(self.present)]
        cdef int nd = len(ds)
        u_arr = np.empty(n, dtype=DTYPE)
        cdef int[:] u = u_arr
        for a in range(nd - 1, -1, -1):
            s = ds[a]
            for i in range(n):
                u[i] = self._elem[s, i]
            changed = False
            for b in range(a + 1, nd):
                t = ds[b]
                c = (u[self._starts[t]] // self._cb[t]) % self.p
                for k in range(c):
                    for i in range(n):
                        self._tmp[i] = u[self._einv[t, i]]
                    for i in range(n):
                        u[i] = self._tmp[i]
                    changed = True
            if changed:
                for i in range(n):
                    self._elem[s, i] = u[i]
                    self._einv[s, u[i]] = i

    def key_bytes(self):
        """Packed portraits of the stored rows (bit-packed rows when p = 2)."""
        cdef int t, s, c, b, w
        cdef int nv = self.nvert
        cdef int width = (nv + 7) // 8 if self.p == 2 else nv
        out_arr = np.zeros(self.size * width, dtype=np.uint8)
        cdef unsigned char[:] out = out_arr
        cdef int row = 0
        for t in range(nv):
            if not self._present[t]:
                continue
            for s in range(nv):
                c = (self._elem[t, self._starts[s]] // self._cb[s]) % self.p
                if self.p == 2:
                    if c:
                        out[row * width + (s >> 3)] |= 128 >> (s & 7)
                else:
                    out[row * width + s] = c
            row += 1
        return out_arr.tobytes()

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
