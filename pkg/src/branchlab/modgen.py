"""F_p linear algebra with a group action, and finite wreath quotients F_p wr Q."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from branchlab import kernels as K
from branchlab.errors import CapExceeded, NotGenerating, PhiVanishesOnGenerators
from branchlab.permgroup import PermGroup, SubgroupHandle, dp, orbit_partition

WREATH_DEGREE_CAP = 2 ** 12


# row reduction over F_p ------------------------------------------------------

def rref(rows, p: int, ncols: int | None = None) -> np.ndarray:
    """Reduced row echelon form of the rows over F_p, zero rows dropped."""
    A = np.array(rows, dtype=np.int64)
    if ncols is None:
        ncols = A.shape[-1] if A.ndim == 2 else 0
    A = A.reshape(-1, ncols) % p
    r = 0
    nrows = A.shape[0]
    for c in range(ncols):
        if r == nrows:
            break
        piv = np.nonzero(A[r:, c])[0]
        if not piv.size:
            continue
        i = r + piv[0]
        A[[r, i]] = A[[i, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, p) % p
        others = np.nonzero(A[:, c])[0]
        others = others[others != r]
        A[others] = (A[others] - np.outer(A[others, c], A[r])) % p
        r += 1
    return A[:r]


def rank(rows, p: int) -> int:
    return len(rref(rows, p))


def nullspace(A, p: int) -> np.ndarray:
    """Basis of {x : A x = 0} over F_p, as rows."""
    A = np.asarray(A, dtype=np.int64) % p
    n = A.shape[1]
    R = rref(A, p)
    pivots = [int(np.nonzero(row)[0][0]) for row in R]
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        x = np.zeros(n, dtype=np.int64)
        x[f] = 1
        for row, c in zip(R, pivots):
            x[c] = -row[f] % p
        basis.append(x)
    return np.array(basis, dtype=np.int64).reshape(len(basis), n)



def same_span(A, B, p: int) -> bool:
    return np.array_equal(rref(A, p, np.shape(A)[-1]), rref(B, p, np.shape(B)[-1]))


def encode_matrix(M, p: int) -> list[str]:
    return ["".join(str(int(x)) for x in row) for row in np.asarray(M) % p]


def decode_matrix(rows, p: int) -> np.ndarray:
    return np.array([[int(ch) for ch in r] for r in rows], dtype=np.int64) % p


# modules --------------------------------------------------------------------

@dataclass(frozen=True)
class FpGModule:
    """Row-vector module: v^g = v @ action[g]."""

    p: int
    dim: int
    action: tuple
    group: PermGroup | None = None

    def __post_init__(self):
        acts = tuple(np.asarray(a, dtype=np.int64) % self.p for a in self.action)
        for a in acts:
            if a.shape != (self.dim, self.dim):
                raise ValueError("action matrices must be dim x dim")
            if rank(a, self.p) != self.dim:
                raise ValueError("action matrices must be invertible")
            a.setflags(write=False)
        object.__setattr__(self, "action", acts)

    def act(self, v, i: int) -> np.ndarray:
        return np.asarray(v, dtype=np.int64) @ self.action[i] % self.p

    def to_json(self) -> dict:
        return {"p": self.p, "dim": self.dim, "action": [encode_matrix(a, self.p) for a in self.action]}

    @classmethod
    def from_json(cls, data) -> "FpGModule":
        p = data["p"]
        return cls(p, data["dim"], tuple(decode_matrix(a, p) for a in data["action"]))


@dataclass(frozen=True)
class ModuleHom:
    """Homomorphism onto the trivial one-dimensional module, as a row."""

    source: FpGModule
    matrix: np.ndarray

    def __post_init__(self):
        M = self.source
        row = np.asarray(self.matrix, dtype=np.int64).reshape(-1) % M.p
        if row.shape != (M.dim,):
            raise ValueError("functional has the wrong length")
        for a in M.action:
            if not np.array_equal(a @ row % M.p, row):
                raise ValueError("functional is not invariant under the action")
        row.setflags(write=False)
        object.__setattr__(self, "matrix", row)

    def __call__(self, v) -> int:
        return int(np.asarray(v, dtype=np.int64) @ self.matrix % self.source.p)

    def kernel(self) -> np.ndarray:
        return nullspace(self.matrix.reshape(1, -1), self.source.p)


def permutation_module(Q: PermGroup, p: int) -> FpGModule:
    n = Q.degree
    acts = []
    for g in Q.generators:
        A = np.zeros((n, n), dtype=np.int64)
        A[np.arange(n), np.asarray(g, dtype=np.int64)] = 1
        acts.append(A)
    return FpGModule(p, n, tuple(acts), Q)


def submodule_span(M: FpGModule, vectors) -> np.ndarray:
    """Echelon basis of the smallest invariant subspace containing the vectors."""
    basis = rref(np.asarray(vectors, dtype=np.int64).reshape(-1, M.dim), M.p, M.dim)
    while True:
        images = [basis] + [basis @ a % M.p for a in M.action]
        grown = rref(np.vstack(images), M.p, M.dim)
        if len(grown) == len(basis):
            return grown
        basis = grown


def codim1_generators(M: FpGModule, module_gens, phi: ModuleHom, group_gens=None) -> list[np.ndarray]:
    """Explicit generators of ker(phi): v1 - v1^g for each group generator g,
    then phi(v_i) v1 - phi(v1) v_i for the remaining module generators."""
    p = M.p
    vs = [np.asarray(v, dtype=np.int64) % p for v in module_gens]
    if len(submodule_span(M, vs)) != M.dim:
        raise NotGenerating("the given vectors do not generate the module")
    first = next((i for i, v in enumerate(vs) if phi(v)), None)
    if first is None:
        raise PhiVanishesOnGenerators("the functional vanishes on every generator")
    vs = [vs[first]] + vs[:first] + vs[first + 1:]
    v1 = vs[0]
    idx = range(len(M.action)) if group_gens is None else group_gens
    out = [(v1 - M.act(v1, i)) % p for i in idx]
    a1 = phi(v1)
    out += [(phi(v) * v1 - a1 * v) % p for v in vs[1:]]
    return out


def check_codim1(M: FpGModule, module_gens, phi: ModuleHom, instance_id=0) -> dict:
    out = codim1_generators(M, module_gens, phi)
    span = submodule_span(M, out)
    kernel = submodule_span(M, phi.kernel())
    d, m = len(module_gens), len(M.action)
    return {
        "instance_id": instance_id,
        "d": d,
        "m": m,
        "output_size": len(out),
        "in_kernel": all(phi(v) == 0 for v in out),
        "span_ok": same_span(span, kernel, M.p),
        "bound_ok": len(out) <= d + m - 1,
    }


def random_instance(rng, p: int, max_dim: int = 8, max_gens: int = 3, max_order: int = 64):
    """A permutation module with random generators and a random invariant functional.

    The acting group is resampled until its order is at most ``max_order``.
    """
    n = int(rng.integers(1, max_dim + 1))
    k = int(rng.integers(1, max_gens + 1))
    while True:
        gens = []
        for _ in range(k):
            if rng.random() < 0.3:
                gens.append(np.arange(n, dtype=K.DTYPE))
            else:
                gens.append(_small_permutation(rng, n))
        Q = PermGroup(gens, n)
        if Q.order <= max_order:
            break
    M = permutation_module(Q, p)
    orbits = orbit_partition(Q)
    while True:
        weights = rng.integers(0, p, size=len(orbits))
        if weights.any():
            break
    row = np.zeros(n, dtype=np.int64)
    for w, orb in zip(weights, orbits):
        row[list(orb)] = w
    phi = ModuleHom(M, row)
    while True:
        d = int(rng.integers(1, 4))
        vs = [rng.integers(0, p, size=n) for _ in range(d)]
        # make sure the set generates by adding a standard vector per orbit when needed
        if len(submodule_span(M, vs)) < n:
            vs += [np.eye(n, dtype=np.int64)[min(orb)] for orb in orbits]
        if any(phi(v) for v in vs):
            return M, vs, phi


def _small_permutation(rng, n: int) -> np.ndarray:
    """A random permutation whose cycles are short, so small groups come up often."""
    pts = rng.permutation(n)
    g = np.arange(n, dtype=K.DTYPE)
    i = 0
    while i < n:
        c = int(rng.integers(1, 5))
        cyc = pts[i:i + c]
        g[cyc] = np.roll(cyc, -1)
        i += c
    return g


# wreath quotients -----------------------------------------------------------

@dataclass(frozen=True)
class WreathQuotient:
    """F_p wr Q acting on degree*p points; point (x, i) is x*p + i."""

    top: PermGroup
    whole: PermGroup
    p: int

    @property
    def base_dim(self) -> int:
        return self.top.degree

    def base_generator(self, x: int) -> np.ndarray:
        n, p = self.top.degree, self.p
        g = np.arange(n * p, dtype=K.DTYPE)
        g[x * p:(x + 1) * p] = x * p + (np.arange(p) + 1) % p
        return g

    def lift(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.int64)
        p = self.p
        return (np.repeat(g * p, p) + np.tile(np.arange(p), len(g))).astype(K.DTYPE)

    def project(self, h) -> np.ndarray:
        return (np.asarray(h, dtype=np.int64)[::self.p] // self.p).astype(K.DTYPE)

    def base_part(self, h) -> np.ndarray:
        """f with (x, 0) -> (g(x), f(x))."""
        return np.asarray(h, dtype=np.int64)[::self.p] % self.p

    def preimage(self, U: PermGroup) -> PermGroup:
        gens = [self.lift(u) for u in U.generators]
        gens += [self.base_generator(x) for x in range(self.base_dim)]
        return PermGroup(gens, self.whole.degree)


def wreath_quotient(Q: PermGroup, p: int, cap: int = WREATH_DEGREE_CAP) -> WreathQuotient:
    n = Q.degree
    if n * p > cap:
        raise CapExceeded(f"wreath degree {n * p} exceeds the cap {cap}")
    W = WreathQuotient(Q, PermGroup([], n * p), p)
    gens = [W.lift(g) for g in Q.generators] + [W.base_generator(x) for x in range(n)]
    return WreathQuotient(Q, PermGroup(gens, n * p), p)


def phi_orbit_surjection(W: WreathQuotient, U, dp_max_upto: int | None = None) -> dict:
    """Orbit sums of the base part map the preimage of U onto F_p^N, N = #orbits of U."""
    if isinstance(U, SubgroupHandle):
        n_exp = U.index_exp
        U = U.group
    else:
        n_exp = None
    p = W.p
    orbits = orbit_partition(U)
    N = len(orbits)
    label = np.empty(W.base_dim, dtype=np.int64)
    for i, orb in enumerate(orbits):
        label[list(orb)] = i

    def phi(h):
        out = np.zeros(N, dtype=np.int64)
        np.add.at(out, label, W.base_part(h))
        return out % p

    H = W.preimage(U)
    gens = list(H.generators)
    hom = all(np.array_equal(phi(b[a]), (phi(a) + phi(b)) % p) for a in gens for b in gens)
    surj = rank(np.array([phi(g) for g in gens]), p) == N
    d = dp(H, p)
    report = {
        "orbits": N,
        "homomorphism": hom,
        "surjective": surj,
        "check": hom and surj,
        "dp_preimage": d,
        "lower_ok": d >= N,
        "level_relative": True,
    }
    if n_exp is not None and dp_max_upto is not None:
        upper = N + n_exp * dp_max_upto
        # the generator count in the argument also spends d(U) <= max dp on the top group
        corrected = N + (n_exp + 1) * dp_max_upto
        report.update({"index_exp": n_exp, "upper": upper, "upper_ok": d <= upper, "slack": upper - d,
                       "upper_with_top": corrected, "upper_with_top_ok": d <= corrected})
    return report
