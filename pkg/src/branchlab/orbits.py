"""Orbit growth of level actions and of k-fold product actions."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from branchlab import kernels as K
from branchlab.errors import CapExceeded, IncompleteEnumeration
from branchlab.lattice import EnumerationJob, EnumerationResult, direct_product, run_enumeration
from branchlab.pcgroup import PcGroup
from branchlab.permgroup import (
    PermGroup,
    SubgroupHandle,
    index,
    level_stabilizer,
    orbit_count,
    point_stabilizer,
    pointwise_stabilizer,
    prime_power,
)

PARTITION_CAP = 2 ** 20
TUPLE_CAP = 2 ** 24


@dataclass
class OrbitRow:
    m: int
    o_max: int
    bound: int
    witness_key: str
    passed: bool
    strict_bound: int | None = None


@dataclass
class OrbitTable:
    p: int
    level: int
    k: int
    rows: list[OrbitRow]
    label: str = "G"
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_json(self):
        return {
            "schema": 1,
            "p": self.p,
            "level": self.level,
            "k": self.k,
            "label": self.label,
            "rows": [
                {"m": r.m, "o_max": r.o_max, "bound": r.bound, "witness_key": r.witness_key, "pass": r.passed,
                 "strict_bound_exp4": r.strict_bound}
                for r in self.rows
            ],
            "notes": self.notes,
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "m", "o_max", "bound", "witness_key", "pass"])
        for r in self.rows:
            w.writerow([self.label, r.m, r.o_max, r.bound, r.witness_key, int(r.passed)])
        return buf.getvalue()


def orbits_on_level(U, level: int | None = None) -> int:
    group = U.group if isinstance(U, SubgroupHandle) else U
    return orbit_count(group)


def upper_bound(p: int, m: int, exponent: int = 5) -> int:
    return (p ** exponent - 1) * m + 1


def lower_bound(p: int, m: int) -> int:
    return (p - 1) * m + 1


def orbit_table(result: EnumerationResult, level: int, label: str = "G", bound_exponent: int = 5) -> OrbitTable:
    """Maximal orbit count per index exponent, checked against (p^5-1)m+1."""
    if not isinstance(result, EnumerationResult):
        raise IncompleteEnumeration("orbit_table needs a complete enumeration result")
    p = result.job.p
    best: dict[int, tuple[int, bytes]] = {}
    for r in result.records:
        if r.orbit_count is None:
            U = PcGroup.from_key(result.layout, r.canonical_key)
            r.orbit_count = U.orbit_count()
        cur = best.get(r.m)
        if cur is None or r.orbit_count > cur[0] or (r.orbit_count == cur[0] and r.canonical_key < cur[1]):
            best[r.m] = (r.orbit_count, r.canonical_key)
    rows = []
    for m in range(result.complete_to + 1):
        if m not in best:
            continue
        o, key = best[m]
        bound = upper_bound(p, m, bound_exponent)
        rows.append(OrbitRow(m, o, bound, key.hex(), o <= bound, upper_bound(p, m, 4)))
    notes = []
    weak = [r.m for r in rows if r.o_max > r.strict_bound]
    notes.append("exponent-4 bound holds on every row" if not weak else f"exponent-4 bound fails at m={weak}")
    return OrbitTable(p, level, 1, rows, label, notes)


@dataclass
class Witness:
    handle: SubgroupHandle
    level_j: int
    orbits: int
    bound: int

    @property
    def passed(self):
        return self.orbits >= self.bound


def stabilizer_witnesses(Q: PermGroup, p: int) -> list[Witness]:
    """Preimages of block stabilizers for the orbit partitions of the level stabilizers.

    For each j, the orbits of St(j) on the leaves form a block system; the
    stabilizer H of the block through leaf 0 is generated by St(j) and the
    point stabilizer of leaf 0.
    """
    view = Q.pc(p)
    L = view.layout.L
    stab0 = point_stabilizer(Q, 0)
    seen = set()
    out = []
    for j in range(L + 1):
        N = level_stabilizer(Q, j)
        gens = [view.to_layout(g) for g in list(N.generators) + list(stab0.generators)]
        H = Q.subgroup_from_pc(view, view.group.subgroup(gens))
        key = H.pc(p).group.key
        if key in seen:
            continue
        seen.add(key)
        idx = index(Q, H)
        m = prime_power(idx)[1] if idx > 1 else 0
        out.append(Witness(SubgroupHandle(Q, H, m), j, orbit_count(H), lower_bound(p, m)))
    return out


def partition_min_parts(p: int, m: int, cap: int = PARTITION_CAP) -> int:
    """Fewest powers of p summing to p^m with at least one part equal to 1.

    Removing one part 1 leaves an unconstrained sum to p^m - 1, so the answer
    is 1 + (fewest powers of p summing to p^m - 1), computed by an unbounded
    coin-change DP over all values below p^m.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    total = p ** m
    if total > cap:
        raise CapExceeded(f"p^m = {total} exceeds the partition cap {cap}")
    n = total  # values 0..total-1
    big = np.iinfo(np.int64).max // 4
    f = np.full(n, big, dtype=np.int64)
    f[0] = 0
    coin = 1
    while coin < total:
        # f[r + k*coin] = min_j f[r + j*coin] + (k - j), vectorised per residue
        rows = -(-n // coin)
        pad = np.full(rows * coin, big, dtype=np.int64)
        pad[:n] = f
        grid = pad.reshape(rows, coin)
        ks = np.arange(rows, dtype=np.int64)[:, None]
        grid = np.minimum.accumulate(grid - ks, axis=0) + ks
        f = np.minimum(f, grid.reshape(-1)[:n])
        coin *= p
    return int(f[total - 1]) + 1


# product actions -----------------------------------------------------------

def tuple_action(x, k: int, n: int) -> np.ndarray:
    """Permutation of the n^k tuples induced by an element of the k-fold product.

    ``x`` acts on the disjoint union of k blocks of n points; tuples are
    indexed big-endian, first coordinate most significant.
    """
    x = np.asarray(x, dtype=np.int64)
    idx = np.zeros(1, dtype=np.int64)
    for i in range(k):
        comp = x[i * n:(i + 1) * n] - i * n
        idx = (idx[:, None] * n + comp[None, :]).reshape(-1)
    return idx.astype(K.DTYPE)


def product_orbit_count(gens, k: int, n: int, cap: int = TUPLE_CAP) -> int:
    if n ** k > cap:
        raise CapExceeded(f"tuple space {n}^{k} exceeds the cap {cap}")
    return K.orbit_count([tuple_action(g, k, n) for g in gens], n ** k)


def power_group(Q: PermGroup, k: int) -> PermGroup:
    D = Q
    for _ in range(k - 1):
        D = direct_product(D, Q)
    return D


def product_orbit_table(Q: PermGroup, k: int, p: int, max_m: int, mode: str = "conjugacy",
                        cap: int = TUPLE_CAP, level: int | None = None,
                        memory_budget: int = 2 ** 30) -> tuple[OrbitTable, dict]:
    n = Q.degree
    if n ** k > cap:
        raise CapExceeded(f"tuple space {n}^{k} exceeds the cap {cap}")
    D = power_group(Q, k)
    res = run_enumeration(EnumerationJob(D, p, max_m, mode, memory_budget))
    view = D.pc(p)
    best: dict[int, tuple[int, bytes]] = {}
    for r in res.records:
        U = PcGroup.from_key(view.layout, r.canonical_key)
        gens = [view.from_layout(g) for g in U.gens]
        o = product_orbit_count(gens, k, n, cap)
        cur = best.get(r.m)
        if cur is None or o > cur[0]:
            best[r.m] = (o, r.canonical_key)
    rows = [OrbitRow(m, o, n ** k, key.hex(), o <= n ** k) for m, (o, key) in sorted(best.items())]
    # witness: the level-stabilizer image is trivial in the level quotient
    stab = [pointwise_stabilizer(Q, range(n))] * k
    wit_gens = []
    for i, S in enumerate(stab):
        for g in S.generators:
            full = np.arange(n * k)
            full[i * n:(i + 1) * n] = i * n + np.asarray(g)
            wit_gens.append(full)
    wit_orbits = product_orbit_count(wit_gens, k, n, cap)
    ell = level if level is not None else (prime_power(n)[1] if n > 1 else 0)
    order_exp = prime_power(Q.order)[1] if Q.order > 1 else 0
    sylow_exp = (p ** ell - 1) // (p - 1)
    extra = {
        "witness_orbits": wit_orbits,
        "witness_expected": p ** (k * ell),
        "witness_tight": wit_orbits == p ** (k * ell),
        "index_exp": k * order_exp,
        "index_bound_exp": k * sylow_exp,
        "index_ok": k * order_exp <= k * sylow_exp,
    }
    table = OrbitTable(p, ell, k, rows, f"Q^{k}")
    return table, extra


def _pc_intersection_kernel(U: PermGroup, points) -> PermGroup:
    """Elements of U fixing every point of ``points``."""
    return pointwise_stabilizer(U, points)


def verify_permutation_product(samples) -> dict:
    """Each sample is (U, n_omega, n_lambda) with U acting on Omega then Lambda blocks."""
    worst = 0.0
    failures = []
    count = 0
    for i, (U, n1, n2) in enumerate(samples):
        count += 1
        total = product_orbit_count_mixed(U, n1, n2)
        kernel = _pc_intersection_kernel(U, range(n1, n1 + n2))
        m_orb = len({int(l) for l in K.orbit_labels(list(kernel.generators), U.degree)[:n1]})
        proj = [np.asarray(g)[n1:] - n1 for g in U.generators]
        n_orb = K.orbit_count([g.astype(K.DTYPE) for g in proj], n2)
        bound = m_orb * n_orb
        worst = max(worst, total / bound)
        if total > bound:
            failures.append({"sample": i, "orbits": total, "bound": bound})
    return {"lemma": "permutation_product", "samples": count, "max_ratio": worst, "violations": failures,
            "pass": not failures}


def product_orbit_count_mixed(U: PermGroup, n1: int, n2: int) -> int:
    """Orbits of U on Omega x Lambda for U inside Sym(Omega) x Sym(Lambda)."""
    acts = []
    for g in U.generators:
        g = np.asarray(g, dtype=np.int64)
        a = g[:n1]
        b = g[n1:] - n1
        acts.append((a[:, None] * n2 + b[None, :]).reshape(-1).astype(K.DTYPE))
    return K.orbit_count(acts, n1 * n2)
