"""Subgroup enumeration for finite p-groups, by descent through maximal subgroups.

Level m of the search holds the subgroups of index p^m.  Every subgroup of
index p^(m+1) is maximal in some subgroup of index p^m, and the maximal
subgroups of U are the preimages of the hyperplanes of U/Phi(U), so the next
level is the deduplicated union of the maximal subgroups of the current one.
Keys are the canonical polycyclic keys of :mod:`branchlab.pcgroup`, so
deduplication is exact.

In conjugacy mode each level holds one representative per class (the class
member with the smallest key) together with the class size.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice

import numpy as np

from branchlab import kernels as K
from branchlab.errors import BudgetExceeded, IncompleteEnumeration, NotAPGroup
from branchlab.pcgroup import PcGroup, TreeLayout
from branchlab.permgroup import PermGroup, SubgroupHandle, prime_power

log = logging.getLogger(__name__)

RECORD_OVERHEAD = 96  # rough per-entry cost of a bytes object inside a set
CHUNK = 32
TAG = b"\x01"  # keeps frontier records non-empty when the key is (trivial group)


@dataclass
class EnumerationJob:
    group: PermGroup
    p: int
    max_m: int
    mode: str = "exact"
    memory_budget: int = 4 * 2 ** 30
    parallelism: int = 1
    disk_budget: int | None = None
    time_budget: float | None = None
    workdir: str | None = None
    group_id: str = "group"
    level: int | None = None

    def __post_init__(self):
        if self.max_m < 0:
            raise ValueError("max_m must be non-negative")
        if self.memory_budget <= 0:
            raise ValueError("memory budget must be positive")
        if self.mode not in ("exact", "conjugacy"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class SubgroupRecord:
    m: int
    canonical_key: bytes
    dp: int
    orbit_count: int
    normalizer_index_exp: int = 0

    def pc(self, layout: TreeLayout) -> PcGroup:
        return PcGroup.from_key(layout, self.canonical_key)

    def handle(self, parent: PermGroup, p: int) -> SubgroupHandle:
        view = parent.pc(p)
        return SubgroupHandle(parent, parent.subgroup_from_pc(view, self.pc(view.layout)), self.m)


@dataclass
class GrowthRow:
    m: int
    s_count: int
    exact_count: int
    class_count: int
    dp_max: int | None
    level_used: int | None = None
    stabilized: bool = True


@dataclass
class GrowthTables:
    p: int
    rows: list[GrowthRow]
    group_id: str = "group"
    level: int | None = None
    mode: str = "exact"
    budget_stats: dict = field(default_factory=dict)

    def s(self, m):
        return self.rows[m].s_count

    def dp_max(self, m):
        return self.rows[m].dp_max

    def to_json(self):
        return {
            "schema": 1,
            "group_id": self.group_id,
            "p": self.p,
            "level": self.level,
            "mode": self.mode,
            "per_m": [
                {
                    "m": r.m,
                    "s_count": str(r.s_count),
                    "exact_count": str(r.exact_count),
                    "dp_max": r.dp_max,
                    "class_count": r.class_count,
                    "level_used": r.level_used,
                    "stabilized": r.stabilized,
                }
                for r in self.rows
            ],
            "budget_stats": self.budget_stats,
        }

    @classmethod
    def from_json(cls, data):
        rows = [
            GrowthRow(
                r["m"], int(r["s_count"]), int(r["exact_count"]), r["class_count"], r["dp_max"],
                r.get("level_used"), r.get("stabilized", True),
            )
            for r in data["per_m"]
        ]
        return cls(data["p"], rows, data.get("group_id", "group"), data.get("level"), data.get("mode", "exact"),
                   data.get("budget_stats", {}))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "s_count", "exact_count", "class_count", "dp_max", "level_used", "stabilized"])
        for r in self.rows:
            w.writerow([r.m, r.s_count, r.exact_count, r.class_count, r.dp_max, r.level_used, int(r.stabilized)])
        return buf.getvalue()


# external-memory deduplication ---------------------------------------------

class DedupStore:
    """Insert-if-absent set of fixed-length byte records with a memory budget.

    Past the budget the in-memory set is written out as a sorted run file;
    :meth:`sorted_unique` merges all runs into one sorted, duplicate-free
    stream.
    """

    def __init__(self, record_len, memory_budget, workdir, disk_budget=None):
        self.record_len = record_len
        self.memory_budget = memory_budget
        self.disk_budget = disk_budget
        self.workdir = workdir
        self.mem: set[bytes] = set()
        self.runs: list[str] = []
        self.disk_bytes = 0
        self.spills = 0
        self.peak_memory = 0

    def _mem_bytes(self):
        return len(self.mem) * (self.record_len + RECORD_OVERHEAD)

    def add(self, rec: bytes):
        self.mem.add(rec)
        if len(self.mem) & 1023 == 0:
            used = self._mem_bytes()
            self.peak_memory = max(self.peak_memory, used)
            if used > self.memory_budget:
                self.spill()

    def spill(self):
        if not self.mem:
            return
        fd, path = tempfile.mkstemp(prefix="run", suffix=".bin", dir=self.workdir)
        with os.fdopen(fd, "wb") as fh:
            for rec in sorted(self.mem):
                fh.write(rec)
        self.disk_bytes += len(self.mem) * self.record_len
        self.runs.append(path)
        self.spills += 1
        self.mem.clear()
        if self.disk_budget is not None and self.disk_bytes > self.disk_budget:
            raise BudgetExceeded(f"dedup spill of {self.disk_bytes} bytes exceeds the disk budget")

    def _read_run(self, path):
        n = self.record_len
        with open(path, "rb") as fh:
            while True:
                chunk = fh.read(n * 4096)
                if not chunk:
                    break
                for i in range(0, len(chunk), n):
                    yield chunk[i:i + n]

    def sorted_unique(self):
        self.peak_memory = max(self.peak_memory, self._mem_bytes())
        streams = [self._read_run(r) for r in self.runs] + [iter(sorted(self.mem))]
        last = None
        for rec in heapq.merge(*streams):
            if rec != last:
                yield rec
                last = rec

    def close(self):
        for r in self.runs:
            try:
                os.unlink(r)
            except FileNotFoundError:
                pass
        self.runs = []
        self.mem.clear()


def write_frontier(path, records):
    count = 0
    with open(path, "wb") as fh:
        for rec in records:
            fh.write(rec)
            count += 1
    return count


def read_frontier(path, record_len):
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(record_len * 4096)
            if not chunk:
                break
            for i in range(0, len(chunk), record_len):
                yield chunk[i:i + record_len]


# per-node work -----------------------------------------------------------

class _Expander:
    """Computes dp, orbit count and children of frontier entries (picklable state only)."""

    def __init__(self, p, L, mode, conj_gens, point_leaves, expand_children, cache_limit=200_000):
        self.layout = TreeLayout(p, L)
        self.mode = mode
        self.conj_gens = [np.asarray(g, dtype=K.DTYPE) for g in conj_gens]
        self.point_leaves = None if point_leaves is None else np.asarray(point_leaves, dtype=np.int64)
        self.expand_children = expand_children
        self.cache: dict[bytes, tuple[bytes, int]] = {}
        self.cache_limit = cache_limit

    def orbits(self, U: PcGroup) -> int:
        if self.point_leaves is None:
            return U.orbit_count()
        labels = K.orbit_labels(U.gens, self.layout.degree)
        return int(np.unique(labels[self.point_leaves]).shape[0])

    def conj_class(self, M: PcGroup):
        hit = self.cache.get(M.key)
        if hit is not None:
            return hit
        members = {M.key: M}
        queue = [M]
        while queue:
            V = queue.pop()
            for g in self.conj_gens:
                W = V.conjugate(g)
                if W.key not in members:
                    members[W.key] = W
                    queue.append(W)
        size = len(members)
        e = 0
        while self.layout.p ** e < size:
            e += 1
        out = (min(members), e)
        if len(self.cache) + size > self.cache_limit:
            self.cache.clear()
        for k in members:
            self.cache[k] = out
        return out

    def expand(self, payloads, key_len):
        out = []
        for rec in payloads:
            key = rec[1:1 + key_len]
            U = PcGroup.from_key(self.layout, key)
            dpv = U.dp()
            orb = self.orbits(U)
            children = []
            if self.expand_children and U.exp > 0:
                for M in U.maximal_subgroups():
                    if self.mode == "conjugacy":
                        mk, e = self.conj_class(M)
                        children.append(TAG + mk + e.to_bytes(2, "big"))
                    else:
                        children.append(TAG + M.key)
            out.append((dpv, orb, children))
        return out


_WORKER: _Expander | None = None


def _init_worker(args):
    global _WORKER
    _WORKER = _Expander(*args)


def _work(task):
    payloads, key_len, expand_children = task
    _WORKER.expand_children = expand_children
    return _WORKER.expand(payloads, key_len)


def _chunks(it, n):
    it = iter(it)
    while True:
        block = list(islice(it, n))
        if not block:
            return
        yield block


# enumeration ---------------------------------------------------------------

def key_length(layout: TreeLayout, exp: int) -> int:
    if layout.p == 2:
        return exp * ((layout.nvert + 7) // 8)
    return exp * layout.nvert


class EnumerationResult:
    def __init__(self, job, records, complete_to, stats, layout, order_exp):
        self.job = job
        self.records = records
        self.complete_to = complete_to
        self.budget_stats = stats
        self.layout = layout
        self.order_exp = order_exp

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def at(self, m):
        return [r for r in self.records if r.m == m]


def _setup(job: EnumerationJob):
    G = job.group
    if not G.is_p_group(job.p):
        raise NotAPGroup(f"group of order {G.order} is not a {job.p}-group")
    view = G.pc(job.p)
    layout = view.layout
    Gpc = view.group
    conj = [np.asarray(g) for g in Gpc.burnside_basis()] if job.mode == "conjugacy" else []
    point_leaves = None if view.to_leaf is None else view.to_leaf
    return view, layout, Gpc, conj, point_leaves


def enumerate_subgroups(job: EnumerationJob, resume_token: str | None = None):
    """Yield SubgroupRecords sorted by (m, key); see :func:`run_enumeration`."""
    view, layout, Gpc, conj, point_leaves = _setup(job)
    p = job.p
    order_exp = Gpc.exp
    max_m = min(job.max_m, order_exp)
    own_dir = job.workdir is None
    workdir = job.workdir or tempfile.mkdtemp(prefix="branchlab-")
    os.makedirs(workdir, exist_ok=True)
    stats = {"spills": 0, "peak_dedup_bytes": 0, "disk_bytes": 0, "levels_completed": -1}
    start = time.monotonic()
    suffix = 2 if job.mode == "conjugacy" else 0

    if resume_token is not None:
        with open(resume_token) as fh:
            tok = json.load(fh)
        if tok["p"] != p or tok["mode"] != job.mode or tok["group_order_exp"] != order_exp:
            raise ValueError("resume token does not match this job")
        m0 = tok["next_m"]
        frontier_path = tok["frontier"]
        done_path = tok.get("records")
        stats["levels_completed"] = m0 - 1
        if done_path and os.path.exists(done_path):
            yield from _read_done(done_path)
    else:
        m0 = 0
        done_path = None
        frontier_path = os.path.join(workdir, "frontier-0.bin")
        first = TAG + Gpc.key + (b"\x00\x00" if suffix else b"")
        write_frontier(frontier_path, [first])

    args = (p, layout.L, job.mode, conj, point_leaves, True)
    pool = None
    local = None
    if job.parallelism > 1:
        pool = ProcessPoolExecutor(max_workers=job.parallelism, initializer=_init_worker, initargs=(args,))
    else:
        local = _Expander(*args)

    try:
        for m in range(m0, max_m + 1):
            klen = key_length(layout, order_exp - m)
            rlen = 1 + klen + suffix
            expand = m < max_m
            store = None
            if expand:
                store = DedupStore(1 + key_length(layout, order_exp - m - 1) + suffix, job.memory_budget, workdir,
                                   job.disk_budget)
            blocks = _chunks(read_frontier(frontier_path, rlen), CHUNK)
            if pool is not None:
                paired = _windowed(pool, blocks, klen, expand, 4 * job.parallelism)
            else:
                local.expand_children = expand
                paired = ((block, local.expand(block, klen)) for block in blocks)
            level_records = []
            for block, res in paired:
                for rec, (dpv, orb, children) in zip(block, res):
                    e = int.from_bytes(rec[1 + klen:], "big") if suffix else 0
                    level_records.append(SubgroupRecord(m, bytes(rec[1:1 + klen]), dpv, orb, e))
                    for c in children:
                        store.add(c)
                if job.time_budget is not None and time.monotonic() - start > job.time_budget:
                    raise BudgetExceeded(f"time budget exhausted while expanding level {m}")
            yield from level_records
            stats["levels_completed"] = m
            done_path = _append_done(done_path or os.path.join(workdir, "records.txt"), level_records)
            if expand:
                nxt = os.path.join(workdir, f"frontier-{m + 1}.bin")
                write_frontier(nxt, store.sorted_unique())
                stats["spills"] += store.spills
                stats["peak_dedup_bytes"] = max(stats["peak_dedup_bytes"], store.peak_memory)
                stats["disk_bytes"] += store.disk_bytes
                store.close()
                _unlink(frontier_path)
                frontier_path = nxt
    except BudgetExceeded as exc:
        token = os.path.join(workdir, "resume.json")
        next_m = stats["levels_completed"] + 1
        with open(token, "w") as fh:
            json.dump({
                "schema": 1, "p": p, "mode": job.mode, "group_order_exp": order_exp,
                "next_m": next_m, "frontier": frontier_path, "max_m": job.max_m, "records": done_path,
            }, fh)
        raise BudgetExceeded(str(exc), partial=dict(stats), resume_token=token) from None
    finally:
        if pool is not None:
            pool.shutdown()
    _unlink(frontier_path)
    if done_path:
        _unlink(done_path)
    if own_dir:
        try:
            os.rmdir(workdir)
        except OSError:
            pass
    job._stats = stats


def _append_done(path, records):
    # finished levels, kept so a resumed run reports complete tables
    with open(path, "a") as fh:
        for r in records:
            fh.write(f"{r.m} {r.canonical_key.hex()} {r.dp} {r.orbit_count} {r.normalizer_index_exp}\n")
    return path


def _read_done(path):
    with open(path) as fh:
        for line in fh:
            m, key, dpv, orb, e = line.split()
            yield SubgroupRecord(int(m), bytes.fromhex(key), int(dpv), int(orb), int(e))


def _windowed(pool, blocks, klen, expand, window):
    """Map blocks through the pool in order, keeping at most ``window`` in flight."""
    pending = []
    for block in blocks:
        pending.append((block, pool.submit(_work, (block, klen, expand))))
        if len(pending) >= window:
            b, fut = pending.pop(0)
            yield b, fut.result()
    for b, fut in pending:
        yield b, fut.result()


def _unlink(path):
    try:
        os.unlink(path)
    except FileNotFoundError:
        pass


def run_enumeration(job: EnumerationJob, resume_token=None) -> EnumerationResult:
    """Collect the enumeration; on a budget failure the partial result rides on the exception."""
    records = []
    gen = enumerate_subgroups(job, resume_token)
    view = job.group.pc(job.p)
    try:
        for r in gen:
            records.append(r)
    except BudgetExceeded as exc:
        complete = exc.partial.get("levels_completed", -1) if exc.partial else -1
        exc.partial = EnumerationResult(job, [r for r in records if r.m <= complete], complete,
                                        exc.partial, view.layout, view.group.exp)
        raise
    stats = getattr(job, "_stats", {})
    return EnumerationResult(job, records, min(job.max_m, view.group.exp), stats, view.layout, view.group.exp)


# tables -------------------------------------------------------------------

def _weight(rec: SubgroupRecord, p: int, mode: str) -> int:
    return p ** rec.normalizer_index_exp if mode == "conjugacy" else 1


def _complete_to(result):
    if isinstance(result, EnumerationResult):
        return result.complete_to, result.order_exp, result.job.mode, result.job.p, result.records
    raise TypeError("expected an EnumerationResult")


def s_table(result: EnumerationResult, max_m: int) -> GrowthTables:
    complete, order_exp, mode, p, records = _complete_to(result)
    if max_m > complete and complete < order_exp:
        raise IncompleteEnumeration(f"records complete only up to m={complete}, requested {max_m}")
    rows = []
    total = 0
    by_m: dict[int, list[SubgroupRecord]] = {}
    for r in records:
        by_m.setdefault(r.m, []).append(r)
    for m in range(max_m + 1):
        recs = by_m.get(m, [])
        exact = sum(_weight(r, p, mode) for r in recs)
        total += exact
        rows.append(GrowthRow(m, total, exact, len(recs), max((r.dp for r in recs), default=None),
                              result.job.level))
    stats = dict(result.budget_stats or {})
    return GrowthTables(p, rows, result.job.group_id, result.job.level, mode, stats)


dp_profile = s_table


def stabilization_sweep(group, subgroup_selector, m, levels, mode="conjugacy", memory_budget=4 * 2 ** 30,
                        parallelism=1):
    """Tables for the same named subgroup at several levels; stabilized marks equal last-two entries."""
    from branchlab.selfsim import distinguished_subgroup, level_quotient

    per_level = []
    for level in levels:
        if subgroup_selector in (None, "G", "whole"):
            Q = level_quotient(group, level)
        elif subgroup_selector == "K":
            Q = distinguished_subgroup(group, level)
        else:
            Q = subgroup_selector(group, level)
        job = EnumerationJob(Q, group.p, m, mode, memory_budget, parallelism, group_id=group.name, level=level)
        per_level.append((level, s_table(run_enumeration(job), min(m, _order_exp(Q, group.p)))))
    last_level, last = per_level[-1]
    rows = []
    for i in range(m + 1):
        if i >= len(last.rows):
            break
        r = last.rows[i]
        stable = False
        if len(per_level) >= 2:
            prev = per_level[-2][1]
            if i < len(prev.rows):
                q = prev.rows[i]
                stable = (q.s_count, q.dp_max) == (r.s_count, r.dp_max)
        rows.append(GrowthRow(i, r.s_count, r.exact_count, r.class_count, r.dp_max, last_level, stable))
    out = GrowthTables(group.p, rows, group.name, last_level, mode)
    out.sweep = [(lv, t) for lv, t in per_level]
    return out


def _order_exp(Q, p):
    return prime_power(Q.order)[1] if Q.order > 1 else 0


# lemma checks ---------------------------------------------------------------

def direct_product(G: PermGroup, H: PermGroup) -> PermGroup:
    n, k = G.degree, H.degree
    gens = []
    for g in G.generators:
        gens.append(np.concatenate([g, np.arange(n, n + k)]))
    for h in H.generators:
        gens.append(np.concatenate([np.arange(n), n + np.asarray(h)]))
    return PermGroup(gens, n + k)


def verify_lemma_direct(G: PermGroup, H: PermGroup, max_m: int, p: int, memory_budget=2 ** 30) -> dict:
    from branchlab.permgroup import dp

    dG, dH = dp(G, p), dp(H, p)
    GH = direct_product(G, H)
    res = run_enumeration(EnumerationJob(GH, p, max_m, "exact", memory_budget))
    violations = []
    min_slack = None
    for r in res.records:
        slack = r.m + dG + dH - r.dp
        min_slack = slack if min_slack is None else min(min_slack, slack)
        if slack < 0:
            violations.append({"m": r.m, "key": r.canonical_key.hex(), "dp": r.dp})
    return {"lemma": "direct", "dG": dG, "dH": dH, "records": len(res.records), "min_slack": min_slack,
            "violations": violations, "pass": not violations}


def verify_lemma_inductive(K_quotient: PermGroup, constants, records, p: int) -> dict:
    from branchlab.permgroup import dp

    k, _ell, d = constants
    dK = dp(K_quotient, p)
    C = (k - 1) * dK + d
    if isinstance(records, EnumerationResult):
        recs = records.records
    else:
        recs = list(records)
    if not recs:
        raise IncompleteEnumeration("no records supplied")
    violations = []
    worst = Fraction(0)
    for r in recs:
        bound = C * r.m + dK
        worst = max(worst, Fraction(r.dp, bound))
        if r.dp > bound:
            violations.append({"m": r.m, "key": r.canonical_key.hex(), "dp": r.dp, "bound": bound})
    return {"lemma": "inductive", "C": C, "dK": dK, "max_ratio": str(worst), "records": len(recs),
            "violations": violations, "pass": not violations}
