"""Named verification runs shared by the command line and the acceptance suite.

Each check returns a JSON-ready dict with at least ``id`` and ``pass``.
"""

from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np

from branchlab import kernels as K
from branchlab.errors import BudgetExceeded, NotFound, VerificationFailed
from branchlab.growth import alpha_estimate, check_subgroup_counts
from branchlab.lattice import (
    EnumerationJob,
    direct_product,
    run_enumeration,
    s_table,
    verify_lemma_direct,
    verify_lemma_inductive,
)
from branchlab.modgen import check_codim1, phi_orbit_surjection, random_instance, wreath_quotient
from branchlab.orbits import (
    lower_bound,
    partition_min_parts,
    product_orbit_table,
    stabilizer_witnesses,
    upper_bound,
    verify_permutation_product,
)
from branchlab.permgroup import PermGroup, dp, index, prime_power, random_element
from branchlab.selfsim import (
    builtin_group,
    congruence_image,
    distinguished_subgroup,
    level_quotient,
)
from branchlab.subtree import (
    AntiChain,
    ColouredSubtree,
    apply,
    complete,
    embedding_orbit,
    embedding_stabilizer,
    orbit_count_on_embeddings,
    stage_search,
    subgroup_level,
    antichain_bound_holds,
)
from branchlab.pcgroup import PcGroup
from branchlab.permgroup import CosetSpace


def _exp(n: int) -> int:
    return prime_power(n)[1] if n > 1 else 0


# partition ---------------------------------------------------------------

def check_partition(cases=((2, 10), (3, 5), (5, 5))) -> dict:
    rows = []
    for p, max_m in cases:
        for m in range(1, max_m + 1):
            got = partition_min_parts(p, m)
            rows.append({"p": p, "m": m, "min_parts": got, "expected": (p - 1) * m + 1,
                         "pass": got == (p - 1) * m + 1})
    return {"id": "partition", "rows": rows, "pass": all(r["pass"] for r in rows)}


# Grigorchuk constants ----------------------------------------------------

def check_grigorchuk_constants(levels=range(4, 8), congruence_levels=range(5, 8)) -> dict:
    G = builtin_group("grigorchuk")
    meta = G.metadata
    seed_index = {L: index(level_quotient(G, L), distinguished_subgroup(G, L)) for L in levels}
    if any(v != 16 for v in seed_index.values()):
        raise VerificationFailed(f"K seed does not give index 16: {seed_index}")
    cong = {L: _exp(index(distinguished_subgroup(G, L), congruence_image(G, L, 2))) for L in congruence_levels}
    dK = dp(distinguished_subgroup(G, max(levels)), 2)
    est = alpha_estimate({0: dK}, meta["k"], meta["l"], meta["d"], dK, G.name)
    ok = (
        (meta["k"], meta["l"], meta["d"]) == (4, 6, 3)
        and all(v == 6 for v in cong.values())
        and dK == 3
        and est.lower == Fraction(3, 2)
        and est.upper == 12
    )
    return {"id": "grigorchuk-constants", "metadata": {k: meta[k] for k in ("k", "l", "d")},
            "index_G_K": {str(k): v for k, v in seed_index.items()},
            "log2_index_K_K2": {str(k): v for k, v in cong.items()}, "dp_K": dK,
            "alpha_lower": str(est.lower), "alpha_upper": str(est.upper), "pass": ok}


# orbit bounds ------------------------------------------------------------

def _group(kind: str, p: int | None = None):
    return builtin_group(kind, p)


def check_orbit_upper(kind: str, p: int, level: int, max_m: int, required_m: int,
                      memory_budget: int = 4 * 2 ** 30, time_budget: float | None = None) -> dict:
    G = _group(kind, p)
    Q = level_quotient(G, level)
    job = EnumerationJob(Q, p, max_m, "conjugacy", memory_budget, time_budget=time_budget,
                         group_id=G.name, level=level)
    budget_note = None
    try:
        res = run_enumeration(job)
        records, complete_to = res.records, res.complete_to
    except BudgetExceeded as exc:
        partial = exc.partial
        records = partial.records if partial is not None else []
        complete_to = partial.complete_to if partial is not None else -1
        budget_note = str(exc)
    violations = [{"m": r.m, "orbits": r.orbit_count, "key": r.canonical_key.hex()}
                  for r in records if r.orbit_count > upper_bound(p, r.m)]
    o_max = {}
    for r in records:
        o_max[r.m] = max(o_max.get(r.m, 0), r.orbit_count)
    ok = not violations and complete_to >= min(required_m, _exp(Q.order))
    return {"id": "orbit-upper", "group": G.name, "level": level, "records": len(records),
            "complete_to": complete_to, "o_max": {str(m): v for m, v in sorted(o_max.items())},
            "bound": {str(m): upper_bound(p, m) for m in sorted(o_max)}, "violations": violations,
            "budget": budget_note, "pass": ok}


def check_witnesses(kind: str, p: int, levels) -> dict:
    G = _group(kind, p)
    rows = []
    for L in levels:
        Q = level_quotient(G, L)
        for w in stabilizer_witnesses(Q, p):
            rows.append({"level": L, "j": w.level_j, "m": w.handle.index_exp, "orbits": w.orbits,
                         "bound": w.bound, "pass": w.passed})
    return {"id": "witnesses", "group": G.name, "rows": rows, "pass": bool(rows) and all(r["pass"] for r in rows)}


def check_congruence_index(kind: str, p: int, max_level: int) -> dict:
    G = _group(kind, p)
    rows = []
    for L in range(1, max_level + 1):
        e = _exp(level_quotient(G, L).order)
        bound = (p ** L - 1) // (p - 1)
        rows.append({"level": L, "order_exp": e, "bound_exp": bound, "equal": e == bound, "pass": e <= bound})
    return {"id": "congruence-index", "group": G.name, "rows": rows, "pass": all(r["pass"] for r in rows)}


# lemma suites ------------------------------------------------------------

def _cyclic(p: int) -> PermGroup:
    return PermGroup([np.roll(np.arange(p), -1)], p)


def check_direct() -> dict:
    G = builtin_group("grigorchuk")
    Q2 = level_quotient(G, 2)
    runs = [verify_lemma_direct(_cyclic(p), _cyclic(p), 2, p) for p in (2, 3)]
    runs.append(verify_lemma_direct(Q2, Q2, 4, 2))
    return {"id": "direct", "runs": runs, "pass": all(r["pass"] for r in runs)}


def check_inductive(level: int = 5, max_m: int = 5) -> dict:
    G = builtin_group("grigorchuk")
    Kq = distinguished_subgroup(G, level)
    res = run_enumeration(EnumerationJob(Kq, 2, max_m, "conjugacy", group_id="grigorchuk_K", level=level))
    meta = G.metadata
    rep = verify_lemma_inductive(Kq, (meta["k"], meta["l"], meta["d"]), res, 2)
    rep["id"] = "inductive"
    rep["complete_to"] = res.complete_to
    return rep


def check_permutation_product(samples: int = 500, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    G = builtin_group("grigorchuk")
    Q2 = level_quotient(G, 2)
    D = direct_product(Q2, Q2)
    res = run_enumeration(EnumerationJob(D, 2, 6, "exact"))
    view = D.pc(2)
    picks = rng.integers(len(res.records), size=samples)
    chosen = [D.subgroup_from_pc(view, PcGroup.from_key(view.layout, res.records[int(i)].canonical_key))
              for i in picks]
    rep = verify_permutation_product([(U, 4, 4) for U in chosen])
    small = []
    for p in (2, 3):
        diag = PermGroup([np.concatenate([np.roll(np.arange(p), -1), p + np.roll(np.arange(p), -1)])], 2 * p)
        small.append((diag, p, p))
    extra = verify_permutation_product(small)
    return {"id": "permutation-product", "samples": rep["samples"], "max_ratio": rep["max_ratio"],
            "violations": rep["violations"] + extra["violations"], "diagonal_ratio": extra["max_ratio"],
            "pass": rep["pass"] and extra["pass"]}


def check_many_orbits(cases=((2, 2, 2), (2, 1, 3), (3, 1, 2)), max_m: int = 2) -> dict:
    rows = []
    for p, ell, k in cases:
        G = builtin_group("grigorchuk") if p == 2 else builtin_group("gupta_sidki", p)
        Q = level_quotient(G, ell)
        table, extra = product_orbit_table(Q, k, p, max_m, level=ell)
        rows.append({"p": p, "level": ell, "k": k, "witness_orbits": extra["witness_orbits"],
                     "expected": extra["witness_expected"], "tight": extra["witness_tight"],
                     "index_ok": extra["index_ok"], "table_ok": table.passed,
                     "pass": extra["witness_tight"] and extra["index_ok"] and table.passed})
    return {"id": "many-orbits", "rows": rows, "pass": all(r["pass"] for r in rows)}


# modules -----------------------------------------------------------------

def check_modgen(instances: int = 200, seed: int = 0, primes=(2, 3)) -> dict:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances):
        p = primes[i % len(primes)]
        M, vs, phi = random_instance(rng, p, max_dim=12, max_gens=3)
        rows.append(check_codim1(M, vs, phi, i))
    bad = [r for r in rows if not (r["span_ok"] and r["bound_ok"] and r["in_kernel"])]
    return {"id": "modgen", "instances": len(rows), "failures": bad, "pass": not bad}


def check_sandwich(level: int = 3, max_m: int = 4) -> dict:
    G = builtin_group("grigorchuk")
    Q = level_quotient(G, level)
    W = wreath_quotient(Q, 2)
    res = run_enumeration(EnumerationJob(Q, 2, max_m, "exact"))
    tab = s_table(res, max_m)
    dpm = [tab.dp_max(m) for m in range(max_m + 1)]
    rows = []
    for r in res.records:
        h = r.handle(Q, 2)
        rep = phi_orbit_surjection(W, h, max(dpm[:h.index_exp + 1]))
        rep["key"] = r.canonical_key.hex()
        rows.append(rep)
    lower_bad = [r for r in rows if not (r["check"] and r["lower_ok"])]
    upper_bad = [r for r in rows if not r["upper_ok"]]
    corrected_bad = [r for r in rows if not r["upper_with_top_ok"]]
    return {"id": "sandwich", "subgroups": len(rows), "lower_violations": lower_bad,
            "upper_violations": upper_bad, "upper_with_top_violations": corrected_bad,
            "level_relative": True, "pass": not lower_bad and not upper_bad}


def check_growth_bounds(kind: str = "grigorchuk", p: int = 2, levels=(2, 3, 4)) -> dict:
    G = _group(kind, p)
    runs = []
    for L in levels:
        Q = level_quotient(G, L)
        res = run_enumeration(EnumerationJob(Q, p, _exp(Q.order), "conjugacy", group_id=G.name, level=L))
        bad = check_subgroup_counts(s_table(res, res.complete_to))
        runs.append({"level": L, "violations": bad, "pass": not bad})
    return {"id": "growth-bounds", "group": G.name, "runs": runs, "pass": all(r["pass"] for r in runs)}


# coloured subtrees --------------------------------------------------------

def complete_trees(p: int, depth: int) -> list[ColouredSubtree]:
    """Every complete subtree of the p-regular tree of depth at most ``depth``."""
    def shapes(d):
        # shapes below a vertex: None (no children) or a tuple of p child shapes
        if d == 0:
            return [None]
        sub = shapes(d - 1)
        return [None] + [tuple(c) for c in itertools.product(sub, repeat=p)]

    def words(shape, prefix):
        out = [prefix]
        if shape is not None:
            for x, s in enumerate(shape):
                out += words(s, prefix + (x,))
        return out

    return [ColouredSubtree.of(words(s, ()), p) for s in shapes(depth)]


def _random_tree(rng, p: int, depth: int) -> ColouredSubtree:
    n = int(rng.integers(1, 5))
    words = [tuple(int(x) for x in rng.integers(p, size=int(rng.integers(0, depth + 1)))) for _ in range(n)]
    return ColouredSubtree.of(words, p)


def _direct_orbits(Q, U, S) -> int:
    X = embedding_orbit(Q, S)
    level = prime_power(Q.degree)[1]
    pos = {e.key(): i for i, e in enumerate(X)}
    acts = [np.array([pos[apply(g, e, level).key()] for e in X], dtype=K.DTYPE) for g in U.generators]
    return K.orbit_count(acts, len(X))


def _class_reps(Q, p, max_m=None):
    res = run_enumeration(EnumerationJob(Q, p, max_m if max_m is not None else _exp(Q.order), "conjugacy"))
    view = Q.pc(p)
    return [(r.m, Q.subgroup_from_pc(view, PcGroup.from_key(view.layout, r.canonical_key))) for r in res.records]


def check_completion(cases: int = 200, seed: int = 0) -> dict:
    """Equivariance of completion and the orbit bijection, on random cases at levels up to 3."""
    rng = np.random.default_rng(seed)
    fails = []
    setups = []
    for kind, p, L in (("grigorchuk", 2, 2), ("grigorchuk", 2, 3), ("gupta_sidki", 3, 2)):
        Q = level_quotient(builtin_group(kind, p), L)
        setups.append((kind, p, L, Q, _class_reps(Q, p)))
    for i in range(cases):
        kind, p, L, Q, reps = setups[i % len(setups)]
        S = _random_tree(rng, p, L)
        g = random_element(Q, rng)
        a = complete(apply(g, S, L).as_tree())
        b = apply(g, complete(S), L).as_tree()
        _, U = reps[int(rng.integers(len(reps)))]
        c1 = orbit_count_on_embeddings(U, S, Q=Q)
        c2 = orbit_count_on_embeddings(U, complete(S), Q=Q)
        c3 = _direct_orbits(Q, U, S)
        if a != b or not (c1 == c2 == c3):
            fails.append({"case": i, "tree": S.to_json(), "equivariant": a == b, "counts": [c1, c2, c3]})
    return {"id": "completion", "cases": cases, "failures": fails, "pass": not fails}


def check_continuity(setups=(("grigorchuk", 2, 3), ("gupta_sidki", 3, 2))) -> dict:
    pairs = 0
    fails = []
    for kind, p, L in setups:
        Q = level_quotient(builtin_group(kind, p), L)
        reps = _class_reps(Q, p)
        trees = complete_trees(p, L)
        spaces = {t: CosetSpace(Q, embedding_stabilizer(Q, t)) for t in trees}
        counts = {t: [spaces[t].orbit_count(U) for _, U in reps] for t in trees}
        for small in trees:
            for v in small.vertices:
                kids = [v.child(x) for x in range(p)]
                if v.level >= L or any(k in small.vertices for k in kids):
                    continue
                big = small.union(kids)
                pairs += 1
                for (m, _), a, b in zip(reps, counts[small], counts[big]):
                    if not a <= b <= p * a:
                        fails.append({"group": kind, "small": small.to_json(), "big": big.to_json(), "m": m,
                                      "counts": [a, b]})
    return {"id": "continuity", "pairs": pairs, "failures": fails, "pass": pairs > 0 and not fails}


def check_antichain_bound(setups=(("grigorchuk", 2, 3, None, None), ("gupta_sidki", 3, 2, None, None),
                                  ("grigorchuk", 2, 4, 6, 40)), seed: int = 0) -> dict:
    """Orbit counts on S^Q against n p^((k - p lam - 1)/p + 5) for proper subgroups."""
    rng = np.random.default_rng(seed)
    checked = 0
    fails = []
    for kind, p, L, max_m, n_trees in setups:
        Q = level_quotient(builtin_group(kind, p), L)
        reps = [(m, U) for m, U in _class_reps(Q, p, max_m) if m >= 1]
        levels = [subgroup_level(Q, U) for _, U in reps]
        if n_trees is None:
            trees = complete_trees(p, L)
        else:
            trees = [ColouredSubtree.ball(L, p), complete(ColouredSubtree.path(L, p))]
            trees += [complete(_random_tree(rng, p, L)) for _ in range(n_trees)]
        for t in trees:
            space = CosetSpace(Q, embedding_stabilizer(Q, t))
            for (m, U), lam in zip(reps, levels):
                o = space.orbit_count(U)
                k = len(t.restricted(lam))
                checked += 1
                if not antichain_bound_holds(o, m, k, lam, p):
                    fails.append({"group": kind, "level": L, "tree": t.to_json(), "m": m, "lambda": lam,
                                  "orbits": o})
    return {"id": "antichain-bound", "pairs": checked, "failures": fails, "pass": not fails}


def _oracle_profile(Q, reps, tree) -> dict:
    best = {}
    for m, U in reps:
        best[m] = max(best.get(m, 0), _direct_orbits(Q, U, tree))
    return best


def check_stage_search(ell: int = 1, ell_prime: int = 3, tables=None, time_budget: float = 600.0) -> dict:
    """Stage search at p = 2 with ell' - ell = 2, each classification redone with explicit orbits."""
    G = builtin_group("grigorchuk")
    Q = level_quotient(G, ell_prime)
    S_prev = complete(ColouredSubtree.path(ell + 1, 2))
    if tables is None:
        tables = {"linear": {n: n for n in range(1, 8)},
                  "capped": {1: 2, 2: 3, 3: 4, 4: 4, 5: 5, 6: 6, 7: 7}}
    reps = _class_reps(Q, 2)
    runs = []
    start = time.monotonic()
    for name, f in tables.items():
        try:
            res = stage_search(Q, S_prev, ell, ell_prime, f, time_budget=time_budget)
            found = True
        except NotFound as exc:
            res = exc.result
            found = False
        agree = True
        for t in res.candidates:
            prof = _oracle_profile(Q, reps, t)
            large = any(o > f[m] for m, o in prof.items() if m >= 1 and m in f)
            agree &= large == (t in res.large)
        runs.append({"f": name, "found": found, "candidates": len(res.candidates), "small": len(res.small),
                     "large": len(res.large), "oracle_agrees": agree, "report": res.to_json()})
    elapsed = time.monotonic() - start
    return {"id": "stage-search", "runs": runs, "seconds": elapsed,
            "pass": all(r["oracle_agrees"] for r in runs) and elapsed < time_budget}


def check_smax_witness(ell: int = 1, ell_prime: int = 3) -> dict:
    from branchlab.subtree import smax_witness

    Q = level_quotient(builtin_group("grigorchuk"), ell_prime)
    rep = smax_witness(Q, complete(ColouredSubtree.path(ell + 1, 2)), ell, ell_prime)
    rep["id"] = "smax-witness"
    return rep


REGISTRY = {
    "partition": check_partition,
    "grigorchuk-constants": check_grigorchuk_constants,
    "orbit-upper": check_orbit_upper,
    "witnesses": check_witnesses,
    "congruence-index": check_congruence_index,
    "direct": check_direct,
    "inductive": check_inductive,
    "permutation-product": check_permutation_product,
    "many-orbits": check_many_orbits,
    "modgen": check_modgen,
    "sandwich": check_sandwich,
    "growth-bounds": check_growth_bounds,
    "completion": check_completion,
    "continuity": check_continuity,
    "antichain-bound": check_antichain_bound,
    "stage-search": check_stage_search,
    "smax-witness": check_smax_witness,
}
