"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import json
import time
from fractions import Fraction

import pytest

import corpus
import oracles
from branchlab import builtin_group, level_quotient
from branchlab.permgroup import dp
from branchlab.selfsim import distinguished_subgroup
from branchlab.growth import PRINTED_WINDOWS, alpha_estimate, growth_bounds_report
from branchlab.lattice import EnumerationJob, run_enumeration, s_table
from branchlab.orbits import upper_bound
from branchlab.verify import REGISTRY

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


def test_criterion_01_partition(report):
    t = time.perf_counter()
    out = REGISTRY["partition"](cases=((2, 10), (3, 5), (5, 5)))
    took = time.perf_counter() - t
    ok = out["pass"] and len(out["rows"]) == 20 and took < 60
    report(1, ok, f"min parts = (p-1)m+1 on {len(out['rows'])} cases in {took:.1f}s")


def test_criterion_02_grigorchuk_constants(report):
    out = REGISTRY["grigorchuk-constants"]()
    ok = (out["pass"]
          and set(out["index_G_K"].values()) == {16} and sorted(out["index_G_K"]) == ["4", "5", "6", "7"]
          and set(out["log2_index_K_K2"].values()) == {6}
          and Fraction(out["alpha_lower"]) == Fraction(3, 2) and Fraction(out["alpha_upper"]) == 12)
    report(2, ok, f"index(G:K)={out['index_G_K']}, log2(K:K2)={out['log2_index_K_K2']}, "
                  f"alpha in [{out['alpha_lower']}, {out['alpha_upper']}]")


def test_criterion_03_orbit_upper_bound(report):
    t = time.perf_counter()
    a = REGISTRY["orbit-upper"](kind="grigorchuk", p=2, level=5, max_m=6, required_m=6)
    b = REGISTRY["orbit-upper"](kind="gupta_sidki", p=3, level=3, max_m=7, required_m=4)
    took = time.perf_counter() - t
    ok = a["pass"] and b["pass"] and not a["violations"] and not b["violations"] and took < 3600
    report(3, ok, f"grigorchuk l=5 to m={a['complete_to']} ({a['records']} classes), "
                  f"gupta_sidki(3) l=3 to m={b['complete_to']} ({b['records']} classes), "
                  f"bounds (p^5-1)m+1, {took:.0f}s")


def test_criterion_04_lower_bound_witnesses(report):
    a = REGISTRY["witnesses"](kind="grigorchuk", p=2, levels=range(1, 6))
    b = REGISTRY["witnesses"](kind="gupta_sidki", p=3, levels=range(1, 4))
    rows = a["rows"] + b["rows"]
    ok = a["pass"] and b["pass"] and all(r["orbits"] >= r["bound"] for r in rows)
    levels = {(r["level"]) for r in a["rows"]}
    report(4, ok and levels == set(range(1, 6)), f"{len(rows)} stabilizer witnesses with orbits >= (p-1)m+1")


def test_criterion_05_lattice_oracle(report):
    groups = corpus.named_groups()
    bad = []
    for name, (G, p) in groups.items():
        e = oracles.index_exponent(G.order, p)
        res = run_enumeration(EnumerationJob(G, p, e, "exact"))
        want = {}
        for H in oracles.all_subgroups(oracles.closure(G.generators, G.degree)):
            m = oracles.index_exponent(G.order // len(H), p)
            want[m] = want.get(m, 0) + 1
        got = {}
        for r in res.records:
            got[r.m] = got.get(r.m, 0) + 1
        if got != want or G.order > 2 ** 7:
            bad.append(name)
    d8 = run_enumeration(EnumerationJob(level_quotient(builtin_group("grigorchuk"), 2), 2, 3, "exact"))
    dumps = []
    Q = level_quotient(builtin_group("grigorchuk"), 4)
    for jobs in (1, 8):
        res = run_enumeration(EnumerationJob(Q, 2, 6, "conjugacy", parallelism=jobs, group_id="g", level=4))
        payload = {"tables": s_table(res, 6).to_json(),
                   "records": [(r.m, r.canonical_key.hex(), r.dp, r.orbit_count) for r in res.records]}
        dumps.append(json.dumps(payload, sort_keys=True).encode())
    ok = not bad and len(groups) >= 10 and len(d8.records) == 10 and dumps[0] == dumps[1]
    report(5, ok, f"{len(groups) - len(bad)}/{len(groups)} groups match the oracle, D8 total {len(d8.records)}, "
                  f"1 vs 8 workers identical={dumps[0] == dumps[1]}")


def test_criterion_06_module_generation(report):
    t = time.perf_counter()
    out = REGISTRY["modgen"](instances=200, seed=0)
    took = time.perf_counter() - t
    ok = out["pass"] and out["instances"] == 200 and took < 300
    report(6, ok, f"{out['instances'] - len(out['failures'])}/200 instances in {took:.1f}s")


@pytest.mark.xfail(strict=True, reason="printed upper bound N + n*max dp fails at n = 0; see ledger")
def test_criterion_07_sandwich(report):
    out = REGISTRY["sandwich"](level=3, max_m=4)
    lower_ok = not out["lower_violations"]
    corrected_ok = not out["upper_with_top_violations"]
    report(7, out["pass"], f"{out['subgroups']} subgroups, lower/surjection ok={lower_ok}, "
                           f"printed upper violations={len(out['upper_violations'])}, "
                           f"N+(n+1)max dp ok={corrected_ok}")


def test_criterion_07_parts_that_hold():
    out = REGISTRY["sandwich"](level=3, max_m=4)
    assert out["subgroups"] > 0
    assert not out["lower_violations"] and not out["upper_with_top_violations"]
    assert all(r["index_exp"] == 0 for r in out["upper_violations"])


def test_criterion_08_lemma_suites(report):
    runs = {name: REGISTRY[name]() for name in ("direct", "inductive", "permutation-product", "many-orbits")}
    tight = {(r["p"], r["level"], r["k"]): r["tight"] for r in runs["many-orbits"]["rows"]}
    ok = (all(r["pass"] for r in runs.values()) and runs["permutation-product"]["samples"] == 500
          and tight == {(2, 2, 2): True, (2, 1, 3): True, (3, 1, 2): True})
    report(8, ok, ", ".join(f"{k}={v['pass']}" for k, v in runs.items()) + f", tight={tight}")


def test_criterion_09_congruence_index(report):
    a = REGISTRY["congruence-index"](kind="grigorchuk", p=2, max_level=6)
    b = REGISTRY["congruence-index"](kind="gupta_sidki", p=3, max_level=4)
    eq = [f"{o['group']}:{r['level']}" for o in (a, b) for r in o["rows"] if r["equal"]]
    report(9, a["pass"] and b["pass"], f"all levels within bound, equality at {eq}")


def test_criterion_10_subgroup_count_inequalities(report):
    a = REGISTRY["growth-bounds"](kind="grigorchuk", p=2, levels=(2, 3, 4))
    b = REGISTRY["growth-bounds"](kind="gupta_sidki", p=3, levels=(1, 2))
    windows = []
    for kind, p, L in (("grigorchuk", 2, 3), ("gupta_sidki", 3, 2)):
        G = builtin_group(kind, p)
        res = run_enumeration(EnumerationJob(level_quotient(G, L), p, 4, "conjugacy", group_id=G.name, level=L))
        meta = G.metadata
        dK = dp(distinguished_subgroup(G, L + 1), p)
        est = alpha_estimate({0: dK}, meta["k"], meta["l"], meta["d"], dK, G.name)
        rep = growth_bounds_report(s_table(res, res.complete_to), est)
        windows.append(tuple(rep["informational"]["window_printed"]))
    ok = (a["pass"] and b["pass"]
          and windows == [("9/40", "6"), ("1/8", "(3p^2-4p+1)/2")]
          and PRINTED_WINDOWS["grigorchuk"] == ("9/40", "6"))
    report(10, ok, f"zero violations on every table, windows {windows}")


def test_criterion_11_subtree_machinery(report):
    comp = REGISTRY["completion"](cases=200, seed=0)
    cont = REGISTRY["continuity"]()
    anti = REGISTRY["antichain-bound"]()
    t = time.perf_counter()
    stage = REGISTRY["stage-search"]()
    took = time.perf_counter() - t
    ok = comp["pass"] and cont["pass"] and anti["pass"] and stage["pass"] and took < 600
    report(11, ok, f"completion={comp['pass']}, continuity={cont['pass']}, antichain={anti['pass']}, "
                   f"stage search {took:.1f}s oracle agrees={stage['pass']}")


def test_orbit_bound_formula_used_by_criterion_3():
    assert upper_bound(2, 1) == 32 and upper_bound(3, 1) == 243
