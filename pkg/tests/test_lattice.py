import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import corpus
import oracles
from branchlab import PermGroup, builtin_group, level_quotient
from branchlab.errors import BudgetExceeded, IncompleteEnumeration, NotAPGroup
from branchlab.lattice import (
    EnumerationJob,
    GrowthTables,
    direct_product,
    run_enumeration,
    s_table,
    stabilization_sweep,
)
from branchlab.permgroup import prime_power

GROUPS = corpus.named_groups()


def _order_exp(G, p):
    return prime_power(G.order)[1] if G.order > 1 else 0


def _element_sets(G, p, res):
    out = {}
    for r in res.records:
        H = r.handle(G, p).group
        out.setdefault(r.m, set()).add(frozenset(tuple(int(v) for v in x) for x in H.elements()))
    return out


@pytest.mark.parametrize("name", sorted(GROUPS))
def test_exact_enumeration_matches_brute_force(name):
    G, p = GROUPS[name]
    res = run_enumeration(EnumerationJob(G, p, _order_exp(G, p), "exact"))
    got = _element_sets(G, p, res)
    subs = oracles.all_subgroups(oracles.closure(G.generators, G.degree))
    want = {}
    for H in subs:
        want.setdefault(oracles.index_exponent(G.order // len(H), p), set()).add(H)
    assert got == want


def test_grigorchuk_level_two_has_ten_subgroups():
    Q = level_quotient(builtin_group("grigorchuk"), 2)
    res = run_enumeration(EnumerationJob(Q, 2, 3, "exact"))
    table = s_table(res, 3)
    assert table.s(3) == 10
    assert [r.exact_count for r in table.rows] == [1, 3, 5, 1]


@pytest.mark.parametrize("name", sorted(GROUPS))
def test_conjugacy_weights_reproduce_exact_counts(name):
    G, p = GROUPS[name]
    e = _order_exp(G, p)
    exact = s_table(run_enumeration(EnumerationJob(G, p, e, "exact")), e)
    conj = s_table(run_enumeration(EnumerationJob(G, p, e, "conjugacy")), e)
    assert [r.s_count for r in exact.rows] == [r.s_count for r in conj.rows]
    assert [r.dp_max for r in exact.rows] == [r.dp_max for r in conj.rows]
    assert all(r.class_count <= r.exact_count for r in conj.rows)


def test_dp_matches_frattini_oracle():
    G, p = GROUPS["D16"]
    res = run_enumeration(EnumerationJob(G, p, 4, "exact"))
    for r in res.records:
        H = r.handle(G, p).group
        elems = [tuple(int(v) for v in x) for x in H.elements()]
        assert r.dp == oracles.frattini_rank(elems, p)


@pytest.mark.slow
def test_one_and_eight_workers_give_identical_bytes():
    Q = level_quotient(builtin_group("grigorchuk"), 4)
    dumps = []
    for jobs in (1, 8):
        res = run_enumeration(EnumerationJob(Q, 2, 6, "conjugacy", parallelism=jobs, group_id="g", level=4))
        table = s_table(res, 6)
        payload = {"tables": table.to_json(), "records": [(r.m, r.canonical_key.hex(), r.dp, r.orbit_count,
                                                             r.normalizer_index_exp) for r in res.records]}
        dumps.append(json.dumps(payload, sort_keys=True).encode())
    assert dumps[0] == dumps[1]


def test_disk_spill_gives_same_result(tmp_path):
    Q = level_quotient(builtin_group("grigorchuk"), 5)
    ref = run_enumeration(EnumerationJob(Q, 2, 5, "conjugacy"))
    tiny = run_enumeration(EnumerationJob(Q, 2, 5, "conjugacy", memory_budget=4096, workdir=str(tmp_path)))
    assert [r.canonical_key for r in ref.records] == [r.canonical_key for r in tiny.records]
    assert tiny.budget_stats["spills"] > 0


def test_budget_failure_then_resume_matches_full_run(tmp_path):
    Q = level_quotient(builtin_group("grigorchuk"), 5)
    full = s_table(run_enumeration(EnumerationJob(Q, 2, 5, "conjugacy")), 5)
    job = EnumerationJob(Q, 2, 5, "conjugacy", memory_budget=2 ** 14, disk_budget=2 ** 16,
                         workdir=str(tmp_path / "a"))
    with pytest.raises(BudgetExceeded) as info:
        run_enumeration(job)
    exc = info.value
    partial = exc.partial
    assert 0 <= partial.complete_to < 5
    assert s_table(partial, partial.complete_to).rows == full.rows[:partial.complete_to + 1]
    with pytest.raises(IncompleteEnumeration):
        s_table(partial, 5)
    again = run_enumeration(EnumerationJob(Q, 2, 5, "conjugacy", workdir=str(tmp_path / "b")),
                            resume_token=exc.resume_token)
    assert s_table(again, 5).rows == full.rows


def test_non_p_group_is_rejected():
    s3 = PermGroup([[1, 2, 0], [1, 0, 2]])
    with pytest.raises(NotAPGroup):
        run_enumeration(EnumerationJob(s3, 2, 1))


def test_job_validation():
    Q = level_quotient(builtin_group("grigorchuk"), 2)
    with pytest.raises(ValueError):
        EnumerationJob(Q, 2, -1)
    with pytest.raises(ValueError):
        EnumerationJob(Q, 2, 1, memory_budget=0)
    with pytest.raises(ValueError):
        EnumerationJob(Q, 2, 1, mode="fast")


def test_tables_round_trip_through_json_and_csv():
    Q = level_quotient(builtin_group("grigorchuk"), 3)
    table = s_table(run_enumeration(EnumerationJob(Q, 2, 4, "conjugacy", group_id="grigorchuk", level=3)), 4)
    back = GrowthTables.from_json(json.loads(json.dumps(table.to_json())))
    assert back.rows == table.rows
    lines = table.to_csv().strip().splitlines()
    assert lines[0].startswith("m,s_count")
    assert len(lines) == 1 + len(table.rows)


def test_stabilization_sweep_flags_agreeing_levels():
    G = builtin_group("grigorchuk")
    table = stabilization_sweep(G, "K", 3, [4, 5])
    (_, lower), (_, upper) = table.sweep
    assert [r.m for r in table.rows] == [0, 1, 2, 3]
    for r, a, b in zip(table.rows, lower.rows, upper.rows):
        assert r.stabilized == ((a.s_count, a.dp_max) == (b.s_count, b.dp_max))
        assert (r.s_count, r.dp_max) == (b.s_count, b.dp_max)
    assert table.rows[0].stabilized and table.dp_max(0) == 3


def test_direct_product_order_and_degree():
    a = PermGroup([[1, 0]])
    b = PermGroup([[1, 2, 0]])
    D = direct_product(a, b)
    assert D.degree == 5 and D.order == 6


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(sorted(GROUPS)), st.integers(0, 3))
def test_counts_are_cumulative_and_bounded(name, max_m):
    G, p = GROUPS[name]
    m = min(max_m, _order_exp(G, p))
    table = s_table(run_enumeration(EnumerationJob(G, p, m, "conjugacy")), m)
    s = [r.s_count for r in table.rows]
    assert s == sorted(s) and s[0] == 1
    # each subgroup of index p^m is determined by generators: d_p never exceeds log_p|G|
    assert all(r.dp_max is None or r.dp_max <= _order_exp(G, p) for r in table.rows)
    assert np.all(np.diff([0] + s) == [r.exact_count for r in table.rows])
