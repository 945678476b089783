import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import corpus
from branchlab import builtin_group, level_quotient
from branchlab.errors import EmptyTable, InequalityViolated
from branchlab.growth import (
    PRINTED_WINDOWS,
    AlphaEstimate,
    alpha_estimate,
    alpha_for_builtin,
    check_subgroup_counts,
    growth_bounds_report,
    validate_report,
    window,
)
from branchlab.lattice import EnumerationJob, GrowthRow, GrowthTables, run_enumeration, s_table


def _table(G, p, max_m, mode="conjugacy", group_id="group"):
    return s_table(run_enumeration(EnumerationJob(G, p, max_m, mode, group_id=group_id)), max_m)


def test_grigorchuk_bracket_from_dp_of_k():
    est = alpha_estimate({0: 3}, 4, 6, 3, 3, "grigorchuk")
    assert est.lower == Fraction(3, 2) and est.upper == 12
    assert est.consistent


def test_unstabilized_rows_only_raise_the_optimistic_value():
    rows = [(0, 3, True), (1, 5, True), (2, 9, False)]
    est = alpha_estimate(rows, 4, 6, 3, 3)
    assert [r[2] for r in est.per_m] == [Fraction(3, 2), Fraction(5, 3), Fraction(9, 4)]
    assert est.lower == Fraction(5, 3)
    assert est.optimistic == Fraction(9, 4)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=1, max_size=12),
       st.integers(2, 6), st.integers(1, 10), st.integers(0, 5), st.integers(0, 5))
def test_lower_bound_grows_with_more_stabilized_rows(entries, k, ell, d, dK):
    rows = [(m, dp, st_) for m, (dp, st_) in enumerate(entries)]
    lows = [alpha_estimate(rows[:i], k, ell, d, dK).lower for i in range(1, len(rows) + 1)]
    assert lows == sorted(lows)
    est = alpha_estimate(rows, k, ell, d, dK)
    assert est.lower <= est.optimistic
    assert all(isinstance(x, Fraction) for x in (est.lower, est.optimistic, est.upper))


def test_alpha_json_round_trip_and_revalidation():
    est = alpha_estimate([(0, 3, True), (1, 5, True)], 3, 8, 6, 2, "gupta_sidki_3")
    data = json.loads(json.dumps(est.to_json()))
    assert data["upper_printed"] == "3p^2-4p+1"
    back = AlphaEstimate.from_json(data)
    assert (back.lower, back.upper) == (est.lower, est.upper)
    assert validate_report(data)
    data["lower"] = "100"
    assert not validate_report(data)


def test_alpha_guards():
    with pytest.raises(EmptyTable):
        alpha_estimate([], 4, 6, 3, 3)
    with pytest.raises(ValueError):
        alpha_estimate({0: 1}, 1, 6, 3, 3)


def test_window_endpoints():
    lo, hi = window(Fraction(3, 2), Fraction(12))
    assert lo == Fraction(9, 40) and hi == 6
    assert PRINTED_WINDOWS["grigorchuk"] == ("9/40", "6")


def test_gupta_sidki_upper_bound_closed_form():
    # (k-1) d(K) + d with k = p, d(K) = p - 1, d = p(p-1)
    for p in (3, 5, 7):
        G = builtin_group("gupta_sidki", p)
        m = G.metadata
        est = alpha_estimate({0: m["dK"]}, m["k"], m["l"], m["d"], m["dK"])
        assert est.upper == 2 * p * p - 3 * p + 1


@pytest.mark.parametrize("name", sorted(corpus.named_groups()))
def test_subgroup_count_inequalities_on_corpus(name):
    G, p = corpus.named_groups()[name]
    e = G.order.bit_length() if p == 2 else 4
    table = _table(G, p, min(e, 7 if p == 2 else 4), "exact", name)
    assert check_subgroup_counts(table) == []
    report = growth_bounds_report(table)
    assert report["pass"] and validate_report(table.to_json())


def test_inequality_violation_is_reported():
    rows = [GrowthRow(0, 1, 1, 1, 2), GrowthRow(1, 100, 99, 99, 2)]
    table = GrowthTables(2, rows, "fake")
    bad = check_subgroup_counts(table)
    assert bad and bad[0]["side"] == "upper"
    with pytest.raises(InequalityViolated) as info:
        growth_bounds_report(table)
    assert info.value.report["violations"] == bad
    assert not validate_report(table.to_json())


def test_report_carries_windows():
    Q = level_quotient(builtin_group("grigorchuk"), 3)
    table = _table(Q, 2, 3, group_id="grigorchuk")
    est = alpha_for_builtin(builtin_group("grigorchuk"), table, dp_K=3)
    report = growth_bounds_report(table, est)
    assert report["informational"]["window_printed"] == ["9/40", "6"]
    assert report["informational"]["window_from_bracket"][0] == str(window(est.lower, est.upper)[0])
