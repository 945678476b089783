import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.combinatorics import Permutation, PermutationGroup

import oracles
from strategies import wreath_subgroups
from branchlab import PermGroup, builtin_group, level_quotient
from branchlab.errors import BadPermutation, DegreeMismatch, NotASubgroup, NotAPGroup
from branchlab.permgroup import (
    CosetSpace,
    block_stabilizer,
    contains,
    derived_subgroup,
    double_coset_count,
    dp,
    frattini_p,
    index,
    is_subgroup,
    level_stabilizer,
    normal_closure,
    normalizer,
    orbit_count,
    point_stabilizer,
    pointwise_stabilizer,
    prime_power,
    random_element,
    same_group,
)


def _t(x):
    return tuple(int(v) for v in x)


def _sympy(G):
    return PermutationGroup([Permutation(list(map(int, g))) for g in G.generators])


@settings(max_examples=50, deadline=None)
@given(wreath_subgroups())
def test_order_orbits_and_derived_subgroup_match_sympy(data):
    p, G = data
    S = _sympy(G)
    assert G.order == S.order()
    assert orbit_count(G) == len(S.orbits())
    assert derived_subgroup(G).order == S.derived_subgroup().order()


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(), st.integers(0, 2 ** 31))
def test_normal_closure_and_membership_match_sympy(data, seed):
    p, G = data
    rng = np.random.default_rng(seed)
    x = random_element(G, rng)
    assert contains(G, x)
    assert _sympy(G).contains(Permutation(list(map(int, x))))
    S = _sympy(G)
    seed_elems = [G.generators[0]]
    N = normal_closure(G, seed_elems)
    assert N.order == S.normal_closure(Permutation(list(map(int, seed_elems[0])))).order()


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(max_level=3))
def test_frattini_rank_matches_oracle(data):
    p, G = data
    elems = [_t(x) for x in G.elements()]
    assert dp(G, p) == oracles.frattini_rank(elems, p)
    Phi = frattini_p(G, p)
    assert is_subgroup(G, Phi)
    assert index(G, Phi) == p ** dp(G, p)


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(max_level=3), st.data())
def test_double_cosets_match_explicit_sets(left, draw):
    p, A = left
    _, B = draw.draw(wreath_subgroups(p=p, L=prime_power(A.degree)[1]))
    G = PermGroup(list(A.generators) + list(B.generators), A.degree)
    E = [_t(x) for x in G.elements()]
    U = [_t(x) for x in A.elements()]
    V = [_t(x) for x in B.elements()]
    want = oracles.double_cosets(E, U, V)
    assert double_coset_count(G, A, B) == want
    assert CosetSpace(G, B).orbit_count(A) == want


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(max_level=3), st.data())
def test_block_stabilizer_matches_brute_force(data, draw):
    p, G = data
    n = G.degree
    size = p ** draw.draw(st.integers(0, prime_power(n)[1]))
    x = draw.draw(st.integers(0, n // size - 1))
    want = {e for e in (_t(y) for y in G.elements()) if e[x * size] // size == x}
    got = {_t(y) for y in block_stabilizer(G, x, size).elements()}
    assert got == want
    if size == 1:
        assert {_t(y) for y in point_stabilizer(G, x).elements()} == want


def test_level_and_pointwise_stabilizers():
    Q = level_quotient(builtin_group("grigorchuk"), 4)
    for j in range(5):
        St = level_stabilizer(Q, j)
        block = 2 ** (4 - j)
        want = sum(1 for y in Q.elements() if all(int(y[v * block]) // block == v for v in range(2 ** j)))
        assert St.order == want
    assert same_group(level_stabilizer(Q, 4), pointwise_stabilizer(Q, range(16)))
    assert level_stabilizer(Q, 4).order == 1


def test_normalizer_by_elements():
    Q = level_quotient(builtin_group("grigorchuk"), 3)
    H = PermGroup([Q.generators[1]], Q.degree)
    N = normalizer(Q, H)
    Hs = {_t(x) for x in H.elements()}
    want = 0
    for g in (_t(x) for x in Q.elements()):
        gi = oracles.inverse(g)
        if {oracles.compose(oracles.compose(gi, h), g) for h in Hs} == Hs:
            want += 1
    assert N.order == want


def test_symmetric_group_through_the_chain():
    S4 = PermGroup([[1, 2, 3, 0], [1, 0, 2, 3]])
    assert S4.order == 24
    assert not S4.is_p_group()
    with pytest.raises(NotAPGroup):
        S4.pc(2)
    assert orbit_count(S4) == 1


def test_prime_power():
    assert prime_power(1) is None or prime_power(1) == (1, 0)
    assert prime_power(81) == (3, 4)
    assert prime_power(12) is None


def test_validation_errors():
    with pytest.raises(BadPermutation):
        PermGroup([[0, 0, 1]])
    with pytest.raises(DegreeMismatch):
        PermGroup([[1, 0], [0, 2, 1]])
    G = PermGroup([[1, 0, 2, 3]])
    H = PermGroup([[0, 1, 3, 2]])
    with pytest.raises(NotASubgroup):
        double_coset_count(G, H, G)


def test_json_round_trip():
    Q = level_quotient(builtin_group("grigorchuk"), 3)
    back = PermGroup.from_json(Q.to_json())
    assert same_group(Q, back)
    bad = Q.to_json()
    bad["order"] = "7"
    with pytest.raises(ValueError):
        PermGroup.from_json(bad)
