import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import corpus
import oracles
from branchlab import kernels as K
from branchlab.pcgroup import PcGroup, TreeLayout
from branchlab.permgroup import index
from strategies import wreath_elements, wreath_subgroups


def _t(x):
    return tuple(int(v) for v in x)


def _pc(G, p):
    return G.pc(p).group


@settings(max_examples=50, deadline=None)
@given(wreath_subgroups(max_level=3), st.randoms(use_true_random=False))
def test_key_does_not_depend_on_generating_set(data, rnd):
    p, G = data
    U = _pc(G, p)
    elems = list(U.elements())
    picks = [elems[rnd.randrange(len(elems))] for _ in range(3)]
    other = PcGroup.from_gens(U.layout, list(U.gens) + picks)
    shuffled = list(U.gens)
    rnd.shuffle(shuffled)
    assert other.key == U.key
    assert PcGroup.from_gens(U.layout, shuffled).key == U.key


@settings(max_examples=50, deadline=None)
@given(wreath_subgroups(max_level=3))
def test_elements_match_closure_and_keys_round_trip(data):
    p, G = data
    U = _pc(G, p)
    assert {_t(x) for x in U.elements()} == oracles.closure(G.generators, G.degree)
    assert PcGroup.from_key(U.layout, U.key) == U
    assert PcGroup.from_key(U.layout, U.key, trusted=False) == U


@settings(max_examples=50, deadline=None)
@given(wreath_subgroups(max_level=4), st.integers(0, 2 ** 32 - 1))
def test_exponents_rebuild_the_element(data, seed):
    p, G = data
    U = _pc(G, p)
    rng = np.random.default_rng(seed)
    x = U.layout.identity()
    for _ in range(5):
        x = K.mul(x, U.gens[int(rng.integers(len(U.gens)))]) if U.gens else x
    y = U.layout.identity()
    for i, c in U.exponents(x):
        y = K.mul(y, K.power(U.gens[i], c))
    assert np.array_equal(x, y)


def test_exponents_reject_non_members():
    layout = TreeLayout(2, 3)
    U = PcGroup.from_gens(layout, [K.from_portrait(np.array([0, 1, 0, 0, 0, 0, 0], dtype=np.uint8), 2, 3)])
    outside = K.from_portrait(np.array([1, 0, 0, 0, 0, 0, 0], dtype=np.uint8), 2, 3)
    with pytest.raises(ValueError):
        U.exponents(outside)


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(max_level=3), st.data())
def test_coset_representatives_separate_right_cosets(data, draw):
    p, G = data
    U = _pc(G, p)
    L = U.layout.L
    g, h = draw.draw(wreath_elements(p, L, 2))
    same = U.contains(K.mul(g, K.inv(h)))  # U g == U h  iff  g h^-1 in U
    assert same == np.array_equal(U.coset_rep(g), U.coset_rep(h))
    u = next(iter(U.elements()))
    assert np.array_equal(U.coset_rep(K.mul(u, g)), U.coset_rep(g))


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(max_level=3))
def test_maximal_subgroups(data):
    p, G = data
    U = _pc(G, p)
    d = U.dp()
    maxes = U.maximal_subgroups()
    assert len(maxes) == (p ** d - 1) // (p - 1)
    assert len({M.key for M in maxes}) == len(maxes)
    for M in maxes:
        assert M.exp == U.exp - 1 and U.contains_group(M) and M.contains_group(U.frattini)
    assert len(U.burnside_basis()) == d


@settings(max_examples=40, deadline=None)
@given(wreath_subgroups(max_level=3), st.data())
def test_conjugation_matches_elementwise(data, draw):
    p, G = data
    U = _pc(G, p)
    (g,) = draw.draw(wreath_elements(p, U.layout.L, 1))
    want = {_t(K.conjugate(x, g)) for x in U.elements()}
    assert {_t(x) for x in U.conjugate(g).elements()} == want


@pytest.mark.parametrize("name", ["Q8", "C4xC2", "C3xC3", "C2 wr C4"])
def test_groups_off_the_standard_tree_are_relabelled(name):
    G, p = corpus.named_groups()[name]
    view = G.pc(p)
    assert view.group.order == G.order
    for g in G.generators:
        assert G.contains(g)
        assert np.array_equal(view.from_layout(view.to_layout(g)), g)


def test_derived_and_frattini_indices():
    G, p = corpus.named_groups()["D16"]
    U = _pc(G, p)
    assert U.derived().exp == 2
    assert U.frattini.exp == 2 and U.dp() == 2
    assert index(G, G) == 1
