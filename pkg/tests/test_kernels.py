"""Both kernel backends agree with each other and with tuple arithmetic."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from branchlab import _kernels_py as pure

compiled = pytest.importorskip("branchlab._kernels")

BACKENDS = [pure, compiled]


@st.composite
def wreath_elements(draw, count=2):
    p = draw(st.sampled_from([2, 3]))
    L = draw(st.integers(1, 4 if p == 2 else 3))
    nvert = (p ** L - 1) // (p - 1)
    elems = []
    for _ in range(count):
        labels = np.array(draw(st.lists(st.integers(0, p - 1), min_size=nvert, max_size=nvert)), dtype=np.uint8)
        elems.append(pure.from_portrait(labels, p, L))
    return p, L, elems


def _t(x):
    return tuple(int(v) for v in x)


@settings(max_examples=60, deadline=None)
@given(wreath_elements(count=2), st.integers(-5, 5))
def test_group_operations_agree(data, e):
    p, L, (a, b) = data
    for K in BACKENDS:
        a_, b_ = a.astype(K.DTYPE), b.astype(K.DTYPE)
        assert _t(K.mul(a_, b_)) == oracles.compose(_t(a), _t(b))
        assert _t(K.inv(a_)) == oracles.inverse(_t(a))
        ai, bi = oracles.inverse(_t(a)), oracles.inverse(_t(b))
        comm = oracles.compose(oracles.compose(ai, bi), oracles.compose(_t(a), _t(b)))
        assert _t(K.commutator(a_, b_)) == comm
        assert _t(K.conjugate(a_, b_)) == oracles.compose(oracles.compose(bi, _t(a)), _t(b))
    assert _t(pure.power(a, e)) == _t(compiled.power(a.astype(compiled.DTYPE), e))


@settings(max_examples=60, deadline=None)
@given(wreath_elements(count=3))
def test_orbits_agree(data):
    p, L, gens = data
    n = p ** L
    want = oracles.orbits([_t(g) for g in gens], n)
    for K in BACKENDS:
        assert K.orbit_count([g.astype(K.DTYPE) for g in gens], n) == want
    assert np.array_equal(pure.orbit_labels(gens, n),
                          compiled.orbit_labels([g.astype(compiled.DTYPE) for g in gens], n))


@settings(max_examples=60, deadline=None)
@given(wreath_elements(count=1))
def test_portrait_round_trip(data):
    p, L, (x,) = data
    for K in BACKENDS:
        starts, cb = K.layout_arrays(p, L)
        labels = K.portrait(x.astype(K.DTYPE), starts, cb, p)
        assert _t(K.from_portrait(labels, p, L)) == _t(x)


@settings(max_examples=40, deadline=None)
@given(wreath_elements(count=3))
def test_pc_tables_agree(data):
    p, L, gens = data
    tables = []
    for K in BACKENDS:
        t = K.PcTable(p, L)
        t.extend([g.astype(K.DTYPE) for g in gens])
        t.reduce()
        tables.append(t)
    a, b = tables
    assert a.key_bytes() == b.key_bytes()
    assert a.depths() == b.depths()
    order = p ** len(a.depths())
    assert order == len(oracles.closure([_t(g) for g in gens], p ** L))
    for g in gens:
        assert a.contains(g) and b.contains(g.astype(compiled.DTYPE))
        assert _t(a.residue(g)) == _t(np.arange(p ** L))


@settings(max_examples=30, deadline=None)
@given(wreath_elements(count=3))
def test_conjugated_tables_agree(data):
    p, L, (x, y, g) = data
    keys = []
    for K in BACKENDS:
        t = K.PcTable(p, L)
        t.extend([x.astype(K.DTYPE), y.astype(K.DTYPE)])
        c = t.conjugated(g.astype(K.DTYPE))
        c.reduce()
        keys.append(c.key_bytes())
    assert keys[0] == keys[1]


@pytest.mark.parametrize("flag,expected", [("1", "python"), ("0", compiled.BACKEND)])
def test_environment_selects_backend(flag, expected):
    env = dict(os.environ, BRANCHLAB_PURE=flag)
    out = subprocess.run([sys.executable, "-c", "import branchlab; print(branchlab.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_whole_pipeline_same_under_both_backends():
    script = ("from branchlab import builtin_group, level_quotient;"
              "from branchlab.lattice import EnumerationJob, run_enumeration, s_table;"
              "Q=level_quotient(builtin_group('grigorchuk'),4);"
              "r=run_enumeration(EnumerationJob(Q,2,4,'conjugacy'));"
              "print([x.canonical_key.hex() for x in r.records]);print(s_table(r,4).to_json())")
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, BRANCHLAB_PURE=flag)
        outs.append(subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True,
                                   check=True).stdout)
    assert outs[0] == outs[1]
