"""Hypothesis strategies shared across test modules."""

import numpy as np
from hypothesis import strategies as st

from branchlab import PermGroup
from branchlab import _kernels_py as pure


@st.composite
def wreath_elements(draw, p, L, count):
    nvert = (p ** L - 1) // (p - 1)
    out = []
    for _ in range(count):
        labels = np.array(draw(st.lists(st.integers(0, p - 1), min_size=nvert, max_size=nvert)), dtype=np.uint8)
        out.append(pure.from_portrait(labels, p, L))
    return out


@st.composite
def wreath_subgroups(draw, max_gens=3, max_level=4, p=None, L=None):
    """(p, random subgroup of the iterated wreath product W_L over Z/p)."""
    p = p or draw(st.sampled_from([2, 3]))
    L = L or draw(st.integers(1, min(max_level, 4 if p == 2 else 2)))
    gens = draw(wreath_elements(p, L, draw(st.integers(1, max_gens))))
    return p, PermGroup(gens, p ** L)
