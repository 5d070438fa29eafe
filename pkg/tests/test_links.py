from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gtdyn.generators import generator
from gtdyn.links import boundary_link, link, link_column, link_un, link_uqn, verify_intertwine
from gtdyn.signatures import enumerate_box
from gtdyn.voiculescu import OmegaPoint


def test_classical_examples():
    L = link_un(2, enumerate_box(2, 0, 2), enumerate_box(1, 0, 2), exact=True)
    assert L.row((0, 0)).tolist() == [0, 0, 1]
    assert L.row((1, 0)).tolist() == [0, Fraction(1, 2), Fraction(1, 2)]
    assert L.row((2, 0)).tolist() == [Fraction(1, 3)] * 3


def test_q_link_two_points():
    L = link_uqn(2, 0.5, enumerate_box(2, 0, 1), enumerate_box(1, 0, 1))
    assert L.entry((1, 0), (1,)) == pytest.approx(0.2)
    assert L.entry((1, 0), (0,)) == pytest.approx(0.8)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("q", [None, Fraction(1, 2), Fraction(4, 5)])
def test_exact_row_sums(n, q):
    L = link(n, q, enumerate_box(n, -2, 2), enumerate_box(n - 1, -2, 2), exact=True)
    assert L.exact
    assert all(s == 1 for s in L.entries.sum(axis=1))


def test_non_adjacent_levels():
    with pytest.raises(ValueError):
        link_un(3, enumerate_box(3, 0, 1), enumerate_box(1, 0, 1))


def test_q_outside_range():
    with pytest.raises(ValueError):
        link_uqn(2, 1.5, enumerate_box(2, 0, 1), enumerate_box(1, 0, 1))


@given(st.floats(0.2, 0.95))
def test_float_q_row_sums(q):
    L = link_uqn(3, q, enumerate_box(3, -2, 2), enumerate_box(2, -2, 2))
    assert np.abs(L.entries.sum(axis=1) - 1).max() <= 1e-12


def test_q_link_tends_to_classical():
    rb, cb = enumerate_box(3, -1, 2), enumerate_box(2, -1, 2)
    a = link_un(3, rb, cb).entries
    b = link_uqn(3, 0.9999, rb, cb).entries
    assert np.abs(a - b).max() <= 1e-3


@given(st.integers(-3, 3))
def test_link_shift_invariant(k):
    nus = np.array([[2, 0, -1]])
    a = link_column(3, 0.6, nus, (1, 0))
    b = link_column(3, 0.6, nus + k, (1 + k, k))
    assert b[0] == pytest.approx(a[0], rel=1e-12)


def test_boundary_link_coherence():
    om = OmegaPoint(beta_plus=(0.4, 0.1), beta_minus=(0.3,))
    top = enumerate_box(3, -1, 2)
    low = enumerate_box(2, -1, 2)
    m3 = boundary_link(om, 3, top)
    m2 = boundary_link(om, 2, low)
    L = link_un(3, top, low).entries
    assert np.abs(m3 @ L - m2).max() <= 1e-12
    assert m3.sum() == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("q", [None, 0.5])
def test_one_step_intertwining(q):
    om = OmegaPoint(beta_plus=(0.3,))
    rb, cb = enumerate_box(2, -2, 3), enumerate_box(1, -2, 3)
    rep = verify_intertwine(generator(om, 2, q, rb), generator(om, 1, q, cb), link(2, q, rb, cb))
    assert rep.rows_checked > 5
    assert rep.defect <= 1e-12
