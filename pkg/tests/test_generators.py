import numpy as np
import pytest
from hypothesis import given, strategies as st

from gtdyn.generators import (
    fusion_complete,
    generator,
    generator_fusion,
    q2_schur_measure,
    transition_entries,
)
from gtdyn.links import boundary_link
from gtdyn.signatures import enumerate_box
from gtdyn.voiculescu import DomainError, OmegaPoint

BETA = OmegaPoint(beta_plus=(0.3,))
MIXED = OmegaPoint(beta_plus=(0.3,), alpha_minus=(0.2,), gamma_plus=0.2)


def sig(n, lo=-4, hi=4):
    return st.lists(st.integers(lo, hi), min_size=n, max_size=n).map(lambda v: tuple(sorted(v, reverse=True)))


@pytest.mark.parametrize("q", [None, 0.5])
def test_zero_omega_gives_zero_generator(q):
    L = generator(OmegaPoint(), 2, q, enumerate_box(2, -2, 2))
    assert np.abs(L.entries).max() == 0


def test_pure_birth_n1():
    b = 0.3
    L = generator(BETA, 1, None, enumerate_box(1, -3, 3))
    for m in range(-3, 3):
        assert L.entry((m,), (m,)) == pytest.approx(-b)
        assert L.entry((m,), (m + 1,)) == pytest.approx(b)
    assert L.entry((0,), (2,)) == 0 and L.entry((0,), (-1,)) == 0


def test_n1_q_cancels():
    box = enumerate_box(1, -4, 4)
    a = generator(MIXED, 1, None, box).entries
    b = generator(MIXED, 1, 0.6, box).entries
    assert np.abs(a - b).max() <= 1e-14


def test_n2_beta_support():
    box = enumerate_box(2, -3, 3)
    Q = generator(BETA, 2, None, box).transition()
    for lam in box.inner(0, 1):
        row = Q.row(lam)
        for j in np.nonzero(row > 1e-15)[0]:
            d = np.subtract(box.states[j], lam)
            assert set(d.tolist()) <= {0, 1}
        assert row.sum() == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("q", [None, 0.5, 0.8])
def test_transition_positive_and_row_identity(q):
    box = enumerate_box(2, -3, 3)
    L = generator(MIXED, 2, q, box)
    Q = L.transition()
    assert Q.entries.min() >= -1e-15
    assert np.allclose(L.entries.sum(axis=1), Q.entries.sum(axis=1) - 1, atol=1e-15)
    assert Q.entries.sum(axis=1).max() <= 1 + 1e-12


@given(sig(2), sig(2), st.integers(-5, 5), st.sampled_from([None, 0.5]))
def test_shift_equivariance(lam, mu, k, q):
    a, _ = transition_entries(MIXED, 2, q, np.array([lam]), np.array([mu]))
    b, _ = transition_entries(MIXED, 2, q, np.array([lam]) + k, np.array([mu]) + k)
    assert b[0, 0] == pytest.approx(a[0, 0], abs=1e-14)


def test_q_to_one_limit():
    box = enumerate_box(2, -2, 2)
    a = generator(MIXED, 2, None, box).entries
    b = generator(MIXED, 2, 0.999, box).entries
    assert np.abs(a - b).max() <= 1e-2


def test_fusion_trivial_weight():
    box = enumerate_box(2, -1, 1)
    L = generator_fusion({(0, 0): 1.0}, 2, 0.5, box)
    assert np.abs(L.entries).max() <= 1e-15


def test_fusion_rejects_mixed_lengths():
    with pytest.raises(ValueError):
        generator_fusion({(0, 0): 0.5, (0,): 0.5}, 2, None, enumerate_box(2, 0, 1))


@pytest.mark.parametrize("q", [None, 0.5])
def test_determinantal_matches_fusion(q):
    box = enumerate_box(2, -2, 2)
    wbox = enumerate_box(2, -1, 2)
    if q is None:
        w = boundary_link(BETA, 2, wbox)
    else:
        w = q2_schur_measure(BETA, 2, q, wbox)
    weights = dict(zip(wbox.states, w))
    det = generator(BETA, 2, q, box).entries
    fus = generator_fusion(weights, 2, q, box, partial=True).entries
    mask = fusion_complete(box.states, box, -1, 2)
    assert mask.sum() > 20
    assert np.abs(det - fus)[mask].max() <= 1e-9


def test_q2_schur_measure_examples():
    box = enumerate_box(2, -2, 2)
    m = q2_schur_measure(OmegaPoint(), 2, 0.5, box)
    assert m[box.index((0, 0))] == pytest.approx(1) and m.sum() == pytest.approx(1)
    b = 0.3
    m = q2_schur_measure(BETA, 1, 0.5, enumerate_box(1, -2, 2))
    assert m.tolist() == pytest.approx([0, b, 1 - b, 0, 0])


def test_q_case_validation():
    with pytest.raises(DomainError):
        generator(OmegaPoint(alpha_plus=(0.6,)), 2, 0.5, enumerate_box(2, 0, 1))
