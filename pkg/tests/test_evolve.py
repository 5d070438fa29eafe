import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gtdyn.evolve import (
    TruncationExitError,
    evolve_measure,
    intertwine_rows,
    poisson_weights,
    propagate,
    sample_path,
    sample_paths,
    semigroup_at,
    semigroup_rows,
)
from gtdyn.generators import KernelMatrix, generator
from gtdyn.links import boundary_link
from gtdyn.signatures import enumerate_box
from gtdyn.voiculescu import OmegaPoint

BETA = OmegaPoint(beta_plus=(0.3,))
TWO_SIDED = OmegaPoint(beta_plus=(0.3, 0.1), beta_minus=(0.2,))


def _Q(om, N, lo, hi, q=None):
    return generator(om, N, q, enumerate_box(N, lo, hi)).transition()


@given(st.floats(0, 30))
def test_poisson_weights(t):
    w = poisson_weights(t)
    assert 1 - 1e-12 <= w.sum() <= 1 + 1e-12


def test_negative_time():
    with pytest.raises(ValueError):
        poisson_weights(-1.0)
    with pytest.raises(ValueError):
        semigroup_at(_Q(BETA, 1, 0, 3), -0.1)


def test_t0_identity():
    Q = _Q(TWO_SIDED, 2, -1, 2)
    assert np.array_equal(semigroup_at(Q, 0.0).entries, np.eye(len(Q.box)))


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_pure_birth_is_poisson(t):
    b = 0.3
    Qt = semigroup_at(_Q(BETA, 1, 0, 40), t)
    for k in range(10):
        want = math.exp(-b * t) * (b * t) ** k / math.factorial(k)
        assert Qt.entry((0,), (k,)) == pytest.approx(want, abs=1e-12)


def test_chapman_kolmogorov():
    Q = _Q(TWO_SIDED, 2, -6, 8)
    a = semigroup_at(Q, 0.3).entries @ semigroup_at(Q, 0.7).entries
    b = semigroup_at(Q, 1.0).entries
    rows = [Q.box.index(lam) for lam in enumerate_box(2, -1, 2).states]
    assert np.abs(a[rows] - b[rows]).max() <= 1e-8


def test_generator_consistency():
    L = generator(TWO_SIDED, 2, 0.5, enumerate_box(2, -3, 3))
    h = 1e-4
    Qh = semigroup_at(L.transition(), h).entries
    diff = (Qh - np.eye(len(L.box))) / h - L.entries
    assert np.abs(diff).max() <= 1e-3 * np.abs(L.entries).max()


def test_entries_and_row_sums():
    Q = _Q(TWO_SIDED, 2, -10, 12)
    Qt = semigroup_at(Q, 1.0, tol=1e-12)
    assert Qt.entries.min() >= 0
    assert Qt.entries.sum(axis=1).max() <= 1 + 1e-12
    rows = [Q.box.index(lam) for lam in enumerate_box(2, -1, 2).states]
    assert Qt.entries.sum(axis=1)[rows].min() >= 1 - 1e-9


def test_rows_route_matches_dense():
    Q = _Q(TWO_SIDED, 2, -8, 10)
    dense = semigroup_at(Q, 1.0).entries
    rows = [(1, 0), (0, 0), (2, -1)]
    _, out = semigroup_rows(TWO_SIDED, 2, None, rows, 1.0, box=Q.box)
    idx = [Q.box.index(r) for r in rows]
    # dense truncation drops paths that leave the box and return, so compare away from its edge
    inner = [Q.box.index(c) for c in Q.box.inner(4, 4)]
    assert np.abs(out - dense[idx])[:, inner].max() <= 1e-12


def test_evolve_measure():
    Q = _Q(TWO_SIDED, 2, -2, 3)
    Qt = semigroup_at(Q, 0.4)
    ev = evolve_measure({(0, 0): 1.0}, Qt)
    assert np.allclose(ev.probs, Qt.row((0, 0)))
    assert ev.deficit == pytest.approx(1 - Qt.row((0, 0)).sum())
    v = np.random.default_rng(0).random(len(Q.box))
    assert np.allclose(evolve_measure(v, semigroup_at(Q, 0.0)).probs, v)
    assert np.allclose(propagate(v, Q, 0.4), v @ Qt.entries)
    with pytest.raises(ValueError):
        evolve_measure({(9, 9): 1.0}, Qt)
    with pytest.raises(ValueError):
        evolve_measure(np.ones(3), Qt)


def test_boundary_measure_stays_probability():
    box = enumerate_box(2, -6, 8)
    m = boundary_link(TWO_SIDED, 2, box)
    ev = evolve_measure(m, semigroup_at(generator(TWO_SIDED, 2, None, box).transition(), 1.0))
    assert ev.probs.min() >= 0
    assert ev.mass <= ev.initial_mass + 1e-12
    assert ev.deficit <= 1e-6


@pytest.mark.parametrize("q", [None, 0.5])
def test_time_intertwining(q):
    rep = intertwine_rows(TWO_SIDED, 2, q, [(1, 0), (0, -1)], 0.7)
    assert rep.defect <= 1e-7
    assert rep.min_mass >= 1 - 1e-9


def test_sample_path_basics():
    Q = _Q(BETA, 1, -2, 30)
    assert sample_path(Q, (0,), 0.0, 1) == [(0.0, (0,))]
    a = sample_paths(Q, (0,), 2.0, 5, seed=9)
    assert a == sample_paths(Q, (0,), 2.0, 5, seed=9)
    for path in a:
        times = [t for t, _ in path]
        assert times == sorted(times)
        assert all(s2[0] - s1[0] in (0, 1) for (_, s1), (_, s2) in zip(path, path[1:]))


def test_zero_omega_path_is_constant():
    Q = _Q(OmegaPoint(), 2, -1, 1)
    path = sample_path(Q, (1, 0), 5.0, 3)
    assert {s for _, s in path} == {(1, 0)}


def test_exit_error_returns_partial_path():
    Q = _Q(OmegaPoint(beta_plus=(1.0,)), 1, 0, 2)
    with pytest.raises(TruncationExitError) as exc:
        sample_path(Q, (0,), 50.0, 0)
    assert exc.value.path[0] == (0.0, (0,))
    assert exc.value.path[-1][1] == (2,)


def test_sample_path_rejects_outside_start():
    with pytest.raises(ValueError):
        sample_path(_Q(BETA, 1, 0, 2), (7,), 1.0, 0)


def test_kernel_matrix_shape_check():
    box = enumerate_box(1, 0, 1)
    with pytest.raises(ValueError):
        KernelMatrix(box, np.zeros((3, 3)), "transition")
