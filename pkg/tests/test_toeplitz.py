import numpy as np
import pytest

from gtdyn.generators import generator, transition_entries
from gtdyn.links import link_column, link_uqn
from gtdyn.signatures import GTPattern, enumerate_box, enumerate_interlacing
from gtdyn.toeplitz import (
    ResamplingError,
    delta_kernel,
    link_spec,
    multilevel_law,
    multilevel_step,
    pn_row,
    psi_spec,
    toeplitz_T,
    toeplitz_T_matrix,
    toeplitz_Tdown,
    xconfigs,
)
from gtdyn.signatures import to_xconfig
from gtdyn.voiculescu import OmegaPoint

MIXED = OmegaPoint(beta_plus=(0.3,), alpha_minus=(0.2,), gamma_plus=0.2)
BETA = OmegaPoint(beta_plus=(0.3,))
TWO_SIDED = OmegaPoint(beta_plus=(0.3, 0.1), beta_minus=(0.2,))


def test_T_matches_generator_n3():
    box = enumerate_box(3, -1, 2)
    X = xconfigs(box.states)
    T = toeplitz_T_matrix(psi_spec(MIXED, 3, 0.7), X, X)
    G = generator(MIXED, 3, 0.7, box).transition().entries
    assert np.abs(T - G).max() <= 1e-12


def test_scalar_and_matrix_agree():
    spec = psi_spec(MIXED, 2, 0.5)
    box = enumerate_box(2, -1, 1)
    X = xconfigs(box.states)
    T = toeplitz_T_matrix(spec, X, X)
    assert toeplitz_T(spec, X[1], X[2]) == pytest.approx(T[1, 2], abs=1e-15)


def test_Tdown_matches_link():
    q = 0.6
    lam, mu = (2, 0, -1), (1, -1)
    want = link_uqn(3, q, enumerate_box(3, -1, 2), enumerate_box(2, -1, 2)).entry(lam, mu)
    got = toeplitz_Tdown(link_spec(3, q), to_xconfig(lam), to_xconfig(mu))
    assert got == pytest.approx(want, rel=1e-12)


def test_delta_two_routes_n3():
    D = delta_kernel(3, MIXED, 0.8, enumerate_box(3, -1, 1), enumerate_box(2, -1, 1))
    assert D.defect <= 1e-10


def test_pn_row_is_probability_vector():
    state = GTPattern(((0,), (1, -1)))
    row = pn_row(state, TWO_SIDED, 0.5)
    assert min(row.values()) >= -1e-15
    assert sum(row.values()) == pytest.approx(1, abs=1e-10)


def test_sampler_law_matches_formula_two_sided():
    state = GTPattern(((1,), (1, 0)))
    law = multilevel_law(state, TWO_SIDED, 0.5)
    row = pn_row(state, TWO_SIDED, 0.5)
    for k in set(law) | set(row):
        assert law.get(k, 0.0) == pytest.approx(row.get(k, 0.0), abs=1e-10)


def test_gibbs_top_marginal():
    # with the lower level drawn from the link, the top level of P_N moves by Q
    q, lam = 0.5, (1, 0)
    marg: dict = {}
    for mu in enumerate_interlacing(lam):
        w = link_column(2, q, np.array([lam]), mu)[0]
        for y, p in pn_row(GTPattern((mu, lam)), BETA, q).items():
            marg[y[-1]] = marg.get(y[-1], 0.0) + w * p
    cols = np.array(sorted(marg))
    Q, _ = transition_entries(BETA, 2, q, np.array([lam]), cols)
    assert np.abs(Q[0] - np.array([marg[tuple(c)] for c in cols])).max() <= 1e-12


def test_classical_law_sums_to_one():
    law = multilevel_law(GTPattern(((0,), (0, 0))), BETA, None)
    assert sum(law.values()) == pytest.approx(1, abs=1e-12)


def test_step_is_deterministic_per_seed():
    state = GTPattern.constant(3, 0)
    a = multilevel_step(state, MIXED, 0.5, 123)
    b = multilevel_step(state, MIXED, 0.5, 123)
    assert a == b


def test_zero_omega_is_frozen():
    state = GTPattern(((0,), (1, -1)))
    assert multilevel_step(state, OmegaPoint(), 0.5, 0) == state


def test_resampling_error_is_runtime_error():
    assert issubclass(ResamplingError, RuntimeError)
