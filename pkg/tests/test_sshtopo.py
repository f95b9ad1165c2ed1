from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from jumptopo.errors import NumericalInvariantError, SingularityError
from jumptopo.jumptime import jumptime_step
from jumptopo.sshtopo import (
    SIGMA_MINUS,
    BlochParams,
    MomentumPair,
    bloch,
    bloch_hamiltonian,
    branch_superposition,
    jumptime_phase,
    kcc_closed_form,
    phase_probe_points,
    two_momentum_model,
    winding_integral,
    winding_number,
)


def quadrature_kcc(params, p, p_prime):
    """Element ratio <p,0|rho_2|p',0> / <p,0|rho_1|p',0> from two jump-time steps."""
    model = two_momentum_model(params, p, p_prime)
    psi = branch_superposition()
    rho1 = jumptime_step(model, np.outer(psi, psi.conj()))
    rho2 = jumptime_step(model, rho1)
    return rho2[0, 2] / rho1[0, 2]


def test_bloch_examples():
    assert np.allclose(bloch(BlochParams(1, 1), np.pi), (0, 0), atol=1e-15)
    for p in (0.0, 1.3, 4.0):
        assert bloch(BlochParams(1, 0), p) == (1, 0)
    assert np.allclose(bloch(BlochParams(1, 2), 0.0), (3, 0))


def test_bloch_vectorized():
    p = np.linspace(0, 2 * np.pi, 7)
    hx, hy = bloch(BlochParams(1, 0.5), p)
    assert hx.shape == hy.shape == (7,)
    assert np.allclose(hx**2 + hy**2, 1 + 0.25 + np.cos(p))


def test_bloch_hamiltonian_spectrum():
    h = bloch_hamiltonian(BlochParams(1, 2), 0.7)
    hx, hy = bloch(BlochParams(1, 2), 0.7)
    assert np.allclose(np.linalg.eigvalsh(h), [-np.hypot(hx, hy), np.hypot(hx, hy)])


def test_params_validation():
    with pytest.raises(ValueError):
        BlochParams(1, 1, gamma=0)
    with pytest.raises(ValueError):
        MomentumPair(np.nan, 0)
    pair = MomentumPair(-0.5, 7.0).wrapped()
    assert 0 <= pair.p < 2 * np.pi and 0 <= pair.p_prime < 2 * np.pi


@pytest.mark.parametrize("w,expected", [(0.25, 0), (0.5, 0), (0.75, 0), (1.5, 1), (2.0, 1), (3.0, 1)])
def test_winding_number(w, expected):
    params = BlochParams(1.0, w)
    assert winding_number(params) == expected
    assert abs(winding_integral(params) - expected) <= 0.01


def test_winding_singular():
    with pytest.raises(SingularityError):
        winding_number(BlochParams(1.0, 1.0))


def test_winding_residual_guard():
    # a three-point loop cannot resolve the circle close to the singular point
    with pytest.raises(NumericalInvariantError):
        winding_number(BlochParams(1.0, 1.05), n_grid=3)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.05, 3.0),
    st.floats(0.05, 3.0),
    st.floats(0.2, 3.0),
    st.floats(0, 2 * np.pi),
)
def test_kcc_diagonal_is_one(v, w, gamma, p):
    params = BlochParams(v, w, gamma)
    hx, hy = bloch(params, p)
    assume(hx**2 + hy**2 > 1e-6)
    assert abs(kcc_closed_form(params, p, p) - 1) <= 1e-12


def test_kcc_dark_point():
    with pytest.raises(SingularityError):
        kcc_closed_form(BlochParams(1, 1), np.pi, np.pi)


def test_kcc_vectorized_matches_scalar():
    params = BlochParams(1, 2)
    p = np.array([0.1, 1.0, 2.0])
    q = np.array([0.5, 0.5, 3.0])
    vec = kcc_closed_form(params, p, q)
    assert np.allclose(vec, [kcc_closed_form(params, a, b) for a, b in zip(p, q)], rtol=0, atol=0)


@pytest.mark.parametrize("w", [0.5, 2.0])
def test_kcc_against_quadrature_grid(w):
    params = BlochParams(1.0, w)
    grid = np.linspace(0, 2 * np.pi, 5, endpoint=False) + 0.1
    worst = 0.0
    for p in grid:
        for q in grid:
            worst = max(worst, abs(quadrature_kcc(params, p, q) - kcc_closed_form(params, p, q)))
    assert worst <= 1e-3


@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_kcc_gamma_placement(gamma):
    params = BlochParams(1.0, 0.5, gamma)
    assert abs(quadrature_kcc(params, 0.0, np.pi / 2) - kcc_closed_form(params, 0.0, np.pi / 2)) <= 1e-3


def test_kcc_reference_value():
    # v=1, w=0.5: h(0) = 1.5, h(pi/2) = 1 - 0.5i; K = 2*1.5*(1+0.5i) / (2*(2.25-1.25)^2 + 3.5)
    assert abs(kcc_closed_form(BlochParams(1, 0.5), 0.0, np.pi / 2) - (3 + 1.5j) / 5.5) <= 1e-14


def test_sigma_minus_convention():
    assert np.array_equal(SIGMA_MINUS @ np.array([0, 1]), np.array([1, 0]))


@pytest.mark.parametrize("w", [0.25, 0.5, 0.75, 1.5, 2.0, 3.0])
def test_phase_equals_winding(w):
    params = BlochParams(1.0, w)
    t = jumptime_phase(lambda a, b: kcc_closed_form(params, a, b), 500, 0.01)
    assert abs(t - winding_number(params)) <= 0.05
    assert abs(t.imag) <= 0.05


def test_phase_of_constant_propagator():
    assert jumptime_phase(lambda a, b: 0.3 + 0.1j, 50, 0.01) == 0


def test_probe_points():
    shift, diag, prime = phase_probe_points(4, 0.1, 0.02)
    assert len(diag) == 5
    assert np.allclose(diag, [0, np.pi / 2, np.pi, 3 * np.pi / 2, 2 * np.pi])
    assert np.allclose(shift - diag, 0.1) and np.allclose(prime - diag, 0.02)
    assert len(phase_probe_points(4, 0.1, corrected_sum=True)[0]) == 4
    with pytest.raises(ValueError):
        phase_probe_points(2, 0.1)
    with pytest.raises(ValueError):
        phase_probe_points(10, 0.0)


def test_corrected_sum_drops_duplicate_endpoint():
    params = BlochParams(1.0, 2.0)

    def kcc(a, b):
        return kcc_closed_form(params, a, b)

    n, dp = 40, 0.01
    full = jumptime_phase(kcc, n, dp)
    corrected = jumptime_phase(kcc, n, dp, corrected_sum=True)
    endpoint = 1j * (kcc(2 * np.pi + dp, 2 * np.pi) - kcc(2 * np.pi, 2 * np.pi)) / (n * dp)
    assert abs(full - corrected - endpoint) <= 1e-12
