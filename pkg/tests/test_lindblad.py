from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
from conftest import random_density, random_hermitian
from hypothesis import given, settings
from hypothesis import strategies as st

from jumptopo.emulator import build_extended
from jumptopo.errors import NumericalInvariantError, ShapeError
from jumptopo.jumptime import mc_unravel
from jumptopo.lindblad import (
    LindbladModel,
    build_heff,
    evolve,
    liouvillian_apply,
    reachable_support,
    rk4_step_matrix,
    superoperator,
    trace_distance,
    validate_density,
)
from jumptopo.sshtopo import SIGMA_MINUS, BlochParams, MomentumPair

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def damping(rate=1.0):
    return LindbladModel(np.zeros((2, 2)), ((rate, SIGMA_MINUS),))


def test_heff_amplitude_damping():
    assert np.allclose(build_heff(damping()), -0.5j * P1, atol=0)


def test_heff_without_channels(rng):
    h = random_hermitian(rng, 3)
    assert np.allclose(build_heff(LindbladModel(h)), h)


def test_heff_antihermitian_part_is_negative(rng):
    h = random_hermitian(rng, 4)
    ops = [rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(2)]
    heff = build_heff(LindbladModel(h, ((0.7, ops[0]), (1.3, ops[1]))))
    anti = (heff - heff.conj().T) / 2j
    assert np.linalg.eigvalsh(anti).max() <= 1e-12


def test_model_validation():
    with pytest.raises(ValueError):
        LindbladModel(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        LindbladModel(np.zeros((2, 2)), ((-1.0, SIGMA_MINUS),))
    with pytest.raises(ShapeError):
        LindbladModel(np.zeros((2, 2)), ((1.0, np.eye(3)),))


def test_liouvillian_mixed_state_no_channels(rng):
    model = LindbladModel(random_hermitian(rng, 3))
    assert np.allclose(liouvillian_apply(model, np.eye(3) / 3), 0, atol=1e-15)


def test_liouvillian_amplitude_damping():
    assert np.allclose(liouvillian_apply(damping(), P1), P0 - P1, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_liouvillian_is_traceless(seed, n):
    rng = np.random.default_rng(seed)
    op = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    model = LindbladModel(random_hermitian(rng, n), ((rng.uniform(0, 3), op),))
    out = liouvillian_apply(model, random_density(rng, n))
    assert abs(np.trace(out)) <= 1e-12 * max(1.0, np.abs(op).max() ** 2)


def test_liouvillian_shape_mismatch():
    with pytest.raises(ShapeError):
        liouvillian_apply(damping(), np.eye(3))


def test_evolve_amplitude_damping_exact():
    out = evolve(damping(), P1, 1.0)
    assert abs(out[-1][1][1, 1].real - np.exp(-1.0)) <= 1e-6


def test_evolve_unitary_conserves_purity(rng):
    h = random_hermitian(rng, 3)
    model = LindbladModel(h / np.linalg.norm(h, 2))
    rho0 = random_density(rng, 3, rank=1)
    out = evolve(model, rho0, 10.0, sample_times=np.linspace(0, 10, 11))
    for _, rho in out:
        assert abs(np.trace(rho @ rho).real - 1.0) <= 1e-8


def test_evolve_matches_exact_propagator(rng):
    op = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    model = LindbladModel(random_hermitian(rng, 3), ((0.5, op),))
    rho0 = random_density(rng, 3)
    ref = (scipy.linalg.expm(superoperator(model) * 2.0) @ rho0.reshape(-1)).reshape(3, 3)
    assert trace_distance(evolve(model, rho0, 2.0, 400)[-1][1], ref) <= 1e-8


def test_rk4_fourth_order_convergence():
    model = LindbladModel(0.8 * np.array([[0, 1], [1, 0]], dtype=complex), ((1.0, SIGMA_MINUS),))
    ref = evolve(model, P1, 2.0, 160)[-1][1]
    e_coarse = np.abs(evolve(model, P1, 2.0, 10)[-1][1] - ref).max()
    e_fine = np.abs(evolve(model, P1, 2.0, 20)[-1][1] - ref).max()
    assert 12 <= e_coarse / e_fine <= 20


def test_evolve_samples_and_validation():
    out = evolve(damping(), P1, 2.0, sample_times=[2.0, 0.5, 0.0])
    assert [t for t, _ in out] == [0.0, 0.5, 2.0]
    with pytest.raises(ValueError):
        evolve(damping(), P1, 1.0, sample_times=[1.5])
    with pytest.raises(ValueError):
        evolve(damping(), P1, -1.0)
    with pytest.raises(ValueError):
        evolve(damping(), P1, 1.0, 0)


def test_evolve_too_coarse_raises():
    ext = build_extended(BlochParams(1.0, 2.0), MomentumPair(0.0, np.pi / 2))
    with np.errstate(all="ignore"), pytest.raises(NumericalInvariantError):
        evolve(ext.model, ext.initial_density, 20.0, 1, sample_times=np.arange(0, 21.0))


def test_extended_model_trace_over_300():
    ext = build_extended(BlochParams(1.0, 2.0), MomentumPair(0.0, np.pi / 2))
    times = np.arange(0.0, 301.0, 10.0)
    # trace at the default density; full invariant set at the density the rank-deficient state needs
    out = evolve(ext.model, ext.initial_density, 300.0, sample_times=times, check=False)
    assert max(abs(np.trace(r) - 1) for _, r in out) <= 1e-8
    evolve(ext.model, ext.initial_density, 300.0, 400, sample_times=times)


def test_heff_survival_matches_mc_first_jumps():
    ext = build_extended(BlochParams(1.0, 0.5), MomentumPair(0.0, np.pi / 2))
    heff = build_heff(ext.model)
    seed = 11
    records = mc_unravel(ext.model, ext.initial_state, 4.0, n_traj=500, seed=seed)
    checked = 0
    for i, rec in enumerate(records):
        r = np.random.default_rng(seed + i).random()
        if rec.jump_events:
            t1 = rec.jump_events[0][0]
            norm2 = np.linalg.norm(scipy.linalg.expm(-1j * heff * t1) @ ext.initial_state) ** 2
            assert abs(norm2 - r) <= 1e-3
            checked += 1
        else:
            norm2 = np.linalg.norm(scipy.linalg.expm(-1j * heff * 4.0) @ ext.initial_state) ** 2
            assert r < norm2 + 1e-3
    assert checked > 400


def test_validate_density_flags_each_invariant():
    validate_density(np.diag([0.5, 0.5]))
    with pytest.raises(NumericalInvariantError, match="trace"):
        validate_density(np.diag([0.5, 0.6]))
    with pytest.raises(NumericalInvariantError, match="Hermiticity"):
        validate_density(np.array([[0.5, 1e-6], [0, 0.5]]))
    with pytest.raises(NumericalInvariantError, match="negative"):
        validate_density(np.diag([1.0 + 1e-8, -1e-8]))
    validate_density(np.diag([1.0 + 5e-10, -5e-10]))
    with pytest.raises(NumericalInvariantError, match="non-finite"):
        validate_density(np.diag([np.nan, 1.0]))
    validate_density(np.diag([0.2, 0.1]), normalized=False)


def test_superoperator_matches_liouvillian(rng):
    op = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    model = LindbladModel(random_hermitian(rng, 3), ((0.9, op),))
    rho = random_density(rng, 3)
    assert np.allclose((superoperator(model) @ rho.reshape(-1)).reshape(3, 3), liouvillian_apply(model, rho), atol=1e-12)


def test_rk4_step_matrix_matches_stage_form(rng):
    op = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    model = LindbladModel(random_hermitian(rng, 3), ((0.9, op),))
    rho = random_density(rng, 3)
    step = rk4_step_matrix(superoperator(model), 0.05)
    # one unit of time at 20 steps per unit, both routes are the same RK4 recursion
    x = rho.reshape(-1)
    for _ in range(20):
        x = step @ x
    assert np.allclose(x.reshape(3, 3), evolve(model, rho, 1.0, 20)[-1][1], atol=1e-12)


def test_reachable_support_is_closed_and_exact():
    ext = build_extended(BlochParams(1.0, 2.0), MomentumPair(0.3, 1.1))
    gen = superoperator(ext.model)
    x0 = ext.initial_density.reshape(-1)
    sup = reachable_support(gen, x0)
    outside = np.setdiff1d(np.arange(gen.shape[0]), sup)
    assert sup.size < gen.shape[0]
    assert np.all(gen[np.ix_(outside, sup)] == 0)
    full = scipy.linalg.expm(gen * 3.0) @ x0
    red = scipy.linalg.expm(gen[np.ix_(sup, sup)] * 3.0) @ x0[sup]
    assert np.allclose(full[sup], red, atol=1e-12)
    assert np.allclose(full[outside], 0, atol=1e-12)
