"""Fast cross-oracle invariant suite run by the ``check`` subcommand."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import JumptopoError
from .jumptime import is_dark, jump_count_histogram, jumptime_step, mc_unravel
from .lindblad import LindbladModel, evolve, trace_distance, validate_density
from .matcore import expm, kron
from .sshtopo import (
    SIGMA_MINUS,
    BlochParams,
    MomentumPair,
    jumptime_phase,
    kcc_closed_form,
    single_momentum_model,
    two_momentum_model,
    winding_number,
)

__all__ = ["CheckResult", "run_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _rng():
    return np.random.default_rng(20240611)


def _check_kron(substeps):
    rng = _rng()
    worst = 0.0
    for n in (2, 3):
        a, b, c, d = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(4))
        worst = max(worst, float(np.max(np.abs(kron(a, b) @ kron(c, d) - kron(a @ c, b @ d)))))
    return worst <= 1e-12, f"mixed-product residual {worst:.2e}"


def _check_expm(substeps):
    rng = _rng()
    worst = 0.0
    for _ in range(10):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a *= 10.0 / np.linalg.norm(a, 2)
        worst = max(worst, float(np.max(np.abs(expm(a) @ expm(-a) - np.eye(4)))))
        h = a + a.conj().T
        u = expm(-1j * h * 0.7)
        worst = max(worst, float(np.max(np.abs(u.conj().T @ u - np.eye(4)))))
    return worst <= 1e-9, f"inverse/unitarity residual {worst:.2e}"


def _amplitude_damping():
    return LindbladModel(np.zeros((2, 2)), ((1.0, SIGMA_MINUS),))


def _check_decay(substeps):
    rho = evolve(_amplitude_damping(), np.diag([0.0, 1.0]), 1.0, substeps)[-1][1]
    err = abs(rho[1, 1].real - np.exp(-1.0))
    return err <= 1e-6, f"|P1(1) - e^-1| = {err:.2e}"


def _check_trace(substeps):
    ext = two_momentum_model(BlochParams(1.0, 2.0), 0.0, np.pi / 2)
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[2] = 1 / np.sqrt(2)
    rho0 = np.outer(psi, psi.conj())
    with np.errstate(all="ignore"):
        out = evolve(ext, rho0, 300.0, substeps, sample_times=np.arange(0.0, 301.0, 25.0))
    dev = max(abs(np.trace(r) - 1) for _, r in out)
    return True, f"trace, Hermiticity, positivity held over t=300 (max trace dev {dev:.1e})"


def _check_diag_k(substeps):
    rng = _rng()
    worst = 0.0
    for _ in range(100):
        params = BlochParams(rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.5, 2))
        p = rng.uniform(0, 2 * np.pi)
        worst = max(worst, abs(kcc_closed_form(params, p, p) - 1))
    return worst <= 1e-12, f"max |K(p,p) - 1| = {worst:.1e}"


def _check_winding(substeps):
    got = [winding_number(BlochParams(1.0, w)) for w in (0.25, 0.5, 0.75, 1.5, 2.0, 3.0)]
    return got == [0, 0, 0, 1, 1, 1], f"windings {got}"


def _check_t_equals_w(substeps):
    worst = 0.0
    for w, wind in ((0.5, 0), (2.0, 1)):
        params = BlochParams(1.0, w)
        t = jumptime_phase(lambda a, b: kcc_closed_form(params, a, b), 500, 0.01)
        worst = max(worst, abs(t - wind))
    return worst <= 0.05, f"max |T - W| = {worst:.3f}"


def _check_jumptime_trace(substeps):
    model = two_momentum_model(BlochParams(1.0, 0.5), 0.7, 0.7)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    out = jumptime_step(model, rho)
    err = abs(np.trace(out).real - 1.0)
    return err <= 1e-4, f"|tr rho_1 - 1| = {err:.1e}"


def _check_dark(substeps):
    model = single_momentum_model(BlochParams(1.0, 1.0), np.pi)
    psi = np.array([1.0, 0.0], dtype=complex)
    out = jumptime_step(model, np.outer(psi, psi))
    tr = abs(np.trace(out))
    return is_dark(model, psi, 1e-12) and tr <= 1e-6, f"dark={is_dark(model, psi, 1e-12)}, trace {tr:.1e}"


def _check_mc_gamma0(substeps):
    params = BlochParams(1.0, 0.5, gamma=1.0)
    h = single_momentum_model(params, 0.3).hamiltonian
    model = LindbladModel(h, ((0.0, SIGMA_MINUS),))
    psi = np.array([1.0, 0.0], dtype=complex)
    recs = mc_unravel(model, psi, 2.0, n_traj=20, seed=1)
    exact = expm(-1j * h * 2.0) @ psi
    dev = max(1 - abs(np.vdot(exact, r.final_state)) for r in recs)
    jumps = sum(r.n_jumps for r in recs)
    return jumps == 0 and dev <= 1e-8, f"{jumps} jumps, max infidelity {dev:.1e}"


def _check_mc_survival(substeps):
    n = 4000
    recs = mc_unravel(_amplitude_damping(), np.array([0.0, 1.0], dtype=complex), 1.0, n_traj=n, seed=7)
    hist = jump_count_histogram(recs, 1.0)
    frac = 1 - hist.get(0, 0) / n
    p = 1 - np.exp(-1.0)
    sigma = np.sqrt(p * (1 - p) / n)
    return abs(frac - p) <= 3 * sigma, f"P(>=1 jump) {frac:.4f} vs {p:.4f} (3 sigma {3 * sigma:.4f})"


def _check_mc_lindblad(substeps):
    model = two_momentum_model(BlochParams(1.0, 0.5), 0.0, np.pi / 2)
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[2] = 1 / np.sqrt(2)
    recs = mc_unravel(model, psi, 2.0, n_traj=3000, seed=3, sample_times=[2.0])
    mc = np.mean([np.outer(s[1], s[1].conj()) for r in recs for s in r.sampled_states], axis=0)
    exact = evolve(model, np.outer(psi, psi.conj()), 2.0)[-1][1]
    dist = trace_distance(mc, exact)
    return dist <= 0.05, f"trace distance {dist:.3f}"


def _check_emulated_k(substeps):
    from .emulator import build_extended, kcc_emulated

    params = BlochParams(1.0, 0.5)
    pair = MomentumPair(0.0, np.pi / 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = kcc_emulated(build_extended(params, pair), 50.0, 200)
    ref = kcc_closed_form(params, pair.p, pair.p_prime)
    return abs(got - ref) <= 1e-2, f"|K_emulated - K_closed| = {abs(got - ref):.1e}"


def _check_ancilla_bookkeeping(substeps):
    from .emulator import ancilla_project, build_extended

    ext = build_extended(BlochParams(1.0, 2.0), MomentumPair(0.0, 1.0))
    # rank-deficient 12-dim states need 4x the density to keep RK4 positivity error below 1e-9
    out = evolve(ext.model, ext.initial_density, 20.0, 4 * substeps, sample_times=[0.0, 5.0, 20.0])
    worst = 0.0
    for _, rho in out:
        blocks = [ancilla_project(rho, m) for m in range(3)]
        for b in blocks:
            validate_density(b, normalized=False)
        worst = max(worst, abs(sum(np.trace(b) for b in blocks) - 1))
    return worst <= 1e-8, f"max |sum_m tr block_m - 1| = {worst:.1e}"


CHECKS: list[tuple[str, Callable]] = [
    ("kron mixed product", _check_kron),
    ("expm inverse and unitarity", _check_expm),
    ("amplitude damping decay", _check_decay),
    ("trace preservation (two-momentum model, t=300)", _check_trace),
    ("ancilla block bookkeeping", _check_ancilla_bookkeeping),
    ("diagonal propagator normalization", _check_diag_k),
    ("winding numbers", _check_winding),
    ("analytic T equals W", _check_t_equals_w),
    ("jump-time step trace preservation", _check_jumptime_trace),
    ("dark-state annihilation", _check_dark),
    ("MC vs Lindblad at gamma=0", _check_mc_gamma0),
    ("MC survival law", _check_mc_survival),
    ("MC ensemble vs Lindblad", _check_mc_lindblad),
    ("emulated vs closed-form propagator", _check_emulated_k),
]


def run_checks(substeps: int = 100) -> list[CheckResult]:
    """Run every fast invariant check; ``substeps`` is the RK4 density per unit time."""
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = fn(substeps)
        except (JumptopoError, ValueError, FloatingPointError) as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results
