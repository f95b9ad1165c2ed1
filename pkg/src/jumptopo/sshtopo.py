"""Dissipative SSH model in momentum space.

Each momentum sector carries a two-level (sublattice) system with Bloch
Hamiltonian ``h_x(p) σ_x + h_y(p) σ_y`` and a collective decay channel
``σ_- = |0><1|`` at rate ``gamma``. Sublattice state ``|0>`` is the one
annihilated by the decay.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalInvariantError, SingularityError
from .lindblad import LindbladModel
from .matcore import kron

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_MINUS",
    "BlochParams",
    "MomentumPair",
    "bloch",
    "bloch_hamiltonian",
    "single_momentum_model",
    "two_momentum_model",
    "branch_superposition",
    "winding_integral",
    "winding_number",
    "kcc_closed_form",
    "jumptime_phase",
    "phase_probe_points",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)

SINGULAR_TOL = 1e-9
DARK_DENOM_TOL = 1e-12
WINDING_RESIDUAL_TOL = 0.01


@dataclass(frozen=True)
class BlochParams:
    """Intracell hopping ``v``, intercell hopping ``w`` and decay rate ``gamma``."""

    v: float = 1.0
    w: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.v) and np.isfinite(self.w)):
            raise ValueError("hoppings must be finite")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class MomentumPair:
    """The two momenta ``(p, p')`` addressed by one emulation run."""

    p: float
    p_prime: float

    def __post_init__(self):
        for name in ("p", "p_prime"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite")

    def wrapped(self) -> MomentumPair:
        """Both momenta reduced into ``[0, 2π)``."""
        return MomentumPair(float(np.mod(self.p, 2 * np.pi)), float(np.mod(self.p_prime, 2 * np.pi)))


def bloch(params: BlochParams, p):
    """Return ``(h_x, h_y) = (v + w cos p, -w sin p)``; ``p`` may be an array."""
    return params.v + params.w * np.cos(p), -params.w * np.sin(p)


def bloch_hamiltonian(params: BlochParams, p: float) -> np.ndarray:
    hx, hy = bloch(params, p)
    return hx * SIGMA_X + hy * SIGMA_Y


def single_momentum_model(params: BlochParams, p: float) -> LindbladModel:
    """Two-level sublattice model of one momentum sector."""
    return LindbladModel(bloch_hamiltonian(params, p), ((params.gamma, SIGMA_MINUS),))


def two_momentum_model(params: BlochParams, p: float, p_prime: float) -> LindbladModel:
    """Four-level model: branch qubit (``|0> ≡ p``, ``|1> ≡ p'``) ⊗ sublattice.

    The decay acts identically on both branches (collective collapse).
    """
    proj0 = np.diag([1.0, 0.0]).astype(np.complex128)
    proj1 = np.diag([0.0, 1.0]).astype(np.complex128)
    ham = kron(proj0, bloch_hamiltonian(params, p)) + kron(proj1, bloch_hamiltonian(params, p_prime))
    jump = kron(np.eye(2), SIGMA_MINUS)
    return LindbladModel(ham, ((params.gamma, jump),))


def branch_superposition() -> np.ndarray:
    """``(|0> + |1>)/√2 ⊗ |0>`` in the branch ⊗ sublattice space."""
    return np.kron(np.array([1.0, 1.0]) / np.sqrt(2.0), np.array([1.0, 0.0])).astype(np.complex128)


def _check_off_singular(params: BlochParams):
    if abs(abs(params.v) - abs(params.w)) <= SINGULAR_TOL:
        raise SingularityError(
            f"|v| = |w| (v={params.v}, w={params.w}): the Bloch loop passes through the dark point"
        )


def winding_integral(params: BlochParams, n_grid: int = 1000) -> float:
    """Raw value of the winding integral on a uniform periodic grid."""
    _check_off_singular(params)
    if n_grid < 3:
        raise ValueError("n_grid must be >= 3")
    p = 2 * np.pi * np.arange(n_grid) / n_grid
    hx, hy = bloch(params, p)
    dhx = -params.w * np.sin(p)
    dhy = -params.w * np.cos(p)
    integrand = (dhx * hy - dhy * hx) / (hx**2 + hy**2)
    return float(np.sum(integrand) / n_grid)


def winding_number(params: BlochParams, n_grid: int = 1000) -> int:
    """Integer winding of the Bloch vector about the origin.

    Raises:
        SingularityError: when ``|v| ≈ |w|``.
        NumericalInvariantError: when the discretized integral is further
            than 0.01 from an integer.
    """
    raw = winding_integral(params, n_grid)
    w = int(round(raw))
    if abs(raw - w) > WINDING_RESIDUAL_TOL:
        raise NumericalInvariantError(
            f"winding integral {raw:.6f} not within {WINDING_RESIDUAL_TOL} of an integer; refine n_grid"
        )
    return w


def kcc_closed_form(params: BlochParams, p, p_prime):
    """Closed-form jump-time propagator ``K(p, p')``.

    ``K = 2 h(p) h(p')^* / ((2/γ²)(|h(p)|² - |h(p')|²)² + |h(p)|² + |h(p')|²)``
    with ``h = h_x + i h_y``. At ``gamma = 1`` this is the familiar form with
    denominator ``2(h²-h'²)² + h² + h'²``. Scalars and arrays are accepted.

    Raises:
        SingularityError: where both momenta sit on the dark point.
    """
    hx, hy = bloch(params, np.asarray(p, dtype=float))
    hxp, hyp = bloch(params, np.asarray(p_prime, dtype=float))
    a = hx + 1j * hy
    b = hxp + 1j * hyp
    a2 = np.abs(a) ** 2
    b2 = np.abs(b) ** 2
    denom = (2.0 / params.gamma**2) * (a2 - b2) ** 2 + a2 + b2
    if np.any(denom < DARK_DENOM_TOL):
        raise SingularityError("K(p, p') evaluated at the dark point h(p) = h(p') = 0")
    out = 2.0 * a * np.conj(b) / denom
    return complex(out) if np.ndim(out) == 0 else out


def phase_probe_points(n_cir: int, delta_p: float, delta_q: float = 0.0, corrected_sum: bool = False):
    """Momenta at which the order-parameter sum evaluates the propagator.

    Returns ``(p_shift, p_diag, p_prime)`` arrays: the shifted probe uses
    ``K(p_shift, p_prime)`` and the diagonal probe ``K(p_diag, p_prime)``.
    The grid runs ``k = 0..n_cir`` inclusive unless ``corrected_sum`` drops
    the duplicated endpoint ``k = n_cir``.
    """
    if n_cir < 3:
        raise ValueError("n_cir must be >= 3")
    if not delta_p > 0:
        raise ValueError("delta_p must be positive")
    k = np.arange(n_cir if corrected_sum else n_cir + 1)
    base = 2 * np.pi * k / n_cir
    return base + delta_p, base, base + delta_q


def jumptime_phase(
    kcc: Callable,
    n_cir: int,
    delta_p: float,
    delta_q: float = 0.0,
    corrected_sum: bool = False,
) -> complex:
    """Discretized jump-time phase (topological order parameter).

    ``T ≈ (i/N) Σ_k [K(p_k + Δp, p_k + Δq) - K(p_k, p_k + Δq)] / Δp`` with
    ``p_k = 2πk/N`` and ``k = 0..N`` (both endpoints, as in the reproduction
    mode). ``kcc`` is called once per probe family with numpy arrays and
    must broadcast; ``Re T`` is the order parameter.
    """
    p_shift, p_diag, p_prime = phase_probe_points(n_cir, delta_p, delta_q, corrected_sum)
    k_shift = np.broadcast_to(kcc(p_shift, p_prime), p_shift.shape)
    k_diag = np.broadcast_to(kcc(p_diag, p_prime), p_diag.shape)
    return complex(1j * np.sum(k_shift - k_diag) / (n_cir * delta_p))
