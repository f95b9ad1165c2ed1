"""Lindblad models and deterministic fixed-step integration.

Density matrices are plain complex arrays. :func:`validate_density` checks the
trace / Hermiticity / positivity invariants that every propagated state must
satisfy; :func:`evolve` runs classical RK4 directly on the matrix ODE and
validates each returned sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericalInvariantError, ShapeError
from .matcore import as_matrix

__all__ = [
    "LindbladModel",
    "build_heff",
    "liouvillian_apply",
    "evolve",
    "validate_density",
    "trace_distance",
    "superoperator",
    "rk4_step_matrix",
    "reachable_support",
    "HERMITIAN_TOL",
    "TRACE_TOL",
    "POSITIVITY_TOL",
]

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8  # per 100 time units
POSITIVITY_TOL = 1e-9
DEFAULT_SUBSTEPS = 100


@dataclass(frozen=True)
class LindbladModel:
    """Hermitian Hamiltonian plus ``(rate, jump operator)`` channels.

    Time is measured in units of the reference decay rate, so the rates are
    dimensionless multiples of it.
    """

    hamiltonian: np.ndarray
    channels: tuple[tuple[float, np.ndarray], ...] = field(default=())

    def __post_init__(self):
        h = as_matrix(self.hamiltonian, square=True)
        if not np.allclose(h, h.conj().T, atol=1e-12, rtol=0.0):
            raise ValueError("Hamiltonian is not Hermitian to 1e-12")
        chans = []
        for rate, op in self.channels:
            rate = float(rate)
            if not rate >= 0.0:
                raise ValueError(f"decay rates must be non-negative, got {rate}")
            op = as_matrix(op)
            if op.shape != h.shape:
                raise ShapeError(f"jump operator shape {op.shape} != Hamiltonian {h.shape}")
            chans.append((rate, op))
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "channels", tuple(chans))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def with_rates_scaled(self, factor: float) -> LindbladModel:
        return LindbladModel(self.hamiltonian, tuple((r * factor, op) for r, op in self.channels))


def build_heff(model: LindbladModel) -> np.ndarray:
    """Non-Hermitian generator ``H - (i/2) sum_j rate_j L_j^† L_j``."""
    heff = model.hamiltonian.copy()
    for rate, op in model.channels:
        heff -= 0.5j * rate * (op.conj().T @ op)
    return heff


def _check_square(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape[-2:] != (model.dim, model.dim):
        raise ShapeError(f"state shape {rho.shape} does not match model dimension {model.dim}")
    return rho


def _rhs(heff: np.ndarray, jumps: list[tuple[float, np.ndarray, np.ndarray]], rho: np.ndarray):
    out = -1j * (heff @ rho) + 1j * (rho @ heff.conj().T)
    for rate, op, op_dag in jumps:
        out += rate * (op @ rho @ op_dag)
    return out


def _prepared(model: LindbladModel):
    heff = build_heff(model)
    jumps = [(rate, op, op.conj().T) for rate, op in model.channels if rate > 0.0]
    return heff, jumps


def liouvillian_apply(model: LindbladModel, rho) -> np.ndarray:
    """Right-hand side ``-i[H, rho] + sum_j rate_j (L rho L^† - {L^† L, rho}/2)``."""
    rho = _check_square(model, rho)
    heff, jumps = _prepared(model)
    return _rhs(heff, jumps, rho)


def validate_density(
    rho,
    *,
    normalized: bool = True,
    expected_trace: float | None = None,
    trace_tol: float = TRACE_TOL,
    herm_tol: float = HERMITIAN_TOL,
    pos_tol: float = POSITIVITY_TOL,
    label: str = "state",
) -> None:
    """Raise :class:`NumericalInvariantError` unless ``rho`` is a valid density matrix.

    ``expected_trace`` overrides the unit trace of normalized states; with
    ``normalized=False`` and no expected trace only Hermiticity and positivity
    are checked.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if not np.all(np.isfinite(rho)):
        raise NumericalInvariantError(f"{label}: non-finite entries")
    herm = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
    if herm > herm_tol:
        raise NumericalInvariantError(f"{label}: Hermiticity violated by {herm:.3e}")
    target = 1.0 if normalized and expected_trace is None else expected_trace
    if target is not None:
        dev = abs(np.trace(rho) - target)
        if dev > trace_tol:
            raise NumericalInvariantError(f"{label}: trace deviates by {dev:.3e}")
    lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lam < -pos_tol:
        raise NumericalInvariantError(f"{label}: negative eigenvalue {lam:.3e}")


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b`` (both Hermitian)."""
    d = np.asarray(a, dtype=np.complex128) - np.asarray(b, dtype=np.complex128)
    d = 0.5 * (d + d.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(d))))


def evolve(
    model: LindbladModel,
    rho0,
    t_final: float,
    n_substeps_per_unit: int = DEFAULT_SUBSTEPS,
    sample_times: Sequence[float] | None = None,
    *,
    check: bool = True,
) -> list[tuple[float, np.ndarray]]:
    """Integrate the master equation with fixed-step RK4.

    Each interval between consecutive sample times is split into
    ``ceil(length * n_substeps_per_unit)`` equal steps, so samples are hit
    exactly. Every returned state is validated against the density-matrix
    invariants; a violation means the step is too coarse.

    Args:
        model: Dynamics to integrate.
        rho0: Initial density matrix.
        t_final: Last time to integrate to (units of 1/gamma).
        n_substeps_per_unit: RK4 steps per unit time.
        sample_times: Times to report, each in ``[0, t_final]``; defaults to
            ``[t_final]``.
        check: Validate invariants at every sample.

    Returns:
        List of ``(time, rho)`` pairs in increasing time order.
    """
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if n_substeps_per_unit < 1:
        raise ValueError("n_substeps_per_unit must be >= 1")
    rho = _check_square(model, rho0).copy()
    times = sorted(float(t) for t in (sample_times if sample_times is not None else [t_final]))
    if times and (times[0] < 0 or times[-1] > t_final + 1e-12):
        raise ValueError("sample times must lie in [0, t_final]")
    heff, jumps = _prepared(model)
    trace0 = complex(np.trace(rho))

    out = []
    t = 0.0
    for ts in times:
        span = ts - t
        n = int(np.ceil(span * n_substeps_per_unit - 1e-9)) if span > 0 else 0
        if n:
            h = span / n
            for _ in range(n):
                k1 = _rhs(heff, jumps, rho)
                k2 = _rhs(heff, jumps, rho + 0.5 * h * k1)
                k3 = _rhs(heff, jumps, rho + 0.5 * h * k2)
                k4 = _rhs(heff, jumps, rho + h * k3)
                rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = ts
        if check:
            validate_density(
                rho,
                normalized=False,
                expected_trace=trace0.real,
                trace_tol=TRACE_TOL * max(1.0, ts / 100.0),
                label=f"rho(t={ts:g})",
            )
        out.append((ts, rho.copy()))
    return out


def superoperator(model: LindbladModel) -> np.ndarray:
    """Generator acting on row-major ``rho.reshape(-1)``.

    Uses ``vec(A X B) = (A ⊗ B^T) vec(X)`` for row-major vectorization.
    """
    heff, jumps = _prepared(model)
    eye = np.eye(model.dim, dtype=np.complex128)
    gen = -1j * np.kron(heff, eye) + 1j * np.kron(eye, heff.conj())
    for rate, op, _ in jumps:
        gen += rate * np.kron(op, op.conj())
    return gen


def reachable_support(generator: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Indices of the smallest coordinate subspace containing ``start`` and closed under ``generator``.

    Works on the sparsity pattern only, so the restriction of the dynamics
    to the returned indices is exact.
    """
    pattern = np.abs(generator) > 0
    seen = np.abs(np.asarray(start)) > 0
    frontier = seen.copy()
    while frontier.any():
        nxt = pattern[:, frontier].any(axis=1) & ~seen
        seen |= nxt
        frontier = nxt
    return np.flatnonzero(seen)


def rk4_step_matrix(generator: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for ``dx/dt = G x`` as a matrix (stacks allowed).

    For a linear ODE the four RK4 stages collapse to the degree-4 Taylor
    polynomial of ``exp(hG)``.
    """
    z = np.asarray(generator, dtype=np.complex128) * h
    eye = np.broadcast_to(np.eye(z.shape[-1], dtype=np.complex128), z.shape)
    z2 = z @ z
    return eye + z + z2 / 2.0 + (z2 @ z) / 6.0 + (z2 @ z2) / 24.0
