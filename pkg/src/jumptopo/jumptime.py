"""Quantum-jump unraveling and jump-time machinery.

Two independent routes to jump-time averaged states live here:

* :func:`jumptime_step` integrates ``ρ_{n+1} = ∫ ds Σ_j γ_j J_j U_s ρ_n`` by
  quadrature, where ``U_s`` is the no-jump (conditioned) evolution and
  ``J_j`` the jump superoperator.
* :func:`mc_unravel` samples Monte-Carlo wave-function trajectories and
  :func:`jump_count_average` averages them at fixed jump count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyEnsembleError, ShapeError, TailMassWarning
from .lindblad import LindbladModel, build_heff
from .matcore import expm

__all__ = [
    "QuadratureSpec",
    "TrajectoryRecord",
    "conditioned_propagate",
    "jump_apply",
    "jumptime_step",
    "choose_s_max",
    "mc_unravel",
    "jump_count_average",
    "fixed_time_average",
    "jump_count_histogram",
    "is_dark",
]

DEFAULT_QUAD_POINTS = 2000
TAIL_TRACE_TARGET = 1e-8
TAIL_WARN = 1e-6
_S_MAX_CAP = 1e4
# largest |H_eff| * step for which the default grid resolves the oscillations
_MAX_PHASE_PER_POINT = 0.05


@dataclass(frozen=True)
class QuadratureSpec:
    s_max: float
    n_points: int = DEFAULT_QUAD_POINTS
    rule: str = "trapezoid"

    def __post_init__(self):
        if not self.s_max > 0:
            raise ValueError("s_max must be positive")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if self.rule not in ("trapezoid", "left-riemann"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    def weights(self) -> tuple[float, np.ndarray]:
        h = self.s_max / (self.n_points - 1)
        w = np.full(self.n_points, h)
        if self.rule == "trapezoid":
            w[0] = w[-1] = 0.5 * h
        else:
            w[-1] = 0.0
        return h, w


@dataclass
class TrajectoryRecord:
    """One Monte-Carlo realization.

    ``jump_states[n]`` is the normalized state right after the n-th jump
    (``jump_states[0]`` is the initial state); capture stops after
    ``max_capture`` jumps. ``sampled_states`` holds ``(t, psi, jumps so far)``.
    """

    seed: int
    jump_events: list[tuple[float, int]] = field(default_factory=list)
    final_state: np.ndarray | None = None
    sampled_states: list[tuple[float, np.ndarray, int]] = field(default_factory=list)
    jump_states: list[np.ndarray] = field(default_factory=list)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_events)

    def jumps_before(self, t: float) -> int:
        return sum(1 for tk, _ in self.jump_events if tk <= t)


def conditioned_propagate(heff, s: float, rho) -> np.ndarray:
    """No-jump evolution ``e^{-i H_eff s} ρ e^{+i H_eff^† s}`` (trace non-increasing)."""
    if s < 0:
        raise ValueError("s must be non-negative")
    u = expm(-1j * np.asarray(heff, dtype=np.complex128) * s)
    return u @ np.asarray(rho, dtype=np.complex128) @ u.conj().T


def jump_apply(op, rho) -> np.ndarray:
    """Jump superoperator ``L ρ L^†``."""
    op = np.asarray(op, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    if op.shape[1] != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"cannot apply jump {op.shape} to state {rho.shape}")
    return op @ rho @ op.conj().T


def _decay_operator(model: LindbladModel) -> np.ndarray:
    gamma = np.zeros((model.dim, model.dim), dtype=np.complex128)
    for rate, op in model.channels:
        gamma += rate * (op.conj().T @ op)
    return gamma


def choose_s_max(model: LindbladModel, rho) -> float:
    """Smallest doubling of 8/γ after which the conditioned trace is ≤ 1e-8 of the start.

    Doubling also stops once the remaining weight no longer decays (a dark
    component), since a longer window would not change the integral.
    """
    heff = build_heff(model)
    decay = _decay_operator(model)
    rho = np.asarray(rho, dtype=np.complex128)
    tr0 = max(float(np.real(np.trace(rho))), 1e-300)
    s = 8.0
    while True:
        x = conditioned_propagate(heff, s, rho)
        tr = float(np.real(np.trace(x)))
        rate = float(np.real(np.trace(decay @ x)))
        if tr <= TAIL_TRACE_TARGET * tr0 or rate <= 1e-14 * tr0 or s >= _S_MAX_CAP:
            return s
        s *= 2.0


def jumptime_step(model: LindbladModel, rho_n, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Advance a jump-time averaged state by one jump.

    Computes ``∫_0^{s_max} ds Σ_j γ_j L_j U_s(ρ_n) L_j^†`` on a uniform grid.
    Without an explicit ``quad`` the window comes from :func:`choose_s_max`
    and the grid has at least 2000 points, refined so that each step advances
    the fastest phase by at most 0.05 rad.

    Warns:
        TailMassWarning: if weight above 1e-6 is still decaying at ``s_max``.
    """
    rho_n = np.asarray(rho_n, dtype=np.complex128)
    if rho_n.shape != (model.dim, model.dim):
        raise ShapeError(f"state shape {rho_n.shape} does not match model dimension {model.dim}")
    heff = build_heff(model)
    if quad is None:
        s_max = choose_s_max(model, rho_n)
        scale = float(np.max(np.abs(np.linalg.eigvals(heff)))) if model.dim else 0.0
        n = max(DEFAULT_QUAD_POINTS, int(np.ceil(s_max * scale / _MAX_PHASE_PER_POINT)) + 1)
        quad = QuadratureSpec(s_max, n)
    h, weights = quad.weights()
    u = expm(-1j * heff * h)
    u_dag = u.conj().T
    jumps = [(rate, op, op.conj().T) for rate, op in model.channels if rate > 0]

    x = rho_n
    acc = np.zeros_like(rho_n)
    for k in range(quad.n_points):
        if k:
            x = u @ x @ u_dag
        if weights[k]:
            for rate, op, op_dag in jumps:
                acc += (weights[k] * rate) * (op @ x @ op_dag)

    tail = float(np.real(np.trace(x)))
    if tail > TAIL_WARN:
        still_decaying = float(np.real(np.trace(_decay_operator(model) @ x))) > 1e-9
        if still_decaying:
            warnings.warn(
                f"conditioned trace {tail:.2e} remains at s_max={quad.s_max:g}",
                TailMassWarning,
                stacklevel=2,
            )
    return acc


def is_dark(model: LindbladModel, psi, tol: float = 1e-9) -> bool:
    """True iff every jump operator annihilates ``psi`` and ``[H, |ψ><ψ|]`` vanishes."""
    psi = np.asarray(psi, dtype=np.complex128)
    for _, op in model.channels:
        if np.linalg.norm(op @ psi) > tol:
            return False
    proj = np.outer(psi, psi.conj())
    comm = model.hamiltonian @ proj - proj @ model.hamiltonian
    return bool(np.linalg.norm(comm) <= tol)


# --- Monte-Carlo wave-function unraveling ---------------------------------


def _taylor_propagate(heff: np.ndarray, psi: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Apply ``exp(-i H_eff τ_k)`` to row ``k`` of ``psi`` for short times ``τ_k``."""
    out = psi.copy()
    term = psi.copy()
    ht = heff.T
    for m in range(1, 40):
        term = (term @ ht) * (-1j * tau / m)[:, None]
        out += term
        if np.max(np.abs(term)) < 1e-17:
            break
    return out


def _norm2(psi: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", psi.conj(), psi).real


def _crossing_time(heff, decay, psi, n_start, n_end, r, span):
    """Time within ``[0, span]`` where ``|exp(-iH_eff τ) ψ|²`` falls to ``r``.

    Log-linear interpolation followed by Newton steps on the exact norm,
    using ``d|ψ|²/dτ = -<ψ|Γ|ψ>``.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = span * np.log(n_start / r) / np.log(n_start / n_end)
    tau = np.where(np.isfinite(tau), tau, span)
    tau = np.clip(tau, 0.0, span)
    for _ in range(4):
        phi = _taylor_propagate(heff, psi, tau)
        f = _norm2(phi) - r
        df = -np.einsum("ij,jk,ik->i", phi.conj(), decay, phi).real
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df < 0, f / df, 0.0)
        tau = np.clip(tau - step, 0.0, span)
    return tau


def mc_unravel(
    model: LindbladModel,
    psi0,
    t_final: float,
    dt: float = 0.01,
    n_traj: int = 1000,
    seed: int = 0,
    *,
    sample_times: Sequence[float] | None = None,
    max_capture: int = 4,
) -> list[TrajectoryRecord]:
    """Monte-Carlo wave-function trajectories by the waiting-time method.

    The unnormalized state follows ``H_eff``; each trajectory draws
    ``r ~ U(0, 1)`` and jumps when ``|ψ|² = r``. The crossing time is solved
    inside the step rather than snapped to the grid. The channel is chosen
    with probability ``∝ γ_j |L_j ψ|²``, the state renormalized and a fresh
    ``r`` drawn. Trajectory ``i`` uses its own generator seeded with
    ``seed + i``, so records do not depend on ``n_traj`` or on batching.

    Args:
        model: Dynamics to unravel.
        psi0: Normalized initial state vector.
        t_final: Simulated wall time; rounded up to a whole number of steps.
        dt: Propagation step.
        n_traj: Number of trajectories.
        seed: Base seed.
        sample_times: Times (on the step grid) at which to store normalized
            states and running jump counts.
        max_capture: Number of post-jump states kept per trajectory.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (model.dim,):
        raise ShapeError(f"initial state shape {psi0.shape} does not match dimension {model.dim}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")

    n_steps = int(np.ceil(t_final / dt - 1e-9)) if t_final > 0 else 0
    h = t_final / n_steps if n_steps else dt
    sample_steps: dict[int, list[float]] = {}
    for ts in sample_times or ():
        k = int(round(ts / h)) if n_steps else 0
        if abs(k * h - ts) > 1e-9 * max(1.0, ts) or k < 0 or k > n_steps:
            raise ValueError(f"sample time {ts} is not on the propagation grid (step {h:g})")
        sample_steps.setdefault(k, []).append(float(ts))

    heff = build_heff(model)
    decay = _decay_operator(model)
    u_step = expm(-1j * heff * h)
    chans = [(rate, op) for rate, op in model.channels if rate > 0]

    rngs = [np.random.default_rng(seed + i) for i in range(n_traj)]
    records = [TrajectoryRecord(seed=seed + i, jump_states=[psi0.copy()]) for i in range(n_traj)]
    psi = np.tile(psi0, (n_traj, 1))
    thresh = np.array([g.random() for g in rngs])

    def capture(step: int):
        for ts in sample_steps.get(step, ()):
            nrm = np.sqrt(_norm2(psi))
            for i, rec in enumerate(records):
                rec.sampled_states.append((ts, psi[i] / nrm[i], rec.n_jumps))

    capture(0)
    for step in range(n_steps):
        t0 = step * h
        new = psi @ u_step.T
        n_new = _norm2(new)
        hit = np.flatnonzero(n_new <= thresh)
        if hit.size:
            # pending jumps: state at t_start, remaining span within this step
            start = psi[hit]
            t_start = np.full(hit.size, t0)
            span = np.full(hit.size, h)
            n_start = _norm2(start)
            n_end = n_new[hit]
            idx = hit
            while idx.size:
                tau = _crossing_time(heff, decay, start, n_start, n_end, thresh[idx], span)
                at_jump = _taylor_propagate(heff, start, tau)
                for row, i in enumerate(idx):
                    g = rngs[i]
                    phi = at_jump[row]
                    weights = np.array([rate * np.vdot(op @ phi, op @ phi).real for rate, op in chans])
                    total = weights.sum()
                    if total <= 0:
                        # numerically exhausted norm with no jump channel open
                        j = 0
                    else:
                        j = int(np.searchsorted(np.cumsum(weights) / total, g.random(), side="right"))
                        j = min(j, len(chans) - 1)
                    out = chans[j][1] @ phi
                    out /= np.linalg.norm(out)
                    rec = records[i]
                    rec.jump_events.append((float(t_start[row] + tau[row]), j))
                    if rec.n_jumps <= max_capture:
                        rec.jump_states.append(out.copy())
                    at_jump[row] = out
                    thresh[i] = g.random()
                remaining = span - tau
                end = _taylor_propagate(heff, at_jump, remaining)
                n_rem = _norm2(end)
                again = n_rem <= thresh[idx]
                new[idx[~again]] = end[~again]
                # trajectories that jump again inside the same step
                start = at_jump[again]
                t_start = t_start[again] + tau[again]
                span = remaining[again]
                n_start = np.ones(int(again.sum()))
                n_end = n_rem[again]
                idx = idx[again]
        psi = new
        capture(step + 1)

    nrm = np.sqrt(_norm2(psi))
    for i, rec in enumerate(records):
        rec.final_state = psi[i] / nrm[i]
    return records


def jump_count_average(records: Sequence[TrajectoryRecord], n: int, renormalize: bool = False) -> np.ndarray:
    """Average of post-n-th-jump projectors over all records.

    Records that never reached ``n`` jumps contribute zero, so the result is
    the unnormalized jump-time averaged state whose trace estimates the
    probability of ever reaching ``n`` jumps.

    Raises:
        EmptyEnsembleError: if no trajectory reached ``n`` jumps.
    """
    if not records:
        raise EmptyEnsembleError("no trajectory records supplied")
    reached = [rec.jump_states[n] for rec in records if len(rec.jump_states) > n]
    if not reached:
        raise EmptyEnsembleError(f"no trajectory reached {n} jump(s) (or capture was truncated)")
    states = np.array(reached)
    rho = np.einsum("ki,kj->ij", states, states.conj()) / len(records)
    if renormalize:
        rho = rho / np.trace(rho).real
    return rho


def fixed_time_average(records: Sequence[TrajectoryRecord], t: float) -> np.ndarray:
    """Wall-time ensemble average of the normalized states sampled at time ``t``."""
    states = []
    for rec in records:
        for ts, psi, _ in rec.sampled_states:
            if abs(ts - t) <= 1e-12 * max(1.0, abs(t)):
                states.append(psi)
                break
    if not states:
        raise EmptyEnsembleError(f"no states were sampled at t={t}")
    states = np.array(states)
    return np.einsum("ki,kj->ij", states, states.conj()) / len(states)


def jump_count_histogram(records: Sequence[TrajectoryRecord], t: float | None = None) -> dict[int, int]:
    """Number of trajectories by jump count at time ``t`` (default: end of run)."""
    counts: dict[int, int] = {}
    for rec in records:
        n = rec.n_jumps if t is None else rec.jumps_before(t)
        counts[n] = counts.get(n, 0) + 1
    return dict(sorted(counts.items()))
