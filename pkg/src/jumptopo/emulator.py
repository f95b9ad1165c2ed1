"""Ancilla-assisted emulation of jump-time averaged states.

The two-momentum SSH system (branch ⊗ sublattice) is extended by a ``d``-level
ancilla whose raising operator is attached to the system jump, so that the
ancilla level counts jumps. Integrating the wall-time blocks
``<m|ρ̃_t|m>_a`` over a measurement grid and applying the system jump
operator afterwards yields ``ρ_{m+1}`` without any monitoring; the ratio of
one matrix element of ``ρ_2`` and ``ρ_1`` is the jump-time propagator.

Basis ordering is branch ⊗ sublattice ⊗ ancilla.
"""

from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import PhaseResult, SweepConfig
from .errors import NumericalInvariantError, SingularityError, TailMassWarning
from .lindblad import (
    HERMITIAN_TOL,
    POSITIVITY_TOL,
    TRACE_TOL,
    LindbladModel,
    reachable_support,
    rk4_step_matrix,
    superoperator,
)
from .matcore import expm, kron
from .sshtopo import (
    SIGMA_MINUS,
    BlochParams,
    MomentumPair,
    branch_superposition,
    jumptime_phase,
    kcc_closed_form,
    two_momentum_model,
)

__all__ = [
    "ExtendedModel",
    "raising_operator",
    "extend_with_ancilla",
    "build_extended",
    "ancilla_project",
    "ancilla_block_sums",
    "jumptime_states_from_ancilla",
    "kcc_emulated",
    "kcc_emulated_batch",
    "phase_sweep",
]

log = logging.getLogger(__name__)

SYSTEM_DIM = 4
TAIL_WARN = 1e-4
DEGENERATE_TOL = 1e-12
_MAX_SUBSTEPS = 1280
# element <p,0| . |p',0> of rho_{m+1} in the branch ⊗ sublattice basis
_K_ROW, _K_COL = 0, 2


def raising_operator(dim: int) -> np.ndarray:
    """Truncated ladder ``C_+|n> = |n+1>`` for ``n < dim-1`` and ``C_+|dim-1> = 0``."""
    return np.diag(np.ones(dim - 1), -1).astype(np.complex128)


def extend_with_ancilla(model: LindbladModel, ancilla_dim: int) -> LindbladModel:
    """``H ⊗ 1_a`` with every channel ``L`` replaced by ``L ⊗ C_+``."""
    eye = np.eye(ancilla_dim, dtype=np.complex128)
    up = raising_operator(ancilla_dim)
    return LindbladModel(
        kron(model.hamiltonian, eye),
        tuple((rate, kron(op, up)) for rate, op in model.channels),
    )


@dataclass(frozen=True)
class ExtendedModel:
    params: BlochParams
    pair: MomentumPair
    ancilla_dim: int
    model: LindbladModel
    initial_state: np.ndarray

    @property
    def system_jump(self) -> np.ndarray:
        """System-only jump operator ``1_2 ⊗ σ_-`` applied after projection."""
        return kron(np.eye(2), SIGMA_MINUS)

    @property
    def initial_density(self) -> np.ndarray:
        return np.outer(self.initial_state, self.initial_state.conj())


def build_extended(params: BlochParams, pair: MomentumPair, ancilla_dim: int = 3) -> ExtendedModel:
    """Branch ⊗ sublattice ⊗ ancilla model started in ``(|0>+|1>)/√2 ⊗ |0> ⊗ |0>_a``."""
    if ancilla_dim not in (2, 3):
        raise ValueError(f"ancilla_dim must be 2 or 3, got {ancilla_dim}")
    system = two_momentum_model(params, pair.p, pair.p_prime)
    model = extend_with_ancilla(system, ancilla_dim)
    anc0 = np.zeros(ancilla_dim, dtype=np.complex128)
    anc0[0] = 1.0
    psi = np.kron(branch_superposition(), anc0)
    return ExtendedModel(params, pair, ancilla_dim, model, psi)


def ancilla_project(rho_tilde, m: int, ancilla_dim: int = 3) -> np.ndarray:
    """System block ``<m|ρ̃|m>_a`` of an extended density matrix."""
    rho_tilde = np.asarray(rho_tilde, dtype=np.complex128)
    if not 0 <= m < ancilla_dim:
        raise IndexError(f"ancilla level {m} out of range for dimension {ancilla_dim}")
    n = rho_tilde.shape[-1]
    if n % ancilla_dim:
        raise ValueError(f"state dimension {n} is not a multiple of {ancilla_dim}")
    sys_dim = n // ancilla_dim
    r = rho_tilde.reshape(rho_tilde.shape[:-2] + (sys_dim, ancilla_dim, sys_dim, ancilla_dim))
    return r[..., :, m, :, m]


def _riemann_weights(n_final: int, dt: float, rule: str) -> np.ndarray:
    """Weights of samples ``k = 0..n_final`` at times ``k dt``."""
    w = np.full(n_final + 1, dt)
    if rule == "left-riemann":
        # sum k = 1..N as printed for the measurement grid
        w[0] = 0.0
    elif rule == "trapezoid":
        w[0] = w[-1] = 0.5 * dt
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return w


def ancilla_block_sums(
    models: list[ExtendedModel],
    t_final: float,
    n_final: int,
    *,
    rule: str = "left-riemann",
    substeps: int = 10,
    stepper: str = "rk4",
):
    """Weighted time sums of the ancilla blocks for a batch of extended models.

    Evolves every model on the grid ``t_k = k t_final / n_final`` and returns
    ``sums[b, m] = Σ_k w_k <m|ρ̃_{t_k}|m>_a`` (shape ``(B, d, 4, 4)``) together
    with the final block traces ``tails[b, m]``.

    Between grid points the state takes ``substeps`` classical RK4 steps. The
    dynamics is restricted exactly to the coordinates reachable from the
    initial state (the ancilla-diagonal blocks), and the RK4 update is applied
    as its one-step matrix. The trace, Hermiticity and positivity invariants
    are checked at every grid point. On a violation the substep count is
    doubled and the batch recomputed.
    """
    if t_final <= 0 or n_final < 1:
        raise ValueError("need t_final > 0 and n_final >= 1")
    if not models:
        raise ValueError("empty batch")
    d = models[0].ancilla_dim
    if any(m.ancilla_dim != d for m in models):
        raise ValueError("all models in a batch must share the ancilla dimension")
    n = models[0].model.dim
    dt = t_final / n_final
    weights = _riemann_weights(n_final, dt, rule)

    gens = [superoperator(m.model) for m in models]
    start = models[0].initial_density.reshape(-1)
    pattern = np.zeros((n * n, n * n), dtype=bool)
    for g in gens:
        pattern |= np.abs(g) > 0
    support = reachable_support(pattern, start)
    gen = np.stack([g[np.ix_(support, support)] for g in gens])
    x0 = np.stack([m.initial_density.reshape(-1)[support] for m in models])

    # gather map from the reduced vector (plus a trailing zero) to the blocks
    sys_dim = n // d
    pos = np.full(n * n, support.size)
    pos[support] = np.arange(support.size)
    a = np.arange(sys_dim)
    idx = np.empty((d, sys_dim, sys_dim), dtype=np.intp)
    for m in range(d):
        rows = a * d + m
        idx[m] = pos[(rows[:, None] * n + rows[None, :])]

    while True:
        try:
            return _integrate(gen, x0, idx, weights, dt, n_final, substeps, stepper)
        except NumericalInvariantError:
            if stepper != "rk4" or substeps * 2 > _MAX_SUBSTEPS:
                raise
            log.info("emulator invariants failed at %d substeps; retrying with %d", substeps, 2 * substeps)
            substeps *= 2


def _integrate(gen, x0, idx, weights, dt, n_final, substeps, stepper):
    if stepper == "rk4":
        prop = np.linalg.matrix_power(rk4_step_matrix(gen, dt / substeps), substeps)
    elif stepper == "expm":
        prop = expm(gen * dt)
    else:
        raise ValueError(f"unknown stepper {stepper!r}")

    batch = x0.shape[0]
    x = x0.copy()
    padded = np.zeros((batch, x.shape[1] + 1), dtype=np.complex128)
    trace0 = None
    sums = 0.0
    for k in range(n_final + 1):
        if k:
            x = np.einsum("bij,bj->bi", prop, x)
        padded[:, :-1] = x
        blocks = padded[:, idx]
        if trace0 is None:
            trace0 = np.einsum("bmii->b", blocks).real
        _check_blocks(blocks, trace0, k * dt)
        if weights[k]:
            sums = sums + weights[k] * blocks
    tails = np.einsum("bmii->bm", blocks).real
    return sums, tails


def _check_blocks(blocks: np.ndarray, trace0: np.ndarray, t: float):
    if not np.all(np.isfinite(blocks)):
        raise NumericalInvariantError(f"non-finite ancilla blocks at t={t:g}")
    tr = np.einsum("bmii->b", blocks)
    dev = float(np.max(np.abs(tr - trace0)))
    if dev > TRACE_TOL * max(1.0, t / 100.0):
        raise NumericalInvariantError(f"extended trace deviates by {dev:.3e} at t={t:g}")
    herm = float(np.max(np.abs(blocks - np.conj(np.swapaxes(blocks, -1, -2)))))
    if herm > HERMITIAN_TOL:
        raise NumericalInvariantError(f"ancilla blocks not Hermitian ({herm:.3e}) at t={t:g}")
    lam = float(np.min(np.linalg.eigvalsh(blocks)))
    if lam < -POSITIVITY_TOL:
        raise NumericalInvariantError(f"negative eigenvalue {lam:.3e} in ancilla blocks at t={t:g}")


def _warn_tails(tails: np.ndarray, levels: int):
    bad = int(np.sum(np.any(tails[:, :levels] > TAIL_WARN, axis=1)))
    if bad:
        warnings.warn(
            f"{bad} model(s) keep ancilla weight above {TAIL_WARN:g} at t_final; the time window is too short",
            TailMassWarning,
            stacklevel=3,
        )
    return bad


def jumptime_states_from_ancilla(
    ext: ExtendedModel,
    t_final: float,
    n_final: int,
    *,
    rule: str = "left-riemann",
    substeps: int = 10,
    stepper: str = "rk4",
) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized ``(ρ_1, ρ_2)`` on the system from the ancilla blocks.

    ``ρ_{m+1} ≈ γ L (Σ_k Δt <m|ρ̃_{kΔt}|m>_a) L^†`` with ``L = 1_2 ⊗ σ_-``.
    With a two-level ancilla the second state is distorted because the
    top level never decays; it is returned as is.
    """
    sums, tails = ancilla_block_sums([ext], t_final, n_final, rule=rule, substeps=substeps, stepper=stepper)
    _warn_tails(tails, 2)
    jump = ext.system_jump
    gamma = ext.params.gamma
    rho1 = gamma * jump @ sums[0, 0] @ jump.conj().T
    rho2 = gamma * jump @ sums[0, 1] @ jump.conj().T
    return rho1, rho2


def _ratio_from_sums(sums: np.ndarray, jump: np.ndarray, gamma: float) -> np.ndarray:
    rho = gamma * np.einsum("ij,bmjk,lk->bmil", jump, sums[:, :2], jump.conj())
    num = rho[:, 1, _K_ROW, _K_COL]
    den = rho[:, 0, _K_ROW, _K_COL]
    if np.any(np.abs(den) < DEGENERATE_TOL):
        raise SingularityError("degenerate propagator element: <p,0|ρ_1|p',0> vanishes (dark pair)")
    return num / den


def kcc_emulated(
    ext: ExtendedModel,
    t_final: float,
    n_final: int,
    *,
    rule: str = "left-riemann",
    substeps: int = 10,
    stepper: str = "rk4",
) -> complex:
    """Jump-time propagator ``<p,0|ρ_2|p',0> / <p,0|ρ_1|p',0>`` from the ancilla blocks."""
    sums, tails = ancilla_block_sums([ext], t_final, n_final, rule=rule, substeps=substeps, stepper=stepper)
    _warn_tails(tails, 2)
    return complex(_ratio_from_sums(sums, ext.system_jump, ext.params.gamma)[0])


def kcc_emulated_batch(
    params: BlochParams,
    p,
    p_prime,
    t_final: float,
    n_final: int,
    *,
    ancilla_dim: int = 3,
    rule: str = "left-riemann",
    substeps: int = 10,
    stepper: str = "rk4",
    chunk: int = 512,
) -> np.ndarray:
    """Vectorized :func:`kcc_emulated` over arrays of momentum pairs."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    p_prime = np.broadcast_to(np.asarray(p_prime, dtype=float), p.shape)
    out = np.empty(p.shape, dtype=np.complex128)
    flat_p, flat_q, flat_out = p.reshape(-1), p_prime.reshape(-1), out.reshape(-1)
    for lo in range(0, flat_p.size, chunk):
        exts = [
            build_extended(params, MomentumPair(float(a), float(b)), ancilla_dim)
            for a, b in zip(flat_p[lo : lo + chunk], flat_q[lo : lo + chunk])
        ]
        sums, tails = ancilla_block_sums(exts, t_final, n_final, rule=rule, substeps=substeps, stepper=stepper)
        _warn_tails(tails, 2)
        flat_out[lo : lo + chunk] = _ratio_from_sums(sums, exts[0].system_jump, params.gamma)
    return out


def _order_parameter(w: float, cfg: SweepConfig) -> tuple[complex, int]:
    params = BlochParams(cfg.v, w, cfg.gamma)
    if cfg.method == "analytic":

        def kcc(a, b):
            return kcc_closed_form(params, a, b)

    else:

        def kcc(a, b):
            return kcc_emulated_batch(
                params,
                a,
                b,
                cfg.t_final,
                cfg.n_final,
                ancilla_dim=cfg.ancilla_dim,
                rule=cfg.rule,
                substeps=cfg.substeps,
            )

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailMassWarning)
        t = jumptime_phase(kcc, cfg.n_cir, cfg.delta_p, cfg.delta_q, cfg.corrected_sum)
    tail = sum(1 for c in caught if issubclass(c.category, TailMassWarning))
    return t, tail


def _sweep_point(args):
    w, cfg = args
    try:
        t, tail = _order_parameter(w, cfg)
    except SingularityError as exc:
        return w, None, str(exc), 0
    return w, t, None, tail


def phase_sweep(w_grid, config: SweepConfig, workers: int = 1) -> PhaseResult:
    """Order parameter ``T`` for every ``w`` in ``w_grid``.

    ``config.method`` selects the closed-form propagator or the ancilla
    emulation. Singular points ``|w| = |v|`` are skipped unless
    ``config.include_singular``; any point that hits a dark singularity is
    skipped and recorded rather than aborting the sweep. Points are computed
    independently (optionally in worker processes) and aggregated in grid
    order.
    """
    cfg = config.replace(w_grid=tuple(w_grid))
    t0 = time.perf_counter()
    todo, skipped = [], []
    for w in cfg.w_grid:
        if abs(abs(w) - abs(cfg.v)) <= 1e-9:
            if not cfg.include_singular:
                skipped.append((w, "singular point |w| = |v|"))
                log.info("skipping singular point w=%g", w)
                continue
            warnings.warn(f"including singular point w={w:g}", RuntimeWarning, stacklevel=2)
        todo.append(w)

    jobs = [(w, cfg) for w in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]

    rows, tails = [], 0
    for w, t, err, tail in results:
        if err is not None:
            skipped.append((w, err))
            log.warning("skipping w=%g: %s", w, err)
            continue
        rows.append((w, t.real, t.imag))
        tails += tail
    skipped.sort()
    return PhaseResult(
        rows=rows,
        settings=cfg,
        skipped=skipped,
        duration_s=time.perf_counter() - t0,
        version=__version__,
        tail_warnings=tails,
    )
