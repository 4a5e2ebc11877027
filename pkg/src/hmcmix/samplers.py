"""Metropolized chains: random walk (MRW), Langevin (MALA) and leapfrog HMC.

Every chain follows the same iteration shape: an optional lazy hold with
probability zeta, a proposal, and a Metropolis-Hastings accept/reject
computed in the log domain.  Proposals with non-finite energy count as
rejections and are tallied as divergences rather than raised, so a chain run
is total; a run aborts only when divergences exceed a configurable fraction
of iterations.

Randomness comes from a counter-based Philox generator seeded per chain.
Within an iteration the draw order is fixed and documented: (1) the lazy
uniform (only when zeta > 0), (2) the proposal noise or momentum vector,
(3) the acceptance uniform (only when the log ratio is negative is it
compared, but it is always drawn).  Identical (seed, config, init, target)
therefore reproduce traces bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .targets import TargetModel, eval_grad, eval_potential

MRW = "mrw"
MALA = "mala"
HMC = "hmc"
SAMPLERS = (MRW, MALA, HMC)


class DivergenceError(RuntimeError):
    """Raised when a chain diverges persistently; carries the last state."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class PhasePoint:
    """Position/momentum pair (q, p) in phase space."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != p.shape:
            raise ValueError("q and p must share a shape")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase point entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class ChainConfig:
    """Sampler choice and its parameters.

    ``step`` is the eta of the MRW/MALA proposals or the leapfrog step for
    HMC; ``leapfrog_steps`` is ignored for MRW/MALA.
    """

    sampler: str
    step: float
    leapfrog_steps: int = 1
    laziness: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")
        if not (0 <= self.laziness < 1):
            raise ValueError("laziness must lie in [0, 1)")


@dataclass
class ChainCounters:
    """Per-run evaluation and divergence tallies (one per chain, never shared)."""

    grad_evals: int = 0
    fn_evals: int = 0
    diverged: int = 0


@dataclass
class ChainTrace:
    """Raw output of a chain run.

    ``states[i+1]`` equals the i-th proposal iff ``accepted[i]`` and not
    ``lazy_hold[i]``; otherwise it repeats ``states[i]``.  ``grad_evals`` and
    ``fn_evals`` are actual call counts; ``eval_count_paper`` is the idealized
    published metric (K per iteration for HMC, 1 for MALA/MRW).
    """

    states: np.ndarray
    accepted: np.ndarray
    lazy_hold: np.ndarray
    grad_evals: int
    fn_evals: int
    diverged: int
    config: ChainConfig

    @property
    def n_iters(self) -> int:
        return len(self.accepted)

    @property
    def eval_count_paper(self) -> int:
        per_iter = self.config.leapfrog_steps if self.config.sampler == HMC else 1
        return per_iter * self.n_iters


def chain_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator for one chain."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def hamiltonian(target: TargetModel, p, q) -> float:
    """Total energy f(q) + ||p||^2 / 2."""
    p = np.asarray(p, dtype=float)
    return float(target.potential(np.asarray(q, dtype=float))) + 0.5 * float(p @ p)


def leapfrog_step(target: TargetModel, p, q, eta: float, counter=None):
    """One Stoermer-Verlet step: half momentum, full position, half momentum.

    Returns (p', q').  Costs two gradient evaluations; ``run_chain`` shares
    the trailing gradient with the next step, giving K+1 per HMC iteration.

    Raises:
        DivergenceError: If a gradient or state goes non-finite.
    """
    p_new, q_new, _ = _leapfrog_raw(target, p, q, eta, counter, None)
    return p_new, q_new


def _leapfrog_raw(target, p, q, eta, counter, grad_q):
    """Leapfrog step returning (p', q', grad f(q')) so callers can cache."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if grad_q is None:
        grad_q = eval_grad(target, q, counter)
    p_half = p - 0.5 * eta * grad_q
    q_new = q + eta * p_half
    grad_new = eval_grad(target, q_new, counter)
    if not np.all(np.isfinite(grad_new)):
        raise DivergenceError("non-finite gradient during leapfrog", state=q_new)
    p_new = p_half - 0.5 * eta * grad_new
    return p_new, q_new, grad_new


def hmc_orbit(target: TargetModel, q0, p0, K: int, eta: float, counter=None):
    """K composed leapfrog steps from (q0, p0); returns (qK, pK).

    Deterministic given the momentum, which is what makes the MALA
    equivalence at K = 1 directly testable.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    p = np.asarray(p0, dtype=float)
    q = np.asarray(q0, dtype=float)
    grad = None
    for _ in range(K):
        p, q, grad = _leapfrog_raw(target, p, q, eta, counter, grad)
    return q, p


def hmc_propose(target: TargetModel, q0, K: int, eta: float, rng, counter=None):
    """Draw p0 ~ N(0, I) and integrate K leapfrog steps.

    Returns:
        (qK, pK, p0): proposal position, final momentum, drawn momentum.
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = rng.standard_normal(q0.shape[-1])
    qK, pK = hmc_orbit(target, q0, p0, K, eta, counter)
    return qK, pK, p0


def hmc_log_accept(target: TargetModel, q0, p0, qK, pK) -> float:
    """log min{1, exp(-H(pK, qK)) / exp(-H(p0, q0))}."""
    dh = hamiltonian(target, pK, qK) - hamiltonian(target, p0, q0)
    if not math.isfinite(dh):
        return -math.inf
    return min(0.0, -dh)


def mala_proposal_mean(target: TargetModel, x, eta: float, counter=None) -> np.ndarray:
    """Drift point x - eta grad f(x) of the MALA proposal."""
    x = np.asarray(x, dtype=float)
    return x - eta * eval_grad(target, x, counter)


def mala_log_accept(target: TargetModel, x, z, eta: float, counter=None) -> float:
    """Log Metropolis-Hastings ratio for the MALA proposal x -> z.

    log alpha = [-f(z) - ||x - z + eta grad f(z)||^2/(4 eta)]
              - [-f(x) - ||z - x + eta grad f(x)||^2/(4 eta)], clamped at 0.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    fz = eval_potential(target, z, counter)
    gz = eval_grad(target, z, counter)
    fx = eval_potential(target, x, counter)
    gx = eval_grad(target, x, counter)
    fwd = x - z + eta * gz
    rev = z - x + eta * gx
    log_ratio = (-fz - float(fwd @ fwd) / (4 * eta)) - (-fx - float(rev @ rev) / (4 * eta))
    if not math.isfinite(log_ratio):
        return -math.inf
    return min(0.0, log_ratio)


def _lazy_draw(cfg: ChainConfig, rng) -> bool:
    return cfg.laziness > 0 and rng.uniform() < cfg.laziness


def hmc_iteration(target: TargetModel, state, cfg: ChainConfig, rng, counter=None):
    """One HMC iteration; returns (next_state, accepted, lazy_hold)."""
    state = np.asarray(state, dtype=float)
    if _lazy_draw(cfg, rng):
        return state, False, True
    counter = counter if counter is not None else ChainCounters()
    try:
        qK, pK, p0 = hmc_propose(target, state, cfg.leapfrog_steps, cfg.step, rng, counter)
        log_alpha = hmc_log_accept(target, state, p0, qK, pK)
        counter.fn_evals += 1  # fresh f(qK); f(q0) is cached from the last move
    except DivergenceError:
        counter.diverged += 1
        rng.uniform()  # keep the draw sequence aligned across outcomes
        return state, False, False
    u = rng.uniform()
    if log_alpha == -math.inf:
        counter.diverged += 1
        return state, False, False
    if math.log(u) < log_alpha:
        return qK, True, False
    return state, False, False


def mala_iteration(target: TargetModel, state, cfg: ChainConfig, rng, counter=None):
    """One MALA iteration; returns (next_state, accepted, lazy_hold)."""
    state = np.asarray(state, dtype=float)
    if _lazy_draw(cfg, rng):
        return state, False, True
    counter = counter if counter is not None else ChainCounters()
    eta = cfg.step
    noise = rng.standard_normal(state.shape[-1])
    # Fresh evaluations per iteration: grad f(x), f(z), grad f(z); the
    # current-state potential is treated as cached from the previous move.
    gx = eval_grad(target, state, counter)
    z = state - eta * gx + math.sqrt(2 * eta) * noise
    fz = eval_potential(target, z, counter)
    gz = eval_grad(target, z, counter)
    fx = float(target.potential(state))
    fwd = state - z + eta * gz
    rev = z - state + eta * gx
    log_ratio = (-fz - float(fwd @ fwd) / (4 * eta)) - (
        -fx - float(rev @ rev) / (4 * eta)
    )
    log_alpha = min(0.0, log_ratio) if math.isfinite(log_ratio) else -math.inf
    u = rng.uniform()
    if log_alpha == -math.inf:
        counter.diverged += 1
        return state, False, False
    if math.log(u) < log_alpha:
        return z, True, False
    return state, False, False


def mrw_iteration(target: TargetModel, state, cfg: ChainConfig, rng, counter=None):
    """One MRW iteration; returns (next_state, accepted, lazy_hold).

    f at the current state is carried by the caller via ``counter`` caching;
    one fresh potential evaluation is charged per iteration.
    """
    state = np.asarray(state, dtype=float)
    if _lazy_draw(cfg, rng):
        return state, False, True
    counter = counter if counter is not None else ChainCounters()
    eta = cfg.step
    noise = rng.standard_normal(state.shape[-1])
    z = state + math.sqrt(2 * eta) * noise
    fz = eval_potential(target, z, counter)
    fx = float(target.potential(state))  # cached from the previous move, not charged
    log_alpha = fx - fz
    u = rng.uniform()
    if not math.isfinite(log_alpha):
        counter.diverged += 1
        return state, False, False
    if math.log(u) < min(0.0, log_alpha):
        return z, True, False
    return state, False, False


_ITERATIONS = {HMC: hmc_iteration, MALA: mala_iteration, MRW: mrw_iteration}


def run_chain(
    target: TargetModel,
    cfg: ChainConfig,
    init,
    n_iters: int,
    max_divergence_fraction: float = 0.1,
) -> ChainTrace:
    """Run one chain for ``n_iters`` iterations from ``init``.

    Deterministic given (cfg.seed, cfg, init, target).  Aborts with
    DivergenceError once divergences exceed ``max_divergence_fraction`` of
    the iterations so far (checked after the first 20 iterations).
    """
    if n_iters < 0:
        raise ValueError("n_iters must be nonnegative")
    init = np.asarray(init, dtype=float)
    if init.shape != (target.dim,):
        raise ValueError(f"init must have shape ({target.dim},)")
    rng = chain_rng(cfg.seed)
    step = _ITERATIONS[cfg.sampler]
    counter = ChainCounters()

    states = np.empty((n_iters + 1, target.dim))
    states[0] = init
    accepted = np.zeros(n_iters, dtype=bool)
    lazy = np.zeros(n_iters, dtype=bool)
    x = init
    for i in range(n_iters):
        x, accepted[i], lazy[i] = step(target, x, cfg, rng, counter)
        states[i + 1] = x
        if i >= 20 and counter.diverged > max_divergence_fraction * (i + 1):
            raise DivergenceError(
                f"{counter.diverged} divergent proposals in {i + 1} iterations",
                state=x,
            )
    return ChainTrace(
        states=states,
        accepted=accepted,
        lazy_hold=lazy,
        grad_evals=counter.grad_evals,
        fn_evals=counter.fn_evals,
        diverged=counter.diverged,
        config=cfg,
    )


def sample_init(kind: str, target: TargetModel, rng) -> np.ndarray:
    """Draw a starting point.

    ``gaussian_feasible`` draws from N(mode, I/L), the computable start whose
    warmness is kappa^(d/2) for strongly log-concave targets.
    """
    if kind != "gaussian_feasible":
        raise ValueError(f"unknown init kind {kind!r}")
    if target.mode is None or target.smoothness <= 0:
        raise ValueError("feasible start needs a declared mode and L > 0")
    scale = 1.0 / math.sqrt(target.smoothness)
    return target.mode + scale * rng.standard_normal(target.dim)
