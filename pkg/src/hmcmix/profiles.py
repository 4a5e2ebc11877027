"""Conductance and spectral profiles of finite reversible chains.

Small discrete reversible chains are the desk-scale instance on which the
profile-based mixing machinery can be checked exactly: the restricted
conductance profile, its truncated extension, the restricted spectral
profile, the profile-based mixing-time integral, and exact L2 mixing by
repeated transition-matrix application.

Exact mode enumerates all 2^n - 2 proper nonempty subsets and is limited to
n <= 16 states.  The restricted spectral gap of a subset is computed as the
principal generalized eigenvalue of the Dirichlet form against the
restricted variance, without the nonnegativity constraint on test
functions; for irreducible restrictions the principal eigenfunction has
constant sign, so the constraint is inactive.  An indicator-family upper
bound is available separately for cross-checking disconnected subsets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

EXACT_MODE_LIMIT = 16


@dataclass(frozen=True)
class DiscreteChain:
    """Finite reversible chain: row-stochastic P with stationary pi.

    Construction validates stochasticity (1e-12), stationarity (1e-10) and
    detailed balance (1e-10).
    """

    P: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        n = pi.size
        if P.shape != (n, n):
            raise ValueError("P must be square and match pi")
        if np.any(P < -1e-15):
            raise ValueError("P has negative entries")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows of P must sum to 1 within 1e-12")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must be a strictly positive distribution")
        if np.max(np.abs(pi @ P - pi)) > 1e-10:
            raise ValueError("pi is not stationary for P within 1e-10")
        F = pi[:, None] * P
        if np.max(np.abs(F - F.T)) > 1e-10:
            raise ValueError("detailed balance violated beyond 1e-10")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.pi.size


def build_lazy_metropolis_chain(energies, base_kernel, zeta: float = 0.0) -> DiscreteChain:
    """Metropolis chain for pi proportional to exp(-energies), made zeta-lazy.

    Args:
        energies: Length-n energy vector defining the target.
        base_kernel: Symmetric row-stochastic proposal matrix.
        zeta: Lazy holding probability in [0, 1).

    The result satisfies detailed balance by construction.
    """
    e = np.asarray(energies, dtype=float)
    Q = np.asarray(base_kernel, dtype=float)
    n = e.size
    if Q.shape != (n, n):
        raise ValueError("base_kernel must be n x n")
    if np.max(np.abs(Q - Q.T)) > 1e-12:
        raise ValueError("base_kernel must be symmetric")
    if np.any(Q < 0) or np.max(np.abs(Q.sum(axis=1) - 1.0)) > 1e-12:
        raise ValueError("base_kernel must be row-stochastic")
    if not (0 <= zeta < 1):
        raise ValueError("zeta must lie in [0, 1)")

    w = np.exp(-(e - e.min()))
    pi = w / w.sum()
    # alpha_ij = min(1, pi_j / pi_i); off-diagonal moves, remainder on diagonal
    alpha = np.minimum(1.0, pi[None, :] / pi[:, None])
    P = Q * alpha
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    P = zeta * np.eye(n) + (1.0 - zeta) * P
    return DiscreteChain(P=P, pi=pi)


def random_reversible_chain(
    n: int, rng: np.random.Generator, zeta: float = 0.5, energy_scale: float = 1.0
) -> DiscreteChain:
    """Random zeta-lazy Metropolis chain on n states (connected, reversible)."""
    if n < 2:
        raise ValueError("need at least two states")
    energies = energy_scale * rng.uniform(-1.0, 1.0, size=n)
    W = rng.uniform(0.1, 1.0, size=(n, n))
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    scale = 1.05 * W.sum(axis=1).max()  # keep strictly sub-stochastic off-diagonal
    Q = W / scale
    np.fill_diagonal(Q, 1.0 - Q.sum(axis=1))
    return build_lazy_metropolis_chain(energies, Q, zeta)


def _as_mask(chain: DiscreteChain, subset) -> np.ndarray:
    mask = np.zeros(chain.n, dtype=bool)
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape != (chain.n,):
            raise ValueError("boolean mask has wrong length")
        return subset.copy()
    mask[subset] = True
    return mask


def flow(chain: DiscreteChain, subset) -> float:
    """Stationary flow out of the subset: sum_{i in S} pi_i P(i, S^c)."""
    mask = _as_mask(chain, subset)
    if not mask.any() or mask.all():
        raise ValueError("subset must be nonempty and proper")
    F = chain.pi[:, None] * chain.P
    return float(F[np.ix_(mask, ~mask)].sum())


def _all_subset_masks(n: int) -> np.ndarray:
    """Boolean matrix of all 2^n - 2 proper nonempty subsets."""
    codes = np.arange(1, 2**n - 1, dtype=np.uint32)
    return (codes[:, None] >> np.arange(n)[None, :]) & 1 == 1


def _subset_flow_stats(chain: DiscreteChain, omega_mask: np.ndarray):
    """(masses, flows) over all proper nonempty subsets; mass = pi(S & Omega)."""
    M = _all_subset_masks(chain.n).astype(float)
    F = chain.pi[:, None] * chain.P
    flows = np.einsum("si,ij,sj->s", M, F, 1.0 - M)
    masses = M @ (chain.pi * omega_mask)
    return masses, flows


def _profile_step_function(masses: np.ndarray, values: np.ndarray):
    """Prefix-min step function v -> inf{values[S] : masses[S] <= v}."""
    keep = masses > 0
    masses, values = masses[keep], values[keep]
    order = np.argsort(masses, kind="stable")
    masses = masses[order]
    prefmin = np.minimum.accumulate(values[order])
    return masses, prefmin


def _eval_step(masses, prefmin, v):
    idx = np.searchsorted(masses, np.asarray(v, dtype=float), side="right") - 1
    out = np.where(idx >= 0, prefmin[np.clip(idx, 0, None)], np.inf)
    return out if np.ndim(v) else float(out)


def _check_exact(chain: DiscreteChain, exact: bool):
    if exact and chain.n > EXACT_MODE_LIMIT:
        raise ValueError(
            f"exact profile mode enumerates subsets and is limited to "
            f"n <= {EXACT_MODE_LIMIT}; got n = {chain.n} (use exact=False "
            f"for heuristic upper bounds)"
        )


def _heuristic_masks(chain: DiscreteChain, n_random: int = 2000, seed: int = 0):
    """Level sets of pi plus random subsets; gives upper bounds only."""
    rng = np.random.Generator(np.random.Philox(seed))
    masks = []
    order = np.argsort(chain.pi)
    for k in range(1, chain.n):
        m = np.zeros(chain.n, dtype=bool)
        m[order[:k]] = True
        masks.append(m)
        masks.append(~m)
    for _ in range(n_random):
        m = rng.uniform(size=chain.n) < rng.uniform(0.1, 0.9)
        if m.any() and not m.all():
            masks.append(m)
    return np.array(masks)


def conductance_profile(
    chain: DiscreteChain, v_grid, omega=None, exact: bool = True
) -> np.ndarray:
    """Restricted conductance profile on a grid.

    Phi_Omega(v) = inf over subsets S with 0 < pi(S & Omega) <= v of
    flow(S) / pi(S & Omega).  Exact mode enumerates every subset (n <= 16);
    heuristic mode searches level sets of pi and random subsets and yields
    upper bounds only.

    Returns:
        Array of profile values; +inf where no subset has mass <= v.
    """
    _check_exact(chain, exact)
    omega_mask = np.ones(chain.n, dtype=bool) if omega is None else _as_mask(chain, omega)
    if exact:
        masses, flows = _subset_flow_stats(chain, omega_mask)
    else:
        M = _heuristic_masks(chain).astype(float)
        F = chain.pi[:, None] * chain.P
        flows = np.einsum("si,ij,sj->s", M, F, 1.0 - M)
        masses = M @ (chain.pi * omega_mask)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(masses > 0, flows / masses, np.inf)
    sm, pm = _profile_step_function(masses, ratios)
    return np.asarray(_eval_step(sm, pm, np.asarray(v_grid, dtype=float)))


def truncated_profile(v_values, phi, pi_omega: float):
    """Constant extension of a conductance profile beyond pi(Omega)/2.

    Args:
        v_values: Increasing grid on which ``phi`` was computed; must reach
            pi_omega / 2.
        phi: Profile values on the grid.
        pi_omega: Stationary mass of the restriction set.

    Returns:
        Callable evaluating the truncated profile on (0, inf).
    """
    v_values = np.asarray(v_values, dtype=float)
    phi = np.asarray(phi, dtype=float)
    half = pi_omega / 2.0
    if v_values.max() < half - 1e-12:
        raise ValueError("grid must extend to pi(Omega)/2 for truncation")
    cap_value = float(phi[np.searchsorted(v_values, half, side="right") - 1])

    def phi_tilde(v):
        v = np.minimum(np.asarray(v, dtype=float), half)
        idx = np.searchsorted(v_values, v, side="right") - 1
        vals = np.where(idx >= 0, phi[np.clip(idx, 0, None)], np.inf)
        vals = np.where(np.asarray(v) >= half, cap_value, vals)
        return vals if np.ndim(v) else float(vals)

    return phi_tilde


def exact_conductance_function(chain: DiscreteChain, omega=None):
    """Exact truncated conductance profile as a callable (subset enumeration).

    Returns:
        (phi_tilde, pi_omega): the truncated profile on (0, inf) and the
        restriction mass.
    """
    _check_exact(chain, True)
    omega_mask = np.ones(chain.n, dtype=bool) if omega is None else _as_mask(chain, omega)
    pi_omega = float(chain.pi[omega_mask].sum())
    masses, flows = _subset_flow_stats(chain, omega_mask)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(masses > 0, flows / masses, np.inf)
    sm, pm = _profile_step_function(masses, ratios)
    half = pi_omega / 2.0
    cap_value = _eval_step(sm, pm, half)

    def phi_tilde(v):
        v = np.asarray(v, dtype=float)
        vals = np.where(v >= half, cap_value, _eval_step(sm, pm, np.minimum(v, half)))
        return vals if v.ndim else float(vals)

    return phi_tilde, pi_omega


def _dirichlet_matrix(chain: DiscreteChain) -> np.ndarray:
    # E(g, g) = g^T (diag(pi) - sym(diag(pi) P)) g
    F = chain.pi[:, None] * chain.P
    return np.diag(chain.pi) - 0.5 * (F + F.T)


def restricted_spectral_gap(chain: DiscreteChain, subset, omega=None) -> float:
    """Restricted spectral gap of a subset: inf of Dirichlet form over the
    variance of the Omega-restricted test function, over functions supported
    on the subset (nonnegativity constraint dropped; see module docstring).

    Returns +inf when the subset carries no Omega-mass (no admissible g).
    """
    mask = _as_mask(chain, subset)
    if not mask.any() or mask.all():
        raise ValueError("subset must be nonempty and proper")
    omega_mask = np.ones(chain.n, dtype=bool) if omega is None else _as_mask(chain, omega)
    A = _dirichlet_matrix(chain)
    return _spectral_gap_from_parts(A, chain.pi, mask, omega_mask)


def _spectral_gap_from_parts(A, pi, mask, omega_mask) -> float:
    idx = np.flatnonzero(mask)
    w = pi[idx] * omega_mask[idx]
    pos = w > 0
    if not pos.any():
        return math.inf
    A_S = A[np.ix_(idx, idx)]
    if pos.all():
        A_red = A_S
    else:
        # States of S outside Omega do not enter the variance: minimize the
        # Dirichlet form over them first (PSD Schur complement).
        App = A_S[np.ix_(pos, ~pos)]
        A00 = A_S[np.ix_(~pos, ~pos)]
        A_red = A_S[np.ix_(pos, pos)] - App @ np.linalg.pinv(A00, hermitian=True) @ App.T
    wp = w[pos]
    B = np.diag(wp) - np.outer(wp, wp)
    vals = scipy.linalg.eigh(
        0.5 * (A_red + A_red.T), 0.5 * (B + B.T), eigvals_only=True
    )
    return float(max(vals[0], 0.0))


def indicator_quotient(chain: DiscreteChain, subset, omega=None) -> float:
    """Rayleigh quotient of the subset indicator: flow(S) / (m (1 - m)) with
    m = pi(S & Omega).  An upper bound on the restricted spectral gap from
    the indicator family; useful as a cross-check for disconnected subsets.
    """
    mask = _as_mask(chain, subset)
    omega_mask = np.ones(chain.n, dtype=bool) if omega is None else _as_mask(chain, omega)
    m = float(chain.pi[mask & omega_mask].sum())
    if m <= 0:
        return math.inf
    return flow(chain, mask) / (m * (1.0 - m))


def spectral_profile(
    chain: DiscreteChain, v_grid, omega=None, exact: bool = True
) -> np.ndarray:
    """Restricted spectral profile on a grid.

    Lambda_Omega(v) = inf over subsets with pi(S & Omega) <= v of the
    restricted spectral gap.  Subsets with no Omega-mass are skipped (their
    admissible set is empty).
    """
    _check_exact(chain, exact)
    omega_mask = np.ones(chain.n, dtype=bool) if omega is None else _as_mask(chain, omega)
    A = _dirichlet_matrix(chain)
    masks = (
        _all_subset_masks(chain.n) if exact else _heuristic_masks(chain).astype(bool)
    )
    masses = masks.astype(float) @ (chain.pi * omega_mask)
    gaps = np.array(
        [
            _spectral_gap_from_parts(A, chain.pi, m, omega_mask)
            for m in masks
        ]
    )
    finite = np.isfinite(gaps)
    sm, pm = _profile_step_function(masses[finite], gaps[finite])
    return np.asarray(_eval_step(sm, pm, np.asarray(v_grid, dtype=float)))


@dataclass(frozen=True)
class ProfileGrid:
    """Conductance and spectral profiles of one chain on one grid."""

    v_values: np.ndarray
    phi: np.ndarray
    lam: np.ndarray
    omega_mask: np.ndarray
    exact: bool = True

    def __post_init__(self):
        if np.any(np.diff(self.v_values) <= 0):
            raise ValueError("v_values must be strictly increasing")


def compute_profile_grid(
    chain: DiscreteChain, v_grid, omega=None, exact: bool = True
) -> ProfileGrid:
    """Convenience wrapper computing both profiles on one grid."""
    omega_mask = np.ones(chain.n, dtype=bool) if omega is None else _as_mask(chain, omega)
    return ProfileGrid(
        v_values=np.asarray(v_grid, dtype=float),
        phi=conductance_profile(chain, v_grid, omega_mask, exact=exact),
        lam=spectral_profile(chain, v_grid, omega_mask, exact=exact),
        omega_mask=omega_mask,
        exact=exact,
    )


def mixing_bound_from_profile(
    phi_tilde, beta: float, epsilon: float, zeta: float
) -> float:
    """Profile-based mixing bound: integral of 8 / (zeta v phi_tilde(v)^2)
    over v from 4/beta to 8/epsilon^2.

    Trapezoid rule on a log-spaced grid, refined until the relative change
    drops below 1e-6.  Returns 0 for an empty interval and +inf when the
    profile vanishes anywhere in range.
    """
    if not (0 < zeta < 1):
        raise ValueError("zeta must lie in (0, 1)")
    if epsilon <= 0 or beta <= 0:
        raise ValueError("beta and epsilon must be positive")
    lo, hi = 4.0 / beta, 8.0 / epsilon**2
    if lo >= hi:
        return 0.0

    def integrand(v):
        phi = np.asarray(phi_tilde(v), dtype=float)
        if np.any(phi <= 0):
            return None
        return 8.0 / (zeta * v * phi**2)

    prev = None
    n = 64
    for _ in range(16):
        v = np.geomspace(lo, hi, n + 1)
        f = integrand(v)
        if f is None:
            return math.inf
        total = float(np.trapezoid(f, v))
        if prev is not None and abs(total - prev) <= 1e-6 * max(abs(total), 1e-300):
            return total
        prev = total
        n *= 2
    return prev


def l2_divergence(mu: np.ndarray, pi: np.ndarray) -> float:
    """Chi-square-type distance (sum pi (mu/pi - 1)^2)^(1/2)."""
    ratio = mu / pi - 1.0
    return float(np.sqrt(np.sum(pi * ratio * ratio)))


def exact_l2_mixing(
    chain: DiscreteChain, mu0, epsilon: float, cap: int = 10**6
) -> Optional[int]:
    """Smallest k with d2(mu0 P^k, pi) <= epsilon by repeated multiplication.

    Returns None when the cap is reached first.
    """
    mu = np.asarray(mu0, dtype=float)
    if mu.shape != chain.pi.shape or np.any(mu < -1e-12) or abs(mu.sum() - 1) > 1e-9:
        raise ValueError("mu0 must be a distribution over the states")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    for k in range(cap + 1):
        if l2_divergence(mu, chain.pi) <= epsilon:
            return k
        mu = mu @ chain.P
    return None


def warm_start_family(chain: DiscreteChain, beta: float) -> list[np.ndarray]:
    """Extremal beta-warm starts: vertices of {0 <= mu <= beta pi, sum = 1}.

    Vertices are built by filling mu = beta pi greedily along orderings by
    pi (both directions) and by each eigenvector of the reversible chain
    (both sign directions).
    """
    if beta < 1:
        raise ValueError("beta must be >= 1")
    pi = chain.pi
    n = chain.n
    # Symmetrized generator shares eigenvectors with the chain in L2(pi).
    D = np.sqrt(pi)
    S = (D[:, None] * chain.P) / D[None, :]
    _, vecs = np.linalg.eigh(0.5 * (S + S.T))
    orderings = [np.argsort(pi), np.argsort(-pi)]
    for j in range(n):
        phi = vecs[:, j] / D
        orderings.append(np.argsort(phi))
        orderings.append(np.argsort(-phi))

    family, seen = [], set()
    for order in orderings:
        mu = np.zeros(n)
        remaining = 1.0
        for i in order:
            take = min(beta * pi[i], remaining)
            mu[i] = take
            remaining -= take
            if remaining <= 0:
                break
        if remaining > 1e-12:
            continue  # beta too small to fill along this ordering prefix
        key = tuple(np.round(mu, 12))
        if key not in seen:
            seen.add(key)
            family.append(mu)
    if not family:
        family.append(pi.copy())
    return family


@dataclass(frozen=True)
class Lemma1Report:
    """Comparison of the profile-based mixing bound with exact L2 mixing."""

    bound: float
    exact: float
    holds: bool
    beta: float
    epsilon: float
    pi_omega: float


def verify_profile_mixing_bound(
    chain: DiscreteChain, beta: float, epsilon: float, zeta: float = 0.5
) -> Lemma1Report:
    """Check that the conductance-profile mixing bound dominates the exact
    L2 mixing time over extremal beta-warm starts.

    The restriction set Omega keeps the highest-pi states subject to
    pi(Omega) >= 1 - epsilon^2/(3 beta^2); the worst exact mixing time over
    the warm-start vertex family is compared against the integral bound.
    """
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0, 1)")
    # Largest level set of pi allowed to be dropped.
    budget = epsilon**2 / (3.0 * beta**2)
    order = np.argsort(chain.pi)
    omega = np.ones(chain.n, dtype=bool)
    dropped = 0.0
    for i in order:
        if dropped + chain.pi[i] <= budget and omega.sum() > 2:
            omega[i] = False
            dropped += chain.pi[i]
        else:
            break
    phi_tilde, pi_omega = exact_conductance_function(chain, omega)
    bound = mixing_bound_from_profile(phi_tilde, beta, epsilon, zeta)
    worst = 0
    for mu0 in warm_start_family(chain, beta):
        k = exact_l2_mixing(chain, mu0, epsilon)
        if k is None:
            worst = math.inf
            break
        worst = max(worst, k)
    return Lemma1Report(
        bound=bound,
        exact=float(worst),
        holds=bound >= worst,
        beta=beta,
        epsilon=epsilon,
        pi_omega=pi_omega,
    )
