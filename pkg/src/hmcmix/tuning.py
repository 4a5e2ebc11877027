"""Theory-derived hyper-parameter selection for MRW, MALA and HMC.

All formulas give the step size eta and leapfrog count K directly from the
problem constants (d, kappa, L, L_H), the accuracy epsilon and the warmness
beta of the start.  The unspecified universal constants are exposed as
``constant_c`` (the step-size constant, 1 in experiment mode and 2000 in
strict-theory mode) and ``k_multiplier`` (the prefactor on K used by the
scaling experiments).

Everything here is a pure function of its arguments and safe to call from
concurrent workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

EXPERIMENT_C = 1.0
STRICT_C = 2000.0


@dataclass(frozen=True)
class TuningRequest:
    """Inputs to the parameter selectors.

    ``log_beta`` optionally overrides log(beta) so that warmness values far
    beyond float range (e.g. the feasible start's kappa^(d/2)) stay exact.
    """

    d: int
    kappa: float
    L: float = 1.0
    L_H: float = 0.0
    epsilon: float = 0.4
    beta: float = 1.0
    start: str = "feasible"
    constant_c: float = EXPERIMENT_C
    k_multiplier: float = 1.0
    log_beta: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.constant_c <= 0 or self.k_multiplier <= 0:
            raise ValueError("constant_c and k_multiplier must be positive")
        if self.start not in ("warm", "feasible"):
            raise ValueError("start must be 'warm' or 'feasible'")

    @property
    def effective_log_beta(self) -> float:
        return math.log(self.beta) if self.log_beta is None else self.log_beta


@dataclass(frozen=True)
class ParamChoice:
    """Selected (K, eta) with the regime that produced it."""

    K: int
    eta: float
    regime: str
    satisfies_conditions: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")


def radius_r(s: float, d: int) -> float:
    """Radius factor 1 + max((log(1/s)/d)^(1/4), (log(1/s)/d)^(1/2)).

    Defined for s in (0, 1]; decreasing in s and in d.
    """
    if not (0 < s <= 1):
        raise ValueError("s must lie in (0, 1]")
    return radius_r_from_log(-math.log(s), d)


def radius_r_from_log(log_inv_s: float, d: int) -> float:
    """radius_r with log(1/s) supplied directly (underflow-safe form)."""
    if log_inv_s < 0:
        raise ValueError("log(1/s) must be nonnegative")
    t = log_inv_s / d
    return 1.0 + max(t**0.25, math.sqrt(t))


def _warm_log_inv_s(req: TuningRequest) -> float:
    # s = eps^2 / (3 beta), clamped into (0, 1]
    log_inv_s = math.log(3.0) + req.effective_log_beta - 2.0 * math.log(req.epsilon)
    if log_inv_s < 0:
        warnings.warn(
            "epsilon^2/(3*beta) exceeds 1; clamping the radius argument to 1",
            stacklevel=3,
        )
        log_inv_s = 0.0
    return log_inv_s


def eta_warm(req: TuningRequest) -> float:
    """Warm-start step size sqrt(1 / (c L r(eps^2/(3 beta)) d^(7/6)))."""
    r = radius_r_from_log(_warm_log_inv_s(req), req.d)
    return math.sqrt(1.0 / (req.constant_c * req.L * r * req.d ** (7.0 / 6.0)))


def eta_feasible(req: TuningRequest) -> float:
    """Feasible-start step size with the three-term minimum.

    The radius argument is s = eps^2 / (2 kappa^d); log(1/s) is formed as
    d log(kappa) + log(2/eps^2) so that kappa^(-d) never underflows.
    """
    d, kappa = req.d, req.kappa
    log_inv_s = d * math.log(kappa) + math.log(2.0) - 2.0 * math.log(req.epsilon)
    r = radius_r_from_log(max(log_inv_s, 0.0), d)
    min_term = min(
        1.0 / (d * kappa**0.5),
        1.0 / (d ** (2.0 / 3.0) * kappa ** (5.0 / 6.0)),
        1.0 / (d**0.5 * kappa**1.5),
    )
    return math.sqrt(min_term / (req.constant_c * req.L * r))


def _ceil_K(x: float) -> int:
    return max(1, math.ceil(x - 1e-12))


def grad_bound_M(s: float, d: int, m: float, L: float) -> float:
    """Gradient bound L sqrt(d/m) r(s) over the high-mass ball."""
    if m <= 0:
        raise ValueError("strong convexity m must be positive")
    return L * math.sqrt(d / m) * radius_r(s, d)


def ball_radius(s: float, d: int, m: float) -> float:
    """Radius r(s) sqrt(d/m) of the high-mass ball around the mode."""
    if m <= 0:
        raise ValueError("strong convexity m must be positive")
    return radius_r(s, d) * math.sqrt(d / m)


@dataclass(frozen=True)
class StepConditionReport:
    """Outcome of a step-size condition check with per-term slack.

    ``terms`` maps a term name to allowed - actual (positive means the
    inequality holds with room to spare).
    """

    ok: bool
    terms: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def check_step_condition(
    K: int,
    eta: float,
    d: int,
    L: float,
    L_H: float = 0.0,
    M: float = 0.0,
    c: float = EXPERIMENT_C,
) -> StepConditionReport:
    """Check the two-part step-size condition for the HMC overlap bounds.

    Part one bounds the effective step: K^2 eta^2 <= 1/(4 max(d^(1/2) L,
    d^(2/3) L_H^(2/3))).  Part two bounds eta^2 by (1/(cL)) times the minimum
    of six terms involving K, d, the gradient bound M and L_H; terms whose
    denominator vanishes (M = 0 or L_H = 0) are +inf and drop out.

    Returns:
        StepConditionReport with ``ok`` and the slack of every inequality.
    """
    if K < 1 or eta <= 0 or d < 1 or L <= 0 or c <= 0:
        raise ValueError("K, eta, d, L, c must all be positive")
    inf = math.inf
    eta2 = eta * eta
    k2e2_cap = 1.0 / (4.0 * max(d**0.5 * L, d ** (2.0 / 3.0) * L_H ** (2.0 / 3.0)))
    terms = {"K2eta2": k2e2_cap - K * K * eta2}

    theta = L_H ** (2.0 / 3.0) / L  # curvature ratio; 0 for quadratic targets
    m_ratio = M / math.sqrt(L)
    six = {
        "eta2_K2": 1.0 / K**2,
        "eta2_K_sqrtd": 1.0 / (K * d**0.5),
        "eta2_grad_a": (
            1.0 / (K ** (2.0 / 3.0) * d ** (1.0 / 3.0) * (M * M / L) ** (1.0 / 3.0))
            if M > 0
            else inf
        ),
        "eta2_grad_b": 1.0 / (K * m_ratio) if M > 0 else inf,
        "eta2_hess": 1.0 / (K ** (2.0 / 3.0) * d * theta) if L_H > 0 else inf,
        "eta2_grad_hess": (
            1.0 / (K ** (4.0 / 3.0) * m_ratio * math.sqrt(theta))
            if (M > 0 and L_H > 0)
            else inf
        ),
    }
    for name, cap in six.items():
        allowed = cap / (c * L)
        terms[name] = inf if allowed == inf else allowed - eta2
    ok = all(slack >= 0 for slack in terms.values())
    return StepConditionReport(ok=ok, terms=terms)


def check_step_condition_corollary(
    K: int,
    eta: float,
    d: int,
    L: float,
    kappa: float,
    r_s: float,
    L_H: float = 0.0,
    c: float = EXPERIMENT_C,
) -> StepConditionReport:
    """Variant step condition with the radius factor and kappa appearing
    explicitly (seven-term minimum); used by the strongly log-concave
    feasible-start analysis."""
    if K < 1 or eta <= 0 or d < 1 or L <= 0 or kappa < 1 or r_s < 1 or c <= 0:
        raise ValueError("invalid arguments for the corollary step condition")
    inf = math.inf
    eta2 = eta * eta
    theta = L_H ** (2.0 / 3.0) / L
    seven = {
        "eta2_K2_sqrtd": 1.0 / (K**2 * d**0.5),
        "eta2_K2_hess": 1.0 / (K**2 * d ** (2.0 / 3.0) * theta) if L_H > 0 else inf,
        "eta2_K_sqrtd": 1.0 / (K * d**0.5),
        "eta2_kappa_a": 1.0
        / (K ** (2.0 / 3.0) * d ** (2.0 / 3.0) * kappa ** (1.0 / 3.0) * r_s ** (2.0 / 3.0)),
        "eta2_kappa_b": 1.0 / (K * d**0.5 * kappa**0.5 * r_s),
        "eta2_hess": 1.0 / (K ** (2.0 / 3.0) * d * theta) if L_H > 0 else inf,
        "eta2_kappa_hess": (
            1.0 / (K ** (4.0 / 3.0) * d**0.5 * kappa**0.5 * r_s * math.sqrt(theta))
            if L_H > 0
            else inf
        ),
    }
    terms = {}
    for name, cap in seven.items():
        allowed = cap / (c * L)
        terms[name] = inf if allowed == inf else allowed - eta2
    ok = all(slack >= 0 for slack in terms.values())
    return StepConditionReport(ok=ok, terms=terms)


def _validated(req: TuningRequest, K: int, eta: float, regime: str) -> ParamChoice:
    m = req.L / req.kappa
    log_inv_s = _warm_log_inv_s(req)
    M = req.L * math.sqrt(req.d / m) * radius_r_from_log(log_inv_s, req.d)
    report = check_step_condition(
        K, eta, req.d, req.L, L_H=req.L_H, M=M, c=req.constant_c
    )
    return ParamChoice(K=K, eta=eta, regime=regime, satisfies_conditions=report.ok)


def select_hmc_params(req: TuningRequest, refined: bool = True) -> ParamChoice:
    """Select (K, eta) for HMC.

    Warm start: K = ceil(k_multiplier d^(1/4)) with the warm step size.
    Feasible start with ``refined``: the four-regime table keyed on kappa
    versus d^(1/3), d^(2/3), d.  Feasible start without ``refined``: the
    single choice K = ceil(kappa^(3/4)) with the feasible step size.

    Fractional K is rounded up and floored at 1.
    """
    d, kappa, c, L = req.d, req.kappa, req.constant_c, req.L
    if req.start == "warm":
        K = _ceil_K(req.k_multiplier * d**0.25)
        return _validated(req, K, eta_warm(req), "warm_cor2a")

    if not refined:
        K = _ceil_K(kappa**0.75)
        return _validated(req, K, eta_feasible(req), "feasible_cor2b")

    if kappa < d ** (1.0 / 3.0):
        K = _ceil_K(kappa**0.75)
        eta2 = 1.0 / (c * L * d * kappa**0.5)
        regime = "table4_row1"
    elif kappa <= d ** (2.0 / 3.0):
        K = _ceil_K(d**0.25)
        eta2 = 1.0 / (c * L * d ** (7.0 / 6.0))
        regime = "table4_row2"
    elif kappa <= d:
        K = _ceil_K(d**0.75 * kappa**-0.75)
        eta2 = kappa**0.5 / (c * L * d**1.5)
        regime = "table4_row3"
    else:
        K = 1
        eta2 = 1.0 / (c * L * d**0.5 * kappa**0.5)
        regime = "table4_row4"
    return _validated(req, K, math.sqrt(eta2), regime)


def select_hmcagg_params(req: TuningRequest) -> ParamChoice:
    """Aggressive HMC choice for targets with negligible Hessian-Lipschitz
    constant: K = ceil(k_multiplier d^(1/8) kappa^(1/4)) and eta^2 =
    1/(c L K d^(1/2)), the binding constraint once the curvature terms drop.
    """
    if req.L_H > 0:
        warnings.warn(
            "hmcagg parameters assume a negligible Hessian-Lipschitz constant; "
            f"target declares L_H={req.L_H}",
            stacklevel=2,
        )
    K = _ceil_K(req.k_multiplier * req.d**0.125 * req.kappa**0.25)
    eta = math.sqrt(1.0 / (req.constant_c * req.L * K * req.d**0.5))
    return _validated(req, K, eta, "hmcagg")


def mala_mrw_steps(
    d: int, kappa: float, L: float = 1.0, c1: float = 1.0, c2: float = 1.0
) -> tuple[float, float]:
    """Step sizes for MALA and MRW from the feasible start.

    eta_MALA = c1 / (L d max(1, sqrt(kappa/d))), eta_MRW = c2 / (L d kappa).
    """
    if d < 1 or kappa < 1 or L <= 0 or c1 <= 0 or c2 <= 0:
        raise ValueError("all inputs must be positive with kappa >= 1")
    eta_mala = c1 / (L * d * max(1.0, math.sqrt(kappa / d)))
    eta_mrw = c2 / (L * d * kappa)
    return eta_mala, eta_mrw
