"""Target distributions: potentials with declared regularity constants.

A target is an unnormalized density exp(-f) on R^d, represented through
callable evaluators for the potential f and its gradient together with the
declared smoothness constant L, strong-convexity constant m and
Hessian-Lipschitz constant L_H.  The constants are trusted as declared; only
gradient/potential consistency is validated (see ``check_gradient``).

Gaussian targets are built from the square roots of the covariance
eigenvalues and support exact spectra, which the experiments and the
closed-form leapfrog checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class SpectrumError(ValueError):
    """Raised for an invalid covariance spectrum (nonpositive entries)."""


class BasisError(ValueError):
    """Raised for an eigenbasis that is not orthonormal."""


def _as_vector(x, dim: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"{name} has dimension {x.shape[-1]}, expected {dim}")
    return x


@dataclass(frozen=True)
class TargetModel:
    """A target density exp(-f) with declared regularity constants.

    Attributes:
        dim: Dimension d of the state space.
        potential: Callable mapping a d-vector to the scalar f(x).  For
            Gaussian targets it also accepts arrays of shape (..., d).
        gradient: Callable mapping a d-vector to the d-vector grad f(x),
            broadcasting like ``potential``.
        smoothness: Gradient-Lipschitz constant L (0 if unknown).
        strong_convexity: Strong-convexity constant m (0 if unknown).
        hessian_lipschitz: Hessian-Lipschitz constant L_H (0 if unknown).
        mode: Minimizer of f, when known.

    The object is immutable and safe to share across concurrently running
    chains; evaluation accounting lives in per-chain counters, never here.
    """

    dim: int
    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    smoothness: float = 0.0
    strong_convexity: float = 0.0
    hessian_lipschitz: float = 0.0
    mode: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        for name in ("smoothness", "strong_convexity", "hessian_lipschitz"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        L, m = self.smoothness, self.strong_convexity
        if L > 0 and m > 0 and m > L * (1 + 1e-12):
            raise ValueError(f"strong convexity m={m} exceeds smoothness L={L}")
        if self.mode is not None:
            mode = _as_vector(self.mode, self.dim, "mode")
            object.__setattr__(self, "mode", mode)
            gnorm = float(np.linalg.norm(self.gradient(mode)))
            if L > 0 and gnorm > 1e-8 * L:
                raise ValueError(
                    f"gradient norm {gnorm:.3e} at declared mode exceeds 1e-8*L"
                )

    @property
    def condition_number(self) -> float:
        """kappa = L/m; inf when m = 0."""
        if self.strong_convexity <= 0:
            return float("inf")
        return self.smoothness / self.strong_convexity


@dataclass(frozen=True)
class GaussianTarget(TargetModel):
    """Centered Gaussian target with covariance basis diag(s^2) basis^T.

    ``sqrt_eigenvalues`` are the square roots of the covariance eigenvalues,
    so L = 1/min(s)^2 and m = 1/max(s)^2.  f is normalized to f(0) = 0.
    """

    sqrt_eigenvalues: np.ndarray = field(default=None)
    eigenbasis: Optional[np.ndarray] = field(default=None)

    @property
    def covariance(self) -> np.ndarray:
        lam = self.sqrt_eigenvalues**2
        if self.eigenbasis is None:
            return np.diag(lam)
        return self.eigenbasis @ np.diag(lam) @ self.eigenbasis.T

    @property
    def precision(self) -> np.ndarray:
        lam_inv = self.sqrt_eigenvalues**-2
        if self.eigenbasis is None:
            return np.diag(lam_inv)
        return self.eigenbasis @ np.diag(lam_inv) @ self.eigenbasis.T

    def max_variance_direction(self) -> np.ndarray:
        """Unit eigenvector of the largest covariance eigenvalue."""
        i = int(np.argmax(self.sqrt_eigenvalues))
        if self.eigenbasis is None:
            e = np.zeros(self.dim)
            e[i] = 1.0
            return e
        return np.array(self.eigenbasis[:, i])

    def directional_std(self, direction: np.ndarray) -> float:
        """Standard deviation of the projection onto a unit direction."""
        direction = _as_vector(direction, self.dim, "direction")
        return float(np.sqrt(direction @ self.covariance @ direction))


def gaussian_from_spectrum(sqrt_eigs, basis: Optional[np.ndarray] = None) -> GaussianTarget:
    """Build a Gaussian target from covariance-eigenvalue square roots.

    Args:
        sqrt_eigs: Sequence of d strictly positive scalars, the square roots
            of the covariance eigenvalues.
        basis: Optional d x d orthonormal eigenbasis (identity when omitted).

    Returns:
        GaussianTarget with m = 1/max(sqrt_eigs)^2, L = 1/min(sqrt_eigs)^2.

    Raises:
        SpectrumError: If any entry is not strictly positive.
        BasisError: If ``basis`` is not orthonormal to 1e-10.
    """
    s = np.asarray(sqrt_eigs, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise SpectrumError("sqrt_eigs must be a nonempty 1-d sequence")
    if not np.all(s > 0) or not np.all(np.isfinite(s)):
        raise SpectrumError("sqrt_eigs entries must be finite and strictly positive")
    d = s.size
    if basis is not None:
        basis = np.asarray(basis, dtype=float)
        if basis.shape != (d, d):
            raise BasisError(f"basis shape {basis.shape} does not match dim {d}")
        if not np.allclose(basis.T @ basis, np.eye(d), atol=1e-10):
            raise BasisError("basis columns are not orthonormal (tolerance 1e-10)")

    lam_inv = s**-2
    if basis is None:
        def potential(x, _li=lam_inv):
            x = np.asarray(x, dtype=float)
            return 0.5 * np.sum(_li * x * x, axis=-1)

        def gradient(x, _li=lam_inv):
            return _li * np.asarray(x, dtype=float)
    else:
        prec = basis @ np.diag(lam_inv) @ basis.T
        prec = 0.5 * (prec + prec.T)

        def potential(x, _p=prec):
            x = np.asarray(x, dtype=float)
            return 0.5 * np.sum((x @ _p) * x, axis=-1)

        def gradient(x, _p=prec):
            return np.asarray(x, dtype=float) @ _p

    return GaussianTarget(
        dim=d,
        potential=potential,
        gradient=gradient,
        smoothness=float(np.max(lam_inv)),
        strong_convexity=float(np.min(lam_inv)),
        hessian_lipschitz=0.0,
        mode=np.zeros(d),
        sqrt_eigenvalues=s,
        eigenbasis=basis,
    )


def linear_spectrum(lo: float, hi: float, count: int) -> np.ndarray:
    """Square-root eigenvalues linearly spaced from lo to hi."""
    if lo <= 0 or hi <= 0:
        raise SpectrumError("spectrum endpoints must be positive")
    return np.linspace(lo, hi, count)


def random_orthonormal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random orthonormal matrix via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def eval_potential(target: TargetModel, x, counter=None) -> float:
    """Evaluate f(x), recording the call on ``counter`` when given."""
    x = _as_vector(x, target.dim)
    if counter is not None:
        counter.fn_evals += 1
    return float(target.potential(x))


def eval_grad(target: TargetModel, x, counter=None) -> np.ndarray:
    """Evaluate grad f(x), recording the call on ``counter`` when given."""
    x = _as_vector(x, target.dim)
    if counter is not None:
        counter.grad_evals += 1
    return np.asarray(target.gradient(x), dtype=float)


def check_gradient(target: TargetModel, points, h: float = 1e-5) -> float:
    """Max relative error between central differences and the gradient.

    The error at a point is max over coordinates of
    |central_difference - gradient| / (1 + |gradient|).

    Args:
        target: Target whose gradient to validate.
        points: Iterable of d-vectors.
        h: Finite-difference step, must be positive.

    Returns:
        Maximum relative error over all points and coordinates.
    """
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    worst = 0.0
    for p in points:
        p = _as_vector(p, target.dim, "point")
        g = np.asarray(target.gradient(p), dtype=float)
        for j in range(target.dim):
            e = np.zeros(target.dim)
            e[j] = h
            cd = (float(target.potential(p + e)) - float(target.potential(p - e))) / (2 * h)
            err = abs(cd - g[j]) / (1.0 + abs(g[j]))
            worst = max(worst, err)
    return worst
