"""Black-Scholes coefficients, exact GBM sampling, solution maps, Euler-Maruyama.

The model is ``dX_i = alpha_i X_i dt + beta_i X_i (B dW)_i`` with unit-norm rows
of ``B``, i.e. ``mu(x) = (alpha_i x_i)_i`` and ``sigma(x) = diag(beta_i x_i) B``.
Its generator carries the ``1/2 Trace(sigma sigma^T Hess)`` convention; the
factorless ``Trace`` form corresponds to replacing ``beta`` by ``sqrt(2) beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .affine import AffineMap

_ROW_NORM_TOL = 1e-12


def _vec(v, d: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(d, float(arr))
    arr = arr.reshape(-1)
    if arr.shape != (d,):
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {d}")
    return arr


@dataclass(frozen=True, eq=False)
class BlackScholesModel:
    """Drift rates ``alpha``, volatilities ``beta`` and correlation factor ``B``.

    Rows of ``B`` are normalised to unit Euclidean norm on construction; a row
    with norm below 1e-12 is rejected.
    """

    alpha: np.ndarray
    beta: np.ndarray
    B: np.ndarray

    def __post_init__(self) -> None:
        B = np.array(self.B, dtype=np.float64, copy=True)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError(f"correlation factor must be square, got {B.shape}")
        d = B.shape[0]
        norms = np.linalg.norm(B, axis=1)
        if np.any(norms < _ROW_NORM_TOL):
            bad = int(np.argmin(norms))
            raise ValueError(f"row {bad} of the correlation factor has norm {norms[bad]:.3g}")
        B = B / norms[:, None]
        alpha = _vec(self.alpha, d, "alpha").copy()
        beta = _vec(self.beta, d, "beta").copy()
        for arr in (alpha, beta, B):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "B", B)

    @property
    def d(self) -> int:
        return self.B.shape[0]

    @classmethod
    def independent(cls, d: int, alpha=0.0, beta=0.0) -> "BlackScholesModel":
        return cls(alpha=_vec(alpha, d, "alpha"), beta=_vec(beta, d, "beta"), B=np.eye(d))

    @classmethod
    def equicorrelated(cls, d: int, rho: float, alpha=0.0, beta=0.0) -> "BlackScholesModel":
        """Factor ``B`` = Cholesky factor of ``(1 - rho) I + rho 11^T``."""
        if d > 1 and not (-1.0 / (d - 1) < rho < 1.0):
            raise ValueError(f"rho={rho} outside (-1/(d-1), 1) for d={d}")
        corr = (1.0 - rho) * np.eye(d) + rho * np.ones((d, d))
        return cls(alpha=_vec(alpha, d, "alpha"), beta=_vec(beta, d, "beta"),
                   B=np.linalg.cholesky(corr))

    @classmethod
    def from_correlation(cls, corr, alpha=0.0, beta=0.0) -> "BlackScholesModel":
        corr = np.asarray(corr, dtype=np.float64)
        d = corr.shape[0]
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        try:
            factor = np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise ValueError("correlation matrix is not positive definite") from None
        return cls(alpha=_vec(alpha, d, "alpha"), beta=_vec(beta, d, "beta"), B=factor)


def _check_dim(model: BlackScholesModel, x: np.ndarray, name: str = "x") -> None:
    if x.shape[-1] != model.d:
        raise ValueError(f"{name} has dimension {x.shape[-1]}, model has d={model.d}")


def mu(model: BlackScholesModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(model, x)
    return model.alpha * x


def sigma(model: BlackScholesModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(model, x)
    return (model.beta * x)[..., :, None] * model.B


def growth_L(model: BlackScholesModel) -> float:
    """``2 max_i (|alpha_i| + |beta_i|)``; bounds ``||mu(x)|| + ||sigma(x)||_HS`` by ``L (1 + ||x||)``."""
    return 2.0 * float(np.max(np.abs(model.alpha) + np.abs(model.beta)))


def growth_factors(model: BlackScholesModel, T: float, noise) -> np.ndarray:
    """``exp((alpha - beta^2/2) T + beta sqrt(T) (B z))`` for noise rows ``z``."""
    if T <= 0:
        raise ValueError("T must be positive")
    noise = np.asarray(noise, dtype=np.float64)
    _check_dim(model, noise, "noise")
    drift = (model.alpha - 0.5 * model.beta**2) * T
    return np.exp(drift + model.beta * math.sqrt(T) * (noise @ model.B.T))


def sample_terminal_exact(model: BlackScholesModel, T: float, x, noise) -> np.ndarray:
    """Exact ``X_T^x`` driven by standard normal ``noise`` (``W_T = sqrt(T) noise``).

    ``x`` and ``noise`` broadcast row-wise, so a batch of noise gives a batch of
    terminal values.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_dim(model, x)
    return x * growth_factors(model, T, noise)


def sample_solution_map(model: BlackScholesModel, T: float, noise) -> AffineMap:
    """The affine map ``x -> X_T^x`` for one fixed noise vector.

    The flow is diagonal and ``X^0 = 0``, so the offset is zero.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 1:
        raise ValueError("sample_solution_map takes a single noise vector")
    return AffineMap(np.diag(growth_factors(model, T, noise)), np.zeros(model.d))


def sample_solution_maps(model: BlackScholesModel, T: float, noise) -> list[AffineMap]:
    """One solution map per row of ``noise``."""
    g = growth_factors(model, T, np.atleast_2d(noise))
    zero = np.zeros(model.d)
    return [AffineMap(np.diag(row), zero) for row in g]


def euler_maruyama(
    mu_fn: Callable[[np.ndarray], np.ndarray],
    sigma_fn: Callable[[np.ndarray], np.ndarray],
    T: float,
    steps: int,
    x,
    noise_increments,
) -> np.ndarray:
    """Explicit Euler scheme with step ``T/steps``.

    ``noise_increments`` holds standard normals of shape ``(steps, m)`` for one
    path, or ``(paths, steps, m)`` for a batch (then ``x`` is ``(d,)`` or
    ``(paths, d)``).  ``sigma_fn`` must map a ``(..., d)`` state to ``(..., d, m)``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z = np.asarray(noise_increments, dtype=np.float64)
    single = z.ndim == 2
    if single:
        z = z[None]
    if z.ndim != 3 or z.shape[1] != steps:
        raise ValueError(f"noise_increments must have {steps} steps, got shape {np.shape(noise_increments)}")
    h = T / steps
    sq = math.sqrt(h)
    X = np.broadcast_to(np.asarray(x, dtype=np.float64), (z.shape[0], np.shape(x)[-1])).copy()
    for k in range(steps):
        X = X + mu_fn(X) * h + np.einsum("pij,pj->pi", sigma_fn(X), z[:, k, :]) * sq
    return X[0] if single else X


@dataclass(frozen=True)
class MomentBoundInputs:
    p: float
    T: float
    t: float
    m1: float
    m2: float
    s1: float
    s2: float
    xi_norm: float

    def __post_init__(self) -> None:
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if min(self.T, self.t, self.m1, self.m2, self.s1, self.s2, self.xi_norm) < 0:
            raise ValueError("moment bound inputs must be nonnegative")
        if self.t > self.T:
            raise ValueError("t must lie in [0, T]")


def moment_bound(inputs: MomentBoundInputs) -> float:
    """Upper bound for ``(E ||X_t||^p)^(1/p)`` of an SDE with linearly growing coefficients.

    ``sqrt(2) (||xi|| + m1 T + s1 p sqrt(T)) exp((m2 sqrt(T) + s2 p)^2 t)``
    """
    q = inputs
    return math.sqrt(2.0) * (q.xi_norm + q.m1 * q.T + q.s1 * q.p * math.sqrt(q.T)) * math.exp(
        (q.m2 * math.sqrt(q.T) + q.s2 * q.p) ** 2 * q.t
    )
