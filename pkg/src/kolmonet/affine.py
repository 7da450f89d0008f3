"""Affine maps on R^d: evaluation, black-box recovery, affinity test, growth constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> A x + b`` with square ``A``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=np.float64, copy=True)
        b = np.array(self.b, dtype=np.float64, copy=True).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def __call__(self, x):
        return apply(self, x)


def apply(m: AffineMap, x) -> np.ndarray:
    """``A x + b`` for a vector, or row-wise for a batch of shape ``(k, d)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.dim:
        raise ValueError(f"input has dimension {x.shape[-1]}, map acts on R^{m.dim}")
    if x.ndim == 1:
        return m.A @ x + m.b
    return x @ m.A.T + m.b


def recover_affine(f: Callable[[np.ndarray], np.ndarray], d: int) -> AffineMap:
    """Rebuild ``(A, b)`` from ``d + 1`` probes: ``b = f(0)``, ``A e_j = f(e_j) - f(0)``."""
    b = np.atleast_1d(np.asarray(f(np.zeros(d)), dtype=np.float64))
    if b.shape != (d,):
        raise ValueError(f"f(0) has shape {b.shape}, expected ({d},)")
    A = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        col = np.atleast_1d(np.asarray(f(e), dtype=np.float64))
        if col.shape != b.shape:
            raise ValueError(f"f(e_{j + 1}) has shape {col.shape}, f(0) had {b.shape}")
        A[:, j] = col - b
    return AffineMap(A, b)


def check_affine(
    f: Callable[[np.ndarray], np.ndarray],
    d: int,
    trials: int = 100,
    tol: float = 1e-10,
    rng: np.random.Generator | None = None,
) -> bool:
    """Sampled test of ``f(lx + y) + l f(0) == l f(x) + f(y)``.

    ``x, y`` are drawn from ``[-2, 2]^d`` and ``l`` from ``[-3, 3]``.  ``f`` may
    return scalars, vectors or matrices.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    f0 = np.asarray(f(np.zeros(d)), dtype=np.float64)
    for _ in range(trials):
        x = rng.uniform(-2.0, 2.0, d)
        y = rng.uniform(-2.0, 2.0, d)
        lam = rng.uniform(-3.0, 3.0)
        fx = np.asarray(f(x), dtype=np.float64)
        fy = np.asarray(f(y), dtype=np.float64)
        resid = np.asarray(f(lam * x + y), dtype=np.float64) + lam * f0 - lam * fx - fy
        scale = 1.0 + np.linalg.norm(fx) + np.linalg.norm(fy)
        if not np.linalg.norm(resid) <= tol * scale:
            return False
    return True


def growth_constant(m: AffineMap) -> float:
    """``max(||A||_F, ||b||)``.

    Frobenius bounds the operator norm, so ``||Ax + b|| <= c (1 + ||x||)`` and
    ``||A(x - y)|| <= c ||x - y||`` both hold.
    """
    return float(max(np.linalg.norm(m.A, "fro"), np.linalg.norm(m.b)))
