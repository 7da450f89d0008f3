"""Reference prices ``u(T, x) = E[payoff(X_T^x)]`` (undiscounted).

Closed form for one-dimensional calls and puts; exact-GBM Monte Carlo for
everything else.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from . import rng as rngmod
from .builders import Payoff
from .sde import BlackScholesModel, growth_factors, sample_terminal_exact

DEFAULT_ORACLE_SAMPLES = 1_000_000
# oracle matrix rows processed together; bounds memory at chunk x n_oracle doubles
_ORACLE_CHUNK_ENTRIES = 1 << 24


def _check_1d(x, K, beta, T):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("x must be positive")
    if np.any(np.asarray(K) <= 0):
        raise ValueError("K must be positive")
    if T <= 0:
        raise ValueError("T must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")


def bs_call_1d(x, K, alpha: float, beta: float, T: float):
    """``x e^{alpha T} N(d1) - K N(d2)``; deterministic payoff when ``beta == 0``.

    ``N`` is ``scipy.special.ndtr`` (double-precision accurate in both tails).
    """
    _check_1d(x, K, beta, T)
    x = np.asarray(x, dtype=np.float64)
    fwd = x * math.exp(alpha * T)
    if beta == 0:
        out = np.maximum(fwd - K, 0.0)
    else:
        vol = beta * math.sqrt(T)
        d1 = (np.log(x / K) + (alpha + 0.5 * beta * beta) * T) / vol
        out = fwd * ndtr(d1) - K * ndtr(d1 - vol)
    return float(out) if out.ndim == 0 else out


def bs_put_1d(x, K, alpha: float, beta: float, T: float):
    """Put from parity: ``call - x e^{alpha T} + K``."""
    call = bs_call_1d(x, K, alpha, beta, T)
    return call - np.asarray(x, dtype=np.float64) * math.exp(alpha * T) + K


def mc_price(
    model: BlackScholesModel,
    payoff,
    T: float,
    x0,
    n: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Mean and standard error of ``payoff(X_T^{x0})`` over ``n`` exact samples."""
    if n < 100:
        raise ValueError("mc_price needs n >= 100")
    x0 = np.asarray(x0, dtype=np.float64)
    vals = np.asarray(payoff(sample_terminal_exact(model, T, x0, rng.standard_normal((n, model.d)))),
                      dtype=np.float64)
    if vals.min() == vals.max():
        return float(vals[0]), 0.0
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n))


class ClosedFormOracle:
    """1-d call/put priced by the closed form."""

    def __init__(self, payoff: Payoff, model: BlackScholesModel, T: float):
        if payoff.dim != 1 or payoff.family not in ("basket_call", "basket_put") or payoff.strike <= 0:
            raise ValueError("closed form covers 1-d calls and puts with positive strike")
        self.payoff, self.model, self.T = payoff, model, T
        self.kind = "closed_form"

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xs = (x[None] if single else x)[:, 0]
        c = float(self.payoff.weights[0])
        K = self.payoff.strike
        a, b = float(self.model.alpha[0]), float(self.model.beta[0])
        s = c * xs
        # price of (c X - K)^+ = call on c X when c x > 0; otherwise the sign of c X is fixed
        out = np.empty_like(s)
        put = self.payoff.family == "basket_put"
        pos = s > 0
        if np.any(pos):
            out[pos] = (bs_put_1d if put else bs_call_1d)(s[pos], K, a, b, self.T)
        fwd = s[~pos] * math.exp(a * self.T)
        out[~pos] = np.maximum(K - fwd, 0.0) if put else np.maximum(fwd - K, 0.0)
        return float(out[0]) if single else out


class MonteCarloOracle:
    """Memoized exact-GBM Monte Carlo price for any payoff family.

    One set of ``n_oracle`` growth factors is drawn from the oracle namespace
    and reused at every ``x`` (the flow is ``X_T^x = x * G``), so prices are
    deterministic per ``x`` and smooth in ``x``.
    """

    def __init__(self, payoff: Payoff, model: BlackScholesModel, T: float,
                 n_oracle: int = DEFAULT_ORACLE_SAMPLES, seed: int = 0):
        self.payoff, self.model, self.T = payoff, model, T
        self.kind = "monte_carlo"
        self.n_oracle = n_oracle
        gen = rngmod.stream(seed, rngmod.ORACLE, payoff.family, model.d)
        self._growth = np.ascontiguousarray(
            growth_factors(model, T, gen.standard_normal((n_oracle, model.d)))
        )
        self._memo: dict[bytes, float] = {}

    def _compute(self, xs: np.ndarray) -> np.ndarray:
        c, K = self.payoff.weights, self.payoff.strike
        fam = self.payoff.family
        G = self._growth
        out = np.empty(xs.shape[0])
        rows = max(1, _ORACLE_CHUNK_ENTRIES // self.n_oracle)
        for start in range(0, xs.shape[0], rows):
            chunk = xs[start : start + rows]
            if fam in ("basket_call", "basket_put"):
                s = (chunk * c) @ G.T  # (rows, n_oracle)
                if fam == "basket_call":
                    s -= K
                else:
                    np.subtract(K, s, out=s)
                np.maximum(s, 0.0, out=s)
                out[start : start + rows] = s.mean(axis=1)
            else:
                for i, x in enumerate(chunk):
                    out[start + i] = self.payoff(G * x).mean()
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xs = np.ascontiguousarray(x[None] if single else x)
        keys = [row.tobytes() for row in xs]
        missing = [i for i, k in enumerate(keys) if k not in self._memo]
        if missing:
            vals = self._compute(xs[missing])
            for i, v in zip(missing, vals):
                self._memo[keys[i]] = float(v)
        out = np.array([self._memo[k] for k in keys])
        return float(out[0]) if single else out


def oracle_for(payoff: Payoff, model: BlackScholesModel, T: float,
               n_oracle: int = DEFAULT_ORACLE_SAMPLES, seed: int = 0):
    """Pricing function ``x -> u(T, x)`` for ``payoff`` under ``model``.

    One-dimensional calls and puts use the closed form; all other cases use a
    memoized :class:`MonteCarloOracle`.
    """
    if payoff.dim != model.d:
        raise ValueError(f"payoff acts on R^{payoff.dim}, model has d={model.d}")
    if model.d == 1 and payoff.family in ("basket_call", "basket_put") and payoff.strike > 0:
        return ClosedFormOracle(payoff, model, T)
    return MonteCarloOracle(payoff, model, T, n_oracle=n_oracle, seed=seed)
