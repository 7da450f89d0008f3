"""Exact ReLU networks for basket and rainbow payoffs, and the multichannel average."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import block_diag

from .affine import AffineMap
from .ann import Network, ShapeError

FAMILIES = ("basket_call", "basket_put", "call_on_max", "call_on_min")


def _weights(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.size == 0:
        raise ValueError("weight vector c must be nonempty")
    return c


def basket_call_net(c, K: float) -> Network:
    """Dims ``(d, 1, 1)`` realizing ``max(<c, x> - K, 0)``."""
    c = _weights(c)
    return Network(((c[None, :], np.array([-float(K)])), (np.ones((1, 1)), np.zeros(1))))


def basket_put_net(c, K: float) -> Network:
    """``max(K - <c, x>, 0)``: the call net with ``c -> -c`` and ``K -> -K``."""
    c = _weights(c)
    return basket_call_net(-c, -float(K))


def _rainbow_net(c: np.ndarray, K: float, first_row: Sequence[float], pair_row, last_row) -> Network:
    # Hidden state after layer k (1 <= k <= d-1):
    #   [running term, (c_{k+1} x_{k+1})^+, (-c_{k+1} x_{k+1})^+, ..., (c_d x_d)^+, (-c_d x_d)^+]
    d = c.size
    w1 = np.zeros((2 * (d - 1) + 1, d))
    w1[0, 0], w1[0, 1] = first_row[0] * c[0], first_row[1] * c[1]
    for i in range(1, d):
        w1[2 * i - 1, i] = c[i]
        w1[2 * i, i] = -c[i]
    layers = [(w1, np.zeros(w1.shape[0]))]
    for k in range(1, d - 1):
        rows, cols = 2 * (d - k) - 1, 2 * (d - k) + 1
        w = np.zeros((rows, cols))
        w[0, :5] = pair_row
        for r in range(1, rows, 2):
            w[r, r + 2], w[r, r + 3] = 1.0, -1.0
            w[r + 1, r + 2], w[r + 1, r + 3] = -1.0, 1.0
        layers.append((w, np.zeros(rows)))
    layers.append((np.array([last_row], dtype=np.float64), np.array([-float(K)])))
    layers.append((np.ones((1, 1)), np.zeros(1)))
    return Network(tuple(layers))


def call_on_max_net(c, K: float) -> Network:
    """Dims ``(d, 2d-1, 2d-3, ..., 3, 1, 1)`` realizing ``max(max_i c_i x_i - K, 0)``.

    Built from ``max(a, b) = (a - b)^+ + b`` and ``t = t^+ - (-t)^+``.  For
    ``d == 1`` the payoff is a basket call and that smaller net is returned.
    """
    c = _weights(c)
    if c.size == 1:
        return basket_call_net(c, K)
    return _rainbow_net(c, K, (1.0, -1.0), (1.0, 1.0, -1.0, -1.0, 1.0), (1.0, 1.0, -1.0))


def call_on_min_net(c, K: float) -> Network:
    """Same layout as :func:`call_on_max_net`, using ``min(a, b) = a - (a - b)^+``."""
    c = _weights(c)
    if c.size == 1:
        return basket_call_net(c, K)
    return _rainbow_net(c, K, (-1.0, 1.0), (1.0, -1.0, 1.0, 1.0, -1.0), (-1.0, 1.0, -1.0))


def rainbow_param_count(d: int) -> int:
    """Closed-form parameter count of the call-on-max/min net for ``d >= 2``."""
    return (
        (2 * (d - 1) + 1) * (d + 1)
        + sum((2 * (d - (k + 1)) + 1) * (2 * (d - k) + 1 + 1) for k in range(1, d))
        + 1 * (1 + 1)
    )


# ---------------------------------------------------------------------------
# closed-form payoffs (row-wise on batches)
# ---------------------------------------------------------------------------


def basket_call_payoff(c, K, x):
    return np.maximum(np.asarray(x) @ np.asarray(c) - K, 0.0)


def basket_put_payoff(c, K, x):
    return np.maximum(K - np.asarray(x) @ np.asarray(c), 0.0)


def call_on_max_payoff(c, K, x):
    return np.maximum(np.max(np.asarray(x) * np.asarray(c), axis=-1) - K, 0.0)


def call_on_min_payoff(c, K, x):
    return np.maximum(np.min(np.asarray(x) * np.asarray(c), axis=-1) - K, 0.0)


_BUILDERS: dict[str, tuple[Callable, Callable]] = {
    "basket_call": (basket_call_net, basket_call_payoff),
    "basket_put": (basket_put_net, basket_put_payoff),
    "call_on_max": (call_on_max_net, call_on_max_payoff),
    "call_on_min": (call_on_min_net, call_on_min_payoff),
}


@dataclass(frozen=True, eq=False)
class Payoff:
    """A payoff family with its weights and strike."""

    family: str
    weights: np.ndarray
    strike: float

    def __post_init__(self) -> None:
        if self.family not in _BUILDERS:
            raise ValueError(f"unknown payoff family {self.family!r}; expected one of {FAMILIES}")
        w = _weights(self.weights).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "strike", float(self.strike))

    @property
    def dim(self) -> int:
        return self.weights.size

    def network(self) -> Network:
        return _BUILDERS[self.family][0](self.weights, self.strike)

    def __call__(self, x):
        return _BUILDERS[self.family][1](self.weights, self.strike, x)

    def growth_constant(self) -> float:
        """``c >= 1`` with ``|payoff(x)| <= c (1 + ||x||^2)``.

        Uses ``|payoff| <= |K| + ||w|| ||x||`` and ``||x|| <= 1 + ||x||^2``.
        """
        return max(1.0, abs(self.strike) + float(np.linalg.norm(self.weights)))


# ---------------------------------------------------------------------------
# multichannel composition
# ---------------------------------------------------------------------------


def multichannel(phi: Network, maps: Sequence[AffineMap]) -> Network:
    """Network realizing ``x -> (1/n) sum_i phi(A_i x + b_i)``.

    The first layer stacks ``W_1 A_i`` with biases ``W_1 b_i + B_1``, hidden
    layers are block diagonal copies of ``phi``'s, and the output row is
    ``(1/n)(W_L | ... | W_L)`` with bias ``B_L``.
    """
    n = len(maps)
    if n == 0:
        raise ValueError("multichannel needs at least one affine map")
    d = phi.input_dim
    for i, m in enumerate(maps):
        if m.dim != d:
            raise ShapeError(f"map {i}: acts on R^{m.dim}, phi expects input dimension {d}")
    A = np.stack([m.A for m in maps])
    b = np.stack([m.b for m in maps])
    (w1, b1), *middle, (wl, bl) = phi.layers
    first_w = np.einsum("uj,njk->nuk", w1, A).reshape(n * w1.shape[0], d)
    first_b = (b @ w1.T + b1).reshape(-1)
    layers = [(first_w, first_b)]
    for w, bias in middle:
        layers.append((block_diag(*([w] * n)), np.tile(bias, n)))
    layers.append((np.tile(wl / n, (1, n)), bl.copy()))
    return Network(tuple(layers))
