"""Monte Carlo mean estimators, their error bounds, and sampleable measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .sde import BlackScholesModel, sample_terminal_exact

_LEAF = 128


def pairwise_sum(values) -> np.ndarray:
    """Tree reduction over the first axis; rounding error grows like ``log n``."""
    a = np.asarray(values, dtype=np.float64)
    if a.shape[0] == 0:
        raise ValueError("cannot sum an empty batch")
    while a.shape[0] > _LEAF:
        half = a.shape[0] // 2
        head = a[:half] + a[half : 2 * half]
        a = np.concatenate([head, a[2 * half :]]) if a.shape[0] % 2 else head
    out = a[0].copy()
    for row in a[1:]:
        out = out + row
    return out


def mc_mean(values) -> np.ndarray | float:
    """Arithmetic mean of a batch of scalars ``(n,)`` or vectors ``(n, d)``."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim == 0 or a.shape[0] == 0:
        raise ValueError("empty batch")
    s = pairwise_sum(a) / a.shape[0]
    return float(s) if a.ndim == 1 else s


def l2_error_predicted(n: int, std: float) -> float:
    """Exact RMS error ``std / sqrt(n)`` of the mean of ``n`` i.i.d. samples."""
    if n < 1 or std < 0:
        raise ValueError("need n >= 1 and std >= 0")
    return std / math.sqrt(n)


def kahane_constant_bound(p: float) -> float:
    """Upper bound ``sqrt(p - 1)`` on the Kahane-Khintchine constant ``K_{p,2}``."""
    if p < 2:
        raise ValueError("p must be >= 2")
    return math.sqrt(p - 1.0)


def lp_mc_error_bound(p: float, n: int, central_pth_moment_root: float) -> float:
    """``2 sqrt((p-1)/n) (E||X - EX||^p)^(1/p)``, bounding ``(E||mean - EX||^p)^(1/p)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * kahane_constant_bound(p) / math.sqrt(n) * central_pth_moment_root


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """A sampleable probability measure on R^d.

    ``kind`` is ``"uniform_box"`` (``params``: ``u``, ``v``),
    ``"pushforward_lognormal"`` (``model``, ``T``, ``x0``) or ``"point_cloud"``
    (``points``, ``weights``).  Use the module-level constructors.
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)


def uniform_box(d: int, u: float = 0.0, v: float = 1.0) -> MeasureSpec:
    if not u < v:
        raise ValueError(f"uniform box needs u < v, got [{u}, {v}]")
    return MeasureSpec("uniform_box", d, {"u": float(u), "v": float(v)})


def pushforward_lognormal(model: BlackScholesModel, T: float, x0=None) -> MeasureSpec:
    x0 = np.ones(model.d) if x0 is None else np.asarray(x0, dtype=np.float64)
    return MeasureSpec("pushforward_lognormal", model.d, {"model": model, "T": float(T), "x0": x0})


def point_cloud(points, weights=None) -> MeasureSpec:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    w = np.full(pts.shape[0], 1.0 / pts.shape[0]) if weights is None else np.asarray(weights, float)
    if w.shape != (pts.shape[0],) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
        raise ValueError("point cloud weights must be nonnegative, one per point, summing to 1")
    return MeasureSpec("point_cloud", pts.shape[1], {"points": pts, "weights": w})


def sample_measure(spec: MeasureSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. draws, shape ``(count, d)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    p = spec.params
    if spec.kind == "uniform_box":
        return rng.uniform(p["u"], p["v"], size=(count, spec.d))
    if spec.kind == "pushforward_lognormal":
        z = rng.standard_normal((count, spec.d))
        return sample_terminal_exact(p["model"], p["T"], p["x0"], z)
    if spec.kind == "point_cloud":
        idx = rng.choice(p["points"].shape[0], size=count, p=p["weights"])
        return p["points"][idx]
    raise ValueError(f"unknown measure kind {spec.kind!r}")


class NormMoment(NamedTuple):
    estimate: float
    analytic_upper: float | None
    stderr: float


def uniform_box_moment_bound(d: int, u: float, v: float, q: float) -> float:
    """``d^(q/2) max(|u|^q, |v|^q)`` bounds the q-th norm moment of ``U([u, v]^d)``."""
    return d ** (q / 2.0) * max(abs(u) ** q, abs(v) ** q)


def norm_moment(spec: MeasureSpec, q: float, count: int, rng: np.random.Generator) -> NormMoment:
    """Monte Carlo estimate of ``int ||x||^q nu(dx)``; uniform boxes also get the analytic bound."""
    if q <= 0:
        raise ValueError("q must be positive")
    if spec.kind == "point_cloud":
        vals = np.linalg.norm(spec.params["points"], axis=1) ** q
        w = spec.params["weights"]
        est = float(w @ vals)
        var = float(w @ (vals - est) ** 2)
        return NormMoment(est, None, math.sqrt(var / count))
    x = sample_measure(spec, count, rng)
    vals = np.linalg.norm(x, axis=1) ** q
    est = mc_mean(vals)
    se = float(np.std(vals, ddof=1) / math.sqrt(count)) if count > 1 else math.inf
    upper = None
    if spec.kind == "uniform_box":
        upper = uniform_box_moment_bound(spec.d, spec.params["u"], spec.params["v"], q)
    return NormMoment(est, upper, se)
