"""Build multichannel ReLU approximators of Black-Scholes prices.

The approximator is ``psi(x) = (1/n) sum_i phi(A_i x + b_i)`` where ``phi`` is
an exact payoff network and ``(A_i, b_i)`` are independent draws of the random
solution map ``x -> X_T^x``.  Theory mode computes the sample count that the
a-priori error bound requires; empirical mode searches for the smallest
power-of-two ``n`` whose measured ``L^p(nu)`` error meets the target.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .ann import Network, nonzero_param_count, param_count, realize
from .builders import Payoff, multichannel
from .montecarlo import MeasureSpec, norm_moment, sample_measure
from .oracles import DEFAULT_ORACLE_SAMPLES, oracle_for
from .sde import BlackScholesModel, growth_L, sample_solution_maps

log = logging.getLogger(__name__)

# dense psi larger than this many parameters is not assembled
MAX_PSI_PARAMS = 50_000_000


@dataclass(frozen=True)
class TheoryExponents:
    """Exponents of the polynomial cost bound ``d^((5+zz) theta + z + w zz + 4 v) eps^(-4-zz)``.

    ``zz`` is the bold-z exponent of the payoff approximation family; ``v`` is
    the growth-in-d exponent of the payoff nets.
    """

    z: float = 1.0
    w: float = 0.0
    zz: float = 0.0
    theta: float = 0.5
    v: float = 0.0
    r: float = 1.0
    R: float = 1.0

    @classmethod
    def for_family(cls, family: str, theta: float = 0.5) -> "TheoryExponents":
        z = 1.0 if family in ("basket_call", "basket_put") else 3.0
        return cls(z=z, theta=theta)

    @property
    def d_exponent(self) -> float:
        return (5.0 + self.zz) * self.theta + self.z + self.w * self.zz + 4.0 * self.v

    @property
    def eps_exponent(self) -> float:
        return 4.0 + self.zz


@dataclass
class ApproximationSpec:
    model: BlackScholesModel
    T: float
    payoff: Payoff
    epsilon: float
    measure: MeasureSpec
    p: float = 2.0
    c: float | None = None  # payoff growth constant; derived from the payoff when None
    v: float = 2.0
    mode: str = "empirical"
    max_attempts: int = 24
    eval_samples: int = 1000
    oracle_samples: int = DEFAULT_ORACLE_SAMPLES
    oracle_seed: int = 0
    n_start: int = 32
    n_max: int = 1 << 20
    theory_n_cap: int = 1 << 16
    oracle: Callable | None = None

    def __post_init__(self) -> None:
        if self.c is None:
            self.c = self.payoff.growth_constant()
        if self.c < 1 or self.v < 2 or self.p < 2:
            raise ValueError("need c >= 1, v >= 2, p >= 2")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.payoff.dim != self.model.d or self.measure.d != self.model.d:
            raise ValueError("payoff, measure and model dimensions differ")
        if self.mode not in ("theory", "empirical"):
            raise ValueError(f"mode must be 'theory' or 'empirical', got {self.mode!r}")
        if self.max_attempts < 1 or self.n_start < 1 or self.eval_samples < 100:
            raise ValueError("need max_attempts >= 1, n_start >= 1, eval_samples >= 100")

    @property
    def payoff_net(self) -> Network:
        return self.payoff.network()

    def make_oracle(self):
        if self.oracle is not None:
            return self.oracle
        return oracle_for(self.payoff, self.model, self.T,
                          n_oracle=self.oracle_samples, seed=self.oracle_seed)


@dataclass
class BuildReport:
    mode: str
    success: bool
    n_used: int | None
    attempts: int
    measured_lp_error: float | None
    error_stderr: float | None
    param_count: int | None
    nonzero_param_count: int | None
    phi_param_count: int
    wall_time: float
    n_theory: int | None = None
    log10_n_theory: float | None = None
    theory_C: float | None = None
    apriori_bound: float | None = None
    history: list[tuple[int, float]] = field(default_factory=list)
    message: str = ""


# ---------------------------------------------------------------------------
# theory constants
# ---------------------------------------------------------------------------


def _log_theory_constant_C(p, v, L, T, moment_root) -> float:
    if p < 2 or v < 2:
        raise ValueError("need p >= 2 and v >= 2")
    if min(L, T, moment_root) < 0:
        raise ValueError("L, T and moment_root must be nonnegative")
    return (math.log(2.0) + 0.5 * math.log(p - 1.0)
            + 3.0 * v * (1.0 + L * L * T * (math.sqrt(T) + v * p) ** 2)
            + math.log1p(moment_root))


def theory_constant_C(p: float, v: float, L: float, T: float, moment_root: float) -> float:
    """``2 sqrt(p-1) exp(3v (1 + L^2 T (sqrt(T) + v p)^2)) (1 + moment_root)``.

    ``moment_root`` is ``(int ||x||^(p v) nu(dx))^(1/p)``.  Returns ``inf`` on
    overflow.
    """
    _log_theory_constant_C(p, v, L, T, moment_root)  # validates inputs
    try:
        growth = math.exp(3.0 * v * (1.0 + L * L * T * (math.sqrt(T) + v * p) ** 2))
    except OverflowError:
        return math.inf
    return 2.0 * math.sqrt(p - 1.0) * growth * (1.0 + moment_root)


def theory_sample_count(c: float, C: float, eps: float) -> int:
    """Smallest natural ``n`` with ``n >= c^2 C^2 / eps^2`` (exact for float inputs)."""
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if c < 0 or C < 0:
        raise ValueError("c and C must be nonnegative")
    if not math.isfinite(C):
        raise OverflowError("C is not finite; use log10_theory_sample_count")
    q = Fraction(c) ** 2 * Fraction(C) ** 2 / Fraction(eps) ** 2
    n = -((-q.numerator) // q.denominator)
    return max(1, n)


def log10_theory_sample_count(c: float, logC: float, eps: float) -> float:
    """``log10(c^2 C^2 / eps^2)`` from ``log C``, usable when ``C`` overflows."""
    if c <= 0:
        return 0.0
    return (2.0 * math.log(c) + 2.0 * logC - 2.0 * math.log(eps)) / math.log(10.0)


def error_bound_nicer(eps_payoff: float, n: int, c: float, C: float) -> float:
    """A-priori ``L^p`` bound ``(eps_payoff + c / sqrt(n)) C`` (``C`` without the factor 2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (eps_payoff + c / math.sqrt(n)) * C


# ---------------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------------


def lp_error_from_values(pred, target, p: float) -> tuple[float, float]:
    """Plug-in ``(mean |pred - target|^p)^(1/p)`` with a delta-method standard error."""
    y = np.abs(np.asarray(pred, float) - np.asarray(target, float)) ** p
    m = float(np.mean(y))
    if m == 0.0:
        return 0.0, 0.0
    se_m = float(np.std(y, ddof=1) / math.sqrt(y.size))
    est = m ** (1.0 / p)
    return est, est / (p * m) * se_m


def lp_error(psi: Network, oracle: Callable, spec: ApproximationSpec,
             rng: np.random.Generator) -> tuple[float, float]:
    """``L^p(nu)`` distance between ``realize(psi)`` and ``oracle`` on fresh nu-samples."""
    x = sample_measure(spec.measure, spec.eval_samples, rng)
    return lp_error_from_values(realize(psi, x), oracle(x), spec.p)


def measure_moment_root(spec: ApproximationSpec, rng: np.random.Generator,
                        count: int = 100_000) -> float:
    """``(int ||x||^(p v) nu(dx))^(1/p)`` by Monte Carlo."""
    est = norm_moment(spec.measure, spec.p * spec.v, count, rng).estimate
    return est ** (1.0 / spec.p)


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def _compose(spec: ApproximationSpec, phi: Network, n: int, rng: np.random.Generator) -> Network:
    maps = sample_solution_maps(spec.model, spec.T, rng.standard_normal((n, spec.model.d)))
    return multichannel(phi, maps)


def _psi_param_count(phi: Network, n: int) -> int:
    u = phi.widths
    widths = (u[0],) + tuple(n * l for l in u[1:-1]) + (1,)
    return sum(widths[k] * (widths[k - 1] + 1) for k in range(1, len(widths)))


def build_approximator(spec: ApproximationSpec, exponents: TheoryExponents | None,
                       rng: np.random.Generator) -> tuple[Network | None, BuildReport]:
    """Construct ``psi`` for ``spec``.

    Empirical mode starts at ``n_start`` channels, allows one redraw per ``n``
    and then doubles, until the error on a fixed evaluation set is at most
    ``epsilon`` and a re-measurement on a fresh set is at most
    ``epsilon + 2 stderr``, or ``max_attempts`` is spent.  On failure the best
    ``psi`` seen is returned with ``success=False``.

    Theory mode sets ``n = ceil(c^2 C^2 / eps^2)``; when that exceeds
    ``theory_n_cap`` nothing is built and the report carries ``n`` and the bound.
    """
    t0 = time.perf_counter()
    phi = spec.payoff_net
    pphi = param_count(phi)
    channel_rng, eval_rng, fresh_rng, moment_rng = rng.spawn(4)

    if spec.mode == "theory":
        L = growth_L(spec.model)
        root = measure_moment_root(spec, moment_rng)
        logC = _log_theory_constant_C(spec.p, spec.v, L, spec.T, root)
        C = theory_constant_C(spec.p, spec.v, L, spec.T, root)
        log10_n = log10_theory_sample_count(spec.c, logC, spec.epsilon)
        n = theory_sample_count(spec.c, C, spec.epsilon) if math.isfinite(C) else None
        report = BuildReport(
            mode="theory", success=False, n_used=None, attempts=0,
            measured_lp_error=None, error_stderr=None, param_count=None,
            nonzero_param_count=None, phi_param_count=pphi, wall_time=0.0,
            n_theory=n, log10_n_theory=log10_n, theory_C=C,
            apriori_bound=(error_bound_nicer(0.0, n, spec.c, C / 2.0) if n else None),
        )
        if n is None or n > spec.theory_n_cap:
            report.message = f"theoretical n ~ 10^{log10_n:.1f} exceeds cap {spec.theory_n_cap}; not built"
            report.wall_time = time.perf_counter() - t0
            return None, report
        oracle = spec.make_oracle()
        psi = _compose(spec, phi, n, channel_rng)
        err, se = lp_error(psi, oracle, spec, fresh_rng)
        report.success = err <= spec.epsilon
        report.n_used, report.attempts = n, 1
        report.measured_lp_error, report.error_stderr = err, se
        report.param_count, report.nonzero_param_count = param_count(psi), nonzero_param_count(psi)
        report.history.append((n, err))
        report.wall_time = time.perf_counter() - t0
        return psi, report

    oracle = spec.make_oracle()
    x_sel = sample_measure(spec.measure, spec.eval_samples, eval_rng)
    y_sel = oracle(x_sel)

    best: tuple[float, Network, int] | None = None  # lowest selection-set error
    final: tuple[float, float, Network, int] | None = None
    history: list[tuple[int, float]] = []
    n = spec.n_start
    redrawn = False
    attempts = 0
    message = ""
    while attempts < spec.max_attempts:
        if n > spec.n_max:
            message = f"n={n} exceeds n_max={spec.n_max}"
            break
        if _psi_param_count(phi, n) > MAX_PSI_PARAMS:
            message = f"n={n} would need more than {MAX_PSI_PARAMS} dense parameters"
            break
        attempts += 1
        psi = _compose(spec, phi, n, channel_rng)
        err, _ = lp_error_from_values(realize(psi, x_sel), y_sel, spec.p)
        history.append((n, err))
        log.debug("attempt %d: n=%d error=%.4g", attempts, n, err)
        if best is None or err < best[0]:
            best = (err, psi, n)
        if err <= spec.epsilon:
            fresh, fresh_se = lp_error(psi, oracle, spec, fresh_rng)
            if fresh <= spec.epsilon + 2.0 * fresh_se:
                final = (fresh, fresh_se, psi, n)
                break
        if redrawn:
            n *= 2
        redrawn = not redrawn

    success = final is not None
    if not success and best is not None:
        fresh, fresh_se = lp_error(best[1], oracle, spec, fresh_rng)
        final = (fresh, fresh_se, best[1], best[2])
    if not success and not message:
        message = f"target {spec.epsilon} not reached in {attempts} attempts"

    report = BuildReport(
        mode="empirical", success=success,
        n_used=final[3] if final else None, attempts=attempts,
        measured_lp_error=final[0] if final else None,
        error_stderr=final[1] if final else None,
        param_count=param_count(final[2]) if final else None,
        nonzero_param_count=nonzero_param_count(final[2]) if final else None,
        phi_param_count=pphi, wall_time=time.perf_counter() - t0,
        history=history, message=message,
    )
    if exponents is not None:
        report.message = (report.message + " " if report.message else "") + (
            f"predicted exponents: d^{exponents.d_exponent:g} eps^-{exponents.eps_exponent:g}"
        )
    return (final[2] if final else None), report
