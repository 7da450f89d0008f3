"""Invariant and acceptance checks behind ``kolmonet verify``.

Every check takes a seed, draws from its own ``verify`` stream and returns a
:class:`CheckResult`.  ``ACCEPTANCE`` lists the twelve acceptance checks in
order; the suites ``core``, ``sde`` and ``mc`` group them by module, ``e2e``
runs all twelve and ``all`` adds the extra invariant checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng as rngmod
from .affine import AffineMap, recover_affine
from .ann import Network, dumps_network, loads_network, nonzero_param_count, param_count, realize
from .builders import FAMILIES, Payoff, basket_call_net, call_on_max_net, multichannel, rainbow_param_count
from .constructor import (
    ApproximationSpec,
    build_approximator,
    lp_error_from_values,
    theory_constant_C,
    theory_sample_count,
)
from .montecarlo import lp_mc_error_bound, sample_measure, uniform_box
from .oracles import ClosedFormOracle, bs_call_1d, mc_price, oracle_for
from .sde import (
    BlackScholesModel,
    MomentBoundInputs,
    euler_maruyama,
    growth_L,
    moment_bound,
    mu,
    sample_solution_map,
    sample_terminal_exact,
    sigma,
)

# Frozen reference values, computed independently with mpmath at 40 digits.
C_REFERENCE = 806.8575869854702  # 2 e^6
N_REFERENCE = 65101917  # ceil(400 e^12), 400 e^12 = 65101916.5676...
ATM_CALL_REFERENCE = 7.965567455405796  # (100, 100, 0, 0.2, 1)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"check": self.name, "passed": bool(self.passed),
                "seconds": round(self.seconds, 3), **self.details}


def _timed(name: str):
    def wrap(fn):
        def run(seed: int = 0) -> CheckResult:
            t0 = time.perf_counter()
            gen = rngmod.stream(seed, rngmod.VERIFY, name)
            # checks sharing cached experiments take the suite seed as well
            passed, details = fn(gen, seed) if fn.__code__.co_argcount == 2 else fn(gen)
            return CheckResult(name, bool(passed), details, time.perf_counter() - t0)
        run.__name__ = fn.__name__
        run.check_name = name
        return run
    return wrap


# ---------------------------------------------------------------------------
# 1-3: networks
# ---------------------------------------------------------------------------


@_timed("payoff_exactness")
def check_payoff_exactness(gen):
    worst = 0.0
    cases = 0
    for family in FAMILIES:
        dims = range(1 if family in ("basket_call", "basket_put") else 2, 17)
        for d in dims:
            for _ in range(1000):
                pay = Payoff(family, gen.uniform(0, 1, d), gen.uniform(0, 2))
                if pay.strike == 0.0:
                    continue
                x = gen.uniform(-2, 2, d)
                exact = pay(x)
                got = realize(pay.network(), x)
                worst = max(worst, abs(got - exact) / (1 + abs(exact)))
                cases += 1
    return worst <= 1e-12, {"cases": cases, "worst_scaled_error": worst}


@_timed("param_counts")
def check_param_counts(gen):
    bad = []
    for d in range(1, 33):
        c = gen.uniform(0, 1, d)
        p = param_count(basket_call_net(c, 1.0))
        if p != d + 3 or p > 4 * d:
            bad.append(("basket_call", d, p))
        if d >= 2:
            q = param_count(call_on_max_net(c, 1.0))
            if q != rainbow_param_count(d) or q > 6 * d**3:
                bad.append(("call_on_max", d, q))
    return not bad, {"failures": bad}


def _random_network(gen, d: int) -> Network:
    widths = [d] + list(gen.integers(1, 6, gen.integers(1, 4))) + [1]
    return Network(tuple((gen.normal(size=(widths[k], widths[k - 1])), gen.normal(size=widths[k]))
                         for k in range(1, len(widths))))


@_timed("multichannel")
def check_multichannel(gen):
    worst = 0.0
    count_ok = True
    for _ in range(100):
        d = int(gen.integers(1, 5))
        phi = _random_network(gen, d)
        n = int(gen.integers(1, 9))
        maps = [AffineMap(gen.normal(size=(d, d)), gen.normal(size=d)) for _ in range(n)]
        psi = multichannel(phi, maps)
        x = gen.uniform(-2, 2, (100, d))
        direct = np.mean([realize(phi, x @ m.A.T + m.b) for m in maps], axis=0)
        worst = max(worst, float(np.max(np.abs(realize(psi, x) - direct) / np.maximum(1.0, np.abs(direct)))))
        pphi = param_count(phi)
        count_ok &= param_count(psi) <= n * n * pphi and nonzero_param_count(psi) <= n * pphi
    return worst <= 1e-9 and count_ok, {"worst_relative_error": worst, "count_bounds_hold": bool(count_ok)}


# ---------------------------------------------------------------------------
# 4, 7: SDE
# ---------------------------------------------------------------------------


def _random_model(gen, d: int, bound: float = 0.5) -> BlackScholesModel:
    B = gen.normal(size=(d, d))
    return BlackScholesModel(gen.uniform(-bound, bound, d), gen.uniform(-bound, bound, d), B)


@_timed("affine_flow")
def check_affine_flow(gen):
    worst_identity = worst_recover = 0.0
    for _ in range(100):
        d = int(gen.integers(1, 6))
        model = _random_model(gen, d)
        T = float(gen.uniform(0.1, 2.0))
        z = gen.normal(size=d)
        x, y = gen.uniform(-2, 2, d), gen.uniform(-2, 2, d)
        lam = float(gen.uniform(-3, 3))

        def X(v):
            return sample_terminal_exact(model, T, v, z)

        lhs = X(lam * x + y) + lam * X(np.zeros(d))
        rhs = lam * X(x) + X(y)
        scale = 1.0 + max(np.max(np.abs(lhs)), np.max(np.abs(rhs)))
        worst_identity = max(worst_identity, float(np.max(np.abs(lhs - rhs))) / scale)
        rec = recover_affine(X, d)
        ref = sample_solution_map(model, T, z)
        worst_recover = max(worst_recover, float(np.max(np.abs(rec.A - ref.A))),
                            float(np.max(np.abs(rec.b - ref.b))))
    ok = worst_identity <= 1e-12 and worst_recover <= 1e-12
    return ok, {"worst_identity_error": worst_identity, "worst_recover_error": worst_recover}


@_timed("moment_bound")
def check_moment_bound(gen):
    rows = []
    for d in (1, 5):
        for p in (2.0, 4.0):
            for _ in range(3):
                model = _random_model(gen, d, 0.3)
                x0 = gen.uniform(0.5, 2.0, d)
                X = sample_terminal_exact(model, 1.0, x0, gen.standard_normal((1_000_000, d)))
                emp = float(np.mean(np.sum(X * X, axis=1) ** (p / 2))) ** (1 / p)
                # both coefficients grow at most like max_i(|alpha_i| + |beta_i|) ||x||
                k = growth_L(model) / 2
                bound = moment_bound(MomentBoundInputs(
                    p=p, T=1.0, t=1.0, m1=0.0, m2=k, s1=0.0, s2=k, xi_norm=float(np.linalg.norm(x0))))
                rows.append((d, p, emp, bound))
    violations = [r for r in rows if r[2] > r[3]]
    return not violations, {"cases": len(rows), "violations": violations,
                            "max_ratio": max(r[2] / r[3] for r in rows)}


@_timed("euler_vs_exact")
def check_euler_vs_exact(gen):
    """Euler-Maruyama mean converges to the exact terminal mean x e^{alpha T}."""
    model = BlackScholesModel.equicorrelated(3, 0.4, [0.05, -0.02, 0.1], [0.2, 0.3, 0.15])
    x0 = np.array([1.0, 0.8, 1.2])
    paths, steps = 20_000, 64
    XT = euler_maruyama(lambda s: mu(model, s), lambda s: sigma(model, s), 1.0, steps, x0,
                        gen.standard_normal((paths, steps, 3)))
    exact = x0 * np.exp(model.alpha)
    se = XT.std(axis=0, ddof=1) / math.sqrt(paths)
    z = np.abs(XT.mean(axis=0) - exact) / se
    return bool(np.all(z < 4.0)), {"z_scores": z.tolist()}


# ---------------------------------------------------------------------------
# 5, 6, 8, 11: Monte Carlo and oracles
# ---------------------------------------------------------------------------

_REPS = 100_000
_BATCH = 1_000
_LN_S = 0.5


def _dist_moments(name: str) -> tuple[float, float, dict[int, float]]:
    """Mean, std and analytic central p-th moment roots."""
    if name == "bernoulli":
        return 0.5, 0.5, {2: 0.5, 4: 0.5}
    if name == "uniform":
        return 0.5, math.sqrt(1 / 12), {p: 0.5 / (p + 1) ** (1 / p) for p in (2, 4)}
    m = [math.exp(k * k * _LN_S**2 / 2) for k in range(5)]  # raw moments of lognormal(0, s)
    mean = m[1]
    var = m[2] - mean**2
    c4 = m[4] - 4 * m[3] * mean + 6 * m[2] * mean**2 - 3 * mean**4
    return mean, math.sqrt(var), {2: math.sqrt(var), 4: c4**0.25}


def _batch_stats(name: str, gen, n: int) -> tuple[np.ndarray, float, float]:
    """Estimator values for ``_BATCH`` repetitions and the batch's plug-in central 2nd and 4th moments."""
    N = _BATCH * n
    if name == "bernoulli":
        # a mean of n Bernoulli(1/2) draws is Binomial(n, 1/2) / n
        counts = gen.binomial(n, 0.5, _BATCH)
        means = counts / n
        m = float(counts.sum()) / N
        return means, m * (1 - m) ** 2 + (1 - m) * m**2, m * (1 - m) ** 4 + (1 - m) * m**4
    x = gen.random((_BATCH, n)) if name == "uniform" else gen.standard_normal((_BATCH, n))
    if name == "lognormal":
        x *= _LN_S
        np.exp(x, out=x)
    means = x.mean(axis=1)
    flat = x.reshape(-1)
    sq = flat * flat
    r1 = float(means.mean())
    r2, r3, r4 = (float(np.dot(a, b)) / N for a, b in ((flat, flat), (sq, flat), (sq, sq)))
    c2 = r2 - r1 * r1
    c4 = r4 - 4 * r1 * r3 + 6 * r1 * r1 * r2 - 3 * r1**4
    return means, c2, c4


@lru_cache(maxsize=None)
def _mc_experiment(name: str, n: int, seed: int):
    """``_REPS`` mean-estimator errors, plus per-batch plug-in central moment roots."""
    gen = rngmod.stream(seed, rngmod.VERIFY, "mc_experiment", name, n)
    mean = _dist_moments(name)[0]
    errors = np.empty(_REPS)
    plug = {2: np.empty(_REPS // _BATCH), 4: np.empty(_REPS // _BATCH)}
    for b in range(_REPS // _BATCH):
        means, c2, c4 = _batch_stats(name, gen, n)
        errors[b * _BATCH:(b + 1) * _BATCH] = means - mean
        plug[2][b] = math.sqrt(c2)
        plug[4][b] = c4 ** 0.25
    return errors, plug


_MC_SETUPS = [(name, n) for name in ("bernoulli", "uniform", "lognormal") for n in (100, 10_000)]


@_timed("mc_l2_identity")
def check_mc_l2(gen, seed):
    rows = []
    for name, n in _MC_SETUPS:
        errors, _ = _mc_experiment(name, n, seed)
        rms = float(np.sqrt(np.mean(errors**2)))
        pred = _dist_moments(name)[1] / math.sqrt(n)
        rows.append((name, n, rms, pred, abs(rms / pred - 1)))
    return all(r[4] <= 0.02 for r in rows), {"setups": rows}


@_timed("mc_lp_bound")
def check_mc_lp(gen, seed):
    flagged = total = hard = 0
    rows = []
    for name, n in _MC_SETUPS:
        errors, plug = _mc_experiment(name, n, seed)
        analytic = _dist_moments(name)[2]
        for p in (2, 4):
            batches = np.abs(errors.reshape(-1, _BATCH)) ** p
            emp_batch = batches.mean(axis=1) ** (1 / p)
            bounds = np.array([lp_mc_error_bound(p, n, r) for r in plug[p]])
            flagged += int(np.sum(emp_batch > bounds))
            total += emp_batch.size
            emp = float(np.mean(np.abs(errors) ** p)) ** (1 / p)
            bound = lp_mc_error_bound(p, n, analytic[p])
            hard += emp > bound
            rows.append((name, n, p, emp, bound))
    ok = flagged <= 0.01 * total and hard == 0
    return ok, {"flagged_batches": flagged, "batches": total, "hard_failures": int(hard), "setups": rows}


def _oracle_tuples(gen, count: int = 20):
    yield 100.0, 100.0, 0.0, 0.2, 1.0
    for _ in range(count - 1):
        yield (float(gen.uniform(50, 150)), float(gen.uniform(50, 150)), float(gen.uniform(-0.05, 0.05)),
               float(gen.uniform(0.1, 0.5)), float(gen.uniform(0.25, 2.0)))


@_timed("oracle_cross_check")
def check_oracle_cross(gen):
    rows = []
    for x, K, a, b, T in _oracle_tuples(gen):
        model = BlackScholesModel.independent(1, a, b)
        price, se = mc_price(model, lambda s: np.maximum(s[:, 0] - K, 0.0), T, [x], 10_000_000, gen)
        closed = bs_call_1d(x, K, a, b, T)
        rows.append((x, K, a, b, T, closed, price, se, abs(price - closed) / se))
    atm_ok = abs(rows[0][5] - ATM_CALL_REFERENCE) <= 1e-9 and rows[0][8] <= 3
    return all(r[8] <= 3 for r in rows) and atm_ok, {
        "max_z": max(r[8] for r in rows), "atm_closed_form": rows[0][5], "atm_mc": rows[0][6]}


@_timed("theory_arithmetic")
def check_theory_arithmetic(gen):
    C = theory_constant_C(2, 2, 0, 1, 0)
    n = theory_sample_count(1, C, 0.1)
    ok = abs(C - C_REFERENCE) <= 1e-12 * C_REFERENCE and n == N_REFERENCE
    return ok, {"C": C, "C_reference": C_REFERENCE, "n": n, "n_reference": N_REFERENCE}


# ---------------------------------------------------------------------------
# 9, 10, 12: construction
# ---------------------------------------------------------------------------


def basket_spec(d: int, eps: float, **kw) -> ApproximationSpec:
    """Equal-weight basket call, ``alpha=0.02``, ``beta=0.2``, ``T=1``, ``K=0.5``, ``nu=U[0,1]^d``."""
    model = BlackScholesModel.independent(d, 0.02, 0.2)
    kw.setdefault("payoff", Payoff("basket_call", np.full(d, 1.0 / d), 0.5))
    kw.setdefault("measure", uniform_box(d, 0.0, 1.0))
    return ApproximationSpec(model=model, T=1.0, epsilon=eps, p=2.0, max_attempts=24, **kw)


@_timed("end_to_end")
def check_end_to_end(gen):
    rows = []
    for d, eps in ((1, 0.01), (2, 0.05), (5, 0.05), (10, 0.05)):
        spec = basket_spec(d, eps)
        psi, rep = build_approximator(spec, None, gen.spawn(1)[0])
        ok = rep.success and rep.measured_lp_error <= eps
        rows.append({"d": d, "epsilon": eps, "ok": bool(ok), "n": rep.n_used,
                     "error": rep.measured_lp_error, "attempts": rep.attempts,
                     "oracle": "closed_form" if d == 1 else "monte_carlo"})
    return all(r["ok"] for r in rows), {"builds": rows}


# Rescaled d=1 setting so that the empirical n starts from a single channel.
CONVERGENCE_EPS = (0.2, 0.1, 0.05)
CONVERGENCE_REPLICATES = 100


def convergence_spec(eps: float) -> ApproximationSpec:
    model = BlackScholesModel.independent(1, 0.02, 0.2)
    return ApproximationSpec(
        model=model, T=1.0, payoff=Payoff("basket_call", [1.0], 15.0), epsilon=eps,
        measure=uniform_box(1, 0.0, 30.0), p=2.0, max_attempts=40, n_start=1,
    )


def convergence_exponent(gen, replicates: int = CONVERGENCE_REPLICATES) -> tuple[float, list]:
    """Pooled least-squares slope of ``log n_used`` on ``log(1/eps)``."""
    xs, ys = [], []
    for eps in CONVERGENCE_EPS:
        spec = convergence_spec(eps)
        spec.oracle = spec.make_oracle()
        for g in gen.spawn(replicates):
            _, rep = build_approximator(spec, None, g)
            if rep.success:
                xs.append(math.log(1 / eps))
                ys.append(math.log(rep.n_used))
    slope = float(np.polyfit(xs, ys, 1)[0])
    medians = [float(np.exp(np.median([y for x, y in zip(xs, ys) if x == math.log(1 / e)])))
               for e in CONVERGENCE_EPS]
    return slope, medians


@_timed("convergence_exponent")
def check_convergence(gen):
    slope, medians = convergence_exponent(gen)
    return 1.5 <= slope <= 2.5, {"fitted_eps_exponent": slope, "median_n": medians}


@_timed("realization_selection")
def check_realization_selection(gen, n: int = 256, builds: int = 50):
    spec = basket_spec(1, 0.01)
    oracle = ClosedFormOracle(spec.payoff, spec.model, spec.T)
    x = sample_measure(spec.measure, spec.eval_samples, gen)
    y = oracle(x)
    phi = spec.payoff_net
    from .sde import sample_solution_maps

    errs = []
    for _ in range(builds):
        maps = sample_solution_maps(spec.model, spec.T, gen.standard_normal((n, 1)))
        errs.append(lp_error_from_values(realize(multichannel(phi, maps), x), y, 2.0)[0])
    mean, best = float(np.mean(errs)), float(np.min(errs))
    return mean <= spec.epsilon and best <= spec.epsilon, {
        "n": n, "mean_error": mean, "min_error": best, "epsilon": spec.epsilon}


# ---------------------------------------------------------------------------
# extra invariants
# ---------------------------------------------------------------------------


@_timed("network_format_round_trip")
def check_format_round_trip(gen):
    ok = True
    for _ in range(50):
        net = _random_network(gen, int(gen.integers(1, 5)))
        ok &= loads_network(dumps_network(net)) == net
    return ok, {}


@_timed("multi_d_oracle_consistency")
def check_multi_d_oracle(gen):
    """d=2 MC oracle with a degenerate second weight agrees with the 1-d closed form."""
    model = BlackScholesModel.independent(2, 0.02, 0.2)
    pay = Payoff("basket_call", [1.0, 0.0], 0.8)
    oracle = oracle_for(pay, model, 1.0, n_oracle=400_000, seed=int(gen.integers(2**31)))
    x = gen.uniform(0.5, 1.5, (5, 2))
    diff = np.abs(oracle(x) - bs_call_1d(x[:, 0], 0.8, 0.02, 0.2, 1.0))
    return bool(np.all(diff < 2e-3)), {"max_difference": float(diff.max())}


ACCEPTANCE = [
    check_payoff_exactness, check_param_counts, check_multichannel, check_affine_flow,
    check_mc_l2, check_mc_lp, check_moment_bound, check_oracle_cross, check_end_to_end,
    check_convergence, check_theory_arithmetic, check_realization_selection,
]

SUITES = {
    "core": [check_payoff_exactness, check_param_counts, check_multichannel, check_format_round_trip],
    "sde": [check_affine_flow, check_moment_bound, check_euler_vs_exact],
    "mc": [check_mc_l2, check_mc_lp, check_oracle_cross, check_theory_arithmetic, check_multi_d_oracle],
    "e2e": ACCEPTANCE,
}
SUITES["all"] = ACCEPTANCE + [check_format_round_trip, check_euler_vs_exact, check_multi_d_oracle]


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return [check(seed) for check in SUITES[name]]
