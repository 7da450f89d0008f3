"""(d, epsilon) sweeps, the versioned CSV schema, and log-log scaling fits."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from . import rng as rngmod
from .constructor import ApproximationSpec, BuildReport, TheoryExponents, build_approximator
from .montecarlo import norm_moment

SCHEMA = "kolmonet-sweep-v1"


@dataclass
class SweepRecord:
    d: int
    epsilon: float
    payoff_family: str
    replicate: int
    n_used: int | None
    param_count: int | None
    nonzero_param_count: int | None
    phi_param_count: int
    measured_lp_error: float | None
    error_stderr: float | None
    attempts: int
    success: bool
    wall_time_seconds: float
    seed: int

    @classmethod
    def from_report(cls, report: BuildReport, d: int, eps: float, family: str,
                    replicate: int, seed: int) -> "SweepRecord":
        return cls(d, eps, family, replicate, report.n_used, report.param_count,
                   report.nonzero_param_count, report.phi_param_count,
                   report.measured_lp_error, report.error_stderr, report.attempts,
                   report.success, report.wall_time, seed)

    def counts_ok(self) -> bool:
        """Both multichannel count bounds."""
        if self.param_count is None or self.n_used is None:
            return True
        n, pphi = self.n_used, self.phi_param_count
        return self.param_count <= n * n * pphi and self.nonzero_param_count <= n * pphi


COLUMNS = [f.name for f in fields(SweepRecord)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: list[SweepRecord]) -> str:
    """Header ``kolmonet-sweep-v1,<columns>``; data rows start with the literal ``record``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([SCHEMA] + COLUMNS)
    for r in records:
        row = asdict(r)
        w.writerow(["record"] + [_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def records_from_csv(text: str) -> list[SweepRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != SCHEMA:
        raise ValueError(f"not a {SCHEMA} file")
    header = rows[0][1:]
    kinds = {f.name: f.type for f in fields(SweepRecord)}
    out = []
    for row in rows[1:]:
        vals = dict(zip(header, row[1:]))
        kw = {}
        for name in COLUMNS:
            raw, t = vals[name], str(kinds[name])
            if raw == "":
                kw[name] = None
            elif t.startswith("bool"):
                kw[name] = raw == "1"
            elif t.startswith("int"):
                kw[name] = int(raw)
            elif t.startswith("float"):
                kw[name] = float(raw)
            else:
                kw[name] = raw
        out.append(SweepRecord(**kw))
    return out


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    d: int
    epsilon: float
    replicate: int


def run_cell(make_spec, cell: Cell, seed: int) -> SweepRecord:
    spec: ApproximationSpec = make_spec(cell.d, cell.epsilon)
    gen = rngmod.stream(seed, rngmod.BUILD, spec.payoff.family, cell.d, cell.epsilon, cell.replicate)
    _, report = build_approximator(spec, None, gen)
    return SweepRecord.from_report(report, cell.d, cell.epsilon, spec.payoff.family,
                                   cell.replicate, seed)


def _run_cell_star(args):
    return run_cell(*args)


def run_sweep(make_spec, d_list, eps_list, seed: int, replicates: int = 1,
              workers: int = 1) -> list[SweepRecord]:
    """One build per ``(d, epsilon, replicate)``; rows come back in cell order.

    ``make_spec(d, eps)`` must be picklable when ``workers > 1``.
    """
    cells = [Cell(int(d), float(e), r) for d in d_list for e in eps_list for r in range(replicates)]
    jobs = [(make_spec, c, seed) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell_star, jobs))
    return [_run_cell_star(j) for j in jobs]


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------


@dataclass
class AxisFit:
    exponent: float
    ci_low: float
    ci_high: float
    predicted: float | None


@dataclass
class ScalingFit:
    """Fitted exponents of ``quantity ~ d^a eps^(-b)`` with 95% intervals."""

    quantity: str
    d_axis: AxisFit | None
    eps_axis: AxisFit | None
    points: int


def fit_scaling(records: list[SweepRecord], quantity: str,
                exponents: TheoryExponents | None = None) -> ScalingFit | None:
    """Least squares of ``log quantity`` on ``log d`` and ``log(1/eps)``.

    An axis enters the fit only with at least 3 distinct values among
    successful records.  Returns ``None`` when no axis qualifies.
    """
    good = [r for r in records if r.success and getattr(r, quantity)]
    if not good:
        return None
    logd = np.log([r.d for r in good])
    loge = np.log([1.0 / r.epsilon for r in good])
    y = np.log([float(getattr(r, quantity)) for r in good])
    axes = []
    if len(set(r.d for r in good)) >= 3:
        axes.append(("d", logd))
    if len(set(r.epsilon for r in good)) >= 3:
        axes.append(("eps", loge))
    if not axes:
        return None
    X = np.column_stack([np.ones_like(y)] + [a for _, a in axes])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(y) - X.shape[1]
    if dof > 0:
        resid = y - X @ coef
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.pinv(X.T @ X)
        half = stats.t.ppf(0.975, dof) * np.sqrt(np.diag(cov))
    else:
        half = np.full(X.shape[1], math.inf)

    if quantity == "param_count" and exponents is not None:
        pred = {"d": exponents.d_exponent, "eps": exponents.eps_exponent}
    elif quantity == "n_used":
        pred = {"d": None, "eps": 2.0}
    else:
        pred = {"d": None, "eps": None}
    fits: dict[str, AxisFit] = {}
    for i, (name, _) in enumerate(axes, start=1):
        fits[name] = AxisFit(float(coef[i]), float(coef[i] - half[i]), float(coef[i] + half[i]), pred[name])
    return ScalingFit(quantity, fits.get("d"), fits.get("eps"), len(good))


def format_fit(fit: ScalingFit) -> str:
    parts = [f"{fit.quantity} ({fit.points} points):"]
    for label, ax in (("d-exponent", fit.d_axis), ("eps-exponent", fit.eps_axis)):
        if ax is None:
            continue
        pred = "n/a" if ax.predicted is None else f"{ax.predicted:g}"
        parts.append(f"  {label} = {ax.exponent:.3f} [{ax.ci_low:.3f}, {ax.ci_high:.3f}]  predicted {pred}")
    return "\n".join(parts)


def fit_theta(make_spec, d_list, seed: int, count: int = 200_000) -> tuple[float, list[float]] | None:
    """Moment-growth exponent ``theta`` of the sweep's measures.

    Fits ``log int ||x||^(p v) nu_d(dx) = theta p log d + const`` over ``d_list``
    (at least 3 distinct values).  A diagnostic only; it does not enter the
    build.  Returns ``(theta, moments)``.
    """
    ds = sorted(set(int(d) for d in d_list))
    if len(ds) < 3:
        return None
    moments = []
    p = None
    for d in ds:
        spec = make_spec(d, 1.0)
        p = spec.p
        gen = rngmod.stream(seed, rngmod.EVAL, "theta", d)
        moments.append(norm_moment(spec.measure, spec.p * spec.v, count, gen).estimate)
    slope = float(np.polyfit(np.log(ds), np.log(moments), 1)[0])
    return slope / p, moments
