"""``kolmonet build|price|sweep|verify [--config PATH] [--key value ...]``"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .ann import NetworkFormatError, ShapeError, load_network, realize, save_network
from .config import (
    Config,
    ConfigError,
    check_positive,
    load_config,
    measure_from_config,
    model_from_config,
    payoff_from_config,
)
from .constructor import ApproximationSpec, TheoryExponents, build_approximator
from .oracles import DEFAULT_ORACLE_SAMPLES, oracle_for
from .sweep import SweepRecord, fit_scaling, fit_theta, format_fit, records_to_csv, run_sweep

log = logging.getLogger("kolmonet")


@dataclass
class SpecFactory:
    """Picklable ``(d, eps) -> ApproximationSpec`` built from a configuration."""

    cfg: Config

    def __call__(self, d: int, eps: float) -> ApproximationSpec:
        cfg = self.cfg
        T = cfg.get_float("T", 1.0)
        check_positive(cfg, "T", T)
        model = model_from_config(cfg, d)
        payoff = payoff_from_config(cfg, d)
        return ApproximationSpec(
            model=model, T=T, payoff=payoff, epsilon=eps,
            measure=measure_from_config(cfg, d, model, T),
            p=cfg.get_float("p", 2.0),
            v=cfg.get_float("v", 2.0),
            mode=cfg.get_str("mode", "empirical"),
            max_attempts=cfg.get_int("max_attempts", 24),
            eval_samples=cfg.get_int("eval_samples", 1000),
            oracle_samples=cfg.get_int("oracle_samples", DEFAULT_ORACLE_SAMPLES),
            oracle_seed=cfg.get_int("oracle_seed", 0),
            n_start=cfg.get_int("n_start", 32),
            n_max=cfg.get_int("n_max", 1 << 20),
            theory_n_cap=cfg.get_int("theory_n_cap", 1 << 16),
        )


def _split_overrides(tokens: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or i + 1 >= len(tokens):
            raise ConfigError(f"expected '--key value' pairs, got {tok!r}")
        out[tok[2:]] = tokens[i + 1]
        i += 2
    return out


def _vector_arg(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",") if t.strip()])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_build(cfg: Config, out=None) -> int:
    out = out or sys.stdout
    seed = int(cfg.require("seed"))
    d = cfg.get_int("d")
    if d is None:
        raise ConfigError("missing required key 'd'")
    eps = cfg.get_float("epsilon")
    if eps is None:
        raise ConfigError("missing required key 'epsilon'")
    spec = SpecFactory(cfg)(d, eps)
    exps = TheoryExponents.for_family(spec.payoff.family)
    psi, report = build_approximator(spec, exps, rngmod.stream(seed, rngmod.BUILD, spec.payoff.family, d, eps, 0))
    if psi is not None:
        save_network(psi, cfg.get_str("out", "psi.ann"))
    if report.mode == "theory":
        print(f"theory: C={report.theory_C:.6g} n={report.n_theory} "
              f"log10(n)={report.log10_n_theory:.3f} bound={report.apriori_bound}", file=sys.stderr)
    if report.message:
        print(report.message, file=sys.stderr)
    rec = SweepRecord.from_report(report, d, eps, spec.payoff.family, 0, seed)
    out.write(records_to_csv([rec]))
    ok = report.success and report.measured_lp_error is not None and report.measured_lp_error <= eps
    return 0 if ok else 1


def cmd_price(cfg: Config, x_text: str, network: str | None, both: bool, out=None) -> int:
    out = out or sys.stdout
    x = _vector_arg(x_text)
    net_path = network or cfg.get_str("network")
    psi = load_network(net_path) if net_path else None
    if psi is not None and x.size != psi.input_dim:
        raise ShapeError(f"x has dimension {x.size}, network expects {psi.input_dim}")
    need_oracle = both or psi is None
    oracle_price = None
    if need_oracle:
        d = x.size
        if cfg.has("d") and cfg.get_int("d") != d:
            raise ShapeError(f"x has dimension {d}, config has d={cfg.get_int('d')}")
        T = cfg.get_float("T", 1.0)
        oracle = oracle_for(payoff_from_config(cfg, d), model_from_config(cfg, d), T,
                            n_oracle=cfg.get_int("oracle_samples", DEFAULT_ORACLE_SAMPLES),
                            seed=cfg.get_int("oracle_seed", 0))
        oracle_price = oracle(x)
    if psi is not None and not both:
        print(repr(realize(psi, x)), file=out)
    elif psi is None:
        print(repr(oracle_price), file=out)
    else:
        net_price = realize(psi, x)
        print(f"network={net_price!r} oracle={oracle_price!r} difference={net_price - oracle_price!r}", file=out)
    return 0


def cmd_sweep(cfg: Config, out=None) -> int:
    out = out or sys.stdout
    seed = int(cfg.require("seed"))
    d_list = cfg.get_list("d_list", int) or ([cfg.get_int("d")] if cfg.has("d") else None)
    eps_list = cfg.get_list("eps_list", float) or ([cfg.get_float("epsilon")] if cfg.has("epsilon") else None)
    if not d_list:
        raise ConfigError("missing required key 'd_list' (or 'd')")
    if not eps_list:
        raise ConfigError("missing required key 'eps_list' (or 'epsilon')")
    factory = SpecFactory(cfg)
    factory(d_list[0], eps_list[0])  # validate before spending compute
    records = run_sweep(factory, d_list, eps_list, seed,
                        replicates=cfg.get_int("replicates", 1), workers=cfg.get_int("workers", 1))
    path = cfg.get_str("out", "sweep.csv")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(records_to_csv(records))
    bad = [r for r in records if not r.counts_ok()]
    print(f"wrote {len(records)} records to {path}; {sum(r.success for r in records)} successful; "
          f"{len(bad)} count-bound violations", file=out)
    family = cfg.require("payoff")
    exps = TheoryExponents.for_family(family)
    fitted = False
    for quantity in ("param_count", "n_used"):
        fit = fit_scaling(records, quantity, exps)
        if fit is not None:
            print(format_fit(fit), file=out)
            fitted = True
    if not fitted:
        print("warning: fewer than 3 distinct values on every axis; no scaling fit", file=out)
    theta = fit_theta(factory, d_list, seed)
    if theta is not None:
        print(f"theta fitted from measure moments: {theta[0]:.3f} (predictions use {exps.theta:g})", file=out)
    return 0 if not bad else 1


def cmd_verify(cfg: Config, suite: str, out=None) -> int:
    out = out or sys.stdout
    from .verify import SUITES, run_suite

    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {sorted(SUITES)}")
    seed = cfg.get_int("seed", 0)
    results = run_suite(suite, seed)
    for r in results:
        print(json.dumps(r.as_dict(), sort_keys=True), file=out)
    passed = all(r.passed for r in results)
    print(json.dumps({"suite": suite, "seed": seed, "passed": passed,
                      "checks": len(results), "failures": sum(not r.passed for r in results)}),
          file=out)
    return 0 if passed else 1


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kolmonet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build", "price", "sweep", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        if name == "price":
            p.add_argument("--x", required=True, help="comma-separated input point")
            p.add_argument("--network", default=None, help="saved network file")
            p.add_argument("--both", action="store_true", help="print network, oracle and difference")
        if name == "verify":
            p.add_argument("suite", choices=["core", "sde", "mc", "e2e", "all"])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).override(_split_overrides(rest))
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "price":
            return cmd_price(cfg, args.x, args.network, args.both)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_verify(cfg, args.suite)
    except (ConfigError, ShapeError, NetworkFormatError, OSError, ValueError) as exc:
        print(f"kolmonet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
