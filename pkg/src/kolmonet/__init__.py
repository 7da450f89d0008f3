"""Constructive ReLU approximators of Black-Scholes prices in d dimensions.

A price ``u(T, x) = E[payoff(X_T^x)]`` is approximated by averaging an exact
payoff network over ``n`` sampled affine solution maps of the underlying
geometric Brownian motion.
"""

from .affine import AffineMap, apply, check_affine, growth_constant, recover_affine
from .ann import (
    Network,
    NetworkFormatError,
    ShapeError,
    dumps_network,
    load_network,
    loads_network,
    nonzero_param_count,
    param_count,
    realize,
    save_network,
)
from .builders import (
    FAMILIES,
    Payoff,
    basket_call_net,
    basket_put_net,
    call_on_max_net,
    call_on_min_net,
    multichannel,
    rainbow_param_count,
)
from .constructor import (
    ApproximationSpec,
    BuildReport,
    TheoryExponents,
    build_approximator,
    error_bound_nicer,
    lp_error,
    theory_constant_C,
    theory_sample_count,
)
from .montecarlo import MeasureSpec, point_cloud, pushforward_lognormal, sample_measure, uniform_box
from .oracles import ClosedFormOracle, MonteCarloOracle, bs_call_1d, bs_put_1d, mc_price, oracle_for
from .sde import BlackScholesModel, MomentBoundInputs, moment_bound, sample_solution_map, sample_terminal_exact

__version__ = "0.1.0"
