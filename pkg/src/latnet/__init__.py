"""Capacity bounds and nested-lattice coding simulations for relay networks
with interference.

Layout:
    network   graph model, cuts, time expansion, JSON ingestion
    bounds    Gaussian upper/achievable/gap bounds, cut-pair rate DP
    lattice   exact lattice geometry and decoding
    chain     nested lattice chains (integer scalings + mod-p fine code)
    macsim    dithered lattice MAC Monte Carlo
    netsim    end-to-end multicast simulation with replay decoding
    ffield    finite-field channels, codes, capacity, simulation
    cli       command-line front end
"""

from .bounds import (
    RateReport,
    cut_pair_rate,
    expanded_min_cut_rate,
    expanded_min_cut_sandwich,
    gaussian_achievable,
    gaussian_gap_bound,
    gaussian_upper_bound,
    rate_report,
    steady_cut_min,
    submodular_chain_check,
)
from .chain import (
    CosetLeaderSet,
    LatticeChain,
    build_chain,
    chain_from_spec,
    choose_code_below,
    mac_rate_targets,
)
from .errors import (
    ChainMismatchError,
    GuardError,
    InfeasibleToleranceError,
    NetworkValidationError,
    SchemaError,
)
from .ffield import (
    LinearCode,
    SymmetricDmc,
    finite_field_capacity,
    ml_decode,
    random_linear_code,
    run_finite_field_multicast,
    simulate_code,
)
from .lattice import (
    Lattice,
    LatticeGeometry,
    checkerboard_lattice,
    gosset_lattice,
    hexagonal_lattice,
    integer_lattice,
    lattice_from_spec,
    lattice_geometry,
    poltyrev_exponent,
    second_moment,
    volume_to_noise_ratio,
)
from .macsim import (
    MacTrial,
    effective_noise_stats,
    mac_trials,
    mmse_coefficient,
    modular_sum,
    modular_sum_statistics,
    simulate_mac,
)
from .netsim import collision_probabilities, multicast_trials, run_multicast
from .network import (
    Cut,
    RelayNetwork,
    TimeExpandedNetwork,
    build_network,
    cut_boundaries,
    enumerate_cuts,
    load_network,
    network_from_dict,
    random_gaussian_network,
    random_tree_network,
    time_expand,
)

__version__ = "0.1.0"
