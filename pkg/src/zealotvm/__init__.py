"""Voter model with zealots on directed weighted networks.

Equilibrium opinions and active-link densities, an event-driven simulator to
check them, zealot-placement optimisers with a backfire effect, and a fit of
the model to US House composition data.
"""

__version__ = "0.1.0"

from .network import (Network, NodeRole, generate_barabasi_albert, generate_complete, generate_erdos_renyi,
                      load_network, save_network, validate, zealot_influence)
from .equilibrium import (rho_complete, sigma_complete, solve_activation, solve_opinions, transition_rates)
from .simulate import SimulationConfig, replicate, simulate
from .optimize import (BackfireSpec, solve_p1_target, solve_p2_diversity_complete, solve_p3_active_complete,
                       solve_p_diversity_general)
from .congress import alpha_sweep, empirical_rho, empirical_sigma, estimate_zealots, load_series

__all__ = [
    "Network", "NodeRole", "generate_barabasi_albert", "generate_complete", "generate_erdos_renyi",
    "load_network", "save_network", "validate", "zealot_influence",
    "rho_complete", "sigma_complete", "solve_activation", "solve_opinions", "transition_rates",
    "SimulationConfig", "replicate", "simulate",
    "BackfireSpec", "solve_p1_target", "solve_p2_diversity_complete", "solve_p3_active_complete",
    "solve_p_diversity_general",
    "alpha_sweep", "empirical_rho", "empirical_sigma", "estimate_zealots", "load_series",
]
