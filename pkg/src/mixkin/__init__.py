"""Discrete-velocity simulation of gas mixtures with a space-dependent hybrid
Boltzmann/BGK collision model."""
from .collision_bgk import bgk_coefficients, bgk_operator, exchange_rates_closed_form
from .collision_boltzmann import CollisionPair, KernelModel, boltzmann_operator, boltzmann_pair
from .config import RunConfig, parse_config, parse_config_text
from .errors import MixkinError
from .grid import build_angular_quadrature, build_spatial_grid, build_velocity_grid
from .hybrid import MixtureSpec, SelectorField, collision_rhs, entropy_production, h_functional, hybrid_rhs
from .moments import (
    SpeciesMoments,
    SpeciesParams,
    global_moments,
    maxwellian,
    moment_matched_maxwellian,
    species_moments,
)
from .solver import KineticState, TimeControls, collision_step, integrate, transport_step

__version__ = "0.1.0"
