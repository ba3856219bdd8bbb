"""Constrained minimization of the rotating energy over two admissible balls."""
from .config import ConfigError, SolverConfig, config_from_mapping, dump_config, load_config
from .domains import DomainPair, make_domains
from .scf import (
    InfeasibleCapError,
    InfeasibleGeometryError,
    MinimizerResult,
    effective_potential,
    evaluate_fields,
    minimize,
    relax_separation,
    scf_step,
    seed_density,
    solve_multiplier,
)
from .residuals import el_residual, el_residual_values, ep_residual, ep_residual_parts, interior_support
from .io import dumps, result_to_dict, write_result
