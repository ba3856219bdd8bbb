"""Grid densities, Newtonian potentials and energy functionals."""
from .energy import (
    COUPLINGS,
    CrossField,
    EnergyBreakdown,
    Patch,
    PatchSystem,
    cross_interaction,
    energies,
    inertia_expansion,
    interpolation_check,
    internal_energy,
    lp_norm,
    moment_of_inertia,
    pair_interaction_via_far_field,
    rotational_energy,
    self_interaction,
)
from .grid import GridDensity, GridField, SnapshotFormatError, make_grid, read_snapshot, write_snapshot
from .potential import (
    POTENTIAL_BOUND_CONSTANT,
    direct_sum_potential,
    far_field_error_bound,
    moments,
    potential,
    potential_at_external,
    potential_bound,
    potential_values,
    self_cell_kernel,
    tidal_tensor,
    unit_cube_inverse_distance,
)
