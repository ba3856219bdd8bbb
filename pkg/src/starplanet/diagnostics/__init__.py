"""Measurements that check computed equilibria against the predicted laws."""
from .geometry import (
    SupportStats,
    boundary_margin,
    l1_to_profile,
    label_components,
    scaling_density,
    support_stats,
    symmetry_check,
)
from .kepler import g_functions, g_gate, kepler_argmin, kepler_energy, separation_ratio, uniform_gap
from .perturb import (
    EnergyDelta,
    ProbeReport,
    ShiftRecord,
    component_shift_test,
    component_threshold,
    draw_perturbation,
    local_min_probe,
    two_blob_system,
)
from .rates import (
    ExponentFit,
    cap_slack,
    energy_rate_check,
    exponent_fit,
    inertia_rate_check,
    lever_ok,
    multiplier_bound_check,
    scaled_energy_gap,
    velocity_check,
)
from .sweep import SweepReport, expand_points, fit_rates, run_point, run_sweep, sweep_from_mapping
