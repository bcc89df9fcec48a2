"""Numerical laboratory for dark multi-solitons of the easy-plane
Landau-Lifshitz equation on the line, in its spin and hydrodynamic frames."""

from .grid import (
    VACUUM_GUARD,
    Grid,
    HydroState,
    RealField,
    SpinState,
    VacuumBreakdown,
    integrate,
    spatial_derivative,
    spin_derivative,
    window_norm,
    x_norm,
)
from .solitons import (
    MultiSolitonConfig,
    SolitonParams,
    SpeedGaps,
    extract_hydro,
    multi_soliton_sum,
    reconstruct_spin,
    soliton_energy,
    soliton_hydro,
    soliton_momentum,
    soliton_nu,
    soliton_spin,
    soliton_spin_state,
    speed_gaps,
    traveling_wave_residual,
    winding_number,
)
from .functionals import (
    DiagnosticsSample,
    LocalizedMomentumSpec,
    SeamSupportWarning,
    diagnostics_to_csv,
    energy_hydro,
    energy_spin,
    localized_momentum,
    localized_momentum_rate,
    momentum,
    phi_bump,
    phi_bump_d1,
    phi_bump_d3,
    virial_U,
    virial_linear_identity,
    virial_rate,
)
from .dynamics import (
    BlowupError,
    IntegratorConfig,
    Trajectory,
    apply_B,
    apply_J,
    apply_L,
    evolve,
    load_trajectory,
    rhs_hll,
    rhs_spin,
    save_trajectory,
    step_rk4,
)
from .modulation import (
    ChiCache,
    HessianOperator,
    ModulationError,
    ModulationResult,
    ModulationTrack,
    NegativeMode,
    grad_EP,
    hessian_apply,
    modulate,
    negative_mode,
    track_modulation,
    track_to_csv,
)
from .scenarios import (
    ConfigError,
    DiagnosticsConfig,
    Perturbation,
    RunReport,
    ScenarioConfig,
    Verdict,
    build_initial,
    load_scenario,
    random_smooth_pair,
    run_scenario,
    scenario_from_dict,
    scenario_from_json,
    write_report,
)

__version__ = "0.1.0"
