//! Domain types and the pointwise equations of the biofilm model.

mod equations;
mod forcing;
mod params;
mod state;

pub use equations::{
    barrier_curvature, barrier_force, barrier_potential, dead_fractions, dissipation_potential,
    dissipation_forces, dissipation_rate, free_energy_density, interaction_drive, jacobian, living_fractions, residual,
    Rates, Residual,
};
pub use forcing::ForcingSignal;
pub use params::{ModelParams, DEFAULT_BARRIER_SCALE, DEFAULT_EMPTY_VISCOSITY};
pub use state::{SimState, BOUND_CLAMP};
