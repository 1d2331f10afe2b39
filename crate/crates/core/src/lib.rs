//! Stationary states, modal spectra and stability thresholds for a free-boundary
//! Stokes tumor-growth model on the ball.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collocation;
pub mod eps_spectrum;
pub mod error;
pub mod geometry;
pub mod model;
pub mod roots;
pub mod simulate;
pub mod spectrum;
pub mod stationary;
pub mod stokes;

pub use collocation::{GridKind, Parity, RadialGrid};
pub use error::{Error, Result};
pub use geometry::{
    hanzawa_map, laplace_beltrami_multiplier, mean_curvature_perturbed, normal_perturbed, HanzawaMapSpec,
    SphereFunction, SphereQuadrature, SurfaceField,
};
pub use model::{
    make_rate_function, validate_assumptions, AssumptionReport, Family, ModelParams, RateFunction, RateSpec,
};
pub use simulate::{
    evolve_linear_mode, fit_exponential_rate, simulate_radial_nonlinear, slow_manifold_profile, RadialOptions,
    RadialSimulation, Stepper,
};
pub use spectrum::{
    alpha0, alpha_l_of_gamma, alpha_slope, gamma_l, gamma_prefactor, solve_fl, spectral_summary, DegreeEntry,
    SpectralSummary,
};
pub use stationary::{
    find_stationary_radius, growth_integral, pressure_profile, rescale_to_unit, solve_nutrient_profile,
    unit_ball_state, velocity_profile, Residuals, StationaryOptions, StationaryState, UnitBallState,
};
