//! Reserve/backlog dynamics of a grid with deferrable demand.
//!
//! The chain `X(t) = (R(t), Z(t))` tracks the operating reserve and the
//! backlog of frustrated demand. A fraction `λ` of the backlog is expressed
//! each slot and a fraction `μ` evaporates (negative `μ` means the backlog
//! grows while waiting). See [`dynamics`] for the map, [`lyapunov`] for the
//! drift analysis, [`montecarlo`] for seeded experiments and [`thermal`] for
//! the building model behind negative evaporation.

mod exact;

pub mod dynamics;
pub mod lyapunov;
pub mod montecarlo;
pub mod rng;
pub mod stats;
pub mod thermal;

pub use dynamics::{
    classify_region, ramp_control, step, step_matrix, ParamError, ParamSet, Params, Region, Regime,
    State, StepRecord,
};
pub use montecarlo::{simulate, SimConfig, SimError, SimOutput};
pub use rng::RNG_ALGORITHM;
pub use stats::Estimate;
