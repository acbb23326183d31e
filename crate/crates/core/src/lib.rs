//! Mean-field simulation of stimulated Raman adiabatic passage in an
//! atom-molecule condensate.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix `f64`, which is what the CLI and the
//! acceptance tests use.
//!
//! Units: time in μs and angular frequencies in rad/μs.

pub mod cpt;
pub mod eigen;
pub mod error;
pub mod integrator;
pub mod model;
pub mod pulse;
pub mod scalar;
pub mod stability;
pub mod sweep;

pub use cpt::{chemical_potential, cpt_populations, cpt_state, generalized_delta, CptPoint};
pub use error::{IntegrationError, ModelError, StabilityError, SweepError};
pub use integrator::{default_window, efficiency, evolve, Dopri5, EvolveOptions, Sample, Trajectory};
pub use model::{collision_rates_from_density, rhs, Amplitudes, ComplexAmp, Drive, StateVector, SystemParams};
pub use pulse::{delta2, delta_schedule, drive_at, Pulse, PulsePair};
pub use scalar::{linspace, Scalar};
pub use stability::{classify, linearize_at_cpt, map, rotating_frame_rhs, StabilityMap, StabilityOptions, StabilityResult};
pub use sweep::{optimize, sweep_eta, OptimizeResult, SweepCell, SweepResult};

pub type Params = model::SystemParams<f64>;
pub type Pulses = pulse::PulsePair<f64>;
pub type State = model::StateVector<f64>;
pub type Amps = model::Amplitudes<f64>;
pub type Cpt = cpt::CptPoint<f64>;
pub type Traj = integrator::Trajectory<f64>;
pub type Stability = stability::StabilityResult<f64>;
pub type Map = stability::StabilityMap<f64>;
pub type Sweep = sweep::SweepResult<f64>;

pub type ParamsF32 = model::SystemParams<f32>;
pub type TrajF32 = integrator::Trajectory<f32>;
