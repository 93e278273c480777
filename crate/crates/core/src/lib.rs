//! Periodic steady states of a forced, boundary-damped anharmonic oscillator chain.
//!
//! The chain has sites `x = -N..=N`, on-site pinning `omega0^2 q^2 / 2 + nu V(q)`,
//! nearest-neighbour coupling `(q_x - q_{x-1})^2 / 2 + nu U(q_x - q_{x-1})`, friction
//! `gamma` on both end sites, and a periodic drive applied at the centre site.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod chain;
pub mod diagnostics;
pub mod greens;
pub mod linalg;
pub mod potential;
pub mod quad;
pub mod scalar;
pub mod spectral;
pub mod time_domain;

pub use chain::{ChainConfig, ChainConfigBuilder, ChainState, ConfigError, ForcingSpectrum};
pub use potential::{Potential, PotentialError, PotentialKind};
pub use scalar::{Cx, Entry, Real};

pub type Config = chain::ChainConfig<f64>;
pub type State = chain::ChainState<f64>;
pub type Forcing = chain::ForcingSpectrum<f64>;
pub type Pot = potential::Potential<f64>;
pub type Field = spectral::HarmonicField<f64>;
pub type Kernels = greens::GreensKernelSet<f64>;
pub type Solution = spectral::PeriodicSolution<f64>;
pub type Traj = time_domain::Trajectory<f64>;
