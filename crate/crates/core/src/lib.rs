//! Symbolic Rayleigh-Schrödinger perturbation theory for a non-degenerate
//! ground state, its stochastic (random-walk) interpretation, and a
//! reptation quantum Monte Carlo sampler that resums the series.
//!
//! The crate is organised bottom-up:
//!
//! - [`symexpr`]: exact-rational polynomials in the formal variables `g_m^(k)`.
//! - [`rspt`]: ordinary Bell polynomials and the reduced-cumulant recursion
//!   producing the energy corrections `ε_n` as [`GExpression`]s.
//! - [`spectral`]: numeric values of `g_m^(k)` for finite split Hamiltonians,
//!   plus Laurent and Taylor oracles built on brute force and diagonalization.
//! - [`walker`]: trial wavefunctions, potentials, the Langevin walker.
//! - [`estimators`]: VMC means with honest errors, the autocorrelation
//!   integral, action moments and their cumulant slopes.
//! - [`rqmc`]: the reptile, reptation moves and mixed/pure estimators.

pub mod error;
pub mod estimators;
pub mod rng;
pub mod rqmc;
pub mod rspt;
pub mod spectral;
pub mod symexpr;
pub mod walker;

pub use error::{Error, Result};
pub use estimators::{ActionMoments, EstimateWithError, LocalEnergySeries};
pub use rqmc::{DirectionPolicy, Reptile, RqmcConfig, RqmcRunResult};
pub use rspt::{PTOrderResult, PerturbationSeries};
pub use spectral::{SpectralModel, TaylorCoefficients};
pub use symexpr::{GExpression, GMonomial, GVar};
pub use walker::{GaussianTrial, Langevin, Potential, TrialWavefunction, WalkerState};
