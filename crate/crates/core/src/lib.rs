//! Stochastic stability analysis of a reduced alpha-Omega galactic dynamo.
//!
//! The crate covers the nonlinear SDE and its equilibria ([`model`]), the top
//! Lyapunov exponent of the linearization by three analytic routes
//! ([`lyapunov`]), exponential mean-square stability ([`meansquare`]), Monte
//! Carlo estimators ([`sde`]) and parameter-plane scans ([`regions`]).

pub mod error;
pub mod lyapunov;
pub mod meansquare;
pub mod model;
pub mod quadrature;
pub mod regions;
pub mod roots;
pub mod sde;
pub mod specfun;

pub use error::{Error, Result};
pub use lyapunov::{LyapunovResult, Method};
pub use meansquare::{Criticality, MsReport};
pub use model::{Equilibrium, FieldState, LinearSystem, ModelParams};
pub use regions::{BoundaryKind, BoundaryPoint, GridAxis, LambdaSign, RegionRecord, ScanSpec};
pub use sde::{McEstimate, RngSpec, SimConfig};
pub use specfun::SeriesControl;
