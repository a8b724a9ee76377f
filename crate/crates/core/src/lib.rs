//! Simulation and estimation of mobility functions from microscopic
//! fluctuation data.
//!
//! Three model classes share one estimator: the symmetric simple exclusion
//! process ([`ssep`]), independent Brownian particles ([`brownian`]), and a
//! fluctuating-hydrodynamics SPDE with correlated conservative noise
//! ([`fhd`]). For each, [`estimate`] forms the quadratic-variation estimate
//! `(1/h) E (X(t+h, phi) - X(t, phi))^2` of the fluctuation field and compares
//! it with the mobility functional `<grad phi, m(rho(t)) grad phi>` computed
//! exactly in [`analytic`].

pub mod analytic;
pub mod brownian;
pub mod error;
pub mod estimate;
pub mod fhd;
pub mod harness;
pub mod lattice;
pub mod rng;
pub mod spectral;
pub mod ssep;

pub use analytic::{JumpWeight, Mobility};
pub use brownian::BmVariance;
pub use error::{Error, Result};
pub use estimate::{EstimateRecord, ModelConfig, QvRequest, RateFit, RecordStatus};
pub use lattice::{GridField, Torus, TrigExpr};
