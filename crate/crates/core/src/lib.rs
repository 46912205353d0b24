//! Time-domain electromagnetic inverse scattering in two dimensions.
//!
//! The crate covers the full classical pipeline: seeded phantom families
//! ([`phantom`]), a TM_z FDTD solver with CPML ([`fdtd`]) driven by the
//! measurement geometry in [`scenario`], calibrated noise ([`noise`]),
//! adjoint-gradient reconstruction ([`inversion`]), image and waveform
//! metrics ([`metrics`]), and on-disk datasets plus the command-line front end
//! ([`store`], [`cli`]). [`oracle`] holds the analytic cylinder solution used
//! to validate the solver.

pub mod cli;
pub mod error;
pub mod fdtd;
pub mod inversion;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod phantom;
pub mod rng;
pub mod scenario;
pub mod store;

pub use error::{Error, Result};
