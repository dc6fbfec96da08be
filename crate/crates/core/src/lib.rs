//! Minimum-contrast estimation of the drift parameter in linear stochastic
//! PDEs driven by fractional Brownian motion, on a finite spectral
//! truncation: stationary covariances, exact samplers, estimators with
//! their asymptotic constants, and Monte Carlo experiments.

pub mod chaos;
pub mod config;
pub mod covariance;
pub mod embedding;
pub mod error;
pub mod estimators;
pub mod fgn;
pub mod harness;
pub mod io;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod spectral_model;

pub use config::{ModelSpec, ProjectionSpec};
pub use covariance::{AutoCovMatrix, LagTable, SeriesLimit};
pub use embedding::EmbeddingPolicy;
pub use error::{Error, Result};
pub use estimators::{AsymptoticConstants, EstimateReport, EstimatorKind, Normalizer};
pub use harness::{ExperimentKind, ExperimentReport, ExperimentSpec};
pub use io::TrajectoryTable;
pub use simulate::{InitKind, Scheme, SimulationOptions, Trajectory, TrajectoryGrid};
pub use spectral_model::{ModelConfig, NoiseKind, ProjectionVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
