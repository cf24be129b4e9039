//! Surrogate-based optimization over finite integer lattices.
//!
//! The crate contains the search-space mapping ([`domain`]), two surrogate
//! models ([`rbf`], [`gp`]), the proposal strategies ([`acquisition`]), the
//! sequential search loop ([`driver`]), synthetic test objectives
//! ([`testbed`]) and a time-series forecasting objective built from
//! [`timeseries`], [`mlp`] and [`objective`]. The [`experiment`] module runs
//! multi-trial comparisons and writes their output files.

pub mod acquisition;
pub mod domain;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod hydrograph;
pub mod mlp;
pub mod objective;
pub mod rbf;
pub mod seed;
pub mod testbed;
pub mod timeseries;

pub use acquisition::{GaConfig, WeightCycle};
pub use domain::{DimensionSpec, IntegerDomain, LatticePoint};
pub use driver::{run_hpo, EvaluationRecord, ExpensiveObjective, HpoSettings, OptimizationTrace, Strategy};
pub use error::{Error, Result};
pub use gp::{fit_gp, GpModel};
pub use mlp::{build_mlp, train, Mlp, MlpArchitecture, TrainConfig};
pub use rbf::{fit_rbf, RbfModel};
pub use testbed::SyntheticObjective;
pub use timeseries::{build_lag_samples, DailySeries, LagSampleSet, ScalingSpec};
