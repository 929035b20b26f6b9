//! Minimax risk classifiers for the 0-1 loss.
//!
//! Training builds an uncertainty set of distributions from feature
//! expectations, minimizes the worst-case error probability over it and
//! reports certified upper and lower bounds on the error of the learned rule.
//!
//! ```no_run
//! use mrc::{classifier, dataset};
//!
//! let data = dataset::load_csv("data.csv", false)?;
//! let (train, test) = dataset::stratified_split(&data, 0.2, 7)?;
//! let model = classifier::train(&train, &classifier::FeatureConfig::default(), &classifier::TrainConfig::default())?;
//! println!("minimax risk {:.3}", model.minimax_risk);
//! println!("{:?}", classifier::evaluate(&model, &test)?);
//! # Ok::<(), mrc::Error>(())
//! ```

pub mod array_serde;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod features;
pub mod objective;
pub mod solver;

pub use classifier::{MrcModel, Variant};
pub use dataset::{Dataset, NormalizationStats};
pub use error::{Error, Result};
pub use estimate::{LambdaEstimator, UncertaintySet};
pub use features::{FeatureMap, FeatureMapSpec};
pub use objective::PiecewiseLinearProblem;
pub use solver::{Method, SolverConfig, SolverRun};

/// Artifact version recorded in model files and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
