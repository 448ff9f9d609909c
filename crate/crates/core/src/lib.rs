//! Fairness-aware feature acquisition.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: dense symmetric linear algebra and the standard normal CDF.
//! - [`moments`]: class-conditional means and covariances per group.
//! - [`auc`]: binormal, Fisher-discriminant and empirical AUC, bias.
//! - [`scoring`]: FLD and logistic scoring rules.
//! - [`acquisition`]: the round loop and every selection strategy.
//! - [`noisy`]: bias-non-increasing acquisition through a noisy feature.
//! - [`bounds`]: improvement lower bounds and lemma checks.
//! - [`datagen`]: seeded synthetic data with known moments.
//! - [`harness`]: CSV ingestion, experiment configuration and reports.

pub mod acquisition;
pub mod auc;
pub mod bounds;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod moments;
pub mod noisy;
pub mod numkit;
pub mod scoring;

pub use acquisition::{AcquisitionState, AucSource, Batch, RoundRecord, Selection, Strategy};
pub use auc::{AucValue, Binormal1D};
pub use bounds::BoundInputs;
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, Report};
pub use moments::{ClassStats, Group, GroupedColumns, Population};
pub use noisy::NoisePlan;
pub use numkit::{CholeskyFactor, SymMatrix};
pub use scoring::{ScoreColumn, ScoringKind, ScoringRule};
