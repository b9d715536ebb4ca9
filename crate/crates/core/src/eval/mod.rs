//! Cross-validated evaluation: fold splitting, AUROC/F1, the per-fold
//! standardize/balance/fit/score loop, the transfer protocol and reports.

mod experiment;
mod metrics;
pub mod report;
mod split;
mod transfer;

use thiserror::Error;

pub use experiment::{
    balance_train, cross_validate, fit_model, run_experiment, CellContext, CellResult, CellScores,
    ExperimentConfig, ExperimentResult, FittedModel, Scorer, DEFAULT_SEEDS,
};
pub use metrics::{auroc, f1_at_threshold, MetricReport, ThresholdMetrics};
pub use split::{group_kfold, stratified_kfold, FoldSplit};
pub use transfer::{
    chronological_split, glucose_sequences, pretrain_backbone, run_transfer, source_matrix,
    FrozenCheck, PretrainReport, TransferConfig, TransferResult,
};

use crate::balance::BalanceError;
use crate::features::FeatureError;
use crate::models::ModelError;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot stratify: {count} {} rows for {k} folds", if *positive { "positive" } else { "negative" })]
    StratificationImpossible {
        positive: bool,
        count: usize,
        k: usize,
    },
    #[error("metric undefined: only one class present")]
    UndefinedMetric,
    #[error("evaluation configuration: {0}")]
    Config(String),
    #[error("seed {seed}, fold {fold}: {message}")]
    Cell {
        seed: u64,
        fold: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
