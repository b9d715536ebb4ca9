//! Classifiers: a class-weighted random forest, LSTM/CNN networks with
//! hand-written gradients, focal loss, Adam with early stopping, and the
//! frozen-backbone transfer model.

mod focal;
mod forest;
pub mod io;
mod layers;
mod network;
mod params;
mod train;
mod transfer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use focal::{focal_loss, focal_loss_logit, FocalLossParams, P_CLAMP};
pub use forest::{ClassWeight, Forest, ForestConfig, MaxFeatures, Node, Tree};
pub use layers::{Conv1d, Dense, Lstm};
pub use network::{NetConfig, NetKind, NetModel, Network};
pub use params::{Grads, Init, Param, ParamSet};
pub use train::{
    batch_loss_grad, mean_focal, net_train, predict_matrix, stratified_holdout, train_net, Adam,
    EarlyStopping, EpochRecord, Rows, StopDecision, TrainConfig, TrainHistory,
};
pub use transfer::{BranchMode, TransferNet, TransferPlan, FROZEN_PREFIX};

use crate::balance::flatten_for_balance;
use crate::features::DesignMatrix;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Parse(String),
}

/// The five compared model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rfc,
    Lstm,
    Cnn,
    DailyLstm,
    DailyCnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Rfc,
        ModelKind::Lstm,
        ModelKind::Cnn,
        ModelKind::DailyLstm,
        ModelKind::DailyCnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rfc => "rfc",
            ModelKind::Lstm => "lstm",
            ModelKind::Cnn => "cnn",
            ModelKind::DailyLstm => "daily-lstm",
            ModelKind::DailyCnn => "daily-cnn",
        }
    }

    /// Column heading used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Rfc => "RFC",
            ModelKind::Lstm => "LSTM",
            ModelKind::Cnn => "CNN",
            ModelKind::DailyLstm => "DailyLSTM",
            ModelKind::DailyCnn => "DailyCNN",
        }
    }

    pub fn net_kind(self) -> Option<NetKind> {
        match self {
            ModelKind::Rfc => None,
            ModelKind::Lstm => Some(NetKind::Lstm),
            ModelKind::Cnn => Some(NetKind::Cnn),
            ModelKind::DailyLstm => Some(NetKind::DailyLstm),
            ModelKind::DailyCnn => Some(NetKind::DailyCnn),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                format!("unknown model `{s}` (expected rfc, lstm, cnn, daily-lstm or daily-cnn)")
            })
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel<T> {
    Forest(Forest),
    Net(Network<T>),
    Transfer(TransferNet<T>),
}

impl<T: Real> TrainedModel<T> {
    /// Positive-class probability per row. Forests see the flattened rows.
    pub fn predict(&self, dm: &DesignMatrix<T>) -> Result<Vec<f64>, ModelError> {
        match self {
            TrainedModel::Forest(f) => f.predict_proba(&flatten_for_balance(dm).0),
            TrainedModel::Net(n) => Ok(predict_matrix(n, dm)),
            TrainedModel::Transfer(t) => Ok(predict_matrix(t, dm)),
        }
    }

    pub fn save(&self) -> String {
        io::save(self)
    }

    pub fn load(text: &str) -> Result<TrainedModel<T>, ModelError> {
        io::load(text)
    }
}
