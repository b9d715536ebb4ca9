//! ADASYN oversampling on flattened rows and a two-component PCA.

mod adasyn;
mod flatten;
mod pca;

use thiserror::Error;

pub use adasyn::{adasyn, apportion, AdasynConfig, Balanced};
pub use flatten::{
    balance_design_matrix, flatten_for_balance, unflatten, BalancedMatrix, FlatLayout, SYNTHETIC_ID,
};
pub use pca::{pca2, symmetric_eigen, PcaProjection};

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("cannot oversample: minority class has {0} sample(s), need at least 2")]
    Impossible(usize),
    #[error("balance configuration: {0}")]
    Config(String),
}
