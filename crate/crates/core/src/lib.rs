//! Nocturnal hypoglycemia prediction for type 1 diabetes time series.
//!
//! The pipeline runs in stages, one module each:
//!
//! * [`ingest`]: CSV bundle and Ohio-style XML parsers into a [`RawCohort`].
//! * [`synthgen`]: seeded synthetic cohorts with a plantable night signal.
//! * [`preprocess`]: plausibility filtering and the 10:00-22:00 15-minute grid.
//! * [`labeling`]: the 22:00-07:00 night outcome from CGM runs and SMBG points.
//! * [`features`]: daily aggregates, personalized glucose, feature-set registry.
//! * [`balance`]: ADASYN oversampling and a two-component PCA.
//! * [`models`]: random forest, LSTM/CNN networks, focal loss, transfer.
//! * [`eval`]: stratified cross-validation, AUROC/F1 and experiment reports.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

// Validation uses `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod scalar;
pub mod time;

pub mod balance;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod labeling;
pub mod models;
pub mod preprocess;
pub mod synthgen;

/// Design matrix in double precision.
pub type DesignMatrix64 = features::DesignMatrix<f64>;
/// Design matrix in single precision.
pub type DesignMatrix32 = features::DesignMatrix<f32>;
pub type Network64 = models::Network<f64>;
pub type Network32 = models::Network<f32>;
pub type TransferNet64 = models::TransferNet<f64>;
pub type TransferNet32 = models::TransferNet<f32>;
pub type TrainedModel64 = models::TrainedModel<f64>;
pub type TrainedModel32 = models::TrainedModel<f32>;

pub use ingest::RawCohort;
pub use scalar::Real;
