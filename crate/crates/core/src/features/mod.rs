//! Daily aggregates, personalized glucose and the feature-set registry,
//! assembled into a [`DesignMatrix`].

mod aggregates;
mod design;
mod personalize;
mod registry;

use thiserror::Error;

pub use aggregates::{daily_aggregates, DailyAggregates, EVENING};
pub use design::{
    build_design_matrix, prepare_nights, DesignMatrix, FeatureOptions, FeatureReport,
    PreparedNights, Standardizer,
};
pub use personalize::{personal_factor, personalize_glucose, PersonalScale, Personalization};
pub use registry::{
    reduced_channels, AggChannel, AggKind, FeatureSetName, FeatureSetSpec, StaticFeature,
    TemporalFeature, REGISTRY_VERSION,
};

use crate::preprocess::PreprocessError;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature set needs channel `{0}`, which the cohort does not contain")]
    MissingChannel(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}
