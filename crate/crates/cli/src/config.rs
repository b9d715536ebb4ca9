//! The pipeline configuration file. Every section is optional; missing
//! keys take their defaults and unknown keys are schema errors.

use std::path::{Path, PathBuf};

use nocturne::eval::{ExperimentConfig, Scorer, TransferConfig};
use nocturne::features::{FeatureSetName, Personalization};
use nocturne::labeling::LabelConfig;
use nocturne::models::ModelKind;
use nocturne::synthgen::GlucoseProcessParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Evaluate,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Defaults to the number of available cores.
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub precision: Precision,
    pub stages: Vec<Stage>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 7,
            workers: None,
            out: None,
            precision: Precision::F64,
            stages: vec![Stage::Evaluate],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    #[default]
    Synthetic,
    /// A directory in the CSV bundle layout.
    Bundle,
    /// One Ohio XML file, or a directory of `*-train.xml` / `*-test.xml`.
    Ohio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: SourceKind,
    pub path: Option<PathBuf>,
    /// Synthetic profile name: `inhouse-like` or `ohio-like`.
    pub profile: String,
    /// Overrides `run.seed` for the generator.
    pub seed: Option<u64>,
    pub signal_strength: Option<f64>,
    pub n_patients: Option<usize>,
    pub nights_per_patient: Option<usize>,
    pub process: GlucoseProcessParams,
}

impl DataSection {
    pub fn synthetic(profile: &str) -> Self {
        DataSection {
            source: SourceKind::Synthetic,
            path: None,
            profile: profile.into(),
            seed: None,
            signal_strength: None,
            n_patients: None,
            nights_per_patient: None,
            process: GlucoseProcessParams::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection::synthetic("inhouse-like")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// `zero`, `ffill`, `linear` or `drop:<fraction>`.
    pub imputation: String,
    /// TOML file of `channel = [min, max]` overrides.
    pub ranges: Option<PathBuf>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            imputation: "zero".into(),
            ranges: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub sets: Vec<FeatureSetName>,
    pub personalization: Personalization,
    /// Matrix the transfer model is fine-tuned on.
    pub transfer_set: FeatureSetName,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            sets: FeatureSetName::ALL_SETS.to_vec(),
            personalization: Personalization::default(),
            transfer_set: FeatureSetName::Reduced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub models: Vec<Scorer>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            models: ModelKind::ALL.into_iter().map(Scorer::Model).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub data: DataSection,
    pub preprocess: PreprocessSection,
    pub label: LabelConfig,
    pub features: FeaturesSection,
    pub evaluate: EvaluateSection,
    pub experiment: ExperimentConfig,
    pub transfer: TransferConfig,
    pub transfer_source: DataSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            run: RunSection::default(),
            data: DataSection::default(),
            preprocess: PreprocessSection::default(),
            label: LabelConfig::default(),
            features: FeaturesSection::default(),
            evaluate: EvaluateSection::default(),
            experiment: ExperimentConfig::default(),
            transfer: TransferConfig::default(),
            transfer_source: DataSection::synthetic("ohio-like"),
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

impl Config {
    /// Parses TOML text. Errors carry the dotted path of the offending field.
    pub fn from_toml(text: &str) -> Result<Config, CliError> {
        let value: toml::Value = text
            .parse::<toml::Table>()
            .map(toml::Value::Table)
            .map_err(|e| schema("<file>", e.message().to_string()))?;
        let cfg: Config = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            schema(
                if path == "." { "<root>" } else { &path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text)
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.workers == Some(0) {
            return Err(schema("run.workers", "must be at least 1"));
        }
        for (name, d) in [
            ("data", &self.data),
            ("transfer_source", &self.transfer_source),
        ] {
            if d.source == SourceKind::Synthetic
                && nocturne::synthgen::CohortProfile::by_name(&d.profile, 0).is_none()
            {
                return Err(schema(
                    &format!("{name}.profile"),
                    format!(
                        "unknown profile `{}` (expected inhouse-like or ohio-like)",
                        d.profile
                    ),
                ));
            }
            if d.source != SourceKind::Synthetic && d.path.is_none() {
                return Err(schema(
                    &format!("{name}.path"),
                    "required for bundle and ohio sources",
                ));
            }
            if let Some(s) = d.signal_strength {
                if !(s >= 0.0) {
                    return Err(schema(
                        &format!("{name}.signal_strength"),
                        "must be non-negative",
                    ));
                }
            }
            d.process
                .validate()
                .map_err(|e| schema(&format!("{name}.process"), e.to_string()))?;
        }
        nocturne::preprocess::Imputation::parse(&self.preprocess.imputation)
            .map_err(|e| schema("preprocess.imputation", e.to_string()))?;
        self.label
            .validate()
            .map_err(|e| schema("label", e.to_string()))?;
        if self.features.sets.is_empty() {
            return Err(schema(
                "features.sets",
                "at least one feature set is required",
            ));
        }
        if self.evaluate.models.is_empty() {
            return Err(schema("evaluate.models", "at least one model is required"));
        }
        self.experiment
            .validate()
            .map_err(|e| schema("experiment", e.to_string()))?;
        self.transfer
            .plan
            .validate()
            .map_err(|e| schema("transfer.plan", e.to_string()))?;
        if !(self.transfer.pretrain_fraction > 0.0 && self.transfer.pretrain_fraction < 1.0) {
            return Err(schema("transfer.pretrain_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Canonical JSON rendering, hashed into run manifests.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_model_names_field() {
        let err = Config::from_toml("[evaluate]\nmodels = [\"rfc\", \"xgboost\"]\n").unwrap_err();
        match err {
            CliError::Schema { path, message } => {
                assert_eq!(path, "evaluate.models[1]");
                assert!(message.contains("xgboost"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misspelled_key_is_rejected() {
        let err = Config::from_toml("[experiment]\nk_fold = 5\n").unwrap_err();
        assert!(
            matches!(err, CliError::Schema { ref path, .. } if path.starts_with("experiment")),
            "{err:?}"
        );
    }

    #[test]
    fn semantic_checks() {
        let err = Config::from_toml("[data]\nprofile = \"adult\"\n").unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "data.profile"));
        let err = Config::from_toml("[experiment]\nk_folds = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "experiment"));
    }
}
