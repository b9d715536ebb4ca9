use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;
use super::split::{group_kfold, stratified_kfold, FoldSplit};
use super::{mix_seed, EvalError};
use crate::balance::{balance_design_matrix, flatten_for_balance, AdasynConfig, SYNTHETIC_ID};
use crate::features::{DesignMatrix, Standardizer};
use crate::models::{
    stratified_holdout, train_net, Forest, ForestConfig, Init, ModelKind, NetConfig, Network,
    TrainConfig, TrainedModel,
};
use crate::scalar::Real;

/// Seeds used when a configuration does not name its own.
pub const DEFAULT_SEEDS: [u64; 3] = [1311, 4242, 90210];

/// What produces the test-fold scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scorer {
    Model(ModelKind),
    /// Scores every row 0.5.
    Constant,
    /// Scores every row with its true label.
    LabelOracle,
}

impl Scorer {
    pub fn name(self) -> &'static str {
        match self {
            Scorer::Model(k) => k.as_str(),
            Scorer::Constant => "constant",
            Scorer::LabelOracle => "label-oracle",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Scorer {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Scorer> for String {
    fn from(s: Scorer) -> String {
        s.name().to_string()
    }
}

impl FromStr for Scorer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "constant" => Ok(Scorer::Constant),
            "label-oracle" => Ok(Scorer::LabelOracle),
            _ => s.parse().map(Scorer::Model),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub k_folds: usize,
    /// Keep each patient's nights inside one fold.
    pub group_by_patient: bool,
    /// Oversample training rows with ADASYN.
    pub balance: bool,
    /// Oversample the whole matrix before splitting. Lets synthetic rows
    /// reach test folds; only for leakage studies.
    pub leaky_balance: bool,
    pub adasyn: AdasynConfig,
    pub forest: ForestConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: DEFAULT_SEEDS.to_vec(),
            k_folds: 5,
            group_by_patient: false,
            balance: true,
            leaky_balance: false,
            adasyn: AdasynConfig::default(),
            forest: ForestConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.seeds.is_empty() {
            return Err(EvalError::Config("at least one seed is required".into()));
        }
        if self.k_folds < 2 {
            return Err(EvalError::Config("k_folds must be at least 2".into()));
        }
        self.adasyn.validate()?;
        self.forest.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        Ok(())
    }

    fn splits(
        &self,
        dm_y: &[bool],
        groups: &[usize],
        seed: u64,
    ) -> Result<Vec<FoldSplit>, EvalError> {
        if self.group_by_patient {
            group_kfold(dm_y, groups, self.k_folds, seed)
        } else {
            stratified_kfold(dm_y, self.k_folds, seed)
        }
    }
}

/// One seed x fold evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub seed: u64,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// ADASYN rows added to the data the model was fitted on.
    pub n_synthetic_train: usize,
    /// Synthetic rows scored in the test fold; zero unless balancing leaks.
    pub n_synthetic_test: usize,
    pub best_epoch: Option<usize>,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub model: String,
    pub feature_set: String,
    /// Seed-major, fold-minor.
    pub cells: Vec<CellResult>,
    pub mean_auroc: f64,
    pub std_auroc: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    /// Cells whose test fold held a single class; left out of the AUROC summary.
    pub undefined_auroc_cells: usize,
}

/// Population mean and standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

impl ExperimentResult {
    pub fn from_cells(model: &str, feature_set: &str, cells: Vec<CellResult>) -> ExperimentResult {
        let aurocs: Vec<f64> = cells
            .iter()
            .map(|c| c.report.auroc)
            .filter(|a| !a.is_nan())
            .collect();
        let f1s: Vec<f64> = cells.iter().map(|c| c.report.f1()).collect();
        let (mean_auroc, std_auroc) = mean_std(&aurocs);
        let (mean_f1, std_f1) = mean_std(&f1s);
        ExperimentResult {
            model: model.to_string(),
            feature_set: feature_set.to_string(),
            undefined_auroc_cells: cells.len() - aurocs.len(),
            cells,
            mean_auroc,
            std_auroc,
            mean_f1,
            std_f1,
        }
    }
}

/// What a cell's fit-and-score step receives. `train` and `test` are
/// standardized with statistics from the training rows.
pub struct CellContext<'a, T> {
    pub seed: u64,
    pub fold: usize,
    /// Derived from (seed, fold); use for model initialization and sampling.
    pub cell_seed: u64,
    pub train: &'a DesignMatrix<T>,
    pub test: &'a DesignMatrix<T>,
    pub config: &'a ExperimentConfig,
}

/// Scores for the test rows, plus bookkeeping.
pub struct CellScores {
    pub scores: Vec<f64>,
    pub n_synthetic_train: usize,
    pub best_epoch: Option<usize>,
}

/// ADASYN over `dm` when balancing is on. Returns the matrix and the number
/// of synthetic rows.
pub fn balance_train<T: Real>(
    dm: &DesignMatrix<T>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(DesignMatrix<T>, usize), EvalError> {
    if !cfg.balance || cfg.leaky_balance {
        return Ok((dm.clone(), 0));
    }
    let adasyn = AdasynConfig { seed, ..cfg.adasyn };
    let b = balance_design_matrix(dm, &adasyn)?;
    let n_syn = b.synthetic.iter().filter(|&&s| s).count();
    Ok((b.dm, n_syn))
}

/// Runs `fit_score` on every seed x fold cell, in parallel, and returns the
/// cells in seed-major order.
pub fn cross_validate<T, F>(
    dm: &DesignMatrix<T>,
    cfg: &ExperimentConfig,
    fit_score: F,
) -> Result<Vec<CellResult>, EvalError>
where
    T: Real,
    F: Fn(&CellContext<'_, T>) -> Result<CellScores, EvalError> + Sync,
{
    cfg.validate()?;
    let mut plans = Vec::new();
    for &seed in &cfg.seeds {
        let data = if cfg.balance && cfg.leaky_balance {
            let z = Standardizer::fit(dm, &(0..dm.n_rows()).collect::<Vec<_>>()).apply(dm);
            let adasyn = AdasynConfig {
                seed: mix_seed(seed, 0xADA5),
                ..cfg.adasyn
            };
            balance_design_matrix(&z, &adasyn)?.dm
        } else {
            dm.clone()
        };
        let groups = data.patient_groups();
        for split in cfg.splits(&data.y, &groups, seed)? {
            plans.push((seed, split, data.clone()));
        }
    }
    plans
        .par_iter()
        .map(|(seed, split, data)| {
            let wrap = |e: EvalError| EvalError::Cell {
                seed: *seed,
                fold: split.fold_id,
                message: e.to_string(),
            };
            let standardizer = Standardizer::fit(data, &split.train_indices);
            let z = standardizer.apply(data);
            let train = z.select_rows(&split.train_indices);
            let test = z.select_rows(&split.test_indices);
            let ctx = CellContext {
                seed: *seed,
                fold: split.fold_id,
                cell_seed: mix_seed(*seed, split.fold_id as u64 + 1),
                train: &train,
                test: &test,
                config: cfg,
            };
            let out = fit_score(&ctx).map_err(wrap)?;
            if out.scores.len() != test.n_rows() {
                return Err(wrap(EvalError::Config(
                    "scorer returned the wrong number of scores".into(),
                )));
            }
            Ok(CellResult {
                seed: *seed,
                fold: split.fold_id,
                n_train: train.n_rows(),
                n_test: test.n_rows(),
                n_synthetic_train: out.n_synthetic_train,
                n_synthetic_test: test
                    .night_keys
                    .iter()
                    .filter(|(p, _)| p == SYNTHETIC_ID)
                    .count(),
                best_epoch: out.best_epoch,
                report: MetricReport::compute(&out.scores, &test.y),
            })
        })
        .collect()
}

/// A model fitted on standardized rows.
pub struct FittedModel<T> {
    pub model: TrainedModel<T>,
    pub n_synthetic: usize,
    pub best_epoch: Option<usize>,
}

/// Fits one model family on already standardized rows. Forests see the
/// ADASYN-balanced rows; networks hold out a stratified validation share
/// first and only oversample the rows they fit on.
pub fn fit_model<T: Real>(
    kind: ModelKind,
    train: &DesignMatrix<T>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<FittedModel<T>, EvalError> {
    match kind.net_kind() {
        None => {
            let (bal, n_syn) = balance_train(train, cfg, seed)?;
            let fc = ForestConfig { seed, ..cfg.forest };
            let forest = Forest::fit(&flatten_for_balance(&bal).0, &bal.y, &fc)?;
            Ok(FittedModel {
                model: TrainedModel::Forest(forest),
                n_synthetic: n_syn,
                best_epoch: None,
            })
        }
        Some(net_kind) => {
            let (inner, val) =
                stratified_holdout(&train.y, cfg.train.inner_val_fraction, seed ^ 0x5EED);
            let (fit_rows, n_syn) = balance_train(&train.select_rows(&inner), cfg, seed)?;
            let net_cfg = NetConfig {
                kind: net_kind,
                ..cfg.net
            };
            let mut net = Network::<T>::new(
                net_cfg,
                train.n_temporal(),
                train.n_static(),
                Init::Glorot,
                seed,
            )?;
            let tc = TrainConfig { seed, ..cfg.train };
            let history = train_net(&mut net, &fit_rows, &train.select_rows(&val), &tc)?;
            Ok(FittedModel {
                model: TrainedModel::Net(net),
                n_synthetic: n_syn,
                best_epoch: Some(history.best_epoch),
            })
        }
    }
}

fn fit_score<T: Real>(scorer: Scorer, ctx: &CellContext<'_, T>) -> Result<CellScores, EvalError> {
    let test = ctx.test;
    let plain = |scores| {
        Ok(CellScores {
            scores,
            n_synthetic_train: 0,
            best_epoch: None,
        })
    };
    match scorer {
        Scorer::Constant => plain(vec![0.5; test.n_rows()]),
        Scorer::LabelOracle => plain(test.y.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect()),
        Scorer::Model(kind) => {
            let fitted = fit_model(kind, ctx.train, ctx.config, ctx.cell_seed)?;
            Ok(CellScores {
                scores: fitted.model.predict(test)?,
                n_synthetic_train: fitted.n_synthetic,
                best_epoch: fitted.best_epoch,
            })
        }
    }
}

/// Cross-validates one scorer on one design matrix.
pub fn run_experiment<T: Real>(
    dm: &DesignMatrix<T>,
    feature_set: &str,
    scorer: Scorer,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, EvalError> {
    let cells = cross_validate(dm, cfg, |ctx| fit_score(scorer, ctx))?;
    Ok(ExperimentResult::from_cells(
        scorer.name(),
        feature_set,
        cells,
    ))
}
