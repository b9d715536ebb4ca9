use std::collections::BTreeMap;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::experiment::{
    balance_train, cross_validate, CellScores, ExperimentConfig, ExperimentResult, Scorer,
};
use super::metrics::auroc;
use super::{mix_seed, run_experiment, EvalError};
use crate::features::{
    DesignMatrix, FeatureOptions, FeatureSetName, FeatureSetSpec, PreparedNights, Standardizer,
    TemporalFeature,
};
use crate::models::{
    predict_matrix, stratified_holdout, train_net, Init, ModelKind, NetConfig, NetKind, Network,
    TrainConfig, TrainHistory, TransferNet, TransferPlan,
};
use crate::preprocess::TemporalChannel;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    /// Backbone architecture; `kind` is forced to LSTM.
    pub pretrain_net: NetConfig,
    pub pretrain_train: TrainConfig,
    /// Per-patient chronological share of nights used for pretraining when
    /// the source cohort has no predefined split.
    pub pretrain_fraction: f64,
    pub plan: TransferPlan,
    /// Also cross-validate a from-scratch LSTM on the same matrix.
    pub compare_scratch: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            pretrain_net: NetConfig::default(),
            pretrain_train: TrainConfig::default(),
            pretrain_fraction: 0.8,
            plan: TransferPlan::default(),
            compare_scratch: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrainReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub val_auroc: f64,
    pub frozen_checksum: String,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrozenCheck {
    pub seed: u64,
    pub fold: usize,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferResult {
    pub transfer: ExperimentResult,
    pub scratch: Option<ExperimentResult>,
    pub pretrain: Vec<PretrainReport>,
    pub frozen: Vec<FrozenCheck>,
}

impl TransferResult {
    /// Every fold saw the backbone exactly as pretrained for its seed.
    pub fn frozen_intact(&self) -> bool {
        self.frozen.iter().all(|c| {
            c.before == c.after
                && self
                    .pretrain
                    .iter()
                    .any(|p| p.seed == c.seed && p.frozen_checksum == c.before)
        })
    }
}

/// Per patient, the first `ceil(fraction * n)` nights by date go to training
/// and the rest to validation.
pub fn chronological_split<T>(dm: &DesignMatrix<T>, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut by_patient: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (p, _)) in dm.night_keys.iter().enumerate() {
        by_patient.entry(p.as_str()).or_default().push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for rows in by_patient.values_mut() {
        rows.sort_by_key(|&i| dm.night_keys[i].1);
        let k = ((fraction * rows.len() as f64).ceil() as usize).min(rows.len());
        train.extend_from_slice(&rows[..k]);
        val.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Glucose-only sequences of prepared nights, the pretraining input. The
/// set name on the ad hoc spec is only a tag.
pub fn source_matrix<T: Real>(nights: &PreparedNights) -> Result<DesignMatrix<T>, EvalError> {
    let spec = FeatureSetSpec {
        name: FeatureSetName::GlucoseNormal,
        temporal: vec![TemporalFeature::Channel(TemporalChannel::Glucose)],
        statics: Vec::new(),
    };
    Ok(nights.build(&spec, &FeatureOptions::default())?.0)
}

/// Keeps only the `glucose` temporal column and drops statics.
pub fn glucose_sequences<T: Real>(dm: &DesignMatrix<T>) -> Result<DesignMatrix<T>, EvalError> {
    let c = dm
        .temporal_names
        .iter()
        .position(|n| n == "glucose")
        .ok_or_else(|| EvalError::Config("source matrix has no glucose channel".into()))?;
    Ok(DesignMatrix {
        x_temporal: dm.x_temporal.slice(s![.., .., c..c + 1]).to_owned(),
        x_static: Array2::zeros((dm.n_rows(), 0)),
        static_defined: Array2::from_elem((dm.n_rows(), 0), true),
        y: dm.y.clone(),
        night_keys: dm.night_keys.clone(),
        temporal_names: vec!["glucose".into()],
        static_names: Vec::new(),
    })
}

/// Trains the glucose-only LSTM backbone on `source` rows `train`,
/// early-stopping on rows `val`. Standardization uses the training rows.
pub fn pretrain_backbone<T: Real>(
    source: &DesignMatrix<T>,
    train: &[usize],
    val: &[usize],
    cfg: &TransferConfig,
    seed: u64,
) -> Result<(Network<T>, PretrainReport), EvalError> {
    let g = glucose_sequences(source)?;
    let z = Standardizer::fit(&g, train).apply(&g);
    let (tr, va) = (z.select_rows(train), z.select_rows(val));
    let net_cfg = NetConfig {
        kind: NetKind::Lstm,
        ..cfg.pretrain_net
    };
    let mut net = Network::<T>::new(net_cfg, 1, 0, Init::Glorot, mix_seed(seed, 0xBAC0))?;
    let tc = TrainConfig {
        seed: mix_seed(seed, 0x7EA1),
        ..cfg.pretrain_train
    };
    let history = if va.n_rows() == 0 {
        let (a, b) = stratified_holdout(&tr.y, tc.inner_val_fraction, tc.seed ^ 0x5EED);
        train_net(&mut net, &tr.select_rows(&a), &tr.select_rows(&b), &tc)?
    } else {
        train_net(&mut net, &tr, &va, &tc)?
    };
    let val_auroc = if va.n_rows() > 0 {
        auroc(&predict_matrix(&net, &va), &va.y).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let frozen_checksum =
        TransferNet::build(&net, &cfg.plan, &cfg.plan.head_features, 0)?.frozen_checksum();
    Ok((
        net,
        PretrainReport {
            seed,
            n_train: tr.n_rows(),
            n_val: va.n_rows(),
            val_auroc,
            frozen_checksum,
            history,
        },
    ))
}

/// Pretrains one backbone per seed on `source`, then cross-validates the
/// frozen-backbone model on `target` with the usual per-fold protocol.
/// `source_split` gives (train, val) rows of `source`; `None` splits each
/// patient chronologically.
pub fn run_transfer<T: Real>(
    source: &DesignMatrix<T>,
    source_split: Option<(Vec<usize>, Vec<usize>)>,
    target: &DesignMatrix<T>,
    feature_set: &str,
    cfg: &TransferConfig,
    exp: &ExperimentConfig,
) -> Result<TransferResult, EvalError> {
    cfg.plan.validate()?;
    exp.validate()?;
    let (train, val) =
        source_split.unwrap_or_else(|| chronological_split(source, cfg.pretrain_fraction));
    let mut backbones = BTreeMap::new();
    let mut pretrain = Vec::new();
    for &seed in &exp.seeds {
        let (net, report) = pretrain_backbone(source, &train, &val, cfg, seed)?;
        backbones.insert(seed, net);
        pretrain.push(report);
    }

    let checks = std::sync::Mutex::new(Vec::new());
    let cells = cross_validate(target, exp, |ctx| {
        let (inner, val) = stratified_holdout(
            &ctx.train.y,
            ctx.config.train.inner_val_fraction,
            ctx.cell_seed ^ 0x5EED,
        );
        let (fit_rows, n_syn) =
            balance_train(&ctx.train.select_rows(&inner), ctx.config, ctx.cell_seed)?;
        let mut model = TransferNet::build(
            &backbones[&ctx.seed],
            &cfg.plan,
            &ctx.train.temporal_names,
            ctx.cell_seed,
        )?;
        let before = model.frozen_checksum();
        let tc = TrainConfig {
            seed: ctx.cell_seed,
            ..ctx.config.train
        };
        let history = train_net(&mut model, &fit_rows, &ctx.train.select_rows(&val), &tc)?;
        checks.lock().expect("checksum lock").push(FrozenCheck {
            seed: ctx.seed,
            fold: ctx.fold,
            before,
            after: model.frozen_checksum(),
        });
        Ok(CellScores {
            scores: predict_matrix(&model, ctx.test),
            n_synthetic_train: n_syn,
            best_epoch: Some(history.best_epoch),
        })
    })?;
    let mut frozen = checks.into_inner().expect("checksum lock");
    frozen.sort_by_key(|c| (exp.seeds.iter().position(|&s| s == c.seed), c.fold));

    let scratch = if cfg.compare_scratch {
        Some(run_experiment(
            target,
            feature_set,
            Scorer::Model(ModelKind::Lstm),
            exp,
        )?)
    } else {
        None
    };
    Ok(TransferResult {
        transfer: ExperimentResult::from_cells("transfer-lstm", feature_set, cells),
        scratch,
        pretrain,
        frozen,
    })
}
