use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::focal::{focal_loss_logit, FocalLossParams};
use super::network::NetModel;
use super::params::{Grads, ParamSet};
use super::ModelError;
use crate::features::DesignMatrix;
use crate::scalar::{sigmoid, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub inner_val_fraction: f64,
    pub seed: u64,
    pub gamma: f64,
    /// `None` uses the inverse class frequency of the training rows.
    pub alpha_pos: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            patience: 30,
            inner_val_fraction: 0.2,
            seed: 0,
            gamma: 2.0,
            alpha_pos: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(ModelError::Config(
                "max_epochs and patience must be at least 1".into(),
            ));
        }
        if self.patience > self.max_epochs {
            return Err(ModelError::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.inner_val_fraction > 0.0 && self.inner_val_fraction < 1.0) {
            return Err(ModelError::Config(
                "inner_val_fraction outside (0, 1)".into(),
            ));
        }
        if let Some(a) = self.alpha_pos {
            if !(a > 0.0 && a <= 1.0) {
                return Err(ModelError::Config("alpha_pos outside (0, 1]".into()));
            }
        }
        if !(self.gamma >= 0.0) {
            return Err(ModelError::Config("gamma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn focal_for(&self, y: &[bool]) -> FocalLossParams {
        match self.alpha_pos {
            Some(alpha_pos) => FocalLossParams {
                alpha_pos,
                gamma: self.gamma,
            },
            None => FocalLossParams::inverse_frequency(y, self.gamma),
        }
    }
}

/// Patience counter on a monitored loss; epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Only a strict decrease counts as an improvement.
    pub fn update(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Grads<T>,
    v: Grads<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(ps: &ParamSet<T>) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: ps.zero_grads(),
            v: ps.zero_grads(),
        }
    }

    /// One update; frozen tensors are left untouched.
    pub fn step(&mut self, ps: &mut ParamSet<T>, grads: &Grads<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(self.step));
        let c2 = T::lit(1.0 - self.beta2.powi(self.step));
        let (lr, eps) = (T::lit(lr), T::lit(self.eps));
        for (k, p) in ps.params.iter_mut().enumerate() {
            if p.frozen {
                continue;
            }
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.data.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.data[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Contiguous per-row copies of a design matrix.
pub struct Rows<T> {
    pub temporal: Vec<Vec<T>>,
    pub statics: Vec<Vec<T>>,
    pub y: Vec<bool>,
}

impl<T: Real> Rows<T> {
    pub fn from_matrix(dm: &DesignMatrix<T>) -> Rows<T> {
        let n = dm.n_rows();
        Rows {
            temporal: (0..n)
                .map(|r| {
                    dm.x_temporal
                        .index_axis(ndarray::Axis(0), r)
                        .iter()
                        .copied()
                        .collect()
                })
                .collect(),
            statics: (0..n).map(|r| dm.x_static.row(r).to_vec()).collect(),
            y: dm.y.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Mean focal loss over `idx` plus `lambda * sum(w^2)`, with gradients.
pub fn batch_loss_grad<T: Real, M: NetModel<T> + ?Sized>(
    model: &M,
    rows: &Rows<T>,
    idx: &[usize],
    focal: &FocalLossParams,
) -> (T, Grads<T>) {
    let ps = model.params();
    let mut grads = ps.zero_grads();
    let inv_n = T::one() / T::from_count(idx.len().max(1));
    let mut loss = T::zero();
    for &r in idx {
        let z = model.logit(&rows.temporal[r], &rows.statics[r], None);
        let (l, dz) = focal_loss_logit(z, rows.y[r], focal);
        loss += l;
        if dz != T::zero() {
            model.logit(
                &rows.temporal[r],
                &rows.statics[r],
                Some((dz * inv_n, &mut grads)),
            );
        }
    }
    loss *= inv_n;
    let lambda = T::lit(model.l2_lambda());
    if lambda > T::zero() {
        loss += lambda * ps.l2_sum();
        for (k, p) in ps.params.iter().enumerate() {
            if p.l2 {
                for (g, &w) in grads[k].iter_mut().zip(&p.data) {
                    *g += T::lit(2.0) * lambda * w;
                }
            }
        }
    }
    for (k, p) in ps.params.iter().enumerate() {
        if p.frozen {
            grads[k].iter_mut().for_each(|g| *g = T::zero());
        }
    }
    (loss, grads)
}

/// Mean focal loss without the penalty term.
pub fn mean_focal<T: Real, M: NetModel<T> + ?Sized>(
    model: &M,
    rows: &Rows<T>,
    focal: &FocalLossParams,
) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = (0..rows.len())
        .map(|r| {
            focal_loss_logit(
                model.logit(&rows.temporal[r], &rows.statics[r], None),
                rows.y[r],
                focal,
            )
            .0
            .as_f64()
        })
        .sum();
    total / rows.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub focal: FocalLossParams,
}

/// Per-class shuffled holdout with `round(fraction * n_c)` validation rows
/// per class (at least one when the class has two or more rows).
pub fn stratified_holdout(y: &[bool], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut k = (fraction * idx.len() as f64).round() as usize;
        if k == 0 && idx.len() >= 2 {
            k = 1;
        }
        k = k.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Minibatch Adam on `train`, early stopping on `val` focal loss, best
/// weights restored. An empty `val` monitors the training loss instead.
pub fn train_net<T: Real, M: NetModel<T>>(
    model: &mut M,
    train: &DesignMatrix<T>,
    val: &DesignMatrix<T>,
    tc: &TrainConfig,
) -> Result<TrainHistory, ModelError> {
    tc.validate()?;
    if train.n_rows() == 0 {
        return Err(ModelError::Config("empty training set".into()));
    }
    let focal = tc.focal_for(&train.y);
    let rows = Rows::from_matrix(train);
    let val_rows = Rows::from_matrix(val);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut adam = Adam::new(model.params());
    let mut stopper = EarlyStopping::new(tc.patience);
    let mut best = model.params().clone();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        focal,
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let batch = model.batch_size().max(1);
    let lr = model.learning_rate();
    for epoch in 1..=tc.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, grads) = batch_loss_grad(model, &rows, chunk, &focal);
            let loss = loss.as_f64();
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(ModelError::Diverged { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(model.params_mut(), &grads, lr);
        }
        let train_loss = epoch_loss / rows.len() as f64;
        let val_loss = if val_rows.is_empty() {
            mean_focal(model, &rows, &focal)
        } else {
            mean_focal(model, &val_rows, &focal)
        };
        if !val_loss.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        match stopper.update(epoch, val_loss) {
            StopDecision::Improved => best = model.params().clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.stopped_early = epoch < tc.max_epochs;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch;
    *model.params_mut() = best;
    Ok(history)
}

/// Splits off a stratified inner validation set, then trains.
pub fn net_train<T: Real, M: NetModel<T>>(
    model: &mut M,
    train: &DesignMatrix<T>,
    tc: &TrainConfig,
) -> Result<TrainHistory, ModelError> {
    if train.positives() == 0 || train.positives() == train.n_rows() {
        return Err(ModelError::SingleClass);
    }
    let (tr, va) = stratified_holdout(&train.y, tc.inner_val_fraction, tc.seed ^ 0x5EED);
    train_net(model, &train.select_rows(&tr), &train.select_rows(&va), tc)
}

/// Positive-class probabilities for every row.
pub fn predict_matrix<T: Real, M: NetModel<T> + ?Sized>(
    model: &M,
    dm: &DesignMatrix<T>,
) -> Vec<f64> {
    let rows = Rows::from_matrix(dm);
    (0..rows.len())
        .map(|r| sigmoid(model.logit(&rows.temporal[r], &rows.statics[r], None)).as_f64())
        .collect()
}
