use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, Lstm};
use super::network::{NetKind, NetModel, Network};
use super::params::{Grads, Init, ParamSet};
use super::ModelError;
use crate::features::reduced_channels;
use crate::scalar::Real;

/// How the non-glucose channels enter the transfer model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    /// Per-channel mean, min and max over the day into a dense layer.
    #[default]
    Aggregate,
    /// A second, trainable LSTM over the channel sequences.
    Sequence,
}

pub const FROZEN_PREFIX: &str = "glucose_lstm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferPlan {
    /// Channels the backbone was pretrained on; only `glucose` is supported.
    pub pretrain_channels: Vec<String>,
    pub head_features: Vec<String>,
    pub branch: BranchMode,
    pub branch_units: usize,
    pub head_dense: usize,
    pub head_init: Init,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TransferPlan {
    fn default() -> Self {
        TransferPlan {
            pretrain_channels: vec!["glucose".into()],
            head_features: reduced_channels().iter().map(|c| c.name()).collect(),
            branch: BranchMode::Aggregate,
            branch_units: 8,
            head_dense: 16,
            head_init: Init::Glorot,
            l2_lambda: 1e-3,
            learning_rate: 1e-3,
            batch_size: 16,
        }
    }
}

impl TransferPlan {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.pretrain_channels != ["glucose"] {
            return Err(ModelError::Config(
                "transfer backbone must be pretrained on glucose only".into(),
            ));
        }
        if !self.head_features.iter().any(|f| f == "glucose") {
            return Err(ModelError::Config(
                "head features must include glucose".into(),
            ));
        }
        if self.branch_units == 0 || self.head_dense == 0 || self.batch_size == 0 {
            return Err(ModelError::Config(
                "transfer layer sizes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Branch {
    Aggregate(Dense),
    Sequence(Lstm),
}

/// Frozen glucose LSTM plus a trainable branch for the other head features,
/// joined by a trainable dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferNet<T> {
    pub plan: TransferPlan,
    pub params: ParamSet<T>,
    backbone: Lstm,
    branch: Branch,
    head: Dense,
    out: Dense,
    glucose_col: usize,
    other_cols: Vec<usize>,
    n_temporal: usize,
    temporal_names: Vec<String>,
}

impl<T: Real> TransferNet<T> {
    /// `temporal_names` are the columns of the matrices this model will see.
    pub fn build(
        pretrained: &Network<T>,
        plan: &TransferPlan,
        temporal_names: &[String],
        seed: u64,
    ) -> Result<TransferNet<T>, ModelError> {
        plan.validate()?;
        if pretrained.cfg.kind != NetKind::Lstm
            || pretrained.n_temporal != 1
            || pretrained.n_static != 0
        {
            return Err(ModelError::Config(
                "pretrained model must be a glucose-only LSTM".into(),
            ));
        }
        let mut cols = Vec::new();
        for f in &plan.head_features {
            let c = temporal_names.iter().position(|n| n == f).ok_or_else(|| {
                ModelError::Config(format!(
                    "transfer feature `{f}` is not in the design matrix"
                ))
            })?;
            cols.push((f.as_str(), c));
        }
        let glucose_col = cols
            .iter()
            .find(|(f, _)| *f == "glucose")
            .map(|c| c.1)
            .expect("validated");
        let other_cols: Vec<usize> = cols
            .iter()
            .filter(|(f, _)| *f != "glucose")
            .map(|c| c.1)
            .collect();

        let hidden = pretrained.cfg.hidden;
        let mut ps = ParamSet::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Lstm::init(&mut ps, FROZEN_PREFIX, 1, hidden, Init::Zero, &mut rng);
        for (suffix, idx) in [("W", backbone.w), ("U", backbone.u), ("b", backbone.b)] {
            let src = pretrained
                .params
                .get(&format!("lstm.{suffix}"))
                .ok_or_else(|| {
                    ModelError::Config(format!("pretrained model lacks lstm.{suffix}"))
                })?;
            ps.params[idx].data = src.data.clone();
        }
        ps.freeze_prefix(FROZEN_PREFIX);
        let (branch, branch_out) = match plan.branch {
            BranchMode::Aggregate => (
                Branch::Aggregate(Dense::init(
                    &mut ps,
                    "branch",
                    3 * other_cols.len(),
                    plan.branch_units,
                    Init::Glorot,
                    &mut rng,
                )),
                plan.branch_units,
            ),
            BranchMode::Sequence => (
                Branch::Sequence(Lstm::init(
                    &mut ps,
                    "branch_lstm",
                    other_cols.len(),
                    plan.branch_units,
                    Init::Glorot,
                    &mut rng,
                )),
                plan.branch_units,
            ),
        };
        let head = Dense::init(
            &mut ps,
            "head",
            hidden + branch_out,
            plan.head_dense,
            plan.head_init,
            &mut rng,
        );
        let out = Dense::init(&mut ps, "out", plan.head_dense, 1, plan.head_init, &mut rng);
        Ok(TransferNet {
            plan: plan.clone(),
            params: ps,
            backbone,
            branch,
            head,
            out,
            glucose_col,
            other_cols,
            n_temporal: temporal_names.len(),
            temporal_names: temporal_names.to_vec(),
        })
    }

    /// Rebuilds a transfer model around loaded parameters.
    pub fn from_params(
        plan: &TransferPlan,
        hidden: usize,
        temporal_names: &[String],
        params: ParamSet<T>,
    ) -> Result<TransferNet<T>, ModelError> {
        let cfg = super::NetConfig {
            kind: NetKind::Lstm,
            hidden,
            ..Default::default()
        };
        let backbone = Network::new(cfg, 1, 0, Init::Zero, 0)?;
        let mut net = TransferNet::build(&backbone, plan, temporal_names, 0)?;
        let matches = net.params.params.len() == params.params.len()
            && net
                .params
                .params
                .iter()
                .zip(&params.params)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if !matches {
            return Err(ModelError::Parse(
                "parameters do not match the transfer architecture".into(),
            ));
        }
        net.params = params;
        Ok(net)
    }

    pub fn backbone_hidden(&self) -> usize {
        self.backbone.hidden
    }

    pub fn temporal_names(&self) -> Vec<String> {
        self.temporal_names.clone()
    }

    pub fn frozen_checksum(&self) -> String {
        self.params.checksum(true)
    }

    fn column(&self, xt: &[T], c: usize) -> Vec<T> {
        xt.iter()
            .skip(c)
            .step_by(self.n_temporal)
            .copied()
            .collect()
    }
}

impl<T: Real> NetModel<T> for TransferNet<T> {
    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn l2_lambda(&self) -> f64 {
        self.plan.l2_lambda
    }

    fn learning_rate(&self) -> f64 {
        self.plan.learning_rate
    }

    fn batch_size(&self) -> usize {
        self.plan.batch_size
    }

    fn logit(&self, xt: &[T], _xs: &[T], grad: Option<(T, &mut Grads<T>)>) -> T {
        let ps = &self.params;
        let glucose = self.column(xt, self.glucose_col);
        let h = self
            .backbone
            .forward(ps, &glucose)
            .last_hidden(self.backbone.hidden)
            .to_vec();

        let steps = xt.len() / self.n_temporal;
        let mut agg_in = Vec::new();
        let mut seq = Vec::new();
        let mut seq_cache = None;
        let branch_out: Vec<T>;
        let mut branch_pre = Vec::new();
        match self.branch {
            Branch::Aggregate(d) => {
                for &c in &self.other_cols {
                    let col = self.column(xt, c);
                    let mean = col.iter().copied().sum::<T>() / T::from_count(steps);
                    let lo = col.iter().copied().fold(T::infinity(), T::min);
                    let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
                    agg_in.extend([mean, lo, hi]);
                }
                branch_pre = d.forward(ps, &agg_in);
                branch_out = branch_pre.iter().map(|&v| v.max(T::zero())).collect();
            }
            Branch::Sequence(l) => {
                seq.reserve(steps * self.other_cols.len());
                for t in 0..steps {
                    for &c in &self.other_cols {
                        seq.push(xt[t * self.n_temporal + c]);
                    }
                }
                let cache = l.forward(ps, &seq);
                branch_out = cache.last_hidden(l.hidden).to_vec();
                seq_cache = Some(cache);
            }
        }
        let mut joined = h.clone();
        joined.extend_from_slice(&branch_out);
        let pre = self.head.forward(ps, &joined);
        let hidden: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
        let z = self.out.forward(ps, &hidden)[0];

        if let Some((dz, grads)) = grad {
            let dh = self.out.backward(ps, &hidden, &[dz], grads);
            let dpre: Vec<T> = dh
                .iter()
                .zip(&pre)
                .map(|(&d, &p)| if p > T::zero() { d } else { T::zero() })
                .collect();
            let dj = self.head.backward(ps, &joined, &dpre, grads);
            let db = &dj[h.len()..];
            match self.branch {
                Branch::Aggregate(d) => {
                    let dbp: Vec<T> = db
                        .iter()
                        .zip(&branch_pre)
                        .map(|(&g, &p)| if p > T::zero() { g } else { T::zero() })
                        .collect();
                    d.backward(ps, &agg_in, &dbp, grads);
                }
                Branch::Sequence(l) => {
                    l.backward(
                        ps,
                        &seq,
                        seq_cache.as_ref().expect("sequence cache"),
                        db,
                        grads,
                    );
                }
            }
        }
        z
    }
}
