use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv1d, ConvCache, Dense, Lstm, LstmCache};
use super::params::{Grads, Init, ParamSet};
use super::ModelError;
use crate::scalar::{sigmoid, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetKind {
    Lstm,
    Cnn,
    DailyLstm,
    DailyCnn,
}

impl NetKind {
    pub const ALL: [NetKind; 4] = [
        NetKind::Lstm,
        NetKind::Cnn,
        NetKind::DailyLstm,
        NetKind::DailyCnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NetKind::Lstm => "lstm",
            NetKind::Cnn => "cnn",
            NetKind::DailyLstm => "daily-lstm",
            NetKind::DailyCnn => "daily-cnn",
        }
    }

    pub fn is_daily(self) -> bool {
        matches!(self, NetKind::DailyLstm | NetKind::DailyCnn)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, NetKind::Lstm | NetKind::DailyLstm)
    }
}

impl fmt::Display for NetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        NetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| format!("unknown network kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub kind: NetKind,
    pub hidden: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub dense: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            kind: NetKind::Lstm,
            hidden: 32,
            conv_filters: 16,
            conv_kernel: 3,
            dense: 16,
            l2_lambda: 1e-3,
            learning_rate: 1e-3,
            batch_size: 16,
        }
    }
}

impl NetConfig {
    pub fn with_kind(kind: NetKind) -> Self {
        NetConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes = [
            self.hidden,
            self.conv_filters,
            self.conv_kernel,
            self.dense,
            self.batch_size,
        ];
        if sizes.contains(&0) {
            return Err(ModelError::Config(
                "network sizes must be at least 1".into(),
            ));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(ModelError::Config("l2_lambda must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Anything trained by [`super::train_net`]: a parameter set plus a
/// per-sample logit with optional gradient accumulation.
pub trait NetModel<T: Real>: Sync {
    fn params(&self) -> &ParamSet<T>;
    fn params_mut(&mut self) -> &mut ParamSet<T>;
    fn l2_lambda(&self) -> f64;
    fn learning_rate(&self) -> f64;
    fn batch_size(&self) -> usize;

    /// Logit for one night. `xt` is `[steps, C_t]` row-major. When `grad` is
    /// `Some((dlogit, buf))`, adds `dlogit * d logit / d theta` into `buf`.
    fn logit(&self, xt: &[T], xs: &[T], grad: Option<(T, &mut Grads<T>)>) -> T;

    fn predict_proba(&self, xt: &[T], xs: &[T]) -> T {
        sigmoid(self.logit(xt, xs, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoder {
    Lstm(Lstm),
    Conv(Conv1d),
}

enum EncoderCache<T> {
    Lstm(LstmCache<T>),
    Conv(ConvCache<T>),
}

/// The four architectures: a temporal encoder (LSTM final state or CNN max
/// pool), optional concatenation with the static vector, then
/// dense(ReLU) -> dense(1).
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub cfg: NetConfig,
    pub n_temporal: usize,
    pub n_static: usize,
    pub params: ParamSet<T>,
    encoder: Encoder,
    dense: Dense,
    out: Dense,
}

impl<T: Real> Network<T> {
    pub fn new(
        cfg: NetConfig,
        n_temporal: usize,
        n_static: usize,
        init: Init,
        seed: u64,
    ) -> Result<Network<T>, ModelError> {
        cfg.validate()?;
        let seq_input = if cfg.kind.is_daily() {
            n_temporal
        } else {
            n_temporal + n_static
        };
        if seq_input == 0 {
            return Err(ModelError::Config("network has no sequence input".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::default();
        let (encoder, emb) = if cfg.kind.is_recurrent() {
            (
                Encoder::Lstm(Lstm::init(
                    &mut ps, "lstm", seq_input, cfg.hidden, init, &mut rng,
                )),
                cfg.hidden,
            )
        } else {
            let conv = Conv1d::init(
                &mut ps,
                "conv",
                seq_input,
                cfg.conv_filters,
                cfg.conv_kernel,
                init,
                &mut rng,
            );
            (Encoder::Conv(conv), cfg.conv_filters)
        };
        let head_in = if cfg.kind.is_daily() {
            emb + n_static
        } else {
            emb
        };
        let dense = Dense::init(&mut ps, "dense", head_in, cfg.dense, init, &mut rng);
        let out = Dense::init(&mut ps, "out", cfg.dense, 1, init, &mut rng);
        Ok(Network {
            cfg,
            n_temporal,
            n_static,
            params: ps,
            encoder,
            dense,
            out,
        })
    }

    /// Rebuilds a network around loaded parameters, checking names and shapes.
    pub fn from_params(
        cfg: NetConfig,
        n_temporal: usize,
        n_static: usize,
        params: ParamSet<T>,
    ) -> Result<Network<T>, ModelError> {
        let mut net = Network::new(cfg, n_temporal, n_static, Init::Zero, 0)?;
        if net.params.params.len() != params.params.len() {
            return Err(ModelError::Parse(
                "parameter count does not match the architecture".into(),
            ));
        }
        for (a, b) in net.params.params.iter().zip(&params.params) {
            if a.name != b.name || a.shape != b.shape {
                return Err(ModelError::Parse(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    b.name, b.shape, a.name, a.shape
                )));
            }
        }
        net.params = params;
        Ok(net)
    }

    fn sequence(&self, xt: &[T], xs: &[T]) -> Vec<T> {
        if self.cfg.kind.is_daily() || self.n_static == 0 {
            return xt.to_vec();
        }
        let steps = xt.len() / self.n_temporal.max(1);
        let width = self.n_temporal + self.n_static;
        let mut seq = Vec::with_capacity(steps * width);
        for t in 0..steps {
            seq.extend_from_slice(&xt[t * self.n_temporal..(t + 1) * self.n_temporal]);
            seq.extend_from_slice(xs);
        }
        seq
    }
}

impl<T: Real> NetModel<T> for Network<T> {
    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn l2_lambda(&self) -> f64 {
        self.cfg.l2_lambda
    }

    fn learning_rate(&self) -> f64 {
        self.cfg.learning_rate
    }

    fn batch_size(&self) -> usize {
        self.cfg.batch_size
    }

    fn logit(&self, xt: &[T], xs: &[T], grad: Option<(T, &mut Grads<T>)>) -> T {
        debug_assert_eq!(xs.len(), self.n_static);
        let ps = &self.params;
        let seq = self.sequence(xt, xs);
        let (mut emb, cache) = match self.encoder {
            Encoder::Lstm(l) => {
                let c = l.forward(ps, &seq);
                (c.last_hidden(l.hidden).to_vec(), EncoderCache::Lstm(c))
            }
            Encoder::Conv(c) => {
                let (o, cache) = c.forward(ps, &seq);
                (o, EncoderCache::Conv(cache))
            }
        };
        let emb_len = emb.len();
        if self.cfg.kind.is_daily() {
            emb.extend_from_slice(xs);
        }
        let pre = self.dense.forward(ps, &emb);
        let hidden: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
        let z = self.out.forward(ps, &hidden)[0];

        if let Some((dz, grads)) = grad {
            let dh = self.out.backward(ps, &hidden, &[dz], grads);
            let dpre: Vec<T> = dh
                .iter()
                .zip(&pre)
                .map(|(&d, &p)| if p > T::zero() { d } else { T::zero() })
                .collect();
            let demb = self.dense.backward(ps, &emb, &dpre, grads);
            match (self.encoder, cache) {
                (Encoder::Lstm(l), EncoderCache::Lstm(c)) => {
                    l.backward(ps, &seq, &c, &demb[..emb_len], grads)
                }
                (Encoder::Conv(cv), EncoderCache::Conv(c)) => {
                    cv.backward(&seq, &c, &demb[..emb_len], grads)
                }
                _ => unreachable!("cache matches encoder"),
            }
        }
        z
    }
}
