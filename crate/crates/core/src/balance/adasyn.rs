use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BalanceError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdasynConfig {
    pub k_neighbors: usize,
    /// Minority:majority ratio after balancing.
    pub ratio: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        AdasynConfig {
            k_neighbors: 5,
            ratio: 1.0,
            seed: 0,
        }
    }
}

impl AdasynConfig {
    pub fn validate(&self) -> Result<(), BalanceError> {
        if self.k_neighbors == 0 {
            return Err(BalanceError::Config(
                "k_neighbors must be at least 1".into(),
            ));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(BalanceError::Config(format!(
                "ratio {} outside (0, 1]",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// Input rows followed by the synthetic rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Balanced<T> {
    pub x: Array2<T>,
    pub y: Vec<bool>,
    pub synthetic: Vec<bool>,
    /// Original row each synthetic row was grown from.
    pub source: Vec<Option<usize>>,
}

impl<T> Balanced<T> {
    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }
}

fn sq_dist<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&u, &v)| {
            let d = (u - v).as_f64();
            d * d
        })
        .sum()
}

/// Indices of the `k` nearest rows among `candidates`, excluding `i`.
/// Ties are broken by index.
fn nearest<T: Real>(x: &Array2<T>, i: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let row = x.row(i);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (sq_dist(row, x.row(j)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

/// Splits `total` into integer parts proportional to `weights` (which sum to
/// 1) by the largest-remainder rule, so the parts sum to `total` exactly.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut parts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

/// Adaptive synthetic oversampling of the minority class.
///
/// The minority class is whichever label is rarer (positives on a tie).
pub fn adasyn<T: Real>(
    x: &Array2<T>,
    y: &[bool],
    cfg: &AdasynConfig,
) -> Result<Balanced<T>, BalanceError> {
    cfg.validate()?;
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(BalanceError::Config(format!(
            "{} labels for {} rows",
            y.len(),
            n
        )));
    }
    if d == 0 {
        return Err(BalanceError::Config("matrix has no columns".into()));
    }
    let n_pos = y.iter().filter(|&&b| b).count();
    let minority_label = n_pos <= n - n_pos;
    let minority: Vec<usize> = (0..n).filter(|&i| y[i] == minority_label).collect();
    let n_min = minority.len();
    let n_maj = n - n_min;
    if n_min < 2 {
        return Err(BalanceError::Impossible(n_min));
    }
    if n <= cfg.k_neighbors {
        return Err(BalanceError::Config(format!(
            "{} rows is not more than k = {}",
            n, cfg.k_neighbors
        )));
    }
    let target = (cfg.ratio * n_maj as f64 - n_min as f64).round();
    let g_total = if target > 0.0 { target as usize } else { 0 };

    let mut out = Balanced {
        x: x.clone(),
        y: y.to_vec(),
        synthetic: vec![false; n],
        source: vec![None; n],
    };
    if g_total == 0 {
        return Ok(out);
    }

    let all: Vec<usize> = (0..n).collect();
    let k = cfg.k_neighbors;
    let r: Vec<f64> = minority
        .iter()
        .map(|&i| {
            let nn = nearest(x, i, &all, k);
            nn.iter().filter(|&&j| y[j] != minority_label).count() as f64 / k as f64
        })
        .collect();
    let sum_r: f64 = r.iter().sum();
    let weights: Vec<f64> = if sum_r > 0.0 {
        r.iter().map(|v| v / sum_r).collect()
    } else {
        vec![1.0 / n_min as f64; n_min]
    };
    let counts = apportion(&weights, g_total);

    let k_min = k.min(n_min - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows: Vec<T> = Vec::with_capacity(g_total * d);
    for (slot, &i) in minority.iter().enumerate() {
        if counts[slot] == 0 {
            continue;
        }
        let nn = nearest(x, i, &minority, k_min);
        for _ in 0..counts[slot] {
            let z = nn[rng.gen_range(0..nn.len())];
            let lambda = T::lit(rng.gen::<f64>());
            let (xi, xz) = (x.row(i), x.row(z));
            rows.extend(
                xi.iter()
                    .zip(xz.iter())
                    .map(|(&a, &b)| a + lambda * (b - a)),
            );
            out.source.push(Some(i));
        }
    }
    let synth = Array2::from_shape_vec((g_total, d), rows).expect("row buffer shape");
    out.x.append(Axis(0), synth.view()).expect("same width");
    out.y.extend(std::iter::repeat_n(minority_label, g_total));
    out.synthetic.extend(std::iter::repeat_n(true, g_total));
    Ok(out)
}
