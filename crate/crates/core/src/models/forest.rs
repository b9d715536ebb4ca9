use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(D))` candidates per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    /// `w_c = N / (2 N_c)`.
    Balanced,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub class_weight: ClassWeight,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 1000,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            class_weight: ClassWeight::Balanced,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::Config("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ModelError::Config(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Features used by any split.
    pub fn split_features(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

/// Thresholds and leaf values are stored in `f64` whatever the input scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub cfg: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a [f64],
    d: usize,
    y: &'a [bool],
    w: &'a [f64],
    cfg: &'a ForestConfig,
    n_candidates: usize,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

impl Builder<'_> {
    fn value(&self, r: usize, f: usize) -> f64 {
        self.x[r * self.d + f]
    }

    fn weights(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(p, t), &r| {
            let w = self.w[r];
            (if self.y[r] { p + w } else { p }, t + w)
        })
    }

    /// Best (gain, threshold) for one feature, or `None` when the feature is
    /// constant in the node or no admissible split has positive gain.
    fn best_for_feature(
        &self,
        idx: &mut [usize],
        f: usize,
        parent: f64,
        total_w: f64,
        total_pos: f64,
    ) -> Option<(f64, f64)> {
        idx.sort_by(|&a, &b| {
            self.value(a, f)
                .total_cmp(&self.value(b, f))
                .then(a.cmp(&b))
        });
        let first = self.value(idx[0], f);
        let last = self.value(idx[idx.len() - 1], f);
        if first == last {
            return None;
        }
        let min_leaf = self.cfg.min_samples_leaf;
        let (mut lw, mut lp) = (0.0, 0.0);
        let mut best: Option<(f64, f64)> = None;
        for k in 0..idx.len() - 1 {
            let r = idx[k];
            lw += self.w[r];
            if self.y[r] {
                lp += self.w[r];
            }
            let (a, b) = (self.value(r, f), self.value(idx[k + 1], f));
            if a == b || k + 1 < min_leaf || idx.len() - k - 1 < min_leaf {
                continue;
            }
            let (rw, rp) = (total_w - lw, total_pos - lp);
            let gain = parent * total_w - lw * gini(lp, lw) - rw * gini(rp, rw);
            if gain > 1e-12 && best.is_none_or(|(g, _)| gain > g) {
                let mid = 0.5 * (a + b);
                let thr = if mid < b { mid } else { a };
                best = Some((gain, thr));
            }
        }
        best
    }

    fn grow(
        &self,
        nodes: &mut Vec<Node>,
        idx: Vec<usize>,
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let me = nodes.len();
        let (pos, total) = self.weights(&idx);
        nodes.push(Node::Leaf {
            value: if total > 0.0 { pos / total } else { 0.0 },
        });
        let parent = gini(pos, total);
        let depth_ok = self.cfg.max_depth.is_none_or(|m| depth < m);
        if parent <= 0.0 || !depth_ok || idx.len() < 2 * self.cfg.min_samples_leaf {
            return me;
        }
        let mut features: Vec<usize> = (0..self.d).collect();
        features.shuffle(rng);
        let mut scratch = idx.clone();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        for &f in &features {
            if visited >= self.n_candidates {
                break;
            }
            let first = self.value(scratch[0], f);
            if scratch.iter().all(|&r| self.value(r, f) == first) {
                continue;
            }
            visited += 1;
            if let Some((gain, thr)) = self.best_for_feature(&mut scratch, f, parent, total, pos) {
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return me;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.value(i, feature) <= threshold);
        let left = self.grow(nodes, l, depth + 1, rng);
        let right = self.grow(nodes, r, depth + 1, rng);
        nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

fn to_f64<T: Real>(x: &Array2<T>) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

impl Forest {
    pub fn fit<T: Real>(
        x: &Array2<T>,
        y: &[bool],
        cfg: &ForestConfig,
    ) -> Result<Forest, ModelError> {
        cfg.validate()?;
        let (n, d) = x.dim();
        if y.len() != n {
            return Err(ModelError::Shape(format!(
                "{} labels for {} rows",
                y.len(),
                n
            )));
        }
        let n_pos = y.iter().filter(|&&b| b).count();
        if n < 2 || n_pos == 0 || n_pos == n {
            return Err(ModelError::SingleClass);
        }
        if d == 0 {
            return Err(ModelError::Shape("no features".into()));
        }
        let xs: Vec<f64> = if x.is_standard_layout() {
            to_f64(x)
        } else {
            to_f64(&x.as_standard_layout().to_owned())
        };
        let (wp, wn) = match cfg.class_weight {
            ClassWeight::Balanced => (
                n as f64 / (2.0 * n_pos as f64),
                n as f64 / (2.0 * (n - n_pos) as f64),
            ),
            ClassWeight::None => (1.0, 1.0),
        };
        let n_candidates = match cfg.max_features {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
        };
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(t as u64);
                let mut weight = vec![0.0; n];
                if cfg.bootstrap {
                    for _ in 0..n {
                        weight[rng.gen_range(0..n)] += 1.0;
                    }
                } else {
                    weight.iter_mut().for_each(|w| *w = 1.0);
                }
                let idx: Vec<usize> = (0..n).filter(|&i| weight[i] > 0.0).collect();
                for i in 0..n {
                    weight[i] *= if y[i] { wp } else { wn };
                }
                let b = Builder {
                    x: &xs,
                    d,
                    y,
                    w: &weight,
                    cfg,
                    n_candidates,
                };
                let mut nodes = Vec::new();
                b.grow(&mut nodes, idx, 0, &mut rng);
                Tree { nodes }
            })
            .collect();
        Ok(Forest {
            cfg: *cfg,
            n_features: d,
            trees,
        })
    }

    /// Mean of the trees' leaf values, summed in tree order.
    pub fn predict_proba<T: Real>(&self, x: &Array2<T>) -> Result<Vec<f64>, ModelError> {
        if x.ncols() != self.n_features {
            return Err(ModelError::Shape(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let rows: Vec<Vec<f64>> = x
            .outer_iter()
            .map(|r| r.iter().map(|v| v.as_f64()).collect())
            .collect();
        Ok(rows
            .par_iter()
            .map(|row| {
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_refused() {
        let x = Array2::<f64>::zeros((4, 2));
        assert_eq!(
            Forest::fit(&x, &[true; 4], &ForestConfig::default()),
            Err(ModelError::SingleClass)
        );
    }

    #[test]
    fn separable_toy() {
        let x = Array2::from_shape_fn(
            (20, 2),
            |(i, j)| if j == 0 { i as f64 } else { (i % 3) as f64 },
        );
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let cfg = ForestConfig {
            n_trees: 10,
            ..Default::default()
        };
        let f = Forest::fit(&x, &y, &cfg).unwrap();
        let p = f.predict_proba(&x).unwrap();
        assert!(p.iter().zip(&y).all(|(&p, &y)| (p >= 0.5) == y));
    }
}
