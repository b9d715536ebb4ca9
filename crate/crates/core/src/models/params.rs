use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::scalar::Real;

/// A named parameter tensor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    /// Excluded from optimizer updates.
    pub frozen: bool,
    /// Included in the L2 penalty.
    pub l2: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    pub params: Vec<Param<T>>,
}

/// Gradient buffers aligned with a [`ParamSet`].
pub type Grads<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Glorot-uniform weights, zero biases (LSTM forget bias 1).
    #[default]
    Glorot,
    /// Every parameter 0.
    Zero,
}

impl<T: Real> ParamSet<T> {
    pub fn add(&mut self, name: &str, shape: Vec<usize>, data: Vec<T>, l2: bool) -> usize {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "{name}: shape/data mismatch"
        );
        self.params.push(Param {
            name: name.to_string(),
            shape,
            data,
            frozen: false,
            l2,
        });
        self.params.len() - 1
    }

    /// Adds a weight matrix `[rows, cols]` with Glorot-uniform or zero entries.
    pub fn add_weight(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
        init: Init,
        l2: bool,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zero => vec![T::zero(); n],
            Init::Glorot => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..n)
                    .map(|_| T::lit(rng.gen_range(-limit..limit)))
                    .collect()
            }
        };
        self.add(name, shape, data, l2)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.params
            .iter()
            .map(|p| vec![T::zero(); p.data.len()])
            .collect()
    }

    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn n_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| !p.frozen)
            .map(|p| p.data.len())
            .sum()
    }

    /// Sum of squares over L2-tagged tensors.
    pub fn l2_sum(&self) -> T {
        self.params
            .iter()
            .filter(|p| p.l2)
            .flat_map(|p| p.data.iter())
            .map(|&w| w * w)
            .sum()
    }

    pub fn freeze_prefix(&mut self, prefix: &str) {
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.frozen = true;
            }
        }
    }

    /// SHA-256 over names, shapes and the exact bit patterns of the values of
    /// the selected tensors.
    pub fn checksum(&self, frozen_only: bool) -> String {
        let mut h = Sha256::new();
        for p in self.params.iter().filter(|p| !frozen_only || p.frozen) {
            h.update(p.name.as_bytes());
            for &d in &p.shape {
                h.update((d as u64).to_le_bytes());
            }
            for &v in &p.data {
                h.update(v.as_f64().to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|v| U::lit(v.as_f64())).collect(),
                    frozen: p.frozen,
                    l2: p.l2,
                })
                .collect(),
        }
    }
}
