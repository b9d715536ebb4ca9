use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::features::DesignMatrix;
use crate::preprocess::N_STEPS;
use crate::scalar::Real;

use super::{adasyn, AdasynConfig, BalanceError};

/// Column layout of a flattened design matrix: `steps * C_t` temporal values
/// (step-major, channel-minor) followed by the static features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatLayout {
    pub steps: usize,
    pub temporal_names: Vec<String>,
    pub static_names: Vec<String>,
}

impl FlatLayout {
    pub fn width(&self) -> usize {
        self.steps * self.temporal_names.len() + self.static_names.len()
    }

    pub fn first_static_column(&self) -> usize {
        self.steps * self.temporal_names.len()
    }

    pub fn column_name(&self, j: usize) -> Option<String> {
        let split = self.first_static_column();
        if j < split {
            let c = self.temporal_names.len();
            Some(format!("{}@{}", self.temporal_names[j % c], j / c))
        } else {
            self.static_names.get(j - split).cloned()
        }
    }
}

pub fn flatten_for_balance<T: Real>(dm: &DesignMatrix<T>) -> (Array2<T>, FlatLayout) {
    let layout = FlatLayout {
        steps: N_STEPS,
        temporal_names: dm.temporal_names.clone(),
        static_names: dm.static_names.clone(),
    };
    let n = dm.n_rows();
    let split = layout.first_static_column();
    let mut x = Array2::<T>::zeros((n, layout.width()));
    for r in 0..n {
        let t = dm.x_temporal.slice(s![r, .., ..]);
        for (j, v) in t.iter().enumerate() {
            x[[r, j]] = *v;
        }
        for j in 0..dm.n_static() {
            x[[r, split + j]] = dm.x_static[[r, j]];
        }
    }
    (x, layout)
}

pub fn unflatten<T: Real>(x: &Array2<T>, layout: &FlatLayout) -> (Array3<T>, Array2<T>) {
    assert_eq!(
        x.ncols(),
        layout.width(),
        "flat width does not match layout"
    );
    let n = x.nrows();
    let c = layout.temporal_names.len();
    let split = layout.first_static_column();
    let xt = Array3::from_shape_fn((n, layout.steps, c), |(r, k, j)| x[[r, k * c + j]]);
    let xs = x.slice(s![.., split..]).to_owned();
    (xt, xs)
}

/// A design matrix with ADASYN rows appended.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedMatrix<T> {
    pub dm: DesignMatrix<T>,
    pub synthetic: Vec<bool>,
}

/// Label used in `night_keys` for synthetic rows.
pub const SYNTHETIC_ID: &str = "~synthetic";

/// Flattens, oversamples and restores shapes. Synthetic rows copy their
/// source row's defined-mask and date.
pub fn balance_design_matrix<T: Real>(
    dm: &DesignMatrix<T>,
    cfg: &AdasynConfig,
) -> Result<BalancedMatrix<T>, BalanceError> {
    let (x, layout) = flatten_for_balance(dm);
    let b = adasyn(&x, &dm.y, cfg)?;
    let (xt, xs) = unflatten(&b.x, &layout);
    let mut defined = dm.static_defined.clone();
    let mut keys = dm.night_keys.clone();
    for src in b.source.iter().skip(dm.n_rows()) {
        let src = src.expect("synthetic rows carry a source");
        defined
            .push_row(dm.static_defined.row(src))
            .expect("same width");
        keys.push((SYNTHETIC_ID.to_string(), dm.night_keys[src].1));
    }
    Ok(BalancedMatrix {
        dm: DesignMatrix {
            x_temporal: xt,
            x_static: xs,
            static_defined: defined,
            y: b.y,
            night_keys: keys,
            temporal_names: dm.temporal_names.clone(),
            static_names: dm.static_names.clone(),
        },
        synthetic: b.synthetic,
    })
}
