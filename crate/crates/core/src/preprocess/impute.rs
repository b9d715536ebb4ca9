use serde::{Deserialize, Serialize};

use super::PreprocessError;

/// Gap handling for the aligned grid. `Zero` is the pipeline default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Imputation {
    #[default]
    Zero,
    ForwardFill,
    Linear,
    /// Zero imputation, but days whose glucose channel misses more than the
    /// given fraction of bins are dropped.
    DropDay(f64),
}

impl Imputation {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        match *self {
            Imputation::DropDay(f) if !(f > 0.0 && f <= 1.0) => {
                Err(PreprocessError::InvalidDropThreshold(f))
            }
            _ => Ok(()),
        }
    }

    /// Parses the CLI spelling: `zero`, `ffill`, `linear` or `drop:<frac>`.
    pub fn parse(s: &str) -> Result<Self, PreprocessError> {
        let imp =
            match s {
                "zero" => Imputation::Zero,
                "ffill" => Imputation::ForwardFill,
                "linear" => Imputation::Linear,
                other => match other.strip_prefix("drop:") {
                    Some(frac) => Imputation::DropDay(frac.parse().map_err(|_| {
                        PreprocessError::Config(format!("bad drop fraction `{frac}`"))
                    })?),
                    None => {
                        return Err(PreprocessError::Config(format!(
                            "unknown imputation `{other}`"
                        )))
                    }
                },
            };
        imp.validate()?;
        Ok(imp)
    }

    pub fn label(&self) -> String {
        match self {
            Imputation::Zero => "zero".into(),
            Imputation::ForwardFill => "ffill".into(),
            Imputation::Linear => "linear".into(),
            Imputation::DropDay(f) => format!("drop:{f}"),
        }
    }
}

/// Fills one series in place. `values[i]` is meaningful only where
/// `mask[i]`; afterwards unmasked entries are zero and `mask` marks every
/// entry holding a defined (observed or filled) value.
pub fn impute_series(values: &mut [f64], mask: &mut [bool], strategy: Imputation) {
    debug_assert_eq!(values.len(), mask.len());
    match strategy {
        Imputation::Zero | Imputation::DropDay(_) => {}
        Imputation::ForwardFill => {
            let mut last: Option<f64> = None;
            for i in 0..values.len() {
                if mask[i] {
                    last = Some(values[i]);
                } else if let Some(v) = last {
                    values[i] = v;
                    mask[i] = true;
                }
            }
        }
        Imputation::Linear => {
            let observed: Vec<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
            for pair in observed.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let (va, vb) = (values[a], values[b]);
                for i in a + 1..b {
                    let w = (i - a) as f64 / (b - a) as f64;
                    values[i] = va + w * (vb - va);
                    mask[i] = true;
                }
            }
        }
    }
    for i in 0..values.len() {
        if !mask[i] {
            values[i] = 0.0;
        }
    }
}
