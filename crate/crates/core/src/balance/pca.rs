use super::BalanceError;
use crate::scalar::Real;
use ndarray::{Array1, Array2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `2 x D`, orthonormal rows.
    pub components: Array2<f64>,
    /// Sample variances along the components, descending.
    pub explained_variance: [f64; 2],
    /// Set when the data has no spread at all.
    pub degenerate: bool,
}

impl PcaProjection {
    pub fn project<T: Real>(&self, x: &Array2<T>) -> Array2<f64> {
        let xc = x.mapv(|v| v.as_f64()) - &Array1::from(self.mean.clone());
        xc.dot(&self.components.t())
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

fn normalize(v: &mut Array1<f64>) -> bool {
    let norm = v.dot(v).sqrt();
    if norm <= 1e-300 {
        return false;
    }
    *v /= norm;
    true
}

/// Unit vector orthogonal to all of `basis`, from the first standard basis
/// vector that survives Gram-Schmidt.
fn complete(basis: &[Array1<f64>], d: usize) -> Array1<f64> {
    let mut best: Option<Array1<f64>> = None;
    for e in 0..d {
        let mut v = Array1::<f64>::zeros(d);
        v[e] = 1.0;
        for b in basis {
            let p = v.dot(b);
            v.scaled_add(-p, b);
        }
        if v.dot(&v) > 0.5 {
            normalize(&mut v);
            return v;
        }
        if best.as_ref().is_none_or(|b| v.dot(&v) > b.dot(b)) {
            best = Some(v);
        }
    }
    let mut v = best.expect("d >= 1");
    normalize(&mut v);
    v
}

/// Flip so the entry with the largest magnitude is positive.
fn fix_sign(v: &mut Array1<f64>) {
    let mut idx = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[idx].abs() + 1e-12 {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Two-component PCA. Uses the `N x N` Gram matrix when `N < D`.
pub fn pca2<T: Real>(x: &Array2<T>) -> Result<(PcaProjection, Array2<f64>), BalanceError> {
    let (n, d) = x.dim();
    if n < 3 || d < 2 {
        return Err(BalanceError::Config(format!(
            "PCA needs N >= 3 and D >= 2, got {n} x {d}"
        )));
    }
    let xf = x.mapv(|v| v.as_f64());
    let mean = xf.mean_axis(Axis(0)).expect("n > 0");
    let xc = &xf - &mean;
    let magnitude = xf.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let degenerate = xc.iter().all(|v| v.abs() <= 1e-12 * magnitude);
    let denom = (n - 1) as f64;

    let mut comps: Vec<Array1<f64>> = Vec::new();
    let mut variances = [0.0f64; 2];
    if !degenerate {
        if n < d {
            let gram = xc.dot(&xc.t());
            let (vals, vecs) = symmetric_eigen(&gram);
            for k in 0..2 {
                if vals[k] <= 1e-12 * vals[0].max(f64::MIN_POSITIVE) {
                    break;
                }
                let mut c = xc.t().dot(&vecs.column(k));
                if normalize(&mut c) {
                    variances[k] = vals[k] / denom;
                    comps.push(c);
                }
            }
        } else {
            let cov = xc.t().dot(&xc);
            let (vals, vecs) = symmetric_eigen(&cov);
            for k in 0..2 {
                comps.push(vecs.column(k).to_owned());
                variances[k] = vals[k].max(0.0) / denom;
            }
        }
    }
    while comps.len() < 2 {
        let c = complete(&comps, d);
        comps.push(c);
    }
    for c in comps.iter_mut() {
        fix_sign(c);
    }
    let mut components = Array2::<f64>::zeros((2, d));
    for (k, c) in comps.iter().enumerate() {
        components.row_mut(k).assign(c);
    }
    let projected = xc.dot(&components.t());
    Ok((
        PcaProjection {
            mean: mean.to_vec(),
            components,
            explained_variance: variances,
            degenerate,
        },
        projected,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_data() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i as f64) * if j == 0 { 1.0 } else { 2.0 });
        let (p, proj) = pca2(&x).unwrap();
        assert!(p.explained_variance[1].abs() <= 1e-9);
        let s5 = 5f64.sqrt();
        assert!((p.components[[0, 0]] - 1.0 / s5).abs() < 1e-9);
        assert!((p.components[[0, 1]] - 2.0 / s5).abs() < 1e-9);
        assert_eq!(proj.dim(), (6, 2));
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let x = Array2::from_shape_fn((3, 4), |(_, j)| j as f64);
        let (p, _) = pca2(&x).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.explained_variance, [0.0, 0.0]);
        let g = p.components.dot(&p.components.t());
        assert!((g - Array2::<f64>::eye(2)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gram_path_matches_cov_path() {
        let x = Array2::from_shape_fn((4, 6), |(i, j)| {
            ((i * 7 + j * 3) % 5) as f64 + 0.1 * j as f64
        });
        let (p, _) = pca2(&x).unwrap();
        let xt = x.t().to_owned();
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        let cov = xc.t().dot(&xc) / 3.0;
        let (vals, _) = symmetric_eigen(&cov);
        assert!((p.explained_variance[0] - vals[0]).abs() < 1e-9);
        assert!((p.explained_variance[1] - vals[1]).abs() < 1e-9);
        assert_eq!(xt.ncols(), 4);
    }
}
