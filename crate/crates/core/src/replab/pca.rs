// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::RepError;

/// Mean-centered PCA of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` orthonormal directions, largest variance first. Each is signed so
    /// its largest-magnitude entry is positive.
    pub components: Vec<Vec<f64>>,
    /// Per input point, its coordinates along `components`.
    pub coords: Vec<Vec<f64>>,
    /// Sample variance along each component (`n - 1` denominator).
    pub variances: Vec<f64>,
    /// `variances` over the total variance; nonincreasing, sum at most 1.
    pub explained_ratio: Vec<f64>,
}

impl Pca {
    /// `sum_i coords[i] * components[i]`, i.e. a centered point.
    pub fn reconstruct_centered(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        for (c, comp) in coords.iter().zip(&self.components) {
            for (o, x) in out.iter_mut().zip(comp) {
                *o += c * x;
            }
        }
        out
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.reconstruct_centered(coords);
        out.iter_mut().zip(&self.mean).for_each(|(o, m)| *o += m);
        out
    }
}

/// Projects `points` onto their top `k` principal components, with
/// `1 <= k <= min(count - 1, dim)`.
///
/// Uses the `dim x dim` covariance when `dim <= count`, otherwise the
/// `count x count` Gram matrix.
pub fn pca_project(points: &[Vec<f64>], k: usize) -> Result<Pca, RepError> {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    if n < 2 || k == 0 || k > (n - 1).min(d) {
        return Err(RepError::InvalidK { k, count: n, dim: d });
    }
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(RepError::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / n as f64);
    }
    let x = DMatrix::from_fn(n, d, |i, j| points[i][j] - mean[j]);
    let total_ss: f64 = x.iter().map(|v| v * v).sum();
    let scale = points
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if total_ss.sqrt() <= 1e-12 * scale * ((n * d) as f64).sqrt() {
        return Err(RepError::DegenerateInput);
    }
    let denom = (n - 1) as f64;

    let (values, mut vectors) = if d <= n {
        let cov = x.transpose() * &x / denom;
        let (vals, vecs) = sorted_eigen(cov);
        (vals, (0..k).map(|i| vecs.column(i).into_owned()).collect::<Vec<_>>())
    } else {
        let gram = &x * x.transpose() / denom;
        let (vals, vecs) = sorted_eigen(gram);
        let tol = vals[0].max(0.0) * 1e-10;
        let mut comps: Vec<DVector<f64>> = Vec::with_capacity(k);
        for (i, &val) in vals.iter().enumerate().take(k) {
            if val > tol {
                let u = x.transpose() * vecs.column(i);
                comps.push(u.normalize());
            } else {
                // zero-variance direction; any unit vector orthogonal to the rest
                comps.push(orthogonal_complement(&comps, d));
            }
        }
        (vals, comps)
    };

    for v in &mut vectors {
        let (idx, _) = v.iter().enumerate().fold(
            (0, 0.0f64),
            |(bi, bv), (i, &x)| {
                if x.abs() > bv {
                    (i, x.abs())
                } else {
                    (bi, bv)
                }
            },
        );
        if v[idx] < 0.0 {
            *v = -v.clone();
        }
    }

    let total = total_ss / denom;
    let variances: Vec<f64> = values.iter().take(k).map(|v| v.max(0.0)).collect();
    let explained_ratio = variances.iter().map(|v| v / total).collect();
    let comp_matrix = DMatrix::from_fn(d, k, |i, j| vectors[j][i]);
    let projected = &x * comp_matrix;
    Ok(Pca {
        mean,
        components: vectors.iter().map(|v| v.iter().copied().collect()).collect(),
        coords: (0..n).map(|i| projected.row(i).iter().copied().collect()).collect(),
        variances,
        explained_ratio,
    })
}

/// Eigenpairs of a symmetric matrix, eigenvalues in decreasing order.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    (values, vectors)
}

fn orthogonal_complement(basis: &[DVector<f64>], d: usize) -> DVector<f64> {
    for axis in 0..d {
        let mut v = DVector::zeros(d);
        v[axis] = 1.0;
        for b in basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
    unreachable!("fewer than d vectors always leave a complement")
}

/// Coordinates, one row per labelled point: `label,pc1,...,pck`.
pub fn write_pca_csv(labels: &[String], pca: &Pca, writer: impl Write) -> Result<(), RepError> {
    let mut w = csv::Writer::from_writer(writer);
    let k = pca.components.len();
    let mut header = vec!["label".to_string()];
    header.extend((1..=k).map(|i| format!("pc{i}")));
    w.write_record(&header)?;
    for (label, row) in labels.iter().zip(&pca.coords) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| format!("{v:.9e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
