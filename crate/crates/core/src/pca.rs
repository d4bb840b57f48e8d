//! Principal component analysis with whitening.
//!
//! `fit_pca` centers the data, eigendecomposes the sample covariance (divisor
//! `N − 1`) with cyclic Jacobi rotations and keeps the `out_dim` leading
//! eigenpairs. When there are no more samples than input dimensions the
//! decomposition runs on the `N × N` Gram matrix instead, which has the same
//! non-zero spectrum and is far smaller for wide embeddings.
//!
//! `transform` projects onto the components and divides each coordinate by
//! `sqrt(eigenvalue + epsilon)`, so the training data comes out with identity
//! covariance.

use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen, norm, Matrix};

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Stop criterion for the eigensolver, relative to the covariance norm.
const JACOBI_TOLERANCE: f64 = 1e-12;

const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `out_dim × in_dim`, rows are principal directions.
    components: Matrix,
    eigenvalues: Vec<f64>,
    epsilon: f64,
}

impl PcaModel {
    /// Assemble a model from stored parts, checking its invariants.
    pub fn from_parts(
        mean: Vec<f64>,
        components: Matrix,
        eigenvalues: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        if components.cols() != mean.len() {
            return Err(Error::FeatureDimensionMismatch {
                expected: mean.len(),
                found: components.cols(),
            });
        }
        if components.rows() != eigenvalues.len() {
            return Err(Error::FeatureDimensionMismatch {
                expected: components.rows(),
                found: eigenvalues.len(),
            });
        }
        if components.rows() > components.cols() {
            return Err(Error::RankBoundExceeded {
                requested: components.rows(),
                max: components.cols(),
            });
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon}")));
        }
        if eigenvalues.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || eigenvalues.windows(2).any(|w| w[0] < w[1])
        {
            return Err(Error::InvalidParameter(
                "eigenvalues must be finite, non-negative and non-increasing".into(),
            ));
        }
        if mean.iter().chain(components.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature("non-finite PCA parameter".into()));
        }
        let model = PcaModel {
            mean,
            components,
            eigenvalues,
            epsilon,
        };
        let err = model.orthonormality_error();
        if err > ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "components are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(model)
    }

    /// A model that only centers on `mean` and keeps the first `out_dim`
    /// coordinates with unit scale. Mostly useful for tests and fixtures.
    pub fn passthrough(mean: Vec<f64>, out_dim: usize) -> Result<Self> {
        let in_dim = mean.len();
        let mut components = Matrix::zeros(out_dim, in_dim);
        for i in 0..out_dim.min(in_dim) {
            components[(i, i)] = 1.0;
        }
        Self::from_parts(mean, components, vec![1.0; out_dim], 0.0)
    }

    pub fn in_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn out_dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Largest absolute deviation of `components · componentsᵀ` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.out_dim();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let d = dot(self.components.row(i), self.components.row(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// Project and whiten one vector.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::FeatureDimensionMismatch {
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self
            .components
            .iter_rows()
            .zip(&self.eigenvalues)
            .map(|(c, &lambda)| dot(c, &centered) / (lambda + self.epsilon).sqrt())
            .collect())
    }

    /// Projection without whitening.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::FeatureDimensionMismatch {
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.components.iter_rows().map(|c| dot(c, &centered)).collect())
    }
}

/// Fit a whitening PCA keeping the `out_dim` leading components.
pub fn fit_pca(data: &[Vec<f64>], out_dim: usize, epsilon: f64) -> Result<PcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let in_dim = data[0].len();
    if in_dim == 0 {
        return Err(Error::InvalidParameter("PCA input dimension is zero".into()));
    }
    if let Some(row) = data.iter().find(|r| r.len() != in_dim) {
        return Err(Error::FeatureDimensionMismatch {
            expected: in_dim,
            found: row.len(),
        });
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidFeature("non-finite value in PCA input".into()));
    }
    if out_dim == 0 {
        return Err(Error::InvalidParameter("PCA output dimension is zero".into()));
    }
    let max = (n - 1).min(in_dim);
    if out_dim > max {
        return Err(Error::RankBoundExceeded {
            requested: out_dim,
            max,
        });
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon}")));
    }

    let mut mean = vec![0.0; in_dim];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = Matrix::zeros(n, in_dim);
    for (i, row) in data.iter().enumerate() {
        for (dst, (v, m)) in centered.row_mut(i).iter_mut().zip(row.iter().zip(&mean)) {
            *dst = v - m;
        }
    }

    let (components, eigenvalues) = if n <= in_dim {
        leading_pairs_from_gram(&centered, out_dim)
    } else {
        leading_pairs_from_covariance(&centered, out_dim)
    };
    build_model(mean, components, eigenvalues, epsilon)
}

fn build_model(
    mean: Vec<f64>,
    mut components: Matrix,
    eigenvalues: Vec<f64>,
    epsilon: f64,
) -> Result<PcaModel> {
    for k in 0..components.rows() {
        apply_sign_convention(components.row_mut(k));
    }
    let eigenvalues = eigenvalues.into_iter().map(|v| v.max(0.0)).collect();
    PcaModel::from_parts(mean, components, eigenvalues, epsilon)
}

/// Flip `v` so that its entry of largest magnitude is positive; ties go to
/// the lowest index.
fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn leading_pairs_from_covariance(centered: &Matrix, out_dim: usize) -> (Matrix, Vec<f64>) {
    let n = centered.rows();
    let d = centered.cols();
    let mut cov = Matrix::zeros(d, d);
    for row in centered.iter_rows() {
        for i in 0..d {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            let dst = cov.row_mut(i);
            for j in i..d {
                dst[j] += ri * row[j];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] * scale;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = jacobi_eigen(&cov, JACOBI_TOLERANCE);
    let mut components = Matrix::zeros(out_dim, d);
    for k in 0..out_dim {
        components.row_mut(k).copy_from_slice(eig.vectors.row(k));
    }
    (components, eig.values[..out_dim].to_vec())
}

fn leading_pairs_from_gram(centered: &Matrix, out_dim: usize) -> (Matrix, Vec<f64>) {
    let n = centered.rows();
    let d = centered.cols();
    let denom = (n - 1) as f64;
    let mut gram = centered.gram();
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] /= denom;
        }
    }
    let eig = jacobi_eigen(&gram, JACOBI_TOLERANCE);
    let mut components = Matrix::zeros(out_dim, d);
    for k in 0..out_dim {
        let u = eig.vectors.row(k);
        let dst = components.row_mut(k);
        for (i, row) in centered.iter_rows().enumerate() {
            let w = u[i];
            for (c, x) in dst.iter_mut().zip(row) {
                *c += w * x;
            }
        }
    }
    orthonormalize_rows(&mut components);
    (components, eig.values[..out_dim].to_vec())
}

/// Modified Gram–Schmidt, run twice. Rows that vanish (zero-variance
/// directions) are replaced by unit vectors orthogonal to the rest.
fn orthonormalize_rows(m: &mut Matrix) {
    let k = m.rows();
    let d = m.cols();
    for _ in 0..2 {
        for i in 0..k {
            let original = norm(m.row(i));
            for j in 0..i {
                let basis = m.row(j).to_vec();
                let proj = dot(m.row(i), &basis);
                for (x, y) in m.row_mut(i).iter_mut().zip(&basis) {
                    *x -= proj * y;
                }
            }
            let len = norm(m.row(i));
            if len > 1e-10 * original.max(f64::MIN_POSITIVE) && len > 0.0 {
                for x in m.row_mut(i) {
                    *x /= len;
                }
            } else {
                fill_orthogonal(m, i, d);
            }
        }
    }
}

fn fill_orthogonal(m: &mut Matrix, i: usize, d: usize) {
    for axis in 0..d {
        let mut candidate = vec![0.0; d];
        candidate[axis] = 1.0;
        for j in 0..m.rows() {
            if j == i {
                continue;
            }
            let proj = dot(&candidate, m.row(j));
            for (c, y) in candidate.iter_mut().zip(m.row(j)) {
                *c -= proj * y;
            }
        }
        let len = norm(&candidate);
        if len > 0.5 {
            for (dst, c) in m.row_mut(i).iter_mut().zip(&candidate) {
                *dst = c / len;
            }
            return;
        }
    }
}
