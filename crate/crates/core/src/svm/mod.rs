//! Two-class support vector machine: SMO training on the dual problem and
//! kernel decision functions.

mod cache;
mod kernel;
pub mod oracle;
mod smo;

pub use kernel::KernelSpec;
pub use smo::{train_smo, train_smo_detailed, SmoSolution};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::linalg::Matrix;

/// Coefficients below this are treated as zero when extracting support
/// vectors.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

const EQUALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Box constraint on the dual variables.
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Upper bound on outer SMO passes.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            tol: 1e-3,
            max_passes: 100_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParameter("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// A trained decision function `f(x) = Σ coef_i · K(sv_i, x) + bias`.
/// Positive values mean [`Label::Inappropriate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    kernel: KernelSpec,
    support_vectors: Matrix,
    /// `α_i · y_i` for each support vector.
    dual_coefs: Vec<f64>,
    bias: f64,
    c: f64,
}

impl SvmModel {
    pub fn from_parts(
        kernel: KernelSpec,
        support_vectors: Matrix,
        dual_coefs: Vec<f64>,
        bias: f64,
        c: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        if support_vectors.rows() != dual_coefs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} support vectors but {} coefficients",
                support_vectors.rows(),
                dual_coefs.len()
            )));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
        }
        if !bias.is_finite() || support_vectors.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature("non-finite SVM parameter".into()));
        }
        let slack = c * 1e-9;
        if let Some(bad) = dual_coefs.iter().find(|a| !(a.abs() > 0.0 && a.abs() <= c + slack)) {
            return Err(Error::InvalidParameter(format!(
                "dual coefficient {bad} outside (0, C={c}]"
            )));
        }
        let sum: f64 = dual_coefs.iter().sum();
        if sum.abs() > EQUALITY_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "dual coefficients sum to {sum}, expected 0"
            )));
        }
        Ok(SvmModel {
            kernel,
            support_vectors,
            dual_coefs,
            bias,
            c,
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn support_vectors(&self) -> &Matrix {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::FeatureDimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let sum: f64 = self
            .support_vectors
            .iter_rows()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * self.kernel.eval(sv, x))
            .sum();
        Ok(sum + self.bias)
    }

    /// Inappropriate iff the decision value is non-negative.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.decision(x).map(Label::from_sign)
    }
}
