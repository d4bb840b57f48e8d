use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma.is_finite() && gamma > 0.0) => Err(
                Error::InvalidParameter(format!("RBF gamma must be positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }

    /// RBF kernel with `gamma = 1 / (d · var(X))`, the variance taken over
    /// every entry of the data.
    pub fn rbf_scaled(data: &[Vec<f64>]) -> KernelSpec {
        let d = data.first().map_or(1, Vec::len).max(1);
        let count = data.iter().map(Vec::len).sum::<usize>();
        if count == 0 {
            return KernelSpec::Rbf { gamma: 1.0 / d as f64 };
        }
        let mean = data.iter().flatten().sum::<f64>() / count as f64;
        let var = data.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        let gamma = if var > 0.0 && var.is_finite() {
            1.0 / (d as f64 * var)
        } else {
            1.0 / d as f64
        };
        KernelSpec::Rbf { gamma }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        let k = KernelSpec::Rbf { gamma: 0.5 };
        assert_eq!(k.eval(&[1.0], &[1.0]), 1.0);
        assert!((k.eval(&[0.0], &[2.0]) - (-2.0f64).exp()).abs() < 1e-15);
        assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
    }

    #[test]
    fn scaled_gamma() {
        let data = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        // mean 1, variance 1, d = 2
        assert_eq!(KernelSpec::rbf_scaled(&data), KernelSpec::Rbf { gamma: 0.5 });
    }
}
