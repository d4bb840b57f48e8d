//! Reference solver for the SVM dual, used to check SMO.
//!
//! Accelerated projected gradient ascent with adaptive restart. Each iterate
//! is projected onto `{0 ≤ α ≤ C, Σ αᵢ yᵢ = 0}` by bisection on the multiplier
//! of the equality constraint. It shares nothing with the SMO solver apart
//! from the problem statement, and is only meant for small instances.

use crate::error::{Error, Result};
use crate::label::Label;

/// Largest instance the oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 200;

/// Stop once the natural residual `‖α − P(α + ∇W)‖` drops below this.
pub const ORACLE_RESIDUAL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl OracleKernel {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            OracleKernel::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum(),
            OracleKernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    kernel: OracleKernel,
}

impl QpSolution {
    pub fn decision(&self, point: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.alphas)
            .map(|((xi, yi), a)| a * yi * self.kernel.value(xi, point))
            .sum::<f64>()
            + self.bias
    }
}

/// Maximize the SVM dual for `(x, y, c, kernel)`.
pub fn qp_oracle(x: &[Vec<f64>], y: &[Label], c: f64, kernel: OracleKernel) -> Result<QpSolution> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n > ORACLE_MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "oracle handles at most {ORACLE_MAX_POINTS} points, got {n}"
        )));
    }
    if !y.contains(&Label::Appropriate) || !y.contains(&Label::Inappropriate) {
        return Err(Error::DegenerateLabels);
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidFeature("non-finite oracle input".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let ys: Vec<f64> = y
        .iter()
        .map(|l| match l {
            Label::Appropriate => -1.0,
            Label::Inappropriate => 1.0,
        })
        .collect();

    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = ys[i] * ys[j] * kernel.value(&x[i], &x[j]);
        }
    }
    // Gershgorin bound on the largest eigenvalue of Q.
    let lipschitz = (0..n)
        .map(|i| q[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;

    let gradient = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - q[i * n..(i + 1) * n].iter().zip(a).map(|(qij, aj)| qij * aj).sum::<f64>())
            .collect()
    };
    let objective = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q[i * n + j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let residual = |a: &[f64], g: &[f64]| -> f64 {
        let moved: Vec<f64> = a.iter().zip(g).map(|(ai, gi)| ai + gi).collect();
        let p = project(&moved, &ys, c);
        p.iter().zip(a).map(|(pi, ai)| (pi - ai) * (pi - ai)).sum::<f64>().sqrt()
    };

    let mut alpha = vec![0.0; n];
    let mut prev = alpha.clone();
    let mut momentum = 1.0f64;
    let mut value = objective(&alpha);
    let mut iterations = 0;
    let mut res = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let look: Vec<f64> = alpha
            .iter()
            .zip(&prev)
            .map(|(a, p)| a + beta * (a - p))
            .collect();
        let g = gradient(&look);
        let moved: Vec<f64> = look.iter().zip(&g).map(|(a, gi)| a + step * gi).collect();
        let candidate = project(&moved, &ys, c);
        let candidate_value = objective(&candidate);
        if candidate_value < value {
            // restart the momentum
            momentum = 1.0;
            prev = alpha.clone();
            let g = gradient(&alpha);
            let moved: Vec<f64> = alpha.iter().zip(&g).map(|(a, gi)| a + step * gi).collect();
            alpha = project(&moved, &ys, c);
            value = objective(&alpha);
        } else {
            momentum = next_momentum;
            prev = std::mem::replace(&mut alpha, candidate);
            value = candidate_value;
        }
        if iterations % 16 == 0 {
            res = residual(&alpha, &gradient(&alpha));
            if res < ORACLE_RESIDUAL {
                break;
            }
        }
    }
    if res >= ORACLE_RESIDUAL {
        res = residual(&alpha, &gradient(&alpha));
    }

    let g: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| alpha[j] * ys[j] * kernel.value(&x[j], &x[i]))
                .sum::<f64>()
        })
        .collect();
    let bias = oracle_bias(&alpha, &ys, &g, c);

    Ok(QpSolution {
        objective: objective(&alpha),
        alphas: alpha,
        bias,
        residual: res,
        iterations,
        x: x.to_vec(),
        y: ys,
        kernel,
    })
}

/// Bias from free multipliers, or the midpoint of the feasible interval when
/// every multiplier sits at a bound.
fn oracle_bias(alpha: &[f64], y: &[f64], g: &[f64], c: f64) -> f64 {
    let free_tol = 1e-8 * c;
    let free: Vec<f64> = (0..alpha.len())
        .filter(|&i| alpha[i] > free_tol && alpha[i] < c - free_tol)
        .map(|i| y[i] - g[i])
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..alpha.len() {
        let at_zero = alpha[i] <= free_tol;
        let raises_lower = (at_zero && y[i] > 0.0) || (!at_zero && y[i] < 0.0);
        if raises_lower {
            lower = lower.max(y[i] - g[i]);
        } else {
            upper = upper.min(y[i] - g[i]);
        }
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Euclidean projection onto `{0 ≤ α ≤ c, Σ αᵢ yᵢ = 0}`.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> {
        v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect()
    };
    let balance = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let spread = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut lo = -(spread + c + 1.0);
    let mut hi = spread + c + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_is_half() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![Label::Appropriate, Label::Inappropriate];
        let sol = qp_oracle(&x, &y, 1e6, OracleKernel::Linear).unwrap();
        assert!((sol.alphas[0] - 0.5).abs() < 1e-9);
        assert!((sol.alphas[1] - 0.5).abs() < 1e-9);
        assert!(sol.residual < ORACLE_RESIDUAL);
        assert!(sol.bias.abs() < 1e-9);
        // W(α) = 2α − 2α² at α = ½
        assert!((sol.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn tiny_c_clips_everything() {
        let x = vec![vec![-1.0], vec![-0.5], vec![0.7], vec![1.0]];
        let y = vec![
            Label::Appropriate,
            Label::Appropriate,
            Label::Inappropriate,
            Label::Inappropriate,
        ];
        let c = 1e-4;
        let sol = qp_oracle(&x, &y, c, OracleKernel::Linear).unwrap();
        for a in &sol.alphas {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_feasible() {
        let y = [1.0, -1.0, 1.0, -1.0, -1.0];
        let p = project(&[3.0, -2.0, 0.4, 0.9, 7.0], &y, 1.5);
        let balance: f64 = p.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(balance.abs() < 1e-12);
        assert!(p.iter().all(|a| (0.0..=1.5).contains(a)));
    }
}
