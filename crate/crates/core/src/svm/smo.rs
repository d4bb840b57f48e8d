//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! maximize   W(α) = Σ αᵢ − ½ Σᵢⱼ αᵢ αⱼ yᵢ yⱼ K(xᵢ, xⱼ)
//! subject to 0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0
//! ```
//!
//! The outer loop follows Platt: alternate full passes over a seeded shuffle
//! of the training set with passes over the non-bound multipliers, choosing
//! the partner that maximizes |E₁ − E₂|. Optimality is tested against the
//! two threshold bounds `b_up` / `b_low` of Keerthi et al., computed from an
//! error cache kept for every point, so the returned solution satisfies the
//! KKT conditions to within `tol` everywhere.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cache::KernelRows;
use super::{KernelSpec, SvmModel, TrainConfig, SUPPORT_THRESHOLD};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::linalg::Matrix;

/// Smallest multiplier change accepted as progress.
const STEP_EPS: f64 = 1e-14;

/// Everything the solver knows at exit.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub model: SvmModel,
    /// One multiplier per training point.
    pub alphas: Vec<f64>,
    /// Training labels as ±1.
    pub signs: Vec<f64>,
    /// `yᵢ · f(xᵢ)` for each training point under the returned model.
    pub margins: Vec<f64>,
    pub objective: f64,
    /// Dual objective after every successful step, when requested.
    pub objective_trace: Vec<f64>,
    pub steps: usize,
    pub passes: usize,
    pub converged: bool,
}

impl SmoSolution {
    /// Largest KKT violation over the training set.
    pub fn max_kkt_violation(&self) -> f64 {
        let c = self.model.c();
        self.alphas
            .iter()
            .zip(&self.margins)
            .map(|(&a, &m)| kkt_violation(a, m, c))
            .fold(0.0, f64::max)
    }
}

/// How far `y·f(x)` is from satisfying the KKT condition for multiplier `a`.
pub fn kkt_violation(alpha: f64, margin: f64, c: f64) -> f64 {
    let at_lower = alpha <= SUPPORT_THRESHOLD;
    let at_upper = alpha >= c - c * 1e-12;
    if at_lower {
        (1.0 - margin).max(0.0)
    } else if at_upper {
        (margin - 1.0).max(0.0)
    } else {
        (margin - 1.0).abs()
    }
}

/// Train a two-class SVM.
pub fn train_smo(
    x: &[Vec<f64>],
    y: &[Label],
    cfg: &TrainConfig,
    kernel: KernelSpec,
) -> Result<SvmModel> {
    train_smo_detailed(x, y, cfg, kernel, false).map(|s| s.model)
}

/// Train and return the full solver state. With `trace` set, the dual
/// objective is recorded after every step.
pub fn train_smo_detailed(
    x: &[Vec<f64>],
    y: &[Label],
    cfg: &TrainConfig,
    kernel: KernelSpec,
    trace: bool,
) -> Result<SmoSolution> {
    cfg.validate()?;
    kernel.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 || !y.contains(&Label::Appropriate) || !y.contains(&Label::Inappropriate) {
        return Err(Error::DegenerateLabels);
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::FeatureDimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature(format!("row {i} has a non-finite value")));
        }
    }

    let mut solver = Solver::new(x, y, cfg, kernel, trace);
    solver.run();
    solver.finish()
}

struct Solver<'a> {
    x: &'a [Vec<f64>],
    y: Vec<f64>,
    alpha: Vec<f64>,
    /// `Fᵢ = Σⱼ αⱼ yⱼ K(xᵢ, xⱼ) − yᵢ`, the error without the threshold.
    f: Vec<f64>,
    c: f64,
    tol: f64,
    max_passes: usize,
    kernel: KernelSpec,
    rows: KernelRows<'a>,
    rng: ChaCha8Rng,
    trace: Option<Vec<f64>>,
    steps: usize,
    passes: usize,
    converged: bool,
}

impl<'a> Solver<'a> {
    fn new(
        x: &'a [Vec<f64>],
        labels: &[Label],
        cfg: &TrainConfig,
        kernel: KernelSpec,
        trace: bool,
    ) -> Self {
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let f = y.iter().map(|v| -v).collect();
        Solver {
            x,
            alpha: vec![0.0; y.len()],
            y,
            f,
            c: cfg.c,
            tol: cfg.tol,
            max_passes: cfg.max_passes,
            kernel,
            rows: KernelRows::new(x, kernel),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            trace: trace.then(Vec::new),
            steps: 0,
            passes: 0,
            converged: false,
        }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    /// May move so that `yᵢ αᵢ` increases.
    fn in_up(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] < self.c
        } else {
            self.alpha[i] > 0.0
        }
    }

    /// May move so that `yᵢ αᵢ` decreases.
    fn in_low(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] > 0.0
        } else {
            self.alpha[i] < self.c
        }
    }

    /// `(i_up, b_up, i_low, b_low)`.
    fn thresholds(&self) -> (Option<usize>, f64, Option<usize>, f64) {
        let mut up = (None, f64::INFINITY);
        let mut low = (None, f64::NEG_INFINITY);
        for i in 0..self.n() {
            let fi = self.f[i];
            if self.in_up(i) && fi < up.1 {
                up = (Some(i), fi);
            }
            if self.in_low(i) && fi > low.1 {
                low = (Some(i), fi);
            }
        }
        (up.0, up.1, low.0, low.1)
    }

    fn objective(&self) -> f64 {
        // Σα − ½ Σ αᵢ yᵢ (Fᵢ + yᵢ)
        self.alpha
            .iter()
            .zip(&self.y)
            .zip(&self.f)
            .map(|((a, y), f)| 0.5 * a - 0.5 * a * y * f)
            .sum()
    }

    fn refresh_errors(&mut self) {
        let n = self.n();
        let mut f: Vec<f64> = self.y.iter().map(|v| -v).collect();
        for j in 0..n {
            let coef = self.alpha[j] * self.y[j];
            if coef == 0.0 {
                continue;
            }
            let row = self.rows.row(j);
            for (fi, k) in f.iter_mut().zip(row.iter()) {
                *fi += coef * k;
            }
        }
        self.f = f;
    }

    fn run(&mut self) {
        let n = self.n();
        let mut order: Vec<usize> = (0..n).collect();
        let mut examine_all = true;
        let mut changed = 0usize;
        while (changed > 0 || examine_all) && self.passes < self.max_passes {
            self.passes += 1;
            changed = 0;
            if examine_all {
                self.refresh_errors();
                order.shuffle(&mut self.rng);
                for &i in &order {
                    changed += usize::from(self.examine(i));
                }
            } else {
                loop {
                    let (up, b_up, low, b_low) = self.thresholds();
                    let (Some(i_up), Some(i_low)) = (up, low) else { break };
                    if b_low <= b_up + 2.0 * self.tol {
                        break;
                    }
                    if !self.take_step(i_up, i_low) {
                        break;
                    }
                }
            }
            if examine_all {
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
        self.refresh_errors();
        let (_, b_up, _, b_low) = self.thresholds();
        self.converged = b_low <= b_up + 2.0 * self.tol;
        if !self.converged {
            log::warn!(
                "SMO stopped after {} passes with optimality gap {:e}",
                self.passes,
                b_low - b_up
            );
        }
    }

    fn examine(&mut self, i2: usize) -> bool {
        let f2 = self.f[i2];
        let (up, b_up, low, b_low) = self.thresholds();
        let tol2 = 2.0 * self.tol;
        let violates_up = self.in_up(i2) && low.is_some() && f2 < b_low - tol2;
        let violates_low = self.in_low(i2) && up.is_some() && f2 > b_up + tol2;
        let partner = match (violates_up, violates_low) {
            (false, false) => return false,
            (true, false) => low,
            (false, true) => up,
            (true, true) => {
                if b_low - f2 > f2 - b_up {
                    low
                } else {
                    up
                }
            }
        };
        if let Some(i1) = partner {
            if self.take_step(i1, i2) {
                return true;
            }
        }

        let n = self.n();
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.is_free(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let c = self.c;
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (f1, f2) = (self.f[i1], self.f[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo <= STEP_EPS * c {
            return false;
        }
        let row1 = self.rows.row(i1);
        let row2 = self.rows.row(i2);
        let k11 = self.rows.diag(i1);
        let k22 = self.rows.diag(i2);
        let k12 = row1[i2];
        let eta = k11 + k22 - 2.0 * k12;
        let slope = y2 * (f1 - f2);

        let mut a2_new = if eta > 1e-12 {
            (a2 + slope / eta).clamp(lo, hi)
        } else {
            // Objective along the constraint line is linear or convex: take
            // the better end point.
            let gain = |delta: f64| slope * delta - 0.5 * eta * delta * delta;
            let g_lo = gain(lo - a2);
            let g_hi = gain(hi - a2);
            if g_lo > g_hi + 1e-12 {
                lo
            } else if g_hi > g_lo + 1e-12 {
                hi
            } else {
                a2
            }
        };
        if a2_new <= c * 1e-12 {
            a2_new = 0.0;
        } else if a2_new >= c * (1.0 - 1e-12) {
            a2_new = c;
        }
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }
        let mut a1_new = a1 + s * (a2 - a2_new);
        if a1_new <= c * 1e-12 {
            a1_new = 0.0;
        } else if a1_new >= c * (1.0 - 1e-12) {
            a1_new = c;
        }

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        for ((fi, k1), k2) in self.f.iter_mut().zip(row1.iter()).zip(row2.iter()) {
            *fi += d1 * k1 + d2 * k2;
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        self.steps += 1;
        if self.trace.is_some() {
            let w = self.objective();
            self.trace.as_mut().unwrap().push(w);
        }
        true
    }

    fn finish(mut self) -> Result<SmoSolution> {
        let (_, b_up, _, b_low) = self.thresholds();
        let threshold = match (b_up.is_finite(), b_low.is_finite()) {
            (true, true) => 0.5 * (b_up + b_low),
            (true, false) => b_up,
            (false, true) => b_low,
            (false, false) => 0.0,
        };
        let bias = -threshold;

        let keep: Vec<usize> = (0..self.n()).filter(|&i| self.alpha[i] > SUPPORT_THRESHOLD).collect();
        let d = self.x[0].len();
        let mut sv = Matrix::zeros(keep.len(), d);
        for (row, &i) in keep.iter().enumerate() {
            sv.row_mut(row).copy_from_slice(&self.x[i]);
        }
        let coefs = keep.iter().map(|&i| self.alpha[i] * self.y[i]).collect();
        let model = SvmModel::from_parts(self.kernel, sv, coefs, bias, self.c)
            .map_err(|e| Error::Internal(format!("SMO produced an invalid model: {e}")))?;

        let margins = (0..self.n())
            .map(|i| self.y[i] * (self.f[i] + self.y[i] + bias))
            .collect();
        let objective = self.objective();
        Ok(SmoSolution {
            model,
            alphas: std::mem::take(&mut self.alpha),
            signs: std::mem::take(&mut self.y),
            margins,
            objective,
            objective_trace: self.trace.take().unwrap_or_default(),
            steps: self.steps,
            passes: self.passes,
            converged: self.converged,
        })
    }
}
