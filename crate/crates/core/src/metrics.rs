//! Precision, recall and F1, stratified splits, and k-fold cross-validation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Share of items held out for testing.
pub const DEFAULT_TEST_FRACTION: f64 = 0.1;
pub const DEFAULT_FOLDS: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Counts from the point of view of the other class.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

pub fn confusion(truth: &[Label], pred: &[Label], positive: Label) -> Result<ConfusionCounts> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t == positive, p == positive) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> ClassReport {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    ClassReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        support: c.tp + c.fn_,
    }
}

/// Reports for both classes, Appropriate first.
pub fn class_reports(truth: &[Label], pred: &[Label]) -> Result<[ClassReport; 2]> {
    let appr = confusion(truth, pred, Label::Appropriate)?;
    Ok([precision_recall_f1(&appr), precision_recall_f1(&appr.swapped())])
}

fn class_indices(labels: &[Label], class: Label, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    idx.shuffle(rng);
    idx
}

/// Stratified partition of `0..labels.len()` into `k` folds.
///
/// Each class is shuffled, the classes are laid end to end and the result is
/// dealt round-robin, so fold sizes and per-fold class counts each differ by
/// at most one. Folds are returned sorted.
pub fn kfold_split(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {n} items")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    let order = Label::BOTH
        .iter()
        .flat_map(|&c| class_indices(labels, c, &mut rng))
        .collect::<Vec<_>>();
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified train/test split holding out `round(fraction · n_c)` items of
/// each class. Returns sorted `(train, test)` indices.
pub fn train_test_split(
    labels: &[Label],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in Label::BOTH {
        let idx = class_indices(labels, class, &mut rng);
        let held = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..held]);
        train.extend_from_slice(&idx[held..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Something that can be trained on a subset of a dataset and then label
/// another subset. Indices refer to the caller's dataset.
pub trait FoldLearner: Sync {
    fn fit_predict(&self, train: &[usize], test: &[usize]) -> Result<Vec<Label>>;
}

impl<F> FoldLearner for F
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<Label>> + Sync,
{
    fn fit_predict(&self, train: &[usize], test: &[usize]) -> Result<Vec<Label>> {
        self(train, test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (divisor `n − 1`).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub label: Label,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// Items of this class across all test folds.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub test_size: usize,
    /// Appropriate first.
    pub reports: [ClassReport; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Appropriate first.
    pub classes: [ClassSummary; 2],
}

impl CvReport {
    pub fn summary(&self, label: Label) -> &ClassSummary {
        &self.classes[usize::from(label == Label::Inappropriate)]
    }

    /// Per-class table with `mean ± std` cells.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<14}{:>20}{:>20}{:>20}{:>9}\n",
            "Class", "F1", "Precision", "Recall", "Support"
        );
        for c in &self.classes {
            let cell = |m: &MeanStd| format!("{:.4} ± {:.4}", m.mean, m.std);
            let _ = writeln!(
                out,
                "{:<14}{:>20}{:>20}{:>20}{:>9}",
                c.label.to_string(),
                cell(&c.f1),
                cell(&c.precision),
                cell(&c.recall),
                c.support
            );
        }
        out
    }
}

/// Plain per-class table.
pub fn render_reports(reports: &[ClassReport; 2]) -> String {
    let mut out = format!(
        "{:<14}{:>10}{:>11}{:>10}{:>9}\n",
        "Class", "F1", "Precision", "Recall", "Support"
    );
    for (label, r) in Label::BOTH.iter().zip(reports) {
        let _ = writeln!(
            out,
            "{:<14}{:>10.4}{:>11.4}{:>10.4}{:>9}",
            label.to_string(),
            r.f1,
            r.precision,
            r.recall,
            r.support
        );
    }
    out
}

/// Stratified k-fold cross-validation. For each fold `learner` is trained
/// on the other `k − 1` folds and evaluated on it. Folds run in parallel;
/// the report does not depend on scheduling.
pub fn cross_validate(
    learner: &dyn FoldLearner,
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let folds = kfold_split(labels, k, seed)?;
    let splits: Vec<(Vec<usize>, &[usize])> = folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            (train, test.as_slice())
        })
        .collect();
    for (f, (train, _)) in splits.iter().enumerate() {
        for class in Label::BOTH {
            if !train.iter().any(|&i| labels[i] == class) {
                return Err(Error::DegenerateFold(format!(
                    "training portion of fold {f} has no {class} items"
                )));
            }
        }
    }

    let results: Vec<FoldResult> = splits
        .par_iter()
        .map(|(train, test)| {
            let pred = learner.fit_predict(train, test)?;
            let truth: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
            Ok(FoldResult {
                test_size: test.len(),
                reports: class_reports(&truth, &pred)?,
            })
        })
        .collect::<Result<_>>()?;

    let summary = |c: usize| {
        let pick = |f: fn(&ClassReport) -> f64| -> MeanStd {
            MeanStd::of(&results.iter().map(|r| f(&r.reports[c])).collect::<Vec<_>>())
        };
        ClassSummary {
            label: Label::BOTH[c],
            precision: pick(|r| r.precision),
            recall: pick(|r| r.recall),
            f1: pick(|r| r.f1),
            support: results.iter().map(|r| r.reports[c].support).sum(),
        }
    };
    Ok(CvReport {
        k,
        seed,
        classes: [summary(0), summary(1)],
        folds: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Appropriate as A, Inappropriate as I};

    #[test]
    fn confusion_enumeration() {
        let c = confusion(&[I, I, A, A], &[I, A, I, A], I).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!(confusion(&[I; 4], &[I; 4], I).unwrap().tp, 4);
        assert_eq!(confusion(&[I; 4], &[A; 4], I).unwrap().fn_, 4);
        assert!(matches!(confusion(&[I], &[I, A], I), Err(Error::LengthMismatch { .. })));
        assert!(matches!(confusion(&[], &[], I), Err(Error::EmptyInput)));
    }

    #[test]
    fn degenerate_conventions() {
        let r = precision_recall_f1(&ConfusionCounts { tp: 0, fp: 0, tn: 5, fn_: 0 });
        assert_eq!((r.precision, r.recall, r.f1, r.support), (0.0, 0.0, 0.0, 0));
        let perfect = precision_recall_f1(&ConfusionCounts { tp: 3, fp: 0, tn: 2, fn_: 0 });
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f1_is_exact_on_small_counts() {
        // tp 3, fp 1, fn 2: P = 3/4, R = 3/5, F1 = 2·tp / (2·tp + fp + fn) = 6/9
        let r = precision_recall_f1(&ConfusionCounts { tp: 3, fp: 1, tn: 0, fn_: 2 });
        assert_eq!(r.precision, 0.75);
        assert_eq!(r.recall, 0.6);
        assert!((r.f1 - 6.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_folds_of_five() {
        let labels: Vec<Label> = (0..100).map(|i| if i % 2 == 0 { A } else { I }).collect();
        let folds = kfold_split(&labels, 20, 3).unwrap();
        assert_eq!(folds.len(), 20);
        for f in &folds {
            assert_eq!(f.len(), 5);
            let a = f.iter().filter(|&&i| labels[i] == A).count();
            assert!(a == 2 || a == 3);
        }
        let singletons = kfold_split(&labels[..10], 10, 0).unwrap();
        assert!(singletons.iter().all(|f| f.len() == 1));
        assert!(kfold_split(&labels[..3], 4, 0).is_err());
        assert!(kfold_split(&labels, 1, 0).is_err());
    }

    #[test]
    fn holdout_is_stratified() {
        let labels: Vec<Label> = (0..400).map(|i| if i < 200 { A } else { I }).collect();
        let (train, test) = train_test_split(&labels, 0.1, 7).unwrap();
        assert_eq!(test.len(), 40);
        assert_eq!(train.len(), 360);
        assert_eq!(test.iter().filter(|&&i| labels[i] == A).count(), 20);
        assert_eq!(train_test_split(&labels, 0.1, 7).unwrap(), (train, test));
    }

    #[test]
    fn perfect_learner_scores_one() {
        let labels: Vec<Label> = (0..40).map(|i| if i % 3 == 0 { A } else { I }).collect();
        let oracle = |_: &[usize], test: &[usize]| Ok(test.iter().map(|&i| labels[i]).collect());
        let report = cross_validate(&oracle, &labels, 5, 11).unwrap();
        assert_eq!(report.folds.len(), 5);
        for c in &report.classes {
            assert_eq!((c.f1.mean, c.f1.std), (1.0, 0.0));
            assert_eq!((c.precision.mean, c.recall.mean), (1.0, 1.0));
        }
        assert_eq!(report.summary(A).support, 14);
        assert_eq!(report, cross_validate(&oracle, &labels, 5, 11).unwrap());
    }

    #[test]
    fn fold_without_a_class_is_rejected() {
        let mut labels = vec![A; 10];
        labels[0] = I;
        let learner = |_: &[usize], test: &[usize]| Ok(vec![A; test.len()]);
        assert!(matches!(
            cross_validate(&learner, &labels, 5, 0),
            Err(Error::DegenerateFold(_))
        ));
    }

    #[test]
    fn sample_standard_deviation() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    fn labels_strategy() -> impl Strategy<Value = Vec<Label>> {
        proptest::collection::vec(prop_oneof![Just(A), Just(I)], 2..120)
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(labels in labels_strategy(), k in 2usize..25, seed in any::<u64>()) {
            prop_assume!(k <= labels.len());
            let folds = kfold_split(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let n_a = labels.iter().filter(|&&l| l == A).count() as f64;
            for f in &folds {
                let a = f.iter().filter(|&&i| labels[i] == A).count() as f64;
                let expected = n_a * f.len() as f64 / labels.len() as f64;
                prop_assert!((a - expected).abs() <= 1.0 + 1e-9);
            }
            prop_assert_eq!(folds, kfold_split(&labels, k, seed).unwrap());
        }

        #[test]
        fn swapping_the_positive_class(truth in labels_strategy(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pred = truth.clone();
            pred.shuffle(&mut rng);
            let a = confusion(&truth, &pred, A).unwrap();
            let i = confusion(&truth, &pred, I).unwrap();
            prop_assert_eq!(a.swapped(), i);
            prop_assert_eq!(a.total(), truth.len());
            let r = precision_recall_f1(&a);
            // F1 = 2·tp / (2·tp + fp + fn)
            let den = 2 * a.tp + a.fp + a.fn_;
            let direct = if den == 0 { 0.0 } else { 2.0 * a.tp as f64 / den as f64 };
            prop_assert!((r.f1 - direct).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.f1));
        }
    }
}
