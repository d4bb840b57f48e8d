//! Training and evaluation on a dataset manifest.

use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::bundle::{KernelKind, ModelBundle, ModelConfig};
use super::manifest::{load_pooled, DatasetManifest, ManifestKind, MediaEmbedding};
use crate::embeddings::{PooledEmbedding, ProviderSpec};
use crate::error::{Error, Result};
use crate::label::{Label, Verdict};
use crate::metrics::{class_reports, cross_validate, train_test_split, ClassReport, CvReport, DEFAULT_TEST_FRACTION};
use crate::pca::{fit_pca, PcaModel};
use crate::svm::{train_smo, KernelSpec, SvmModel};

/// PCA output size actually used for `n` training items of dimension `dim`:
/// the request, limited by the rank bound and by `n / SAMPLES_PER_COMPONENT`.
pub fn effective_components(requested: usize, n: usize, dim: usize) -> usize {
    requested
        .min(dim)
        .min(n.saturating_sub(1))
        .min((n / SAMPLES_PER_COMPONENT).max(1))
}

/// Training items required per retained principal component.
pub const SAMPLES_PER_COMPONENT: usize = 10;

/// PCA models and SVM fitted on one training set.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub pca_img: PcaModel,
    pub pca_aud: PcaModel,
    pub svm: SvmModel,
}

impl FittedModel {
    pub fn verdict(&self, pooled: &PooledEmbedding) -> Result<Verdict> {
        let feature = pooled.fuse(&self.pca_img, &self.pca_aud)?;
        Ok(Verdict::from_score(self.svm.decision(feature.values())?))
    }
}

fn fit_component(rows: &[&[f64]], requested: usize, epsilon: f64, what: &str) -> Result<PcaModel> {
    let dim = rows.first().map_or(0, |r| r.len());
    if dim == 0 {
        return Err(Error::InsufficientData(format!("no {what} embeddings")));
    }
    let out = effective_components(requested, rows.len(), dim);
    if out < requested {
        warn!("{what} PCA keeps {out} of {requested} requested components ({} items, dimension {dim})", rows.len());
    }
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    fit_pca(&data, out, epsilon)
}

/// Fit both PCA models and the SVM on `pooled[train]`.
pub fn fit_model(
    pooled: &[PooledEmbedding],
    labels: &[Label],
    train: &[usize],
    config: &ModelConfig,
) -> Result<FittedModel> {
    let y: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
    if !y.contains(&Label::Appropriate) || !y.contains(&Label::Inappropriate) {
        return Err(Error::DegenerateLabels);
    }
    let img: Vec<&[f64]> = train.iter().map(|&i| pooled[i].image.as_slice()).collect();
    let aud: Vec<&[f64]> = train.iter().map(|&i| pooled[i].audio.as_slice()).collect();
    let pca_img = fit_component(&img, config.image_components, config.epsilon, "image")?;
    let pca_aud = fit_component(&aud, config.audio_components, config.epsilon, "audio")?;
    let x: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| pooled[i].fuse(&pca_img, &pca_aud).map(|f| f.into_values()))
        .collect::<Result<_>>()?;
    let kernel = match config.kernel {
        KernelKind::Linear => KernelSpec::Linear,
        KernelKind::Rbf => KernelSpec::rbf_scaled(&x),
    };
    let svm = train_smo(&x, &y, &config.train_config(), kernel)?;
    Ok(FittedModel { pca_img, pca_aud, svm })
}

/// Fit on `train` and label `test`.
pub fn fit_predict(
    pooled: &[PooledEmbedding],
    labels: &[Label],
    train: &[usize],
    test: &[usize],
    config: &ModelConfig,
) -> Result<Vec<Label>> {
    let model = fit_model(pooled, labels, train, config)?;
    test.iter().map(|&i| model.verdict(&pooled[i]).map(|v| v.label)).collect()
}

/// Stratified k-fold cross-validation of the full PCA + SVM fit.
pub fn cross_validate_pooled(
    pooled: &[PooledEmbedding],
    labels: &[Label],
    config: &ModelConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    if pooled.len() != labels.len() {
        return Err(Error::LengthMismatch { left: pooled.len(), right: labels.len() });
    }
    let learner = |train: &[usize], test: &[usize]| fit_predict(pooled, labels, train, test, config);
    cross_validate(&learner, labels, k, seed)
}

/// Where the embeddings of a manifest come from.
fn dataset(manifest: &DatasetManifest, provider: &ProviderSpec, config: &ModelConfig) -> Result<Vec<PooledEmbedding>> {
    match manifest.kind {
        ManifestKind::Embeddings => load_pooled(manifest, None),
        ManifestKind::Media => {
            let provider = provider.open(config.image_dim, config.audio_dim)?;
            let media = MediaEmbedding {
                provider: provider.as_ref(),
                sampling_rate: config.sampling_rate,
                audio_window: config.audio_window,
            };
            load_pooled(manifest, Some(&media))
        }
    }
}

fn subset<T: Copy>(values: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| values[i]).collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub train_size: usize,
    pub test_size: usize,
    /// Held-out reports, Appropriate first. `None` when the split is empty.
    pub test_reports: Option<[ClassReport; 2]>,
}

/// Hold out a stratified tenth of `manifest`, train on the rest and write
/// the bundle to `out`.
pub fn run_train(manifest: &Path, out: &Path, config: &ModelConfig, provider: &ProviderSpec) -> Result<TrainOutcome> {
    config.validate()?;
    let manifest = DatasetManifest::load(manifest)?;
    let labels = manifest.labels();
    if !labels.contains(&Label::Appropriate) || !labels.contains(&Label::Inappropriate) {
        return Err(Error::DegenerateLabels);
    }
    let pooled = dataset(&manifest, provider, config)?;
    let mut config = config.clone();
    config.image_dim = pooled[0].image.len();
    config.audio_dim = pooled[0].audio.len();

    let (train, test) = train_test_split(&labels, DEFAULT_TEST_FRACTION, config.seed)?;
    info!("training on {} items, holding out {}", train.len(), test.len());
    let model = fit_model(&pooled, &labels, &train, &config)?;
    let test_reports = if test.is_empty() {
        None
    } else {
        let pred = test
            .iter()
            .map(|&i| model.verdict(&pooled[i]).map(|v| v.label))
            .collect::<Result<Vec<_>>>()?;
        Some(class_reports(&subset(&labels, &test), &pred)?)
    };
    let bundle = ModelBundle::new(model.pca_img, model.pca_aud, model.svm, config)?;
    bundle.save(out)?;
    Ok(TrainOutcome {
        bundle,
        train_size: train.len(),
        test_size: test.len(),
        test_reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_size: usize,
    /// The bundle's performance on the held-out split, Appropriate first.
    pub test: [ClassReport; 2],
    /// Cross-validation of the bundle's settings on the remaining items.
    pub cv: CvReport,
}

impl EvalReport {
    pub fn render(&self) -> String {
        format!(
            "Held-out test set ({} items)\n{}\n{}-fold cross-validation\n{}",
            self.test_size,
            crate::metrics::render_reports(&self.test),
            self.cv.k,
            self.cv.render()
        )
    }
}

/// Score `bundle` on the stratified held-out split of `manifest` and
/// cross-validate its settings with `k` folds on the remainder.
pub fn run_eval(manifest: &Path, bundle: &ModelBundle, k: usize, seed: u64, provider: &ProviderSpec) -> Result<EvalReport> {
    let manifest = DatasetManifest::load(manifest)?;
    let labels = manifest.labels();
    if !labels.contains(&Label::Appropriate) || !labels.contains(&Label::Inappropriate) {
        return Err(Error::DegenerateLabels);
    }
    let pooled = dataset(&manifest, provider, &bundle.config)?;
    let (img, aud) = (pooled[0].image.len(), pooled[0].audio.len());
    if img != bundle.pca_img.in_dim() {
        return Err(Error::FeatureDimensionMismatch { expected: bundle.pca_img.in_dim(), found: img });
    }
    if aud != bundle.pca_aud.in_dim() {
        return Err(Error::FeatureDimensionMismatch { expected: bundle.pca_aud.in_dim(), found: aud });
    }
    let (train, test) = train_test_split(&labels, DEFAULT_TEST_FRACTION, seed)?;
    if test.is_empty() {
        return Err(Error::InsufficientData("the held-out split is empty".into()));
    }
    let model = FittedModel {
        pca_img: bundle.pca_img.clone(),
        pca_aud: bundle.pca_aud.clone(),
        svm: bundle.svm.clone(),
    };
    let pred = test
        .iter()
        .map(|&i| model.verdict(&pooled[i]).map(|v| v.label))
        .collect::<Result<Vec<_>>>()?;
    let test_reports = class_reports(&subset(&labels, &test), &pred)?;

    let cv_pooled: Vec<PooledEmbedding> = train.iter().map(|&i| pooled[i].clone()).collect();
    let cv_labels = subset(&labels, &train);
    let mut config = bundle.config.clone();
    config.seed = seed;
    let cv = cross_validate_pooled(&cv_pooled, &cv_labels, &config, k, seed)?;
    Ok(EvalReport {
        test_size: test.len(),
        test: test_reports,
        cv,
    })
}
