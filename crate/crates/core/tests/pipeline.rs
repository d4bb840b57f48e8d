mod common;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vidcensor::censor::CensorReport;
use vidcensor::embeddings::ProviderSpec;
use vidcensor::media_io::{read_wav, Colorspace, Y4mStream};
use vidcensor::pipeline::*;
use vidcensor::{Error, Label, Verdict};

fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        image_components: 16,
        audio_components: 4,
        seed,
        ..ModelConfig::default()
    }
}

fn cluster_manifest(dir: &Path, per_class: usize, seed: u64) -> std::path::PathBuf {
    let (points, labels) = common::clusters(per_class, 40, 10.0, seed);
    common::write_embedding_manifest(dir, &points, &labels, 32, 3, seed)
}

#[test]
fn train_on_two_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cluster_manifest(dir.path(), 100, 1);
    let out = dir.path().join("model.icmb");
    let outcome = run_train(&manifest, &out, &ModelConfig { seed: 3, ..ModelConfig::default() }, &ProviderSpec::Synthetic).unwrap();
    assert_eq!((outcome.train_size, outcome.test_size), (180, 20));
    for r in outcome.test_reports.unwrap() {
        assert!(r.f1 >= 0.99, "{r:?}");
    }
    let bundle = ModelBundle::load(&out).unwrap();
    assert_eq!(bundle, outcome.bundle);
    assert_eq!((bundle.config.image_dim, bundle.config.audio_dim), (32, 8));
    // 180 training items keep at most 18 components per modality
    assert_eq!(bundle.pca_img.out_dim(), 18);
    assert_eq!(bundle.pca_aud.out_dim(), 8);
    assert_eq!(bundle.svm.dim(), 26);

    let again = dir.path().join("again.icmb");
    run_train(&manifest, &again, &ModelConfig { seed: 3, ..ModelConfig::default() }, &ProviderSpec::Synthetic).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn single_class_manifest_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let (points, _) = common::clusters(5, 6, 10.0, 0);
    let labels = vec![Label::Inappropriate; points.len()];
    let manifest = common::write_embedding_manifest(dir.path(), &points, &labels, 4, 1, 0);
    let err = run_train(&manifest, &dir.path().join("m"), &small_config(0), &ProviderSpec::Synthetic).unwrap_err();
    assert!(matches!(err, Error::DegenerateLabels));
    assert!(err.to_string().contains("degenerate labels"));
    assert!(!dir.path().join("m").exists());
}

#[test]
fn manifest_problems_are_listed_individually() {
    let dir = tempfile::tempdir().unwrap();
    let (points, labels) = common::clusters(2, 6, 10.0, 0);
    common::write_embedding_manifest(dir.path(), &points, &labels, 4, 1, 0);
    let text = "id,label,image_emb,audio_emb\n\
                a,appropriate,item0000_img.emb,item0000_aud.emb\n\
                a,inappropriate,item0001_img.emb,\n\
                b,maybe,item0002_img.emb,item0002_aud.emb\n\
                c,inappropriate,missing.emb,item0003_aud.emb\n";
    let path = dir.path().join("bad.csv");
    fs::write(&path, text).unwrap();
    match DatasetManifest::load(&path) {
        Err(Error::Manifest(problems)) => {
            assert_eq!(problems.len(), 3, "{problems:?}");
            assert!(problems[0].contains(":3:") && problems[0].contains("duplicate id"));
            assert!(problems[1].contains(":4:") && problems[1].contains("unknown label"));
            assert!(problems[2].contains(":5:") && problems[2].contains("missing.emb"));
        }
        other => panic!("{other:?}"),
    }
    fs::write(&path, "name,class\nx,appropriate\n").unwrap();
    assert!(matches!(DatasetManifest::load(&path), Err(Error::Manifest(_))));

    // a file that exists but is not EMB1 is reported by entry
    fs::write(dir.path().join("item0001_img.emb"), b"garbage").unwrap();
    let good = dir.path().join("manifest.csv");
    let m = DatasetManifest::load(&good).unwrap();
    match load_pooled(&m, None) {
        Err(Error::Manifest(problems)) => {
            assert_eq!(problems.len(), 1);
            assert!(problems[0].contains("item1"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_reports_test_split_and_folds() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cluster_manifest(dir.path(), 50, 4);
    let model = dir.path().join("model.icmb");
    run_train(&manifest, &model, &small_config(9), &ProviderSpec::Synthetic).unwrap();
    let bundle = ModelBundle::load(&model).unwrap();
    let report = run_eval(&manifest, &bundle, 20, 9, &ProviderSpec::Synthetic).unwrap();
    assert_eq!(report.test_size, 10);
    assert_eq!(report.cv.k, 20);
    assert_eq!(report.cv.folds.len(), 20);
    // 90 items remain for cross-validation
    assert_eq!(report.cv.folds.iter().map(|f| f.test_size).sum::<usize>(), 90);
    assert!(report.cv.folds.iter().all(|f| f.test_size == 4 || f.test_size == 5));
    for r in &report.test {
        assert!(r.f1 >= 0.99 && r.precision >= 0.99 && r.recall >= 0.99);
    }
    for c in &report.cv.classes {
        assert!(c.f1.mean >= 0.99 && c.precision.mean >= 0.99 && c.recall.mean >= 0.99);
    }
    assert_eq!(report, run_eval(&manifest, &bundle, 20, 9, &ProviderSpec::Synthetic).unwrap());
    let text = report.render();
    assert!(text.contains("inappropriate") && text.contains("±"), "{text}");
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), report);
}

#[test]
fn shuffled_labels_score_at_chance() {
    let dir = tempfile::tempdir().unwrap();
    let (points, mut labels) = common::clusters(400, 10, 10.0, 8);
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let manifest = common::write_embedding_manifest(dir.path(), &points, &labels, 8, 1, 8);
    let model = dir.path().join("model.icmb");
    run_train(&manifest, &model, &small_config(2), &ProviderSpec::Synthetic).unwrap();
    let bundle = ModelBundle::load(&model).unwrap();
    let report = run_eval(&manifest, &bundle, 20, 2, &ProviderSpec::Synthetic).unwrap();
    for c in &report.cv.classes {
        assert!((c.f1.mean - 0.5).abs() <= 0.05, "{c:?}");
    }
}

#[test]
fn eval_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cluster_manifest(dir.path(), 20, 0);
    let model = dir.path().join("model.icmb");
    run_train(&manifest, &model, &small_config(0), &ProviderSpec::Synthetic).unwrap();
    let bundle = ModelBundle::load(&model).unwrap();

    let other = tempfile::tempdir().unwrap();
    let (points, labels) = common::clusters(20, 30, 10.0, 0);
    let wrong = common::write_embedding_manifest(other.path(), &points, &labels, 22, 1, 0);
    assert!(matches!(
        run_eval(&wrong, &bundle, 5, 0, &ProviderSpec::Synthetic),
        Err(Error::FeatureDimensionMismatch { expected: 32, found: 22 })
    ));
}

#[test]
fn bundle_file_checks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cluster_manifest(dir.path(), 20, 5);
    let model = dir.path().join("model.icmb");
    let bundle = run_train(&manifest, &model, &small_config(0), &ProviderSpec::Synthetic).unwrap().bundle;
    let bytes = bundle.to_bytes();
    assert_eq!(&bytes[..4], b"ICMB");
    assert_eq!(&bytes[4..6], &BUNDLE_VERSION.to_le_bytes());
    assert_eq!(ModelBundle::parse(&bytes).unwrap(), bundle);

    let mut extra = bytes.clone();
    extra.extend_from_slice(b"NOTES\0\0\0");
    extra.extend_from_slice(&3u64.to_le_bytes());
    extra.extend_from_slice(b"abc");
    assert_eq!(ModelBundle::parse(&extra).unwrap(), bundle);

    for cut in [0, 3, 5, 20, bytes.len() - 1] {
        assert!(matches!(ModelBundle::parse(&bytes[..cut]), Err(Error::InvalidBundle(_))), "cut {cut}");
    }
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(ModelBundle::parse(&magic).is_err());
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(ModelBundle::parse(&version).is_err());
    let mut doubled = bytes.clone();
    doubled.extend_from_slice(&bytes[6..]);
    assert!(ModelBundle::parse(&doubled).is_err());
}

#[test]
fn media_manifest_trains_with_synthetic_provider() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("id,label,video,audio\n");
    for i in 0..12 {
        let (v, a) = common::write_media(dir.path(), &format!("clip{i}"), 2, 2, (8, 6), 400, Colorspace::C420, i);
        let label = if i % 2 == 0 { "appropriate" } else { "inappropriate" };
        csv.push_str(&format!(
            "clip{i},{label},{},{}\n",
            v.file_name().unwrap().to_string_lossy(),
            a.file_name().unwrap().to_string_lossy()
        ));
    }
    let manifest = dir.path().join("media.csv");
    fs::write(&manifest, csv).unwrap();
    let config = ModelConfig {
        image_dim: 16,
        audio_dim: 4,
        ..small_config(1)
    };
    let outcome = run_train(&manifest, &dir.path().join("m.icmb"), &config, &ProviderSpec::Synthetic).unwrap();
    assert_eq!(outcome.bundle.pca_img.in_dim(), 16);
    assert_eq!(outcome.bundle.pca_aud.in_dim(), 4);
}

fn stub_between(from: f64, to: f64) -> impl Fn(&vidcensor::media_model::Segment) -> vidcensor::Result<Verdict> + Sync {
    move |s| {
        let inside = s.start >= from - 1e-9 && s.end() <= to + 1e-9;
        Ok(Verdict::from_score(if inside { 1.0 + s.index as f64 * 0.1 } else { -1.0 }))
    }
}

#[test]
fn nothing_flagged_is_a_byte_exact_copy() {
    let dir = tempfile::tempdir().unwrap();
    let (video, audio) = common::write_media(dir.path(), "in", 12, 5, (16, 8), 800, Colorspace::C420, 3);
    let out = dir.path().join("out");
    let options = CensorOptions::new(&video, &audio, &out, dir.path().join("report.xml"));
    let outcome = run_censor(&options, &stub_between(100.0, 200.0)).unwrap();
    assert_eq!(outcome.flagged, 0);
    assert_eq!(outcome.segments, 3);
    assert_eq!(fs::read(&video).unwrap(), fs::read(out.join("in.y4m")).unwrap());
    assert_eq!(fs::read(&audio).unwrap(), fs::read(out.join("in.wav")).unwrap());
    let report = CensorReport::parse_xml(&fs::read(dir.path().join("report.xml")).unwrap()).unwrap();
    assert!(report.scenes.is_empty());
    assert_eq!(report.total_duration, 12.0);
}

#[test]
fn flagged_segments_are_censored_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (video, audio) = common::write_media(dir.path(), "clip", 22, 4, (12, 10), 1000, Colorspace::C444, 6);
    let out = dir.path().join("out");
    let mut options = CensorOptions::new(&video, &audio, &out, out.join("clip.xml"));
    options.sigma = 1.5;
    options.workers = Some(2);
    let outcome = run_censor(&options, &stub_between(5.0, 15.0)).unwrap();
    assert_eq!((outcome.segments, outcome.flagged), (5, 2));
    assert_eq!(outcome.report.scenes.len(), 1);
    let scene = outcome.report.scenes[0];
    assert_eq!((scene.start, scene.duration), (5.0, 10.0));
    assert!((scene.score - 1.2).abs() < 1e-12);

    let before = Y4mStream::parse(&fs::read(&video).unwrap()).unwrap();
    let after = Y4mStream::parse(&fs::read(out.join("clip.y4m")).unwrap()).unwrap();
    assert_eq!(before.header, after.header);
    assert_eq!(before.payloads.len(), after.payloads.len());
    for (i, (a, b)) in before.payloads.iter().zip(&after.payloads).enumerate() {
        let inside = (20..60).contains(&i);
        assert_eq!(a == b, !inside, "frame {i}");
    }
    let a = read_wav(&fs::read(&audio).unwrap()).unwrap();
    let b = read_wav(&fs::read(out.join("clip.wav")).unwrap()).unwrap();
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.samples().iter().zip(b.samples()).enumerate() {
        if (5000..15000).contains(&i) {
            assert_eq!(*y, 0);
        } else {
            assert_eq!(x, y);
        }
    }
}

#[test]
fn corrupt_input_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (video, audio) = common::write_media(dir.path(), "in", 4, 2, (4, 4), 100, Colorspace::C420, 0);
    fs::write(&video, b"NOT A VIDEO").unwrap();
    let out = dir.path().join("out");
    let report = dir.path().join("r.xml");
    let options = CensorOptions::new(&video, &audio, &out, &report);
    assert!(matches!(run_censor(&options, &stub_between(0.0, 10.0)), Err(Error::NotY4m)));
    assert!(!out.exists() && !report.exists());
}

#[test]
fn classifier_failure_names_the_segment() {
    let dir = tempfile::tempdir().unwrap();
    let (video, audio) = common::write_media(dir.path(), "in", 12, 2, (4, 4), 100, Colorspace::C420, 0);
    let out = dir.path().join("out");
    let options = CensorOptions::new(&video, &audio, &out, dir.path().join("r.xml"));
    let failing = |s: &vidcensor::media_model::Segment| {
        if s.index == 1 {
            Err(Error::Provider { context: "test".into(), message: "boom".into() })
        } else {
            Ok(Verdict::from_score(-1.0))
        }
    };
    let err = run_censor(&options, &failing).unwrap_err();
    assert!(matches!(err, Error::Segment { index: 1, .. }));
    assert!(err.is_input_error());
    assert!(!out.join("in.y4m").exists());
}

#[test]
fn refuses_to_overwrite_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (video, audio) = common::write_media(dir.path(), "in", 2, 2, (4, 4), 100, Colorspace::C420, 0);
    let options = CensorOptions::new(&video, &audio, dir.path(), dir.path().join("r.xml"));
    assert!(matches!(run_censor(&options, &stub_between(0.0, 0.0)), Err(Error::InvalidParameter(_))));
}

#[test]
fn bundle_classifier_drives_a_censor_run() {
    let dir = tempfile::tempdir().unwrap();
    let (points, labels) = common::clusters(30, 20, 10.0, 2);
    let manifest = common::write_embedding_manifest(dir.path(), &points, &labels, 16, 1, 2);
    let model = dir.path().join("m.icmb");
    let bundle = run_train(&manifest, &model, &small_config(0), &ProviderSpec::Synthetic).unwrap().bundle;
    let provider = ProviderSpec::Synthetic.open(16, 4).unwrap();
    let classifier = BundleClassifier::new(&bundle, provider).unwrap();
    let (video, audio) = common::write_media(dir.path(), "clip", 11, 2, (6, 4), 200, Colorspace::C420, 1);
    let options = CensorOptions::new(&video, &audio, dir.path().join("out"), dir.path().join("r.xml"));
    let outcome = run_censor(&options, &classifier).unwrap();
    assert_eq!(outcome.segments, 3);
    let xml = fs::read(dir.path().join("r.xml")).unwrap();
    assert_eq!(CensorReport::parse_xml(&xml).unwrap(), outcome.report);

    let wrong = ProviderSpec::Synthetic.open(17, 4).unwrap();
    assert!(BundleClassifier::new(&bundle, wrong).is_err());
}
