use std::fs;

use vidcensor::embeddings::{
    embed_audio, embed_frames, EmbeddingTable, ExternalProvider, PrecomputedProvider,
    ProviderSpec,
};
use vidcensor::media_model::{AudioTrack, Frame};
use vidcensor::Error;

fn frames(n: usize) -> Vec<Frame> {
    (0..n).map(|i| Frame::filled(2, 2, [i as u8, 0, 0]).unwrap()).collect()
}

fn table(rows: usize, dim: usize, offset: f32) -> EmbeddingTable {
    EmbeddingTable::new(dim, (0..rows * dim).map(|v| v as f32 + offset).collect()).unwrap()
}

fn precomputed_dir(image_rows: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    table(image_rows, 4, 0.5).save(&dir.path().join("s0_img.emb")).unwrap();
    table(2, 3, -1.0).save(&dir.path().join("s0_aud.emb")).unwrap();
    table(1, 4, 9.0).save(&dir.path().join("s1_img.emb")).unwrap();
    fs::write(
        dir.path().join("segments.csv"),
        "segment,image_emb,audio_emb\n0,s0_img.emb,s0_aud.emb\n1,s1_img.emb,\n",
    )
    .unwrap();
    dir
}

#[test]
fn precomputed_returns_stored_rows_in_order() {
    let dir = precomputed_dir(5);
    let p = PrecomputedProvider::open(dir.path(), 4, 3).unwrap();
    let rows = embed_frames(&p, 0, &frames(5)).unwrap();
    assert_eq!(rows, table(5, 4, 0.5).to_f64_rows());
    let audio = AudioTrack::new(100, vec![0; 200]).unwrap();
    assert_eq!(embed_audio(&p, 0, &audio, 1.0).unwrap(), table(2, 3, -1.0).to_f64_rows());
    // segment 1 has no audio file
    assert!(embed_audio(&p, 1, &AudioTrack::new(100, vec![]).unwrap(), 1.0).unwrap().is_empty());
    assert!(matches!(
        embed_audio(&p, 1, &audio, 1.0),
        Err(Error::EmbeddingCountMismatch { expected: 2, found: 0 })
    ));
}

#[test]
fn precomputed_count_mismatch() {
    let dir = precomputed_dir(3);
    let p = PrecomputedProvider::open(dir.path(), 4, 3).unwrap();
    let err = embed_frames(&p, 0, &frames(5)).unwrap_err();
    assert!(matches!(err, Error::EmbeddingCountMismatch { expected: 5, found: 3 }));
    assert!(err.to_string().contains("embedding count mismatch"));
}

#[test]
fn precomputed_missing_entries_and_files() {
    let dir = precomputed_dir(1);
    let p = PrecomputedProvider::open(dir.path(), 4, 3).unwrap();
    assert!(matches!(embed_frames(&p, 9, &frames(1)), Err(Error::Provider { .. })));
    fs::remove_file(dir.path().join("s1_img.emb")).unwrap();
    assert!(matches!(embed_frames(&p, 1, &frames(1)), Err(Error::Io { .. })));
    let wrong_dim = PrecomputedProvider::open(dir.path(), 5, 3).unwrap();
    assert!(matches!(
        embed_frames(&wrong_dim, 0, &frames(1)),
        Err(Error::FeatureDimensionMismatch { expected: 5, found: 4 })
    ));
    let empty = tempfile::tempdir().unwrap();
    assert!(PrecomputedProvider::open(empty.path(), 4, 3).is_err());
}

#[test]
fn external_provider_reads_rows_from_child() {
    // emits the constant 1.0f32 for every requested value
    let cmd = "cat > /dev/null; n=$((VIDCENSOR_COUNT * VIDCENSOR_DIM)); i=0; \
               while [ $i -lt $n ]; do printf '\\000\\000\\200\\077'; i=$((i+1)); done";
    let p = ExternalProvider::new(cmd, 3, 2);
    let rows = embed_frames(&p, 4, &frames(2)).unwrap();
    assert_eq!(rows, vec![vec![1.0; 3]; 2]);
    let audio = AudioTrack::new(10, vec![1; 35]).unwrap();
    assert_eq!(embed_audio(&p, 4, &audio, 1.0).unwrap(), vec![vec![1.0; 2]; 4]);
}

#[test]
fn external_provider_sees_media_on_stdin() {
    let image = "[ \"$(head -c 9)\" = YUV4MPEG2 ] && [ \"$VIDCENSOR_MODALITY\" = image ] \
                 && cat > /dev/null && printf '\\000\\000\\000\\000'";
    let spec: ProviderSpec = format!("external:{image}").parse().unwrap();
    let p = spec.open(1, 1).unwrap();
    assert_eq!(p.image_rows(0, &frames(1)).unwrap(), vec![vec![0.0]]);

    let audio = "[ \"$(head -c 4)\" = RIFF ] && [ \"$VIDCENSOR_WINDOW_SAMPLES\" = 10 ] \
                 && cat > /dev/null && printf '\\000\\000\\000\\000\\000\\000\\000\\000'";
    let p = ExternalProvider::new(audio, 1, 1);
    let track = AudioTrack::new(10, vec![3; 20]).unwrap();
    assert_eq!(embed_audio(&p, 0, &track, 1.0).unwrap(), vec![vec![0.0]; 2]);
}

#[test]
fn external_provider_failures_carry_context() {
    let p = ExternalProvider::new("echo broken >&2; exit 3", 2, 2);
    let err = embed_frames(&p, 7, &frames(1)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("item 7") && msg.contains("broken"), "{msg}");
    let short = ExternalProvider::new("cat > /dev/null; printf 'abc'", 2, 2);
    assert!(matches!(embed_frames(&short, 0, &frames(1)), Err(Error::Provider { .. })));
}
