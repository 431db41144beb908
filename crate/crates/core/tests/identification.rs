use std::collections::BTreeMap;

use farsight_core::eval::{rank_n, SearchInstance};
use farsight_core::fusion::{fuse, FusionConfig, ModalityScores, ScoreMatrix};
use farsight_core::pipeline::{gallery_entries, run_pipeline, Mode, PipelineConfig, Video};
use farsight_core::synth::{generate, Role, SynthConfig, SynthVideo};
use farsight_core::turbsim::TurbulenceConfig;
use farsight_core::Modality;

fn video(v: &SynthVideo) -> Video {
    Video {
        id: v.video_id.clone(),
        subject_id: Some(v.subject_id.clone()),
        frames: v.frames.clone(),
        detections: v.detections.clone(),
    }
}

fn rank1(m: &ScoreMatrix, mates: &BTreeMap<String, Option<String>>) -> f64 {
    rank_n(&SearchInstance::from_matrix(m, mates).unwrap(), 1).unwrap()
}

#[test]
fn degraded_probes_identify_against_clean_gallery() {
    let corpus = generate(&SynthConfig::default()).unwrap();
    let gallery: Vec<Video> = corpus.iter().filter(|v| v.role == Role::Gallery).map(video).collect();
    let probes: Vec<Video> = corpus.iter().filter(|v| v.role == Role::Probe).map(video).collect();
    let mates: BTreeMap<String, Option<String>> =
        probes.iter().map(|p| (p.id.clone(), p.subject_id.clone())).collect();

    let base = PipelineConfig {
        seed: 11,
        turbulence: TurbulenceConfig::with_strength(2.0, 3),
        ..Default::default()
    };
    let g = run_pipeline(&gallery, &PipelineConfig { mode: Mode::Gallery, ..base.clone() }).unwrap();
    let p = run_pipeline(&probes, &PipelineConfig { simulate: true, ..base }).unwrap();

    let scores = ModalityScores::from_entries(
        &gallery_entries(&p.templates).unwrap(),
        &gallery_entries(&g.templates).unwrap(),
    )
    .unwrap();
    let fused = fuse(&scores, &FusionConfig::default()).unwrap();
    let single: Vec<f64> = Modality::ALL.iter().map(|&m| rank1(scores.get(m), &mates)).collect();
    let f = rank1(&fused, &mates);
    eprintln!("rank-1 face/gait/body = {single:?}, fused = {f}");
    assert!(f >= 7.0 / 8.0);
    assert!(single.iter().all(|&s| f >= s));
}
