use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use farsight_core::assoc::{associate, association_metric, AssocConfig, Proposal};
use farsight_core::encoder::toy_encode;
use farsight_core::pipeline::{run_pipeline, PipelineConfig, Video};
use farsight_core::synth::{generate, SynthConfig};
use farsight_core::{BBox, BoxKind, Embedding, Modality};

fn association(c: &mut Criterion) {
    let emb = |i: usize| Embedding::new(farsight_bench::values(i as u64, 16)).unwrap();
    let bodies: Vec<Proposal> = (0..20)
        .map(|i| {
            let x = 60.0 * i as f64;
            let b = BBox::new(x, 100.0, x + 50.0, 300.0, BoxKind::Body, 0.9).unwrap();
            Proposal::body(b, emb(i), (x + 25.0, 115.0)).unwrap()
        })
        .collect();
    let faces: Vec<Proposal> = (0..20)
        .map(|i| {
            let x = 60.0 * i as f64;
            let f = BBox::new(x + 15.0, 100.0, x + 35.0, 125.0, BoxKind::Face, 0.8).unwrap();
            Proposal::face(f, emb(i)).unwrap()
        })
        .collect();
    let cfg = AssocConfig::default();
    c.bench_function("associate/20x20", |b| {
        b.iter(|| associate(&association_metric(black_box(&bodies), &faces, &cfg).unwrap(), &cfg))
    });
}

fn encoders(c: &mut Criterion) {
    let video = generate(&SynthConfig {
        subjects: 1,
        gallery_videos_per_subject: 0,
        frames_per_video: 8,
        ..Default::default()
    })
    .unwrap()
    .remove(0);
    let track: Vec<BBox> = video
        .detections
        .frames
        .iter()
        .map(|f| {
            f.detections
                .iter()
                .find(|d| d.kind == BoxKind::Body)
                .unwrap()
                .to_bbox()
                .unwrap()
        })
        .collect();
    let mut g = c.benchmark_group("toy_encode/8 frames");
    for m in Modality::ALL {
        g.bench_function(m.name(), |b| {
            b.iter(|| toy_encode(black_box(&video.frames), &track, m, 512, 0).unwrap())
        });
    }
    g.finish();

    let v = Video {
        id: video.video_id.clone(),
        subject_id: Some(video.subject_id.clone()),
        frames: video.frames.clone(),
        detections: video.detections.clone(),
    };
    let cfg = PipelineConfig::default();
    let mut g = c.benchmark_group("run_pipeline");
    g.sample_size(10);
    g.bench_function("clean", |b| b.iter(|| run_pipeline(std::slice::from_ref(&v), &cfg).unwrap()));
    let sim = PipelineConfig { simulate: true, ..cfg.clone() };
    g.bench_function("simulated", |b| b.iter(|| run_pipeline(std::slice::from_ref(&v), &sim).unwrap()));
    g.finish();
}

criterion_group!(benches, association, encoders);
criterion_main!(benches);
