use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use farsight_core::assoc::{associate_frame, AssocConfig, DetectionFile};
use farsight_core::eval::{evaluate, EvalConfig, SearchInstance};
use farsight_core::fusion::{FusionConfig, ModalityScores, ScoreMatrix};
use farsight_core::image_io::{list_frames, read_frame, write_frame, BitDepth};
use farsight_core::pipeline::{gallery_entries, load_videos, run_pipeline, PipelineConfig};
use farsight_core::store::{store_read, store_write};
use farsight_core::synth::{generate, write_corpus, SynthConfig, DETECTIONS_FILE};
use farsight_core::throughput::{bench as run_bench, BenchConfig};
use farsight_core::turbsim::{degrade, frame_seed, sample_field, TurbulenceConfig};
use farsight_core::Modality;
use serde::Serialize;

use crate::{core, CliError};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(core)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn synth(cfg: &SynthConfig, out: &Path) -> Result<(), CliError> {
    let videos = generate(cfg)?;
    write_corpus(out, &videos)?;
    println!("wrote {} videos of {} subjects to {}", videos.len(), cfg.subjects, out.display());
    Ok(())
}

#[derive(Serialize)]
struct SimulatedFrame {
    file: String,
    seed: u64,
}

#[derive(Serialize)]
struct TurbulenceSidecar<'a> {
    turbulence: &'a TurbulenceConfig,
    effective_d_over_r0: f64,
    psf_size: usize,
    frames: Vec<SimulatedFrame>,
}

/// Degrades every frame of `input` into `out` (same file names) and records
/// the turbulence parameters in `turbulence.json`. Frame `i` draws its field
/// from `frame_seed(rng_seed, i)`.
pub fn simulate(
    input: &Path,
    out: &Path,
    turb: &TurbulenceConfig,
    psf_size: usize,
) -> Result<(), CliError> {
    turb.validate().map_err(core)?;
    if psf_size % 2 == 0 {
        return Err(CliError::Invalid(format!("psf size must be odd, got {psf_size}")));
    }
    let same = |a: &Path, b: &Path| match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    };
    if same(input, out) {
        return Err(CliError::Invalid("--out must differ from --in".into()));
    }
    let paths = list_frames(input)?;
    if paths.is_empty() {
        return Err(CliError::Invalid(format!("no frames in {}", input.display())));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let frame = read_frame(path, i as u64)?;
        let seed = frame_seed(turb.rng_seed, i as u64);
        let cfg = TurbulenceConfig {
            rng_seed: seed,
            ..turb.clone()
        };
        let field = sample_field(&cfg, frame.width(), frame.height()).map_err(core)?;
        let degraded = degrade(&frame, &field, psf_size).map_err(core)?;
        let name = path.file_name().expect("listed frames are files");
        write_frame(&out.join(name), &degraded, BitDepth::Sixteen)?;
        frames.push(SimulatedFrame {
            file: name.to_string_lossy().into_owned(),
            seed,
        });
    }
    // keep the output usable as a video directory
    let det = input.join(DETECTIONS_FILE);
    if det.is_file() {
        std::fs::copy(&det, out.join(DETECTIONS_FILE)).map_err(|e| CliError::io(&det, e))?;
    }
    write_json(
        &out.join("turbulence.json"),
        &TurbulenceSidecar {
            turbulence: turb,
            effective_d_over_r0: turb.effective_d_over_r0(),
            psf_size,
            frames,
        },
    )?;
    println!(
        "degraded {} frames at D/r0 = {:.3} into {}",
        paths.len(),
        turb.effective_d_over_r0(),
        out.display()
    );
    Ok(())
}

pub fn assoc(input: &Path, out: &Path, cfg: &AssocConfig) -> Result<(), CliError> {
    cfg.validate().map_err(core)?;
    let path = if input.is_dir() {
        input.join(DETECTIONS_FILE)
    } else {
        input.to_path_buf()
    };
    let file: DetectionFile = serde_json::from_str(&read_to_string(&path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let frames = file
        .frames
        .iter()
        .map(|f| associate_frame(f, cfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core)?;
    let linked: usize = frames
        .iter()
        .flat_map(|f| &f.links)
        .filter(|l| l.body.is_some())
        .count();
    let faces: usize = frames.iter().map(|f| f.links.len()).sum();
    write_json(&out.join("associations.json"), &frames)?;
    println!("{linked} of {faces} faces linked to a body over {} frames", frames.len());
    Ok(())
}

pub fn enroll(input: &Path, out: &Path, store: &str, cfg: &PipelineConfig) -> Result<(), CliError> {
    let videos = load_videos(input)?;
    let result = run_pipeline(&videos, cfg)?;
    let path = out.join(store);
    let bytes = store_write(&result.templates, &path, &cfg.dims).map_err(core)?;
    write_json(&out.join("sequences.json"), &result.sequences)?;
    println!(
        "{} templates from {} videos, {bytes} bytes in {}",
        result.templates.len(),
        videos.len(),
        path.display()
    );
    Ok(())
}

fn write_scores(path: &Path, m: &ScoreMatrix) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    m.write_csv(BufWriter::new(f)).map_err(|e| CliError::io(path, e))
}

fn read_scores(path: &Path) -> Result<ScoreMatrix, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    ScoreMatrix::read_csv(f).map_err(core)
}

pub fn score(probe: &Path, gallery: &Path, out: &Path) -> Result<(), CliError> {
    let probes = gallery_entries(&store_read(probe).map_err(core)?)?;
    let gallery = gallery_entries(&store_read(gallery).map_err(core)?)?;
    let scores = ModalityScores::from_entries(&probes, &gallery).map_err(core)?;
    for m in Modality::ALL {
        write_scores(&out.join(format!("scores_{m}.csv")), scores.get(m))?;
    }
    println!("scored {} probes against {} gallery subjects", probes.len(), gallery.len());
    Ok(())
}

pub fn fuse(face: &Path, gait: &Path, body: &Path, out: &Path, cfg: &FusionConfig) -> Result<(), CliError> {
    let scores = ModalityScores {
        face: read_scores(face)?,
        gait: read_scores(gait)?,
        body: read_scores(body)?,
    };
    let fused = farsight_core::fusion::fuse(&scores, cfg).map_err(core)?;
    write_scores(&out.join("fused.csv"), &fused)?;
    println!(
        "fused {}x{} scores with weights {:?}",
        fused.probe_ids().len(),
        fused.gallery_ids().len(),
        cfg.modality_weights
    );
    Ok(())
}

pub fn eval(scores: &Path, mates: &Path, out: &Path, cfg: &EvalConfig) -> Result<(), CliError> {
    let matrix = read_scores(scores)?;
    let mates: BTreeMap<String, Option<String>> = serde_json::from_str(&read_to_string(mates)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", mates.display())))?;
    let instance = SearchInstance::from_matrix(&matrix, &mates).map_err(core)?;
    let report = evaluate(&instance, cfg).map_err(core)?;
    write_json(&out.join("report.json"), &report)?;
    print!("{}", report.to_table());
    Ok(())
}

pub fn bench(cfg: &BenchConfig, out: &Path) -> Result<(), CliError> {
    let report = run_bench(cfg)?;
    write_json(&out.join("bench.json"), &report)?;
    print!("{}", report.to_table());
    Ok(())
}
