//! Deterministic inputs shared by the benchmarks.

use farsight_core::fusion::GalleryEntry;
use farsight_core::{ImageFrame, Modality, ModalityDims, Template};

/// Cheap reproducible values in [-1, 1).
pub fn values(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

/// Gray frame with a diagonal ramp and a checker overlay.
pub fn textured_frame(width: u32, height: u32) -> ImageFrame {
    let data = (0..width * height)
        .map(|i| {
            let (x, y) = (i % width, i / width);
            let ramp = (x + y) as f64 / (width + height) as f64;
            let checker = if (x / 8 + y / 8) % 2 == 0 { 0.2 } else { 0.0 };
            (0.6 * ramp + checker).min(1.0)
        })
        .collect();
    ImageFrame::new(width, height, 1, data, 0).expect("valid frame")
}

pub fn entries(prefix: &str, n: usize, dims: &ModalityDims) -> Vec<GalleryEntry> {
    (0..n)
        .map(|i| {
            let v = |m: Modality| Some(values((i * 3 + m.index()) as u64, dims.get(m)));
            GalleryEntry::new(
                format!("{prefix}{i}"),
                v(Modality::Face),
                v(Modality::Gait),
                v(Modality::Body),
            )
            .expect("all modalities present")
        })
        .collect()
}

pub fn templates(n: usize, dims: &ModalityDims) -> Vec<Template> {
    (0..n)
        .flat_map(|i| {
            Modality::ALL.map(|m| {
                Template::new(format!("s{i}"), m, values(i as u64, dims.get(m))).expect("finite")
            })
        })
        .collect()
}
