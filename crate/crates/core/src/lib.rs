//! Deterministic building blocks of a long-range whole-body biometric system.
//!
//! * [`turbsim`]: propagation-free atmospheric turbulence (Zernike phase
//!   statistics, PSF synthesis, tilt-then-blur degradation).
//! * [`assoc`]: joint body/face association losses, the inference-time
//!   association metric, and a greedy IoU tracker.
//! * [`fusion`]: cosine scoring, gallery aggregation and equal-weight score
//!   fusion with missing-score imputation.
//! * [`eval`]: TAR@FAR, Rank-N and FNIR@FPIR.
//! * [`store`], [`encoder`], [`pipeline`], [`throughput`]: template storage,
//!   the pluggable encoder interface, orchestration and benchmarking.
//!
//! Neural feature encoders are out of scope; [`encoder::ToyEncoder`] is a
//! deterministic stand-in so the whole pipeline can run end to end.

pub mod assoc;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod image_io;
pub mod model;
pub mod pipeline;
pub mod store;
pub mod synth;
pub mod throughput;
pub mod turbsim;

pub use error::{Error, Result};
pub use model::{
    validate_frame, BBox, BoxKind, Embedding, ImageFrame, Modality, ModalityDims, Template,
};
