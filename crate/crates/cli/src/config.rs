//! The `--config` file: one JSON object, every section and field optional.
//!
//! ```json
//! {
//!   "pipeline": { "seed": 0, "psf_size": 9, "turbulence": { "d_over_r0": 2.0 } },
//!   "eval": { "far_target": 0.01, "ranks": [1, 5, 10, 20] },
//!   "bench": { "psf_size": 9 },
//!   "synth": { "subjects": 8 }
//! }
//! ```

use std::path::Path;

use farsight_core::eval::EvalConfig;
use farsight_core::pipeline::PipelineConfig;
use farsight_core::synth::SynthConfig;
use farsight_core::throughput::BenchConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub pipeline: PipelineConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
    pub synth: SynthConfig,
}

impl CliConfig {
    pub fn apply_seed(&mut self, seed: u64) {
        self.pipeline.seed = seed;
        self.pipeline.turbulence.rng_seed = seed;
        self.bench.seed = seed;
        self.bench.turbulence.rng_seed = seed;
        self.synth.seed = seed;
    }
}

pub fn load(path: Option<&Path>) -> Result<CliConfig, CliError> {
    let Some(path) = path else {
        return Ok(CliConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))
}
