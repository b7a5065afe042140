//! Run configuration file.
//!
//! A single TOML document. Every section and key is optional and falls back
//! to the built-in default; unknown keys are rejected. Values given on the
//! command line override the file.
//!
//! ```toml
//! [run]
//! variant = "czm+U+E+F"   # uniform+U | czm+U | czm+U+E | czm+U+E+F
//! method = "patchwork"    # patchwork | ransac
//! seed = 0
//! jobs = 1
//!
//! [io]
//! input = "scans/"        # .bin file or directory
//! labels = "labels/"      # .label file or directory
//! out = "out/"
//!
//! [czm]  [rgpf]  [gle]  [gle.kappa]  [uniform]   # segmenter parameters
//! [ransac]  [eval]  [bench]  [output]
//! [scene]  [scene.ground]  [scene.ramp]  [scene.wall]  [scene.roof]  [scene.reflections]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use patchwork::czm::ZoneConfig;
use patchwork::eval::{EvalRange, Method};
use patchwork::gle::GleParams;
use patchwork::io::PlyFormat;
use patchwork::pipeline::UniformGridConfig;
use patchwork::ransac::RansacParams;
use patchwork::synth::SceneSpec;
use patchwork::{PatchworkParams, RgpfParams, Variant};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub variant: Variant,
    pub method: Method,
    pub seed: u64,
    pub jobs: Jobs,
}

/// Worker count, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Jobs(pub usize);

impl Default for Jobs {
    fn default() -> Self {
        Jobs(1)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub range: EvalRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub warmup: usize,
    pub reps: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { warmup: 2, reps: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub ply_format: PlyFormat,
    /// Also write per-bin diagnostics next to each PLY.
    pub bin_csv: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub io: IoSection,
    pub near_field_passthrough: bool,
    pub czm: ZoneConfig,
    pub rgpf: RgpfParams,
    pub gle: GleParams,
    pub uniform: UniformGridConfig,
    pub ransac: RansacParams,
    pub eval: EvalSection,
    pub bench: BenchSection,
    pub output: OutputSection,
    pub scene: SceneSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| format!(" (line {})", text[..s.start].lines().count().max(1)))
                .unwrap_or_default();
            CliError::Validation(format!("invalid config{at}: {}", e.message().trim()))
        })?;
        Ok(cfg)
    }

    pub fn params(&self) -> PatchworkParams {
        PatchworkParams {
            czm: self.czm.clone(),
            rgpf: self.rgpf.clone(),
            gle: self.gle.clone(),
            uniform: self.uniform.clone(),
            near_field_passthrough: self.near_field_passthrough,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate()?;
        if self.run.jobs.0 == 0 {
            return Err(CliError::Validation("run.jobs must be >= 1".into()));
        }
        if self.ransac.max_iters == 0 || !(self.ransac.dist_thresh > 0.0) {
            return Err(CliError::Validation(
                "ransac needs max_iters >= 1 and dist_thresh > 0".into(),
            ));
        }
        Ok(())
    }

    /// Same config with derived defaults written out.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let p = self.params().resolved()?;
        let mut cfg = self.clone();
        cfg.gle = p.gle;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self)
            .map_err(|e| CliError::Validation(format!("cannot serialize config: {e}")))
    }
}
