//! Run configuration read from TOML.
//!
//! Every section is optional and falls back to its default. Command-line
//! flags are applied on top of the loaded file by the binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::physics::{Grid, ParameterSpace, PulseShape, PulseSpec};
use crate::pinn::TrainConfig;
use crate::rbm::{FitConfig, GreedyConfig};
use crate::ssfm::SsfmConfig;

/// Environment variable consulted when neither the command line nor the
/// config file names an output directory.
pub const OUTPUT_DIR_ENV: &str = "FIBERPINN_OUTPUT_DIR";

pub const DEFAULT_SEED: u64 = 1234;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: PulseShape,
    /// Four-pulse train in a ±15 T0 window instead of a single pulse.
    pub multi: bool,
    /// Peak power override (W).
    pub p0: Option<f64>,
    /// Super-Gaussian order override.
    pub order: Option<u32>,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self { shape: PulseShape::Gaussian, multi: false, p0: None, order: None }
    }
}

impl PulseConfig {
    pub fn spec(&self) -> Result<PulseSpec> {
        let mut spec = if self.multi { PulseSpec::multi(self.shape) } else { PulseSpec::single(self.shape) };
        if let Some(p0) = self.p0 {
            spec.p0 = p0;
        }
        if let Some(order) = self.order {
            spec.order = order;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// 0 = warnings, 1 = info, 2 = debug, 3+ = trace.
    pub verbosity: u8,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
    /// Network widths including the 2 inputs and 2 outputs.
    pub layers: Vec<usize>,
    pub pulse: PulseConfig,
    pub grid: Grid,
    pub space: ParameterSpace,
    pub train: TrainConfig,
    pub fit: FitConfig,
    pub greedy: GreedyConfig,
    pub ssfm: SsfmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: None,
            seed: DEFAULT_SEED,
            verbosity: 1,
            threads: None,
            layers: vec![2, 100, 100, 100, 100, 2],
            pulse: PulseConfig::default(),
            grid: Grid::default(),
            space: ParameterSpace::default(),
            train: TrainConfig::default(),
            fit: FitConfig::default(),
            greedy: GreedyConfig::default(),
            ssfm: SsfmConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 3 || self.layers[0] != 2 || *self.layers.last().unwrap() != 2 {
            return Err(invalid(format!("layers must look like [2, hidden.., 2], got {:?}", self.layers)));
        }
        if self.layers.contains(&0) {
            return Err(invalid("layer widths must be positive"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be positive"));
        }
        self.pulse.spec()?;
        self.grid.validate()?;
        self.space.validate()?;
        self.train.validate()?;
        self.fit.validate()?;
        if self.greedy.n_b == 0 || self.greedy.n_b > self.space.size() {
            return Err(invalid(format!(
                "n_b = {} must lie in 1..={}",
                self.greedy.n_b,
                self.space.size()
            )));
        }
        Ok(())
    }

    /// Command line, then the config file, then the environment, then `out`.
    pub fn resolve_output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
