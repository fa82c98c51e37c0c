//! Run configuration shared by the command-line tools.
//!
//! A configuration is read from a TOML file, overridden by flags, and hashed.
//! The hash is embedded in every artifact a run writes; the configuration
//! itself is written next to the artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gabor::{Backend, BankParams};
use crate::graph::FaceGraph;
use crate::nmds::NmdsOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Top-left node `(x, y)`.
    pub origin: (f64, f64),
    pub spacing: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { rows: 7, cols: 7, origin: (32.0, 32.0), spacing: 10.0 }
    }
}

impl GridSpec {
    pub fn graph(&self) -> Result<FaceGraph> {
        FaceGraph::regular_grid(self.rows, self.cols, self.origin, self.spacing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub bank: BankParams,
    pub grid: GridSpec,
    /// Block-mean downsampling factor applied to every loaded image.
    pub downsample: usize,
    /// Side of the square pixel patches; odd.
    pub patch: usize,
    /// Seed for trial plans and bootstrap resampling.
    pub seed: u64,
    pub include_catch: bool,
    pub replicates: usize,
    pub backend: Backend,
    pub nmds: NmdsOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bank: BankParams::default(),
            grid: GridSpec::default(),
            downsample: 1,
            patch: 11,
            seed: 0,
            include_catch: true,
            replicates: 1000,
            backend: Backend::Fft,
            nmds: NmdsOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse { path: path.into(), line, message: e.message().to_string() }
        })?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.bank.validate()?;
        self.grid.graph()?;
        if self.downsample == 0 {
            return Err(Error::InvalidArgument("downsample factor must be at least 1".into()));
        }
        if self.replicates < crate::stats::MIN_REPLICATES {
            return Err(Error::InvalidArgument(format!(
                "{} bootstrap replicates; at least {} are required",
                self.replicates,
                crate::stats::MIN_REPLICATES
            )));
        }
        if self.patch % 2 == 0 {
            return Err(Error::InvalidArgument(format!("patch size {} must be odd", self.patch)));
        }
        Ok(())
    }

    /// Compact JSON with fields in declaration order; the hash input.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], lowercase hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Pretty JSON of the configuration and its hash.
    pub fn sidecar(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            config_hash: String,
            config: &'a RunConfig,
        }
        serde_json::to_string_pretty(&Sidecar { config_hash: self.hash(), config: self }).expect("config serializes") + "\n"
    }
}
