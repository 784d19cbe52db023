//! Run configuration: command-line flags, `ZSEQ_*` environment variables and
//! an optional JSON file, merged in that order of precedence.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use zoneseq::ppm::{validate_weights, DEFAULT_ORDER, DEFAULT_WEIGHTS};
use zoneseq::synth::SynthConfig;

pub const DEFAULT_SEED: u64 = 42;

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub order: Option<usize>,
    pub weights: Option<[f64; 4]>,
    pub external_solver: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub include_low: Option<bool>,
    pub log_level: Option<String>,
    pub synth: Option<SynthConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Parses `w0,w1,w2,w3`.
pub fn parse_weights(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected 4 comma-separated weights, got {}", parts.len()));
    }
    let mut w = [0.0; 4];
    for (slot, p) in w.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|e| format!("weight {p:?}: {e}"))?;
    }
    Ok(w)
}

/// Settings after merging every source.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub order: usize,
    pub weights: [f64; 4],
    pub external_solver: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub include_low: bool,
    pub log_level: String,
}

/// Values that came from flags or the environment (clap resolves those two).
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub order: Option<usize>,
    pub weights: Option<[f64; 4]>,
    pub external_solver: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub include_low: Option<bool>,
    pub log_level: Option<String>,
}

impl RunConfig {
    pub fn merge(o: Overrides, file: &FileConfig) -> Result<Self> {
        let cfg = Self {
            dataset: o.dataset.or_else(|| file.dataset.clone()),
            model: o.model.or_else(|| file.model.clone()),
            out: o.out.or_else(|| file.out.clone()),
            order: o.order.or(file.order).unwrap_or(DEFAULT_ORDER),
            weights: o.weights.or(file.weights).unwrap_or(DEFAULT_WEIGHTS),
            external_solver: o.external_solver.or_else(|| file.external_solver.clone()),
            threads: o.threads.or(file.threads),
            seed: o
                .seed
                .or(file.seed)
                .or(file.synth.as_ref().map(|s| s.seed))
                .unwrap_or(DEFAULT_SEED),
            include_low: o.include_low.or(file.include_low).unwrap_or(false),
            log_level: o
                .log_level
                .or_else(|| file.log_level.clone())
                .unwrap_or_else(|| "info".to_owned()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        validate_weights(&self.weights)?;
        if self.threads == Some(0) {
            bail!("thread count must be at least 1");
        }
        if self.order == 0 {
            bail!("order must be at least 1");
        }
        Ok(())
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value.as_deref().with_context(|| format!("missing --{flag} (or ZSEQ_{} / config key)", flag.to_uppercase().replace('-', "_")))
    }
}
