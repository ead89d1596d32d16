//! Experiment configuration: a TOML file, overridden field by field from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// Seed used when neither the file nor the command line gives one.
pub const DEFAULT_SEED: u64 = 1729;

/// Tunable parameters. Each preset accepts a subset and rejects the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<u64>>,
    /// Decimal exponents for the Mertens trace.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decades: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Fields of `other` that are set replace those of `self`.
    pub fn overlay(&mut self, other: &Params) {
        overlay!(self, other; n, j_max, l_max, k, m, trials, threshold, density, q, s, x, h, decades, tau, c, accuracy);
    }

    /// Names of the fields that are set, sorted.
    pub fn set_fields(&self) -> Vec<String> {
        let mut names = match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
            _ => Vec::new(),
        };
        names.sort();
        names
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSource {
    /// Path to a Möbius cache written by `labctl sieve`; sieved inline when absent.
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub parameters: Params,
    #[serde(default)]
    pub weights: WeightSource,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::usage(format!("config: {}", e.message())))
    }

    /// Relative paths in the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        rebase(&mut cfg.weights.cache);
        rebase(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn formats(&self) -> Vec<Format> {
        self.output.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Json])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("[parameters]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("extra = 1\n").is_err());
        assert!(ExperimentConfig::parse("[output]\nformats = [\"xml\"]\n").is_err());
    }

    #[test]
    fn overlay_keeps_unset_fields() {
        let mut base = ExperimentConfig::parse("seed = 3\n[parameters]\nn = 10\nk = 2\n").unwrap().parameters;
        base.overlay(&Params { k: Some(5), h: Some(vec![4]), ..Params::default() });
        assert_eq!((base.n, base.k, base.h.clone()), (Some(10), Some(5), Some(vec![4])));
        assert_eq!(base.set_fields(), vec!["h", "k", "n"]);
    }
}
