//! Run configuration. Every tunable default lives here so that a run is fully
//! described by one file, and the digest of its canonical JSON form ties
//! audit logs to the configuration that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{AgentConfig, Role};
use crate::corpus::PreprocessConfig;
use crate::descriptor::DescriptorConfig;
use crate::metrics::{MetricConfig, ScoreWeights};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPaths {
    pub header: PathBuf,
    pub data: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub split: u64,
    pub cluster: u64,
    /// Seeds within-topic splits and packet shuffling.
    pub agent: u64,
    pub packets: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            split: 7,
            cluster: 42,
            agent: 1234,
            packets: 99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessmentConfig {
    /// Topics sampled per condition for rating packets.
    pub sample_k: usize,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        Self { sample_k: 5 }
    }
}

fn default_max_iter() -> usize {
    100
}

fn default_holdout_ratio() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub embeddings: EmbeddingPaths,
    #[serde(default)]
    pub normalize_embeddings: bool,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub k: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_holdout_ratio")]
    pub holdout_ratio: f64,
    #[serde(default)]
    pub descriptor: DescriptorConfig,
    #[serde(default)]
    pub metrics: MetricConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub weights: ScoreWeights,
    #[serde(default)]
    pub assessment: AssessmentConfig,
}

/// Refinement condition: which roles take part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Oneshot,
    MaOnly,
    DeOnly,
    Full,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Oneshot, Mode::MaOnly, Mode::DeOnly, Mode::Full];

    pub fn roles(self) -> &'static [Role] {
        match self {
            Mode::Oneshot => &[],
            Mode::MaOnly => &[Role::ModelingAnalyst],
            Mode::DeOnly => &[Role::DomainExpert],
            Mode::Full => &[Role::DataSteward, Role::ModelingAnalyst, Role::DomainExpert],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Oneshot => "oneshot",
            Mode::MaOnly => "ma_only",
            Mode::DeOnly => "de_only",
            Mode::Full => "full",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected oneshot, ma_only, de_only, full)"))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl RunConfig {
    /// Defaults for everything except the inputs and topic count.
    pub fn new(corpus: impl Into<PathBuf>, header: impl Into<PathBuf>, data: impl Into<PathBuf>, k: usize) -> Self {
        Self {
            corpus: corpus.into(),
            embeddings: EmbeddingPaths {
                header: header.into(),
                data: data.into(),
            },
            normalize_embeddings: false,
            preprocess: PreprocessConfig::default(),
            k,
            max_iter: default_max_iter(),
            seeds: Seeds::default(),
            holdout_ratio: default_holdout_ratio(),
            descriptor: DescriptorConfig::default(),
            metrics: MetricConfig::default(),
            agent: AgentConfig::default(),
            weights: ScoreWeights::default(),
            assessment: AssessmentConfig::default(),
        }
    }

    /// Reads a config file and resolves relative input paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.embeddings.header);
        fix(&mut self.embeddings.data);
        if let Some(script) = &mut self.agent.script {
            fix(script);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.holdout_ratio > 0.0 && self.holdout_ratio < 1.0) {
            return Err(Error::Config(format!("holdout_ratio {} must lie in (0, 1)", self.holdout_ratio)));
        }
        self.descriptor.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.weights.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.agent.validate().map_err(Error::Config)?;
        if self.metrics.top_n < 1 || self.metrics.cv_window < 1 {
            return Err(Error::Config("top_n and cv_window must be at least 1".into()));
        }
        if !(self.metrics.rbo_persistence > 0.0 && self.metrics.rbo_persistence < 1.0) {
            return Err(Error::Config("rbo_persistence must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// JSON with object keys sorted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_value(self).expect("config serializes").to_string()
    }

    /// Hex SHA-256 of the canonical JSON with input locations removed, so the
    /// digest names the parameters of a run and not where its files live.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("corpus");
            obj.remove("embeddings");
            if let Some(agent) = obj.get_mut("agent").and_then(|a| a.as_object_mut()) {
                agent.remove("script");
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::new("c.jsonl", "e.json", "e.f32", 3);
        let b: RunConfig = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.agent.eta = 0.61;
        assert_ne!(a.hash(), c.hash());
        let mut moved = a.clone();
        moved.resolve_paths(Path::new("/elsewhere"));
        assert_eq!(a.hash(), moved.hash());
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"corpus":"c.jsonl","embeddings":{"header":"h.json","data":"d.f32"},"k":4}"#,
        )
        .unwrap();
        assert_eq!(cfg.max_iter, 100);
        assert_eq!(cfg.agent.alpha, 0.5);
        assert_eq!(cfg.agent.eta, 0.6);
        assert_eq!(cfg.metrics.cv_window, 110);
        assert_eq!(cfg.descriptor.m_keywords, 10);
        cfg.validate().unwrap();
    }

    #[test]
    fn modes_parse() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("both".parse::<Mode>().is_err());
    }
}
