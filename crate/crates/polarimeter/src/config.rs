//! Pipeline configuration: one JSON document with a `version` field.

use std::path::{Path, PathBuf};

use polarimeter_core::classifier::{ExpansionConfig, Hyperparams};
use polarimeter_core::labeling::PropagationConfig;
use polarimeter_core::layout::LayoutConfig;
use polarimeter_core::synth::SynthConfig;
use polarimeter_core::tweet::KeywordSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    /// Input `tweets.jsonl`. Exactly one of `corpus` and `synth` is needed by `run`.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Generate the corpus instead of reading one.
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    /// Seed label file; defaults to the generated seeds when `synth` is set.
    #[serde(default)]
    pub seeds: Option<PathBuf>,
    /// Top-level seed from which every stage seed is derived.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Keyword filter; the built-in list when absent.
    #[serde(default)]
    pub keywords: Option<Vec<String>>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub valence: ValenceSection,
    #[serde(default)]
    pub similarity: SimilaritySection,
    #[serde(default)]
    pub layout: LayoutConfig,
    /// Optional website annotation TSV for the report.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
}

fn default_seed() -> u64 {
    42
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            corpus: None,
            synth: None,
            seeds: None,
            seed: default_seed(),
            keywords: None,
            propagation: PropagationConfig::default(),
            classifier: ClassifierSection::default(),
            valence: ValenceSection::default(),
            similarity: SimilaritySection::default(),
            layout: LayoutConfig::default(),
            annotations: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub dim: usize,
    pub epochs: u32,
    pub learning_rate: f64,
    pub min_distinct_accounts: usize,
    pub confidence_threshold: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let hp = Hyperparams::default();
        let ex = ExpansionConfig::default();
        Self {
            dim: hp.dim,
            epochs: hp.epochs,
            learning_rate: hp.learning_rate,
            min_distinct_accounts: ex.min_distinct_accounts,
            confidence_threshold: ex.confidence_threshold,
        }
    }
}

impl ClassifierSection {
    pub fn hyperparams(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            dim: self.dim,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
        }
    }

    pub fn expansion(&self) -> ExpansionConfig {
        ExpansionConfig {
            min_distinct_accounts: self.min_distinct_accounts,
            confidence_threshold: self.confidence_threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValenceSection {
    /// Minimum combined SUPP+OPP tweets for an element to be scored.
    pub min_support: u64,
    /// Rows per bin in the top lists.
    pub top_k: usize,
}

impl Default for ValenceSection {
    fn default() -> Self {
        Self {
            min_support: 100,
            top_k: 15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilaritySection {
    pub sample: usize,
    pub min_elements: usize,
    pub edge_floor: f64,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        Self {
            sample: 5000,
            min_elements: 10,
            edge_floor: 0.1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("`corpus` and `synth` are mutually exclusive")]
    CorpusAndSynth,
    #[error("`keywords` must contain a non-blank keyword")]
    EmptyKeywords,
}

impl Config {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.seeds, &mut cfg.annotations]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        if self.corpus.is_some() && self.synth.is_some() {
            return Err(ConfigError::CorpusAndSynth);
        }
        self.keyword_set()?;
        Ok(())
    }

    pub fn keyword_set(&self) -> Result<KeywordSet, ConfigError> {
        match &self.keywords {
            None => Ok(KeywordSet::default()),
            Some(k) => KeywordSet::new(k).ok_or(ConfigError::EmptyKeywords),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = Config::from_json(r#"{"version": 1}"#, Path::new("c.json")).unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.propagation.supp_threshold, 15);
        assert_eq!(cfg.propagation.opp_threshold, 7);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let p = Path::new("c.json");
        assert!(matches!(
            Config::from_json(r#"{"version": 1, "sede": 3}"#, p),
            Err(ConfigError::Json { .. })
        ));
        assert!(matches!(
            Config::from_json(r#"{"version": 1, "similarity": {"sampel": 3}}"#, p),
            Err(ConfigError::Json { .. })
        ));
        assert!(matches!(
            Config::from_json(r#"{"version": 2}"#, p),
            Err(ConfigError::Version(2))
        ));
        assert!(matches!(
            Config::from_json(r#"{}"#, p),
            Err(ConfigError::Json { .. })
        ));
        assert!(matches!(
            Config::from_json(r#"{"version": 1, "corpus": "a", "synth": {}}"#, p),
            Err(ConfigError::CorpusAndSynth)
        ));
        assert!(matches!(
            Config::from_json(r#"{"version": 1, "keywords": [" "]}"#, p),
            Err(ConfigError::EmptyKeywords)
        ));
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"version": 1, "corpus": "t.jsonl", "seeds": "/abs/s.tsv"}"#,
        )
        .unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.corpus.unwrap(), dir.path().join("t.jsonl"));
        assert_eq!(cfg.seeds.unwrap(), PathBuf::from("/abs/s.tsv"));
    }
}
