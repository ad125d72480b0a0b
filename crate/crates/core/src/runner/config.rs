//! TOML experiment configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::corpus::Split;
use crate::llm_gateway::{MockMode, ProviderConfig, DEFAULT_ENDPOINT, DEFAULT_MODEL};
use crate::prompting::Method;
use crate::scoring::stats::DEFAULT_CONFIDENCE;

pub const DEFAULT_RUNS: u32 = 3;
pub const DEFAULT_WORKERS: usize = 4;

/// Which documents are annotated: the union of train and dev, or test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetSplit {
    #[default]
    TrainDev,
    Test,
}

impl TargetSplit {
    pub fn splits(self) -> &'static [Split] {
        match self {
            TargetSplit::TrainDev => &[Split::Train, Split::Dev],
            TargetSplit::Test => &[Split::Test],
        }
    }
}

impl fmt::Display for TargetSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetSplit::TrainDev => "train+dev",
            TargetSplit::Test => "test",
        })
    }
}

impl FromStr for TargetSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train+dev" => Ok(TargetSplit::TrainDev),
            "test" => Ok(TargetSplit::Test),
            other => Err(format!("unknown target split {other:?} (expected train+dev or test)")),
        }
    }
}

impl Serialize for TargetSplit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TargetSplit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

/// `[provider]` table. HTTP settings fall back to [`ProviderConfig`]
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    #[serde(default)]
    pub kind: ProviderKind,
    pub mock_mode: Option<MockMode>,
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub requests_per_minute: Option<u32>,
    pub api_key_env: Option<String>,
    pub retry_base_delay_ms: Option<u64>,
}

impl ProviderSection {
    pub fn mock_mode(&self) -> MockMode {
        self.mock_mode.unwrap_or(MockMode::GoldEcho)
    }

    /// Gateway settings. Mock providers get a model id naming their mode
    /// so that caches from different modes never mix.
    pub fn provider_config(&self) -> ProviderConfig {
        let d = ProviderConfig::default();
        let model_id = match (&self.model_id, self.kind) {
            (Some(m), _) => m.clone(),
            (None, ProviderKind::Mock) => format!("mock-{}", self.mock_mode()),
            (None, ProviderKind::Http) => DEFAULT_MODEL.to_string(),
        };
        ProviderConfig {
            endpoint: self.endpoint.clone().unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            model_id,
            temperature: self.temperature.unwrap_or(d.temperature),
            max_retries: self.max_retries.unwrap_or(d.max_retries),
            timeout_secs: self.timeout_secs.unwrap_or(d.timeout_secs),
            requests_per_minute: self.requests_per_minute.or(d.requests_per_minute),
            api_key_env: self.api_key_env.clone().or(d.api_key_env),
            retry_base_delay_ms: self.retry_base_delay_ms.unwrap_or(d.retry_base_delay_ms),
        }
    }
}

/// One `[[datasets]]` entry: either split TSV files or a JSON dump.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub language: Option<String>,
    pub column: Option<String>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Extra stop-word list (one word per line) for the dataset language.
    pub stopwords: Option<PathBuf>,
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub strict: bool,
}

impl DatasetConfig {
    pub fn split_files(&self) -> Vec<(Split, &Path)> {
        [
            (Split::Train, &self.train),
            (Split::Dev, &self.dev),
            (Split::Test, &self.test),
        ]
        .into_iter()
        .filter_map(|(s, p)| p.as_deref().map(|p| (s, p)))
        .collect()
    }
}

fn default_methods() -> Vec<Method> {
    Method::replication_set()
}

fn default_runs() -> u32 {
    DEFAULT_RUNS
}

fn default_workers() -> usize {
    DEFAULT_WORKERS
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub target_split: TargetSplit,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Character budget for each example passage; unlimited when absent.
    pub max_example_chars: Option<usize>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub provider: ProviderSection,
    pub datasets: Vec<DatasetConfig>,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let config: Self = toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        resolve(base, &mut self.provider.script);
        for d in &mut self.datasets {
            for p in [
                &mut d.train,
                &mut d.dev,
                &mut d.test,
                &mut d.dump,
                &mut d.embeddings,
                &mut d.stopwords,
            ] {
                resolve(base, p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let err = |m: String| Err(RunnerError::Config(m));
        if self.runs == 0 {
            return err("runs must be at least 1".into());
        }
        if self.workers == 0 {
            return err("workers must be at least 1".into());
        }
        if self.methods.is_empty() {
            return err("no methods selected".into());
        }
        let unique: BTreeSet<Method> = self.methods.iter().copied().collect();
        if unique.len() != self.methods.len() {
            return err("duplicate entry in methods".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return err(format!("confidence must lie in (0, 1), got {}", self.confidence));
        }
        if self.datasets.is_empty() {
            return err("no [[datasets]] configured".into());
        }
        let mut ids = BTreeSet::new();
        let needs_embeddings = self.methods.iter().any(|m| matches!(m, Method::Embedding(_)));
        for d in &self.datasets {
            if d.id.trim().is_empty() {
                return err("dataset with empty id".into());
            }
            if !ids.insert(d.id.as_str()) {
                return err(format!("dataset id {:?} listed twice", d.id));
            }
            match (d.dump.is_some(), d.split_files().is_empty()) {
                (true, false) => return err(format!("dataset {:?}: give either split files or a dump", d.id)),
                (false, true) => return err(format!("dataset {:?}: no input files", d.id)),
                _ => {}
            }
            if needs_embeddings && d.embeddings.is_none() {
                return err(format!(
                    "dataset {:?}: embedding methods need an embeddings table",
                    d.id
                ));
            }
        }
        if self.provider.kind == ProviderKind::Mock
            && self.provider.mock_mode() == MockMode::Scripted
            && self.provider.script.is_none()
        {
            return err("scripted mock provider needs a script file".into());
        }
        self.provider
            .provider_config()
            .validate()
            .map_err(|e| RunnerError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output_dir = "out"

[[datasets]]
id = "ajmc-de"
language = "de"
train = "data/train.tsv"
dev = "/abs/dev.tsv"
embeddings = "emb.txt"
"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.methods, Method::replication_set());
        assert_eq!(c.target_split, TargetSplit::TrainDev);
        assert_eq!(c.provider.kind, ProviderKind::Mock);
        assert_eq!(c.provider.provider_config().model_id, "mock-gold_echo");
        assert_eq!(c.provider.provider_config().temperature, 0.0);
    }

    #[test]
    fn embedding_methods_need_table() {
        let text = format!("methods = [\"embedding1\"]\n{}", MINIMAL.replace("embeddings = \"emb.txt\"", ""));
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(RunnerError::Config(_))));
    }

    #[test]
    fn paths_resolved() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.output_dir, PathBuf::from("/cfg/out"));
        assert_eq!(c.datasets[0].train.as_deref(), Some(Path::new("/cfg/data/train.tsv")));
        assert_eq!(c.datasets[0].dev.as_deref(), Some(Path::new("/abs/dev.tsv")));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            format!("runs = 0\n{MINIMAL}"),
            format!("methods = [\"r2x\"]\n{MINIMAL}"),
            format!("methods = [\"r1\", \"r1\"]\n{MINIMAL}"),
            format!("target_split = \"dev\"\n{MINIMAL}"),
            format!("unknown_key = 1\n{MINIMAL}"),
            "output_dir = \"o\"\ndatasets = []".to_string(),
        ] {
            assert!(ExperimentConfig::from_toml(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn http_section() {
        let text = format!(
            "{MINIMAL}\n[provider]\nkind = \"http\"\nmodel_id = \"deepseek-chat\"\nrequests_per_minute = 60\n"
        );
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let p = c.provider.provider_config();
        assert_eq!(p.requests_per_minute, Some(60));
        assert_eq!(p.endpoint, DEFAULT_ENDPOINT);
    }
}
