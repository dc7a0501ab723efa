use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use cogaug::augmentation::Strategy;
use cogaug::evaluation::{RegressionConfig, ScoreStrata, SweepConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Mock,
    Replay,
    Live,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mock => "mock",
            Mode::Replay => "replay",
            Mode::Live => "live",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Mock,
    Ngram,
    Remote,
}

impl FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(EmbedderKind::Mock),
            "ngram" => Ok(EmbedderKind::Ngram),
            "remote" => Ok(EmbedderKind::Remote),
            _ => Err(format!("unknown embedder {s:?} (expected mock|ngram|remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub max_attempts: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self { max_attempts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub provider: EmbedderKind,
    /// Seed of the mock embedder.
    pub seed: u64,
    pub dim: usize,
    /// Model name of the remote embedder; also names its cache.
    pub model: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            provider: EmbedderKind::Mock,
            seed: 7,
            dim: 768,
            model: None,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub strategies: Vec<Strategy>,
    pub k_values: Vec<usize>,
    /// Number of seeds for the stochastic strategies.
    pub seeds: u64,
    pub base_seed: u64,
    pub target_per_class: usize,
    pub sigma: f64,
    pub fixed_components: usize,
    pub component_range: [usize; 2],
    pub ridge_lambda: f64,
    pub metric_strata: [[i32; 2]; 2],
    pub style_strata: [[i32; 2]; 2],
    pub style_k: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        let r = sweep.regression;
        let strata = |s: ScoreStrata| [[*s.low.start(), *s.low.end()], [*s.high.start(), *s.high.end()]];
        Self {
            strategies: sweep.strategies,
            k_values: sweep.k_values,
            seeds: sweep.seeds.len() as u64,
            base_seed: 0,
            target_per_class: r.target_per_class,
            sigma: r.sigma,
            fixed_components: r.fixed_components,
            component_range: [r.component_range.0, r.component_range.1],
            ridge_lambda: r.ridge_lambda,
            metric_strata: strata(sweep.metric_strata),
            style_strata: strata(sweep.style_strata),
            style_k: sweep.style_k,
        }
    }
}

impl EvaluationSettings {
    pub fn sweep_config(&self) -> SweepConfig {
        let strata = |s: [[i32; 2]; 2]| ScoreStrata {
            low: s[0][0]..=s[0][1],
            high: s[1][0]..=s[1][1],
        };
        SweepConfig {
            strategies: self.strategies.clone(),
            k_values: self.k_values.clone(),
            seeds: (self.base_seed..self.base_seed + self.seeds).collect(),
            regression: RegressionConfig {
                fixed_components: self.fixed_components,
                component_range: (self.component_range[0], self.component_range[1]),
                target_per_class: self.target_per_class,
                sigma: self.sigma,
                ridge_lambda: self.ridge_lambda,
            },
            metric_strata: strata(self.metric_strata),
            style_strata: strata(self.style_strata),
            style_k: self.style_k,
        }
    }
}

/// Experiment manifest. Relative paths resolve against the directory of
/// the config file (or the working directory without one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub jobs: usize,
    /// Built-in fixture corpus when absent.
    pub corpus_path: Option<PathBuf>,
    pub pool_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub replay_dir: Option<PathBuf>,
    pub generation: GenerationSettings,
    pub embedding: EmbeddingSettings,
    pub evaluation: EvaluationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Mock,
            jobs: 4,
            corpus_path: None,
            pool_path: None,
            out_dir: PathBuf::from("out"),
            replay_dir: None,
            generation: GenerationSettings::default(),
            embedding: EmbeddingSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        for p in [&mut cfg.corpus_path, &mut cfg.pool_path, &mut cfg.replay_dir, &mut cfg.embedding.cache_dir]
            .into_iter()
            .flatten()
        {
            resolve(&base, p);
        }
        resolve(&base, &mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn pool_path(&self) -> PathBuf {
        self.pool_path.clone().unwrap_or_else(|| self.out_dir.join("pool.jsonl"))
    }

    pub fn replay_dir(&self) -> PathBuf {
        self.replay_dir.clone().unwrap_or_else(|| self.out_dir.join("replay"))
    }

    pub fn embedding_cache_dir(&self) -> PathBuf {
        self.embedding.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("embeddings"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out_dir.join("report")
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        if self.generation.max_attempts == 0 {
            bail!("generation.max_attempts must be at least 1");
        }
        if self.embedding.dim == 0 {
            bail!("embedding.dim must be positive");
        }
        if let Some(p) = &self.corpus_path {
            if !p.exists() {
                bail!("corpus file {} does not exist", p.display());
            }
        }
        if self.mode == Mode::Mock && self.embedding.provider == EmbedderKind::Remote {
            bail!("the remote embedder needs --mode live or --mode replay");
        }
        self.evaluation.sweep_config().validate()?;
        Ok(())
    }
}

/// Parses `0..7`, `0..=7`, `3` or `0,2,5`.
pub fn parse_k_list(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid k list {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}
