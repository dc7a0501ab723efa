//! Style-conditioned synthetic monologue generation.
//!
//! Each (patient, style) pair renders one prompt from the patient's written
//! narrative and HDS score. Provider outputs are length-checked, checked
//! against sibling samples for exact duplicates, and recorded in a
//! [`ReplayStore`] keyed by prompt hash so a run can be replayed offline.

mod prompt;
mod provider;
mod replay;

pub use prompt::{
    fluency_band, prompt_hash, render_prompt, FluencyBand, RenderedPrompt, Style, StyleSpec, SYSTEM_MESSAGE,
    USER_TEMPLATE,
};
pub use provider::{
    GenerationProvider, LiveProvider, MockProvider, ProviderError, ReplayProvider, ENV_GEN_KEY, ENV_GEN_MODEL,
    ENV_GEN_URL, MOCK_PROVIDER_ID,
};
pub use replay::{ReplayEntry, ReplayStore, MANIFEST_FILE};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, PatientRecord};

pub const MIN_CHARS: usize = 150;
pub const MAX_CHARS: usize = 1300;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("hds_score {0} outside [22,30]")]
    ScoreOutOfRange(i32),
    #[error("written_text is empty")]
    EmptyWrittenText,
    #[error("{patient_id}/{style}: provider failed: {source}")]
    Provider {
        patient_id: String,
        style: Style,
        #[source]
        source: ProviderError,
    },
    #[error("{patient_id}/{style}: output rejected after {attempts} attempts ({reason})")]
    Rejected {
        patient_id: String,
        style: Style,
        attempts: usize,
        reason: RejectReason,
    },
    #[error("{} of {} samples failed; {completed} recorded and resumable", failures.len(), failures.len() + completed)]
    Pool {
        completed: usize,
        failures: Vec<GenerationError>,
    },
    #[error("pool line {line}: malformed sample at byte {offset}: {message}")]
    PoolParse {
        line: usize,
        offset: usize,
        message: String,
    },
    #[error("pool invariant violated: {0}")]
    PoolInvariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Blank,
    TooShort,
    TooLong,
    NearDuplicate,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Blank => "blank",
            RejectReason::TooShort => "too_short",
            RejectReason::TooLong => "too_long",
            RejectReason::NearDuplicate => "near_duplicate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    Accept,
    Reject(RejectReason),
}

impl Validation {
    pub fn is_accept(self) -> bool {
        self == Validation::Accept
    }
}

/// Length is counted in Unicode scalar values; bounds are inclusive.
pub fn validate_output(text: &str) -> Validation {
    if text.trim().is_empty() {
        return Validation::Reject(RejectReason::Blank);
    }
    let n = text.chars().count();
    if n < MIN_CHARS {
        Validation::Reject(RejectReason::TooShort)
    } else if n > MAX_CHARS {
        Validation::Reject(RejectReason::TooLong)
    } else {
        Validation::Accept
    }
}

fn normalize(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub patient_id: String,
    pub style_name: Style,
    /// Inherited from the source patient.
    pub hds_score: i32,
    pub text: String,
    pub char_count: usize,
    pub prompt_hash: String,
    pub provider_id: String,
    /// Unix seconds.
    pub created_at: u64,
}

impl SyntheticSample {
    /// Stable identifier: `<patient_id>:<style_name>`.
    pub fn key(&self) -> String {
        format!("{}:{}", self.patient_id, self.style_name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyntheticPool {
    pub samples: Vec<SyntheticSample>,
}

impl SyntheticPool {
    pub fn new(samples: Vec<SyntheticSample>) -> Result<Self, GenerationError> {
        let pool = Self { samples };
        pool.check()?;
        Ok(pool)
    }

    fn check(&self) -> Result<(), GenerationError> {
        let mut seen = HashSet::new();
        let mut per_patient: HashMap<&str, usize> = HashMap::new();
        for s in &self.samples {
            if !seen.insert((s.patient_id.as_str(), s.style_name)) {
                return Err(GenerationError::PoolInvariant(format!("duplicate sample {}", s.key())));
            }
            let n = per_patient.entry(&s.patient_id).or_default();
            *n += 1;
            if *n > Style::ALL.len() {
                return Err(GenerationError::PoolInvariant(format!(
                    "more than {} samples for {}",
                    Style::ALL.len(),
                    s.patient_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn for_patient<'a>(&'a self, patient_id: &'a str) -> impl Iterator<Item = &'a SyntheticSample> + 'a {
        self.samples.iter().filter(move |s| s.patient_id == patient_id)
    }

    /// Per-patient, per-style sample counts.
    pub fn style_table(&self) -> BTreeMap<String, BTreeMap<Style, usize>> {
        let mut table: BTreeMap<String, BTreeMap<Style, usize>> = BTreeMap::new();
        for s in &self.samples {
            *table.entry(s.patient_id.clone()).or_default().entry(s.style_name).or_default() += 1;
        }
        table
    }
}

pub fn pool_to_jsonl(pool: &SyntheticPool) -> String {
    let mut out = String::new();
    for s in &pool.samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

pub fn save_pool(pool: &SyntheticPool, path: impl AsRef<Path>) -> Result<(), GenerationError> {
    fs::write(path, pool_to_jsonl(pool))?;
    Ok(())
}

/// Parses a pool file. Blank lines and lines starting with `#` are skipped.
pub fn parse_pool(text: &str) -> Result<SyntheticPool, GenerationError> {
    let mut samples = Vec::new();
    let mut offset = 0;
    for (idx, line) in text.split_inclusive('\n').enumerate() {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() && !body.starts_with('#') {
            let s: SyntheticSample = serde_json::from_str(body).map_err(|e| GenerationError::PoolParse {
                line: idx + 1,
                offset: offset + e.column().saturating_sub(1),
                message: e.to_string(),
            })?;
            samples.push(s);
        }
        offset += line.len();
    }
    SyntheticPool::new(samples)
}

pub fn load_pool(path: impl AsRef<Path>) -> Result<SyntheticPool, GenerationError> {
    parse_pool(&fs::read_to_string(path)?)
}

/// Source of `created_at` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timestamps {
    Fixed(u64),
    SystemClock,
}

impl Timestamps {
    fn now(self) -> u64 {
        match self {
            Timestamps::Fixed(t) => t,
            Timestamps::SystemClock => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationOptions {
    /// Provider calls per sample before giving up (same prompt each time).
    pub max_attempts: usize,
    /// Patients processed concurrently by [`generate_pool`].
    pub jobs: usize,
    pub timestamps: Timestamps,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            jobs: 4,
            timestamps: Timestamps::Fixed(0),
        }
    }
}

/// Generates one sample. A replay-store hit short-circuits the provider;
/// accepted provider outputs are recorded in the store. `siblings` are the
/// already-accepted samples of the same patient.
pub fn generate_sample(
    patient: &PatientRecord,
    style: Style,
    provider: &dyn GenerationProvider,
    store: Option<&ReplayStore>,
    siblings: &[SyntheticSample],
    opts: &GenerationOptions,
) -> Result<SyntheticSample, GenerationError> {
    let prompt = render_prompt(&patient.written_text, patient.hds_score, style)?;
    let hash = prompt.hash();
    let sibling_texts: HashSet<String> = siblings
        .iter()
        .filter(|s| s.patient_id == patient.patient_id && s.style_name != style)
        .map(|s| normalize(&s.text))
        .collect();
    let check = |text: &str| match validate_output(text) {
        Validation::Accept if sibling_texts.contains(&normalize(text)) => Validation::Reject(RejectReason::NearDuplicate),
        v => v,
    };
    let build = |text: String, provider_id: String, created_at: u64| SyntheticSample {
        patient_id: patient.patient_id.clone(),
        style_name: style,
        hds_score: patient.hds_score,
        char_count: text.chars().count(),
        text,
        prompt_hash: hash.clone(),
        provider_id,
        created_at,
    };

    if let Some(store) = store {
        if let Some(text) = store.get_text(&hash)? {
            if check(&text).is_accept() {
                let (provider_id, created_at) = match store.entry_for_hash(&hash) {
                    Some(e) => (e.provider_id, e.created_at),
                    None => (provider.id().to_string(), opts.timestamps.now()),
                };
                let sample = build(text, provider_id, created_at);
                if store.entry(&patient.patient_id, style).is_none() {
                    store.put(entry_of(&sample), &sample.text)?;
                }
                return Ok(sample);
            }
        }
    }

    let attempts = opts.max_attempts.max(1);
    let mut last_reason = RejectReason::Blank;
    for attempt in 1..=attempts {
        let text = match provider.complete(&prompt.system, &prompt.user) {
            Ok(t) => t,
            Err(e) if e.is_retryable() && attempt < attempts => {
                log::warn!("{}/{style}: attempt {attempt} failed: {e}", patient.patient_id);
                continue;
            }
            Err(source) => {
                return Err(GenerationError::Provider {
                    patient_id: patient.patient_id.clone(),
                    style,
                    source,
                })
            }
        };
        match check(&text) {
            Validation::Accept => {
                let sample = build(text, provider.id().to_string(), opts.timestamps.now());
                if let Some(store) = store {
                    store.put(entry_of(&sample), &sample.text)?;
                }
                return Ok(sample);
            }
            Validation::Reject(reason) => {
                log::warn!("{}/{style}: attempt {attempt} rejected ({reason})", patient.patient_id);
                last_reason = reason;
            }
        }
    }
    Err(GenerationError::Rejected {
        patient_id: patient.patient_id.clone(),
        style,
        attempts,
        reason: last_reason,
    })
}

fn entry_of(s: &SyntheticSample) -> ReplayEntry {
    ReplayEntry {
        patient_id: s.patient_id.clone(),
        style_name: s.style_name,
        prompt_hash: s.prompt_hash.clone(),
        provider_id: s.provider_id.clone(),
        created_at: s.created_at,
    }
}

/// Generates all seven styles for every patient. Patients run concurrently
/// (bounded by `opts.jobs`); styles of one patient run in order so sibling
/// duplicate checks see earlier outputs. Output order is corpus order, then
/// style order.
pub fn generate_pool(
    corpus: &Corpus,
    provider: &dyn GenerationProvider,
    store: Option<&ReplayStore>,
    opts: &GenerationOptions,
) -> Result<SyntheticPool, GenerationError> {
    let per_patient = |patient: &PatientRecord| {
        let mut done: Vec<SyntheticSample> = Vec::with_capacity(Style::ALL.len());
        let mut errors = Vec::new();
        for style in Style::ALL {
            match generate_sample(patient, style, provider, store, &done, opts) {
                Ok(s) => done.push(s),
                Err(e) => errors.push(e),
            }
        }
        (done, errors)
    };
    let results: Vec<(Vec<SyntheticSample>, Vec<GenerationError>)> = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?
        .install(|| corpus.records.par_iter().map(per_patient).collect());

    let mut samples = Vec::with_capacity(corpus.len() * Style::ALL.len());
    let mut failures = Vec::new();
    for (done, errors) in results {
        samples.extend(done);
        failures.extend(errors);
    }
    if !failures.is_empty() {
        return Err(GenerationError::Pool {
            completed: samples.len(),
            failures,
        });
    }
    SyntheticPool::new(samples)
}
