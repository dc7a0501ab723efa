//! Paired written/oral patient records and their score distribution.
//!
//! A corpus lives on disk as a JSON-lines file (one [`PatientRecord`] per
//! line) plus a `<stem>.meta.json` sidecar holding the shared prompt text.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest HDS score accepted by validation.
pub const HDS_MIN: i32 = 22;
/// Highest HDS score accepted by validation.
pub const HDS_MAX: i32 = 30;

const AGE_RANGE: (u32, u32) = (72, 86);

const FIXTURE_RECORDS: &str = include_str!("../../../data/fixture/corpus.jsonl");
const FIXTURE_META: &str = include_str!("../../../data/fixture/corpus.meta.json");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    Empty,
    #[error("line {line}: malformed record at byte {offset}: {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },
    #[error("patient {patient_id}: {rule}")]
    Invalid { patient_id: String, rule: String },
    #[error("duplicate patient_id {0}")]
    Duplicate(String),
    #[error("metadata {path}: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptionSource {
    Manual,
    Automatic,
}

/// One participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: u32,
    pub hds_score: i32,
    pub oral_text: String,
    pub written_text: String,
    pub transcription_source: TranscriptionSource,
}

impl PatientRecord {
    /// Checks the per-record invariants. Ages outside the cohort range only
    /// produce a warning.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |rule: String| CorpusError::Invalid {
            patient_id: self.patient_id.clone(),
            rule,
        };
        if self.patient_id.is_empty() {
            return Err(invalid("patient_id is empty".into()));
        }
        if !(HDS_MIN..=HDS_MAX).contains(&self.hds_score) {
            return Err(invalid(format!(
                "hds_score {} outside [{HDS_MIN},{HDS_MAX}]",
                self.hds_score
            )));
        }
        if self.oral_text.trim().is_empty() {
            return Err(invalid("oral_text is empty".into()));
        }
        if self.written_text.trim().is_empty() {
            return Err(invalid("written_text is empty".into()));
        }
        if !(AGE_RANGE.0..=AGE_RANGE.1).contains(&self.age) {
            log::warn!(
                "patient {}: age {} outside the usual cohort range {}-{}",
                self.patient_id,
                self.age,
                AGE_RANGE.0,
                AGE_RANGE.1
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CorpusMeta {
    prompt_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<PatientRecord>,
    pub prompt_text: String,
}

impl Corpus {
    /// Builds a corpus, enforcing record invariants and id uniqueness.
    pub fn new(records: Vec<PatientRecord>, prompt_text: impl Into<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.patient_id.as_str()) {
                return Err(CorpusError::Duplicate(r.patient_id.clone()));
            }
        }
        Ok(Self {
            records,
            prompt_text: prompt_text.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, patient_id: &str) -> Option<&PatientRecord> {
        self.records.iter().find(|r| r.patient_id == patient_id)
    }

    /// The bundled 30-participant fixture corpus.
    pub fn fixture() -> Self {
        let meta: CorpusMeta = serde_json::from_str(FIXTURE_META).expect("fixture metadata");
        parse_records(FIXTURE_RECORDS)
            .and_then(|records| Corpus::new(records, meta.prompt_text))
            .expect("bundled fixture corpus is valid")
    }

    /// Returns a copy without the given patient.
    pub fn without(&self, patient_id: &str) -> Corpus {
        Corpus {
            records: self
                .records
                .iter()
                .filter(|r| r.patient_id != patient_id)
                .cloned()
                .collect(),
            prompt_text: self.prompt_text.clone(),
        }
    }
}

/// Sidecar path: `corpus.jsonl` -> `corpus.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    path.with_file_name(format!("{stem}.meta.json"))
}

fn parse_records(text: &str) -> Result<Vec<PatientRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut offset = 0usize;
    for (idx, line) in text.split_inclusive('\n').enumerate() {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() {
            let rec: PatientRecord = serde_json::from_str(body).map_err(|e| CorpusError::Parse {
                line: idx + 1,
                offset: offset + e.column().saturating_sub(1),
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        offset += line.len();
    }
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(records)
}

/// Reads and validates a corpus file and its metadata sidecar. A missing
/// sidecar leaves `prompt_text` empty.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let records = parse_records(&text)?;
    let meta = meta_path(path);
    let prompt_text = if meta.exists() {
        let raw = fs::read_to_string(&meta)?;
        let m: CorpusMeta = serde_json::from_str(&raw).map_err(|e| CorpusError::Metadata {
            path: meta.clone(),
            message: e.to_string(),
        })?;
        m.prompt_text
    } else {
        String::new()
    };
    Corpus::new(records, prompt_text)
}

/// Serializes the corpus to its on-disk representation.
pub fn to_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for r in &corpus.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(corpus))?;
    let meta = CorpusMeta {
        prompt_text: corpus.prompt_text.clone(),
    };
    fs::write(
        meta_path(path),
        serde_json::to_string(&meta).expect("meta serializes") + "\n",
    )?;
    Ok(())
}

/// Record count per HDS score over the full valid range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: BTreeMap<i32, usize>,
}

impl ClassHistogram {
    pub fn from_scores(scores: impl IntoIterator<Item = i32>) -> Self {
        let mut counts: BTreeMap<i32, usize> = (HDS_MIN..=HDS_MAX).map(|s| (s, 0)).collect();
        for s in scores {
            *counts.entry(s).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn count(&self, score: i32) -> usize {
        self.counts.get(&score).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn max_count(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }
}

pub fn class_histogram(corpus: &Corpus) -> ClassHistogram {
    ClassHistogram::from_scores(corpus.records.iter().map(|r| r.hds_score))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n: usize,
    pub age_range: Option<(u32, u32)>,
    pub score_range: Option<(i32, i32)>,
    pub manual_transcriptions: usize,
    pub class_counts: BTreeMap<i32, usize>,
}

pub fn summarize(corpus: &Corpus) -> CorpusSummary {
    let ages = corpus.records.iter().map(|r| r.age);
    let scores = corpus.records.iter().map(|r| r.hds_score);
    let range = |it: &mut dyn Iterator<Item = i64>| {
        it.fold(None, |acc: Option<(i64, i64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    };
    CorpusSummary {
        n: corpus.len(),
        age_range: range(&mut ages.map(i64::from)).map(|(a, b)| (a as u32, b as u32)),
        score_range: range(&mut scores.map(i64::from)).map(|(a, b)| (a as i32, b as i32)),
        manual_transcriptions: corpus
            .records
            .iter()
            .filter(|r| r.transcription_source == TranscriptionSource::Manual)
            .count(),
        class_counts: class_histogram(corpus).counts,
    }
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.n)?;
        if let Some((lo, hi)) = self.age_range {
            writeln!(f, "age range: {lo}-{hi}")?;
        }
        if let Some((lo, hi)) = self.score_range {
            writeln!(f, "score range: {lo}-{hi}")?;
        }
        writeln!(f, "manual transcriptions: {}", self.manual_transcriptions)?;
        writeln!(f, "per-class counts:")?;
        for (score, count) in &self.class_counts {
            writeln!(f, "  {score:>2}: {count}")?;
        }
        Ok(())
    }
}
