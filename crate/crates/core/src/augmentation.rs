//! Class-balanced selection of synthetic samples and the feature-space
//! Gaussian-noise baseline.
//!
//! Selection is two-stage: every eligible patient first contributes at most
//! `k_per_patient` candidates (its most similar samples, or a random
//! subset), then each under-represented HDS class is topped up from its
//! candidates until it reaches the target count.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassHistogram, Corpus};
use crate::embedding::EmbeddingTable;
use crate::generation::{Style, SyntheticPool, SyntheticSample};

/// Per-class target used throughout: the largest class in the cohort.
pub const DEFAULT_TARGET: usize = 8;
pub const DEFAULT_SIGMA: f64 = 0.02;

#[derive(Debug, Error)]
pub enum AugmentationError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("missing embedding for {0}")]
    MissingEmbedding(String),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, AugmentationError> {
    if a.len() != b.len() {
        return Err(AugmentationError::DimMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(AugmentationError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeficitMap {
    pub needed: BTreeMap<i32, usize>,
    pub target: usize,
}

impl DeficitMap {
    pub fn total(&self) -> usize {
        self.needed.values().sum()
    }

    pub fn needed(&self, score: i32) -> usize {
        self.needed.get(&score).copied().unwrap_or(0)
    }

    /// Same classes with no cap: every class may absorb `usize::MAX` samples.
    pub fn unlimited(&self) -> Self {
        Self {
            needed: self.needed.keys().map(|&s| (s, usize::MAX)).collect(),
            target: usize::MAX,
        }
    }
}

/// `needed[s] = max(0, target - count[s])`; overfull classes clamp to 0.
pub fn compute_deficits(hist: &ClassHistogram, target: usize) -> DeficitMap {
    DeficitMap {
        needed: hist
            .counts
            .iter()
            .map(|(&s, &c)| (s, target.saturating_sub(c)))
            .collect(),
        target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    Noise,
    Random,
    Similarity,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::None, Strategy::Noise, Strategy::Random, Strategy::Similarity];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Noise => "noise",
            Strategy::Random => "random",
            Strategy::Similarity => "similarity",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected none|noise|random|similarity)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub patient_id: String,
    pub style_name: Style,
    pub hds_score: i32,
}

impl SampleKey {
    fn of(s: &SyntheticSample) -> Self {
        Self {
            patient_id: s.patient_id.clone(),
            style_name: s.style_name,
            hds_score: s.hds_score,
        }
    }
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.patient_id, self.style_name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSelection {
    pub strategy: Strategy,
    pub k_per_patient: usize,
    pub seed: Option<u64>,
    pub chosen: Vec<SampleKey>,
    /// Cosine similarity to the source patient's oral transcription, for
    /// every chosen sample (similarity strategy only).
    pub similarity_scores: BTreeMap<String, f64>,
    /// Classes that could not be filled: score -> shortfall.
    pub under_filled: BTreeMap<i32, usize>,
}

impl AugmentationSelection {
    pub fn empty(strategy: Strategy, k_per_patient: usize) -> Self {
        Self {
            strategy,
            k_per_patient,
            seed: None,
            chosen: Vec::new(),
            similarity_scores: BTreeMap::new(),
            under_filled: BTreeMap::new(),
        }
    }

    pub fn count_for_class(&self, score: i32) -> usize {
        self.chosen.iter().filter(|c| c.hds_score == score).count()
    }
}

fn record_shortfall(deficits: &DeficitMap, score: i32, taken: usize, under: &mut BTreeMap<i32, usize>) {
    let need = deficits.needed(score);
    if need != usize::MAX && taken < need {
        log::debug!("class {score} under-filled: {taken} of {need}");
        under.insert(score, need - taken);
    }
}

/// Similarity-guided selection. Per eligible patient, samples are ranked by
/// cosine similarity to that patient's original oral transcription (raw
/// embedding space) and the top `k_per_patient` kept; each deficit class is
/// then filled in descending similarity. Ties break on (patient_id, style).
pub fn select_similarity(
    pool: &SyntheticPool,
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    deficits: &DeficitMap,
    k_per_patient: usize,
    excluded: &HashSet<String>,
) -> Result<AugmentationSelection, AugmentationError> {
    let mut selection = AugmentationSelection::empty(Strategy::Similarity, k_per_patient);
    if k_per_patient == 0 {
        return Ok(selection);
    }
    let mut by_class: BTreeMap<i32, Vec<(f64, &SyntheticSample)>> = BTreeMap::new();
    for patient in &corpus.records {
        if excluded.contains(&patient.patient_id) || deficits.needed(patient.hds_score) == 0 {
            continue;
        }
        let anchor = embeddings
            .get(&patient.oral_text)
            .ok_or_else(|| AugmentationError::MissingEmbedding(format!("{} (oral)", patient.patient_id)))?;
        let mut scored = Vec::new();
        for s in pool.for_patient(&patient.patient_id) {
            let v = embeddings
                .get(&s.text)
                .ok_or_else(|| AugmentationError::MissingEmbedding(s.key()))?;
            scored.push((cosine_similarity(anchor.values(), v.values())?, s));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.style_name.cmp(&b.1.style_name)));
        scored.truncate(k_per_patient);
        by_class.entry(patient.hds_score).or_default().extend(scored);
    }
    for (score, mut cands) in by_class {
        cands.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.patient_id.cmp(&b.1.patient_id))
                .then_with(|| a.1.style_name.cmp(&b.1.style_name))
        });
        let need = deficits.needed(score);
        let taken = need.min(cands.len());
        for (sim, s) in cands.into_iter().take(taken) {
            selection.similarity_scores.insert(s.key(), sim);
            selection.chosen.push(SampleKey::of(s));
        }
        record_shortfall(deficits, score, taken, &mut selection.under_filled);
    }
    for (&score, &need) in &deficits.needed {
        if need > 0 && need != usize::MAX && selection.count_for_class(score) == 0 {
            selection.under_filled.entry(score).or_insert(need);
        }
    }
    Ok(selection)
}

/// Random selection, reproducible from `seed`. One ChaCha8 stream is used:
/// first the per-patient draws (patients in id order, samples in style
/// order), then the per-class draws (classes ascending, candidates in
/// (patient_id, style) order).
pub fn select_random(
    pool: &SyntheticPool,
    deficits: &DeficitMap,
    k_per_patient: usize,
    excluded: &HashSet<String>,
    seed: u64,
) -> AugmentationSelection {
    let mut selection = AugmentationSelection::empty(Strategy::Random, k_per_patient);
    selection.seed = Some(seed);
    if k_per_patient == 0 {
        return selection;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_patient: BTreeMap<&str, Vec<&SyntheticSample>> = BTreeMap::new();
    for s in &pool.samples {
        if !excluded.contains(&s.patient_id) {
            by_patient.entry(&s.patient_id).or_default().push(s);
        }
    }
    let mut by_class: BTreeMap<i32, Vec<&SyntheticSample>> = BTreeMap::new();
    for (_, mut samples) in by_patient {
        samples.sort_by_key(|s| s.style_name);
        let take = k_per_patient.min(samples.len());
        let mut idx = sample_indices(&mut rng, samples.len(), take).into_vec();
        idx.sort_unstable();
        for i in idx {
            by_class.entry(samples[i].hds_score).or_default().push(samples[i]);
        }
    }
    for (score, need) in &deficits.needed {
        if *need == 0 {
            continue;
        }
        let cands = by_class.remove(score).unwrap_or_default();
        let take = (*need).min(cands.len());
        let mut idx = sample_indices(&mut rng, cands.len(), take).into_vec();
        idx.sort_unstable();
        selection.chosen.extend(idx.into_iter().map(|i| SampleKey::of(cands[i])));
        record_shortfall(deficits, *score, take, &mut selection.under_filled);
    }
    selection
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCopy {
    /// Row index of the source vector in the input matrix.
    pub source_row: usize,
    /// Ordinal of this copy among copies of the same source.
    pub copy: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAugmentation {
    /// Input rows followed by the noisy copies.
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<i32>,
    /// Provenance of each appended row, in order.
    pub copies: Vec<NoiseCopy>,
    pub sigma: f64,
    pub seed: u64,
    pub under_filled: BTreeMap<i32, usize>,
}

/// Appends `needed[s]` noisy copies per deficit class, cycling through that
/// class's rows and adding i.i.d. N(0, sigma²) per coordinate. With
/// `max_copies_per_source = Some(k)` a source row yields at most k copies.
pub fn gaussian_noise_augment(
    rows: &[Vec<f64>],
    labels: &[i32],
    deficits: &DeficitMap,
    sigma: f64,
    seed: u64,
    max_copies_per_source: Option<usize>,
) -> Result<NoiseAugmentation, AugmentationError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(AugmentationError::InvalidSigma(sigma));
    }
    if rows.len() != labels.len() {
        return Err(AugmentationError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| AugmentationError::InvalidSigma(sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out_rows = rows.to_vec();
    let mut out_labels = labels.to_vec();
    let mut copies = Vec::new();
    let mut under_filled = BTreeMap::new();
    for (&score, &need) in &deficits.needed {
        if need == 0 {
            continue;
        }
        let sources: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == score).collect();
        let cap = match max_copies_per_source {
            Some(k) => sources.len().saturating_mul(k),
            None if sources.is_empty() => 0,
            None => usize::MAX,
        };
        let make = need.min(cap);
        if make < need && need != usize::MAX {
            under_filled.insert(score, need - make);
        }
        for i in 0..make {
            let src = sources[i % sources.len()];
            let row = rows[src].iter().map(|x| x + normal.sample(&mut rng)).collect();
            out_rows.push(row);
            out_labels.push(score);
            copies.push(NoiseCopy {
                source_row: src,
                copy: i / sources.len(),
            });
        }
    }
    Ok(NoiseAugmentation {
        rows: out_rows,
        labels: out_labels,
        copies,
        sigma,
        seed,
        under_filled,
    })
}
