use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvaluationError;
use crate::augmentation::{
    compute_deficits, gaussian_noise_augment, select_random, select_similarity, AugmentationSelection, Strategy,
    DEFAULT_SIGMA, DEFAULT_TARGET,
};
use crate::corpus::{class_histogram, Corpus};
use crate::embedding::{EmbeddingTable, Standardizer};
use crate::generation::{Style, SyntheticPool, SyntheticSample};
use crate::regression::{pls_fit, select_components};

/// Identity of one training row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleId {
    Original { patient_id: String },
    Synthetic { patient_id: String, style: Style },
    Noise { patient_id: String, copy: usize },
}

impl SampleId {
    pub fn source_patient(&self) -> &str {
        match self {
            SampleId::Original { patient_id }
            | SampleId::Synthetic { patient_id, .. }
            | SampleId::Noise { patient_id, .. } => patient_id,
        }
    }

    pub fn is_derived(&self) -> bool {
        !matches!(self, SampleId::Original { .. })
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleId::Original { patient_id } => write!(f, "orig:{patient_id}"),
            SampleId::Synthetic { patient_id, style } => write!(f, "syn:{patient_id}:{style}"),
            SampleId::Noise { patient_id, copy } => write!(f, "noise:{patient_id}:{copy}"),
        }
    }
}

impl FromStr for SampleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(2, ':');
        let kind = parts.next().unwrap_or_default();
        let rest = parts.next().ok_or_else(|| format!("bad sample id {s:?}"))?;
        match kind {
            "orig" => Ok(SampleId::Original {
                patient_id: rest.to_string(),
            }),
            "syn" | "noise" => {
                let (pid, tail) = rest.rsplit_once(':').ok_or_else(|| format!("bad sample id {s:?}"))?;
                let patient_id = pid.to_string();
                if kind == "syn" {
                    Ok(SampleId::Synthetic {
                        patient_id,
                        style: tail.parse()?,
                    })
                } else {
                    Ok(SampleId::Noise {
                        patient_id,
                        copy: tail.parse().map_err(|_| format!("bad copy index in {s:?}"))?,
                    })
                }
            }
            _ => Err(format!("bad sample id {s:?}")),
        }
    }
}

impl Serialize for SampleId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SampleId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    /// Components used whenever the training set is augmented.
    pub fixed_components: usize,
    /// Range searched by nested leave-one-out for unaugmented training.
    pub component_range: (usize, usize),
    pub target_per_class: usize,
    pub sigma: f64,
    pub ridge_lambda: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            fixed_components: 7,
            component_range: (1, 15),
            target_per_class: DEFAULT_TARGET,
            sigma: DEFAULT_SIGMA,
            ridge_lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub test_patient_id: String,
    pub y_true: i32,
    pub y_pred: f64,
    pub n_components: usize,
    pub training_manifest: Vec<SampleId>,
    pub config_fingerprint: String,
}

/// Inputs shared by every fold.
pub struct EvalContext<'a> {
    pub corpus: &'a Corpus,
    pub pool: &'a SyntheticPool,
    /// Raw embeddings of every oral transcription and synthetic sample.
    pub embeddings: &'a EmbeddingTable,
    index: HashMap<(&'a str, Style), &'a SyntheticSample>,
}

impl<'a> EvalContext<'a> {
    pub fn new(corpus: &'a Corpus, pool: &'a SyntheticPool, embeddings: &'a EmbeddingTable) -> Self {
        let index = pool
            .samples
            .iter()
            .map(|s| ((s.patient_id.as_str(), s.style_name), s))
            .collect();
        Self {
            corpus,
            pool,
            embeddings,
            index,
        }
    }

    fn vector(&self, text: &str, what: impl FnOnce() -> String) -> Result<&'a [f64], EvaluationError> {
        self.embeddings
            .get(text)
            .map(|v| v.values())
            .ok_or_else(|| EvaluationError::MissingEmbedding(what()))
    }
}

/// Everything a fold trains on, before and after standardization.
#[derive(Debug, Clone)]
pub struct FoldTrainingSet {
    pub test_patient_id: String,
    /// One id per row of `x`, noise copies last.
    pub ids: Vec<SampleId>,
    /// Unstandardized vectors of originals and synthetic samples (the rows
    /// the standardizer was fitted on), aligned with the leading `ids`.
    pub raw_rows: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub selection: AugmentationSelection,
    /// True when no augmentation of any kind is applied.
    pub unaugmented: bool,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64)
}

/// Assembles the training set for the fold holding out `test_patient_id`.
/// The held-out patient's original and all of its synthetic samples are
/// excluded before any selection or fitting.
pub fn build_fold(
    ctx: &EvalContext<'_>,
    test_patient_id: &str,
    strategy: Strategy,
    k: usize,
    seed: u64,
    cfg: &RegressionConfig,
) -> Result<FoldTrainingSet, EvaluationError> {
    let fold_idx = ctx
        .corpus
        .records
        .iter()
        .position(|r| r.patient_id == test_patient_id)
        .ok_or_else(|| EvaluationError::UnknownPatient(test_patient_id.to_string()))?;
    let train_corpus = ctx.corpus.without(test_patient_id);
    let excluded: HashSet<String> = [test_patient_id.to_string()].into_iter().collect();
    let deficits = compute_deficits(&class_histogram(&train_corpus), cfg.target_per_class);

    let selection = match (strategy, k) {
        (_, 0) | (Strategy::None, _) | (Strategy::Noise, _) => AugmentationSelection::empty(strategy, k),
        (Strategy::Similarity, _) => {
            select_similarity(ctx.pool, ctx.corpus, ctx.embeddings, &deficits, k, &excluded)?
        }
        (Strategy::Random, _) => select_random(ctx.pool, &deficits, k, &excluded, fold_seed(seed, fold_idx)),
    };

    let mut ids = Vec::new();
    let mut raw_rows = Vec::new();
    let mut labels = Vec::new();
    for r in &train_corpus.records {
        ids.push(SampleId::Original {
            patient_id: r.patient_id.clone(),
        });
        raw_rows.push(ctx.vector(&r.oral_text, || format!("{} (oral)", r.patient_id))?.to_vec());
        labels.push(r.hds_score);
    }
    for key in &selection.chosen {
        let sample = ctx
            .index
            .get(&(key.patient_id.as_str(), key.style_name))
            .ok_or_else(|| EvaluationError::MissingSample(key.to_string()))?;
        ids.push(SampleId::Synthetic {
            patient_id: sample.patient_id.clone(),
            style: sample.style_name,
        });
        raw_rows.push(ctx.vector(&sample.text, || sample.key())?.to_vec());
        labels.push(sample.hds_score);
    }

    let standardizer = Standardizer::fit(&raw_rows)?;
    let mut rows: Vec<Vec<f64>> = raw_rows
        .iter()
        .map(|r| standardizer.apply(r))
        .collect::<Result<_, _>>()?;

    let unaugmented = k == 0 || strategy == Strategy::None;
    if strategy == Strategy::Noise && k > 0 {
        let aug = gaussian_noise_augment(&rows, &labels, &deficits, cfg.sigma, fold_seed(seed, fold_idx), Some(k))?;
        for c in &aug.copies {
            ids.push(SampleId::Noise {
                patient_id: ids[c.source_row].source_patient().to_string(),
                copy: c.copy,
            });
        }
        rows = aug.rows;
        labels = aug.labels;
    }

    let d = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_row_iterator(rows.len(), d, rows.iter().flatten().copied());
    let y = DVector::from_iterator(labels.len(), labels.iter().map(|&l| l as f64));
    Ok(FoldTrainingSet {
        test_patient_id: test_patient_id.to_string(),
        ids,
        raw_rows,
        standardizer,
        x,
        y,
        selection,
        unaugmented,
    })
}

/// Fits the fold's model and predicts the held-out patient.
pub fn run_fold(
    ctx: &EvalContext<'_>,
    test_patient_id: &str,
    strategy: Strategy,
    k: usize,
    seed: u64,
    cfg: &RegressionConfig,
    fingerprint: &str,
) -> Result<(FoldResult, AugmentationSelection), EvaluationError> {
    let wrap = |e: EvaluationError| EvaluationError::Fold {
        patient_id: test_patient_id.to_string(),
        source: Box::new(e),
    };
    let fold = build_fold(ctx, test_patient_id, strategy, k, seed, cfg).map_err(wrap)?;
    let patient = ctx.corpus.get(test_patient_id).expect("checked by build_fold");
    let (n, d) = fold.x.shape();
    let n_components = if fold.unaugmented {
        let (lo, hi) = cfg.component_range;
        select_components(&fold.x, &fold.y, lo..=hi)
            .map_err(|e| wrap(e.into()))?
            .chosen
    } else {
        cfg.fixed_components.min(d).min(n.saturating_sub(1))
    };
    let model = pls_fit(&fold.x, &fold.y, n_components).map_err(|e| wrap(e.into()))?;
    let raw = ctx
        .vector(&patient.oral_text, || format!("{test_patient_id} (oral)"))
        .map_err(wrap)?;
    let z = fold.standardizer.apply(raw).map_err(|e| wrap(e.into()))?;
    let y_pred = model.predict(&z).map_err(|e| wrap(e.into()))?;
    let result = FoldResult {
        test_patient_id: test_patient_id.to_string(),
        y_true: patient.hds_score,
        y_pred,
        n_components: model.n_components,
        training_manifest: fold.ids,
        config_fingerprint: fingerprint.to_string(),
    };
    Ok((result, fold.selection))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvRun {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub selections: Vec<AugmentationSelection>,
}

impl LoocvRun {
    pub fn y_true(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.y_true as f64).collect()
    }

    pub fn y_pred(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.y_pred).collect()
    }
}

/// Short hash of the run settings. Every strategy at k=0 trains on the
/// originals alone, so those runs share the baseline fingerprint.
pub fn run_fingerprint(strategy: Strategy, k: usize, seed: u64, cfg: &RegressionConfig) -> String {
    let (strategy, seed) = match (strategy, k) {
        (Strategy::None, _) | (_, 0) => (Strategy::None, 0),
        (Strategy::Similarity, _) => (strategy, 0),
        _ => (strategy, seed),
    };
    let json = serde_json::json!({"strategy": strategy, "k": k, "seed": seed, "regression": cfg});
    crate::hashing::sha256_hex(json.to_string().as_bytes())[..16].to_string()
}

/// One fold per patient, in corpus order. Folds run in parallel on the
/// current rayon pool; a failing fold aborts the run.
pub fn run_loocv(
    ctx: &EvalContext<'_>,
    strategy: Strategy,
    k: usize,
    seed: u64,
    cfg: &RegressionConfig,
) -> Result<LoocvRun, EvaluationError> {
    let fingerprint = run_fingerprint(strategy, k, seed, cfg);
    let outcomes: Vec<(FoldResult, AugmentationSelection)> = ctx
        .corpus
        .records
        .par_iter()
        .map(|r| run_fold(ctx, &r.patient_id, strategy, k, seed, cfg, &fingerprint))
        .collect::<Result<_, _>>()?;
    let (folds, selections) = outcomes.into_iter().unzip();
    Ok(LoocvRun {
        strategy,
        k,
        seed,
        folds,
        selections,
    })
}
