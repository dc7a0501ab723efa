//! Leave-one-patient-out evaluation, augmentation sweeps and report files.

mod loocv;
mod metrics;
mod report;
mod sweep;

use thiserror::Error;

use crate::augmentation::AugmentationError;
use crate::corpus::Corpus;
use crate::embedding::{EmbeddingError, EmbeddingProvider, EmbeddingTable};
use crate::generation::SyntheticPool;
use crate::regression::RegressionError;

pub use loocv::{
    build_fold, run_fingerprint, run_fold, run_loocv, EvalContext, FoldResult, FoldTrainingSet, LoocvRun,
    RegressionConfig, SampleId,
};
pub use metrics::{
    confidence_interval, metrics, stable_mean, stratified_mae, Interval, MetricSet, ScoreStrata, StratifiedMae,
};
pub use report::{export_report, reference_values, sweep_csv, ReportPaths, REFERENCE_NOTE};
pub use sweep::{
    style_distribution, sweep, sweep_fingerprint, GridPoint, MetricIntervals, ScatterPoint, SeedRun, SelectionAudit,
    StyleCounts, SweepConfig, SweepReport,
};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Augmentation(#[from] AugmentationError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("selected sample {0} is not in the pool")]
    MissingSample(String),
    #[error("no embedding for {0}")]
    MissingEmbedding(String),
    #[error("unknown patient {0}")]
    UnknownPatient(String),
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("fold {patient_id}: {source}")]
    Fold {
        patient_id: String,
        #[source]
        source: Box<EvaluationError>,
    },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Embeds every oral transcription and every synthetic sample: the full
/// set of texts a sweep looks up.
pub fn embed_inputs(
    corpus: &Corpus,
    pool: &SyntheticPool,
    provider: &dyn EmbeddingProvider,
    jobs: usize,
) -> Result<EmbeddingTable, EmbeddingError> {
    let texts = corpus
        .records
        .iter()
        .map(|r| r.oral_text.as_str())
        .chain(pool.samples.iter().map(|s| s.text.as_str()));
    EmbeddingTable::build(texts, provider, jobs)
}
