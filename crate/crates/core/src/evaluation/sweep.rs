use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loocv::{run_loocv, EvalContext, LoocvRun, RegressionConfig};
use super::metrics::{
    confidence_interval, metrics, stable_mean, stratified_mae, Interval, MetricSet, ScoreStrata, StratifiedMae,
};
use super::EvaluationError;
use crate::augmentation::{AugmentationSelection, Strategy};
use crate::corpus::{to_jsonl, Corpus};
use crate::generation::{pool_to_jsonl, Style, SyntheticPool};
use crate::hashing::sha256_hex_parts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub strategies: Vec<Strategy>,
    pub k_values: Vec<usize>,
    /// Seeds for the stochastic strategies (random, noise).
    pub seeds: Vec<u64>,
    pub regression: RegressionConfig,
    pub metric_strata: ScoreStrata,
    pub style_strata: ScoreStrata,
    /// Grid point whose similarity selections feed the style counts.
    pub style_k: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            k_values: (0..=7).collect(),
            seeds: (0..30).collect(),
            regression: RegressionConfig::default(),
            metric_strata: ScoreStrata::metrics_default(),
            style_strata: ScoreStrata::styles_default(),
            style_k: 5,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        let bad = |m: &str| Err(EvaluationError::Config(m.to_string()));
        if self.strategies.is_empty() {
            return bad("no strategies");
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k > 7) {
            return bad("k values must be non-empty and within 0..=7");
        }
        if self.seeds.is_empty() && self.strategies.iter().any(|s| is_seeded(*s)) {
            return bad("stochastic strategies need at least one seed");
        }
        let (lo, hi) = self.regression.component_range;
        if lo == 0 || lo > hi || self.regression.fixed_components == 0 {
            return bad("component settings must be positive with start <= end");
        }
        Ok(())
    }
}

fn is_seeded(s: Strategy) -> bool {
    matches!(s, Strategy::Random | Strategy::Noise)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub patient_id: String,
    pub y_true: i32,
    /// Mean prediction over seeds for stochastic strategies.
    pub y_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: Option<u64>,
    pub metrics: MetricSet,
    pub stratified: StratifiedMae,
    pub mean_components: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricIntervals {
    pub mae: Interval,
    pub rmse: Interval,
    pub r2: Option<Interval>,
    pub mae_low: Option<Interval>,
    pub mae_high: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub strategy: Strategy,
    pub k: usize,
    /// Single-run metrics, or seed means for stochastic strategies.
    pub metrics: MetricSet,
    pub stratified: StratifiedMae,
    pub ci: Option<MetricIntervals>,
    pub runs: Vec<SeedRun>,
    pub scatter: Vec<ScatterPoint>,
    pub mean_components: f64,
}

/// Chosen style counts per score group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleCounts {
    pub counts: BTreeMap<String, BTreeMap<Style, usize>>,
}

impl StyleCounts {
    pub fn get(&self, group: &str, style: Style) -> usize {
        self.counts.get(group).and_then(|m| m.get(&style)).copied().unwrap_or(0)
    }

    pub fn group_total(&self, group: &str) -> usize {
        self.counts.get(group).map_or(0, |m| m.values().sum())
    }
}

/// Chosen samples of one fold of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: Option<u64>,
    pub test_patient_id: String,
    pub chosen: Vec<String>,
    pub under_filled: BTreeMap<i32, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub fingerprint: String,
    pub embedding_id: String,
    pub n_patients: usize,
    pub config: SweepConfig,
    /// Ordered by (strategy, k) as configured.
    pub points: Vec<GridPoint>,
    pub style_counts: StyleCounts,
    #[serde(skip)]
    pub selections: Vec<SelectionAudit>,
}

impl SweepReport {
    pub fn point(&self, strategy: Strategy, k: usize) -> Option<&GridPoint> {
        self.points.iter().find(|p| p.strategy == strategy && p.k == k)
    }
}

/// Hash of everything that determines a sweep's output.
pub fn sweep_fingerprint(cfg: &SweepConfig, corpus: &Corpus, pool: &SyntheticPool, embedding_id: &str) -> String {
    let cfg_json = serde_json::to_string(cfg).expect("config serializes");
    sha256_hex_parts(&[
        cfg_json.as_bytes(),
        to_jsonl(corpus).as_bytes(),
        corpus.prompt_text.as_bytes(),
        pool_to_jsonl(pool).as_bytes(),
        embedding_id.as_bytes(),
    ])
}

/// Histogram of chosen styles per score group, over all given selections.
/// Both groups are always present, with every style listed.
pub fn style_distribution(selections: &[AugmentationSelection], strata: &ScoreStrata) -> StyleCounts {
    let mut counts: BTreeMap<String, BTreeMap<Style, usize>> = ["low", "high"]
        .iter()
        .map(|g| (g.to_string(), Style::ALL.iter().map(|&s| (s, 0)).collect()))
        .collect();
    for sel in selections {
        for key in &sel.chosen {
            if let Some(group) = strata.group_of(key.hds_score) {
                *counts.get_mut(group).unwrap().entry(key.style_name).or_default() += 1;
            }
        }
    }
    StyleCounts { counts }
}

fn mean_components(run: &LoocvRun) -> f64 {
    run.folds.iter().map(|f| f.n_components as f64).sum::<f64>() / run.folds.len() as f64
}

fn seed_run(run: &LoocvRun, seed: Option<u64>, strata: &ScoreStrata) -> Result<SeedRun, EvaluationError> {
    Ok(SeedRun {
        seed,
        metrics: metrics(&run.y_true(), &run.y_pred())?,
        stratified: stratified_mae(&run.folds, strata)?,
        mean_components: mean_components(run),
    })
}

fn optional_interval(values: Vec<Option<f64>>) -> Option<Interval> {
    let v: Option<Vec<f64>> = values.into_iter().collect();
    v.and_then(|v| confidence_interval(&v))
}

fn optional_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.and_then(|v| stable_mean(&v))
}

fn grid_point(
    strategy: Strategy,
    k: usize,
    runs: &[(Option<u64>, &LoocvRun)],
    strata: &ScoreStrata,
) -> Result<GridPoint, EvaluationError> {
    let seed_runs: Vec<SeedRun> = runs
        .iter()
        .map(|(seed, run)| seed_run(run, *seed, strata))
        .collect::<Result<_, _>>()?;
    let first = runs[0].1;
    let scatter = first
        .folds
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let preds: Vec<f64> = runs.iter().map(|(_, r)| r.folds[i].y_pred).collect();
            ScatterPoint {
                patient_id: f.test_patient_id.clone(),
                y_true: f.y_true,
                y_pred: stable_mean(&preds).expect("at least one run"),
            }
        })
        .collect();
    let mean_of = |f: &dyn Fn(&SeedRun) -> f64| stable_mean(&seed_runs.iter().map(f).collect::<Vec<_>>()).unwrap();
    let (metrics, stratified, ci) = if is_seeded(strategy) {
        let metrics = MetricSet {
            mae: mean_of(&|r| r.metrics.mae),
            rmse: mean_of(&|r| r.metrics.rmse),
            r2: optional_mean(seed_runs.iter().map(|r| r.metrics.r2)),
        };
        let stratified = StratifiedMae {
            low: optional_mean(seed_runs.iter().map(|r| r.stratified.low)),
            high: optional_mean(seed_runs.iter().map(|r| r.stratified.high)),
        };
        let values = |f: &dyn Fn(&SeedRun) -> f64| seed_runs.iter().map(f).collect::<Vec<_>>();
        let ci = MetricIntervals {
            mae: confidence_interval(&values(&|r| r.metrics.mae)).unwrap(),
            rmse: confidence_interval(&values(&|r| r.metrics.rmse)).unwrap(),
            r2: optional_interval(seed_runs.iter().map(|r| r.metrics.r2).collect()),
            mae_low: optional_interval(seed_runs.iter().map(|r| r.stratified.low).collect()),
            mae_high: optional_interval(seed_runs.iter().map(|r| r.stratified.high).collect()),
        };
        (metrics, stratified, Some(ci))
    } else {
        (seed_runs[0].metrics, seed_runs[0].stratified, None)
    };
    Ok(GridPoint {
        strategy,
        k,
        metrics,
        stratified,
        ci,
        mean_components: mean_of(&|r| r.mean_components),
        runs: seed_runs,
        scatter,
    })
}

/// Evaluates every (strategy, k) grid point. All k=0 points reuse the
/// single baseline run; stochastic strategies run once per seed and are
/// summarized by seed means and 95% intervals.
pub fn sweep(ctx: &EvalContext<'_>, cfg: &SweepConfig, embedding_id: &str) -> Result<SweepReport, EvaluationError> {
    cfg.validate()?;
    let mut tasks: Vec<(Strategy, usize, Option<u64>)> = Vec::new();
    if cfg.k_values.contains(&0) || cfg.strategies.contains(&Strategy::None) {
        tasks.push((Strategy::None, 0, None));
    }
    for &strategy in &cfg.strategies {
        for &k in cfg.k_values.iter().filter(|&&k| k > 0) {
            match strategy {
                Strategy::None => {}
                s if is_seeded(s) => tasks.extend(cfg.seeds.iter().map(|&seed| (s, k, Some(seed)))),
                s => tasks.push((s, k, None)),
            }
        }
    }
    tasks.sort();
    tasks.dedup();

    let runs: Vec<LoocvRun> = tasks
        .par_iter()
        .map(|&(s, k, seed)| run_loocv(ctx, s, k, seed.unwrap_or(0), &cfg.regression))
        .collect::<Result<_, _>>()?;
    let lookup: BTreeMap<(Strategy, usize, Option<u64>), &LoocvRun> =
        tasks.iter().copied().zip(runs.iter()).collect();

    let mut points = Vec::new();
    let mut selections = Vec::new();
    for &strategy in &cfg.strategies {
        for &k in &cfg.k_values {
            let seeds: Vec<Option<u64>> = if is_seeded(strategy) {
                cfg.seeds.iter().map(|&s| Some(s)).collect()
            } else {
                vec![None]
            };
            let point_runs: Vec<(Option<u64>, &LoocvRun)> = seeds
                .iter()
                .map(|&seed| {
                    let key = match (strategy, k) {
                        (Strategy::None, _) | (_, 0) => (Strategy::None, 0, None),
                        _ => (strategy, k, seed),
                    };
                    (seed, lookup[&key])
                })
                .collect();
            points.push(grid_point(strategy, k, &point_runs, &cfg.metric_strata)?);
            if k == 0 || strategy == Strategy::None {
                continue;
            }
            for (seed, run) in &point_runs {
                for (fold, sel) in run.folds.iter().zip(&run.selections) {
                    selections.push(SelectionAudit {
                        strategy,
                        k,
                        seed: *seed,
                        test_patient_id: fold.test_patient_id.clone(),
                        chosen: sel.chosen.iter().map(|c| c.to_string()).collect(),
                        under_filled: sel.under_filled.clone(),
                    });
                }
            }
        }
    }

    let style_selections: Vec<AugmentationSelection> = lookup
        .get(&(Strategy::Similarity, cfg.style_k, None))
        .map(|r| r.selections.clone())
        .unwrap_or_default();
    Ok(SweepReport {
        fingerprint: sweep_fingerprint(cfg, ctx.corpus, ctx.pool, embedding_id),
        embedding_id: embedding_id.to_string(),
        n_patients: ctx.corpus.len(),
        config: cfg.clone(),
        points,
        style_counts: style_distribution(&style_selections, &cfg.style_strata),
        selections,
    })
}
