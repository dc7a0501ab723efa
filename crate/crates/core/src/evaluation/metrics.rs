use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{EvaluationError, FoldResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the true values have zero variance.
    pub r2: Option<f64>,
}

/// MAE, RMSE and R² over pooled predictions; R² uses the total sum of
/// squares about the mean of `y_true`.
pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricSet, EvaluationError> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(EvaluationError::Metrics(format!(
            "need equal non-zero lengths, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let n = y_true.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        abs += e.abs();
        sq += e * e;
    }
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if ss_tot > 0.0 { Some(1.0 - sq / ss_tot) } else { None };
    Ok(MetricSet {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        r2,
    })
}

/// Score band used to split metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreStrata {
    pub low: RangeInclusive<i32>,
    pub high: RangeInclusive<i32>,
}

impl ScoreStrata {
    /// Strata for stratified MAE: 22–27 vs 28–30.
    pub fn metrics_default() -> Self {
        Self { low: 22..=27, high: 28..=30 }
    }

    /// Strata for the style analysis: 22–25 vs 26–30.
    pub fn styles_default() -> Self {
        Self { low: 22..=25, high: 26..=30 }
    }

    pub fn group_of(&self, score: i32) -> Option<&'static str> {
        if self.low.contains(&score) {
            Some("low")
        } else if self.high.contains(&score) {
            Some("high")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratifiedMae {
    /// `None` when no fold falls in the stratum.
    pub low: Option<f64>,
    pub high: Option<f64>,
}

pub fn stratified_mae(results: &[FoldResult], strata: &ScoreStrata) -> Result<StratifiedMae, EvaluationError> {
    if results.is_empty() {
        return Err(EvaluationError::Metrics("no fold results".into()));
    }
    let mae_in = |range: &RangeInclusive<i32>| {
        let errs: Vec<f64> = results
            .iter()
            .filter(|r| range.contains(&r.y_true))
            .map(|r| (r.y_true as f64 - r.y_pred).abs())
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    };
    Ok(StratifiedMae {
        low: mae_in(&strata.low),
        high: mae_in(&strata.high),
    })
}

/// Mean, sample standard deviation and normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub sd: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Interval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Mean computed as x₀ + Σ(xᵢ − x₀)/n so identical inputs return x₀ exactly.
pub fn stable_mean(values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    Some(first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64)
}

pub fn confidence_interval(values: &[f64]) -> Option<Interval> {
    let mean = stable_mean(values)?;
    let n = values.len();
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Interval {
        mean,
        sd,
        half_width: 1.96 * sd / (n as f64).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fold(y_true: i32, y_pred: f64) -> FoldResult {
        FoldResult {
            test_patient_id: format!("P{y_true}"),
            y_true,
            y_pred,
            n_components: 1,
            training_manifest: vec![],
            config_fingerprint: String::new(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let m = metrics(&[22.0, 25.0, 30.0], &[22.0, 25.0, 30.0]).unwrap();
        assert_eq!(m, MetricSet { mae: 0.0, rmse: 0.0, r2: Some(1.0) });
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let m = metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(m.r2.unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_truth_flags_r2() {
        let m = metrics(&[29.0, 29.0], &[28.0, 30.0]).unwrap();
        assert_eq!(m.r2, None);
        assert_eq!(m.mae, 1.0);
    }

    #[test]
    fn length_errors() {
        assert!(metrics(&[], &[]).is_err());
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn stratified_groups() {
        let perfect = [fold(23, 23.0), fold(29, 29.0)];
        let s = stratified_mae(&perfect, &ScoreStrata::metrics_default()).unwrap();
        assert_eq!((s.low, s.high), (Some(0.0), Some(0.0)));

        let high_only = [fold(28, 27.0), fold(30, 29.0)];
        let s = stratified_mae(&high_only, &ScoreStrata::metrics_default()).unwrap();
        assert_eq!(s.low, None);
        assert_eq!(s.high, Some(1.0));

        let mixed = [fold(27, 25.0), fold(22, 23.0), fold(30, 30.5)];
        let s = stratified_mae(&mixed, &ScoreStrata::metrics_default()).unwrap();
        assert_eq!(s.low, Some(1.5));
        assert_eq!(s.high, Some(0.5));
        assert!(stratified_mae(&[], &ScoreStrata::metrics_default()).is_err());
    }

    #[test]
    fn interval_half_width() {
        let vals: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let ci = confidence_interval(&vals).unwrap();
        let sd = (vals.iter().map(|v| (v - 14.5f64).powi(2)).sum::<f64>() / 29.0).sqrt();
        assert!((ci.mean - 14.5).abs() < 1e-12);
        assert!((ci.half_width - 1.96 * sd / 30f64.sqrt()).abs() < 1e-12);
        assert_eq!(confidence_interval(&[2.5; 30]).unwrap().mean, 2.5);
        assert_eq!(confidence_interval(&[2.5; 30]).unwrap().half_width, 0.0);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50)) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = metrics(&t, &p).unwrap();
            prop_assert!(m.rmse + 1e-12 >= m.mae);
            prop_assert!(m.mae >= 0.0);
            if let Some(r2) = m.r2 { prop_assert!(r2 <= 1.0 + 1e-12); }
        }
    }
}
