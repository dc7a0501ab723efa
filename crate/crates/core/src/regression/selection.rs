use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{pls_fit, RegressionError};
use crate::embedding::Standardizer;

/// Scores within this band of the minimum count as ties.
const TIE_ABS: f64 = 1e-12;
const TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSelection {
    pub chosen: usize,
    /// Feasible range actually searched.
    pub candidate_range: (usize, usize),
    /// Inner leave-one-out mean squared error per component count.
    pub inner_scores: BTreeMap<usize, f64>,
}

fn standardize_fold(train: &DMatrix<f64>, test: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>), RegressionError> {
    let rows: Vec<Vec<f64>> = train.row_iter().map(|r| r.iter().copied().collect()).collect();
    let s = Standardizer::fit(&rows).map_err(|e| RegressionError::ShapeMismatch(e.to_string()))?;
    let z: Vec<f64> = rows
        .iter()
        .flat_map(|r| s.apply(r).expect("dims checked by fit"))
        .collect();
    let z = DMatrix::from_row_slice(train.nrows(), train.ncols(), &z);
    let test = s.apply(test).map_err(|e| RegressionError::ShapeMismatch(e.to_string()))?;
    Ok((z, test))
}

/// Chooses the PLS component count by leave-one-out over the rows of
/// `x`. Each inner fold is standardized with statistics from its own
/// training rows. The searched range is clipped to `[1, min(d, n-2)]`; the
/// smallest count within tolerance of the minimum error wins.
pub fn select_components(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    range: RangeInclusive<usize>,
) -> Result<ComponentSelection, RegressionError> {
    let (n, d) = x.shape();
    if n != y.len() {
        return Err(RegressionError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    let lo = (*range.start()).max(1);
    let hi = (*range.end()).min(d).min(n.saturating_sub(2));
    if lo > hi {
        return Err(RegressionError::EmptyRange {
            start: *range.start(),
            end: *range.end(),
        });
    }

    let mut sse = vec![0.0; hi - lo + 1];
    for held in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let train = x.select_rows(&keep);
        let ty = y.select_rows(&keep);
        let test: Vec<f64> = x.row(held).iter().copied().collect();
        let (train, test) = standardize_fold(&train, &test)?;
        let full = pls_fit(&train, &ty, hi)?;
        for a in lo..=hi {
            let m = full.truncated(a.min(full.n_components))?;
            let e = m.predict(&test)? - y[held];
            sse[a - lo] += e * e;
        }
    }

    let inner_scores: BTreeMap<usize, f64> = (lo..=hi).zip(sse.iter().map(|s| s / n as f64)).collect();
    let best = inner_scores.values().copied().fold(f64::INFINITY, f64::min);
    let chosen = inner_scores
        .iter()
        .find(|(_, &s)| s <= best + TIE_ABS + TIE_REL * best)
        .map(|(&a, _)| a)
        .expect("non-empty range");
    Ok(ComponentSelection {
        chosen,
        candidate_range: (lo, hi),
        inner_scores,
    })
}
