use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RegressionError;

/// File format version written by [`PlsModel::to_json`].
pub const PLS_MODEL_VERSION: u32 = 1;

/// Relative threshold on ‖Xᵀy‖ below which extraction stops.
const DEGENERATE_TOL: f64 = 1e-12;

/// Single-response PLS model fitted by NIPALS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsModel {
    pub version: u32,
    /// Components actually extracted (may be below `requested_components`).
    pub n_components: usize,
    pub requested_components: usize,
    pub stopped_early: bool,
    /// d × A, unit-norm columns.
    pub weights: DMatrix<f64>,
    /// d × A.
    pub x_loadings: DMatrix<f64>,
    pub y_loadings: DVector<f64>,
    /// n × A training scores.
    pub scores: DMatrix<f64>,
    pub coefficients: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), RegressionError> {
    if x.nrows() != y.len() {
        return Err(RegressionError::ShapeMismatch(format!(
            "X has {} rows, y has {} values",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 2 {
        return Err(RegressionError::TooFewRows(x.nrows()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite);
    }
    Ok(())
}

/// β = W (PᵀW)⁻¹ q over the first `m` components.
fn assemble_coefficients(
    weights: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    y_loadings: &DVector<f64>,
    m: usize,
) -> Result<DVector<f64>, RegressionError> {
    let d = weights.nrows();
    if m == 0 {
        return Ok(DVector::zeros(d));
    }
    let w = weights.columns(0, m);
    let p = loadings.columns(0, m);
    let ptw = p.transpose() * w;
    let q = y_loadings.rows(0, m).into_owned();
    let z = ptw.lu().solve(&q).ok_or(RegressionError::Singular)?;
    let beta = w * z;
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::Singular);
    }
    Ok(beta)
}

/// Fits PLS1 with up to `n_components` components.
///
/// X and y are centered; each component takes w ∝ Xᵀy, t = Xw,
/// p = Xᵀt/tᵀt, q = yᵀt/tᵀt and deflates X ← X − tpᵀ, y ← y − qt.
/// Extraction stops early when ‖Xᵀy‖ collapses.
pub fn pls_fit(x: &DMatrix<f64>, y: &DVector<f64>, n_components: usize) -> Result<PlsModel, RegressionError> {
    check_inputs(x, y)?;
    let (n, d) = x.shape();
    let max = d.min(n - 1);
    if n_components == 0 || n_components > max {
        return Err(RegressionError::InvalidComponents {
            requested: n_components,
            max,
        });
    }

    let x_mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
    let y_mean = y.mean();
    let mut xr = x.clone();
    for (j, mut col) in xr.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let mut yr = y.add_scalar(-y_mean);

    let mut weights = DMatrix::zeros(d, n_components);
    let mut loadings = DMatrix::zeros(d, n_components);
    let mut y_loadings = DVector::zeros(n_components);
    let mut scores = DMatrix::zeros(n, n_components);
    let mut extracted = 0;
    let mut initial_norm = None;

    for a in 0..n_components {
        let mut w = xr.tr_mul(&yr);
        let norm = w.norm();
        let reference = *initial_norm.get_or_insert(norm);
        if norm < DEGENERATE_TOL * reference.max(1.0) {
            break;
        }
        w /= norm;
        let t = &xr * &w;
        let tt = t.norm_squared();
        if tt <= f64::MIN_POSITIVE {
            break;
        }
        let p = xr.tr_mul(&t) / tt;
        let q = yr.dot(&t) / tt;
        xr.ger(-1.0, &t, &p, 1.0);
        yr.axpy(-q, &t, 1.0);

        weights.set_column(a, &w);
        loadings.set_column(a, &p);
        y_loadings[a] = q;
        scores.set_column(a, &t);
        extracted += 1;
    }

    if extracted == 0 {
        return Err(RegressionError::Degenerate);
    }
    let stopped_early = extracted < n_components;
    if stopped_early {
        log::debug!("PLS stopped after {extracted} of {n_components} components");
        weights = weights.columns(0, extracted).into_owned();
        loadings = loadings.columns(0, extracted).into_owned();
        y_loadings = y_loadings.rows(0, extracted).into_owned();
        scores = scores.columns(0, extracted).into_owned();
    }
    let coefficients = assemble_coefficients(&weights, &loadings, &y_loadings, extracted)?;
    Ok(PlsModel {
        version: PLS_MODEL_VERSION,
        n_components: extracted,
        requested_components: n_components,
        stopped_early,
        weights,
        x_loadings: loadings,
        y_loadings,
        scores,
        coefficients,
        x_mean,
        y_mean,
    })
}

impl PlsModel {
    pub fn dim(&self) -> usize {
        self.x_mean.len()
    }

    /// ŷ = ȳ + (x − x̄)·β
    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressionError> {
        if x.len() != self.dim() {
            return Err(RegressionError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.y_mean
            + x.iter()
                .zip(self.x_mean.iter().zip(self.coefficients.iter()))
                .map(|(v, (m, b))| (v - m) * b)
                .sum::<f64>())
    }

    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, RegressionError> {
        if x.ncols() != self.dim() {
            return Err(RegressionError::DimMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let centered_dot = x * &self.coefficients;
        let offset = self.y_mean - self.x_mean.dot(&self.coefficients);
        Ok(centered_dot.add_scalar(offset))
    }

    /// The model restricted to its first `m` components. NIPALS components
    /// do not depend on how many follow, so this equals a fresh fit with
    /// `m` components.
    pub fn truncated(&self, m: usize) -> Result<PlsModel, RegressionError> {
        if m == 0 || m > self.n_components {
            return Err(RegressionError::InvalidComponents {
                requested: m,
                max: self.n_components,
            });
        }
        let weights = self.weights.columns(0, m).into_owned();
        let x_loadings = self.x_loadings.columns(0, m).into_owned();
        let y_loadings = self.y_loadings.rows(0, m).into_owned();
        let coefficients = assemble_coefficients(&weights, &x_loadings, &y_loadings, m)?;
        Ok(PlsModel {
            version: self.version,
            n_components: m,
            requested_components: m,
            stopped_early: false,
            weights,
            x_loadings,
            y_loadings,
            scores: self.scores.columns(0, m).into_owned(),
            coefficients,
            x_mean: self.x_mean.clone(),
            y_mean: self.y_mean,
        })
    }

    /// Largest |t_aᵀt_b| / (‖t_a‖‖t_b‖) over a ≠ b.
    pub fn max_score_correlation(&self) -> f64 {
        let a = self.scores.ncols();
        let mut worst: f64 = 0.0;
        for i in 0..a {
            for j in (i + 1)..a {
                let ti = self.scores.column(i);
                let tj = self.scores.column(j);
                let denom = ti.norm() * tj.norm();
                if denom > 0.0 {
                    worst = worst.max(ti.dot(&tj).abs() / denom);
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RegressionError> {
        let m: PlsModel = serde_json::from_str(s).map_err(|e| RegressionError::Format(e.to_string()))?;
        if m.version != PLS_MODEL_VERSION {
            return Err(RegressionError::Format(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

pub fn pls_predict(model: &PlsModel, x: &[f64]) -> Result<f64, RegressionError> {
    model.predict(x)
}
