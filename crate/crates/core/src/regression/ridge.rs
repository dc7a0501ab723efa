use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::RegressionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    /// d × k principal axes, descending variance.
    pub components: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Sample variance along each axis.
    pub explained_variance: Vec<f64>,
}

/// Linear model ŷ = intercept + x·coefficients, optionally fitted on PCA
/// scores and composed back to input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub pca_basis: Option<PcaBasis>,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressionError> {
        if x.len() != self.coefficients.len() {
            return Err(RegressionError::DimMismatch {
                expected: self.coefficients.len(),
                got: x.len(),
            });
        }
        Ok(self.intercept + x.iter().zip(self.coefficients.iter()).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, RegressionError> {
        if x.ncols() != self.coefficients.len() {
            return Err(RegressionError::DimMismatch {
                expected: self.coefficients.len(),
                got: x.ncols(),
            });
        }
        Ok((x * &self.coefficients).add_scalar(self.intercept))
    }
}

fn center(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (xc, mean)
}

/// Top `k` principal axes of centered `x`. Each axis is oriented so its
/// largest-magnitude coordinate is positive.
pub fn pca(x: &DMatrix<f64>, k: usize) -> Result<PcaBasis, RegressionError> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(RegressionError::TooFewRows(n));
    }
    let max = d.min(n - 1);
    if k == 0 || k > max {
        return Err(RegressionError::InvalidComponents { requested: k, max });
    }
    let (xc, mean) = center(x);
    let svd = SVD::try_new(xc, false, true, f64::EPSILON, 0).ok_or(RegressionError::Decomposition)?;
    let v_t = svd.v_t.ok_or(RegressionError::Decomposition)?;
    let mut components = DMatrix::zeros(d, k);
    let mut explained_variance = Vec::with_capacity(k);
    for i in 0..k {
        let mut axis = v_t.row(i).transpose();
        let lead = axis.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            axis.neg_mut();
        }
        components.set_column(i, &axis);
        explained_variance.push(svd.singular_values[i].powi(2) / (n as f64 - 1.0));
    }
    Ok(PcaBasis {
        components,
        mean,
        explained_variance,
    })
}

/// Ridge on centered data: solves (XᵀX + λI)β = Xᵀy.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<RidgeModel, RegressionError> {
    if x.nrows() != y.len() {
        return Err(RegressionError::ShapeMismatch(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RegressionError::InvalidLambda(lambda));
    }
    let (xc, mean) = center(x);
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    let beta = solve_ridge(&xc, &yc, lambda)?;
    Ok(RidgeModel {
        intercept: y_mean - mean.dot(&beta),
        coefficients: beta,
        lambda,
        pca_basis: None,
    })
}

fn solve_ridge(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>, RegressionError> {
    let k = z.ncols();
    let mut gram = z.tr_mul(z);
    for i in 0..k {
        gram[(i, i)] += lambda;
    }
    let rhs = z.tr_mul(y);
    if let Some(ch) = gram.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    gram.lu().solve(&rhs).ok_or(RegressionError::Singular)
}

/// PCA to `n_pcs` scores, ridge on the scores, then composition back to
/// input-space coefficients and intercept.
pub fn pca_ridge_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    n_pcs: usize,
    lambda: f64,
) -> Result<RidgeModel, RegressionError> {
    if x.nrows() != y.len() {
        return Err(RegressionError::ShapeMismatch(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RegressionError::InvalidLambda(lambda));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite);
    }
    let basis = pca(x, n_pcs)?;
    let (xc, _) = center(x);
    let scores = &xc * &basis.components;
    let y_mean = y.mean();
    let c = solve_ridge(&scores, &y.add_scalar(-y_mean), lambda)?;
    let coefficients = &basis.components * c;
    Ok(RidgeModel {
        intercept: y_mean - basis.mean.dot(&coefficients),
        coefficients,
        lambda,
        pca_basis: Some(basis),
    })
}
