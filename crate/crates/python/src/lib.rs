//! Python bindings: corpus and pool handling, prompt rendering, embedders,
//! standardization, PLS and PCA+ridge regression, metrics and the LOOCV sweep.

use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;

use cogaug::augmentation::{self, Strategy};
use cogaug::corpus::{self, ClassHistogram};
use cogaug::embedding::{self, EmbeddingProvider, HashingEmbedder, MockEmbedder};
use cogaug::evaluation::{self, EvalContext, ReportPaths, SweepConfig};
use cogaug::generation::{self, GenerationOptions, MockProvider, Style, Validation};
use cogaug::regression;
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(PyValueError::new_err("x must be a non-empty list of non-empty rows"));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows of x differ in length"));
    }
    Ok(DMatrix::from_row_iterator(n, d, rows.iter().flatten().copied()))
}

fn provider(name: &str, seed: u64, dim: usize) -> PyResult<Box<dyn EmbeddingProvider>> {
    match name {
        "mock" => Ok(Box::new(MockEmbedder::new(seed, dim))),
        "ngram" => Ok(Box::new(HashingEmbedder::new(dim))),
        other => Err(PyValueError::new_err(format!("unknown embedder {other:?} (expected mock|ngram)"))),
    }
}

/// Patient records with their shared picture-description prompt.
#[pyclass(name = "Corpus", frozen)]
struct PyCorpus(corpus::Corpus);

#[pymethods]
impl PyCorpus {
    /// The built-in 30-patient fixture.
    #[staticmethod]
    fn fixture() -> Self {
        PyCorpus(corpus::Corpus::fixture())
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        corpus::load_corpus(path).map(PyCorpus).map_err(value_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        corpus::save_corpus(&self.0, path).map_err(runtime_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn prompt_text(&self) -> &str {
        &self.0.prompt_text
    }

    fn patient_ids(&self) -> Vec<String> {
        self.0.records.iter().map(|r| r.patient_id.clone()).collect()
    }

    fn scores(&self) -> Vec<i32> {
        self.0.records.iter().map(|r| r.hds_score).collect()
    }

    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0.records)
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &corpus::summarize(&self.0))
    }

    fn to_jsonl(&self) -> String {
        corpus::to_jsonl(&self.0)
    }
}

/// Synthetic oral samples, seven styles per patient.
#[pyclass(name = "Pool", frozen)]
struct PyPool(generation::SyntheticPool);

#[pymethods]
impl PyPool {
    /// Generates a complete pool with the offline mock provider.
    #[staticmethod]
    #[pyo3(signature = (corpus, jobs = 1))]
    fn generate_mock(corpus: &PyCorpus, jobs: usize) -> PyResult<Self> {
        let opts = GenerationOptions {
            jobs: jobs.max(1),
            ..GenerationOptions::default()
        };
        generation::generate_pool(&corpus.0, &MockProvider, None, &opts)
            .map(PyPool)
            .map_err(runtime_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        generation::load_pool(path).map(PyPool).map_err(value_err)
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        generation::parse_pool(text).map(PyPool).map_err(value_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        generation::save_pool(&self.0, path).map_err(runtime_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn samples<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0.samples)
    }

    fn style_table<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0.style_table())
    }

    fn to_jsonl(&self) -> String {
        generation::pool_to_jsonl(&self.0)
    }
}

/// Per-dimension z-scoring fitted on training rows.
#[pyclass(name = "Standardizer", frozen)]
struct PyStandardizer(embedding::Standardizer);

#[pymethods]
impl PyStandardizer {
    #[staticmethod]
    fn fit(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        embedding::Standardizer::fit(&rows).map(PyStandardizer).map_err(value_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.apply(&row).map_err(value_err)
    }

    fn invert(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.invert(&row).map_err(value_err)
    }
}

/// Single-response PLS model (NIPALS).
#[pyclass(name = "PlsModel", frozen)]
struct PyPlsModel(regression::PlsModel);

#[pymethods]
impl PyPlsModel {
    #[staticmethod]
    fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, n_components: usize) -> PyResult<Self> {
        regression::pls_fit(&matrix(&x)?, &DVector::from_vec(y), n_components)
            .map(PyPlsModel)
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        regression::PlsModel::from_json(text).map(PyPlsModel).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.0.n_components
    }

    #[getter]
    fn stopped_early(&self) -> bool {
        self.0.stopped_early
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.coefficients.iter().copied().collect()
    }

    #[getter]
    fn intercept_mean(&self) -> f64 {
        self.0.y_mean
    }

    fn scores(&self) -> Vec<Vec<f64>> {
        self.0.scores.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn predict(&self, row: Vec<f64>) -> PyResult<f64> {
        self.0.predict(&row).map_err(value_err)
    }

    fn predict_rows(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let y = self.0.predict_rows(&matrix(&x)?).map_err(value_err)?;
        Ok(y.iter().copied().collect())
    }

    fn truncated(&self, m: usize) -> PyResult<Self> {
        self.0.truncated(m).map(PyPlsModel).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("PlsModel(n_components={}, dim={})", self.0.n_components, self.0.dim())
    }
}

/// Returns `(system, user)` messages for one generation request.
#[pyfunction]
fn render_prompt(written_text: &str, hds_score: i32, style: &str) -> PyResult<(String, String)> {
    let style = Style::from_str(style).map_err(value_err)?;
    let p = generation::render_prompt(written_text, hds_score, style).map_err(value_err)?;
    Ok((p.system, p.user))
}

/// Style names in generation order.
#[pyfunction]
fn styles() -> Vec<&'static str> {
    Style::ALL.iter().map(|s| s.name()).collect()
}

/// `(band, description)` for an HDS-R score in 22..=30.
#[pyfunction]
fn fluency_band(hds_score: i32) -> PyResult<(String, &'static str)> {
    let band = generation::fluency_band(hds_score).map_err(value_err)?;
    let name = serde_json::to_value(band).map_err(runtime_err)?;
    Ok((name.as_str().unwrap_or_default().to_string(), band.description()))
}

/// `"accept"` or the rejection reason.
#[pyfunction]
fn validate_output(text: &str) -> String {
    match generation::validate_output(text) {
        Validation::Accept => "accept".to_string(),
        Validation::Reject(r) => r.to_string(),
    }
}

#[pyfunction]
#[pyo3(signature = (text, embedder = "mock", seed = 7, dim = 768))]
fn embed(text: &str, embedder: &str, seed: u64, dim: usize) -> PyResult<Vec<f64>> {
    let p = provider(embedder, seed, dim)?;
    embedding::embed(text, p.as_ref()).map(|v| v.into_values()).map_err(value_err)
}

#[pyfunction]
fn cosine_similarity(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    augmentation::cosine_similarity(&a, &b).map_err(value_err)
}

/// Per-class shortfall `max(0, target - count)`.
#[pyfunction]
#[pyo3(signature = (scores, target = augmentation::DEFAULT_TARGET))]
fn compute_deficits(scores: Vec<i32>, target: usize) -> BTreeMap<i32, usize> {
    augmentation::compute_deficits(&ClassHistogram::from_scores(scores), target).needed
}

/// Similarity-guided selection of synthetic sample keys for a training set
/// that excludes `excluded` patients.
#[pyfunction]
#[pyo3(signature = (corpus, pool, k, excluded = Vec::new(), target = augmentation::DEFAULT_TARGET, embedder = "mock", seed = 7, dim = 768))]
#[allow(clippy::too_many_arguments)]
fn select_similarity(
    corpus: &PyCorpus,
    pool: &PyPool,
    k: usize,
    excluded: Vec<String>,
    target: usize,
    embedder: &str,
    seed: u64,
    dim: usize,
) -> PyResult<Vec<(String, String)>> {
    let p = provider(embedder, seed, dim)?;
    let table = evaluation::embed_inputs(&corpus.0, &pool.0, p.as_ref(), 1).map_err(runtime_err)?;
    let excluded: HashSet<String> = excluded.into_iter().collect();
    let train = corpus
        .0
        .records
        .iter()
        .filter(|r| !excluded.contains(&r.patient_id))
        .map(|r| r.hds_score);
    let deficits = augmentation::compute_deficits(&ClassHistogram::from_scores(train), target);
    let sel = augmentation::select_similarity(&pool.0, &corpus.0, &table, &deficits, k, &excluded)
        .map_err(value_err)?;
    Ok(sel
        .chosen
        .iter()
        .map(|s| (s.patient_id.clone(), s.style_name.name().to_string()))
        .collect())
}

/// Chooses the PLS component count by inner leave-one-out.
/// Returns `(chosen, {count: mse})`.
#[pyfunction]
#[pyo3(signature = (x, y, lo = 1, hi = 15))]
fn select_components(x: Vec<Vec<f64>>, y: Vec<f64>, lo: usize, hi: usize) -> PyResult<(usize, BTreeMap<usize, f64>)> {
    let sel = regression::select_components(&matrix(&x)?, &DVector::from_vec(y), lo..=hi).map_err(value_err)?;
    Ok((sel.chosen, sel.inner_scores))
}

/// PCA + ridge fit; returns `(coefficients, intercept)` in input space.
#[pyfunction]
#[pyo3(signature = (x, y, n_pcs, ridge_lambda = 1.0))]
fn pca_ridge_fit(x: Vec<Vec<f64>>, y: Vec<f64>, n_pcs: usize, ridge_lambda: f64) -> PyResult<(Vec<f64>, f64)> {
    let m = regression::pca_ridge_fit(&matrix(&x)?, &DVector::from_vec(y), n_pcs, ridge_lambda).map_err(value_err)?;
    Ok((m.coefficients.iter().copied().collect(), m.intercept))
}

/// `{"mae", "rmse", "r2"}`; `r2` is None when `y_true` is constant.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, y_true: Vec<f64>, y_pred: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let m = evaluation::metrics(&y_true, &y_pred).map_err(value_err)?;
    json_to_py(py, &m)
}

/// Normal-approximation 95% interval over seed-level values.
#[pyfunction]
fn confidence_interval(values: Vec<f64>) -> Option<(f64, f64, f64)> {
    evaluation::confidence_interval(&values).map(|i| (i.mean, i.lower(), i.upper()))
}

/// Runs the leave-one-patient-out sweep and returns the report as a dict.
/// With `out_dir` the report files are written there as well.
#[pyfunction]
#[pyo3(signature = (
    corpus, pool, strategies = vec!["none".to_string(), "noise".to_string(), "random".to_string(), "similarity".to_string()],
    k_values = (0..=7).collect(), n_seeds = 30, embedder = "mock", seed = 7, dim = 768, out_dir = None
))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    pool: &PyPool,
    strategies: Vec<String>,
    k_values: Vec<usize>,
    n_seeds: u64,
    embedder: &str,
    seed: u64,
    dim: usize,
    out_dir: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let strategies = strategies
        .iter()
        .map(|s| Strategy::from_str(s).map_err(value_err))
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = SweepConfig {
        strategies,
        k_values,
        seeds: (0..n_seeds).collect(),
        ..SweepConfig::default()
    };
    let p = provider(embedder, seed, dim)?;
    let (corpus, pool) = (&corpus.0, &pool.0);
    let report = py
        .detach(|| {
            let table = evaluation::embed_inputs(corpus, pool, p.as_ref(), 1)?;
            let ctx = EvalContext::new(corpus, pool, &table);
            let report = evaluation::sweep(&ctx, &cfg, p.id())?;
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir)?;
                evaluation::export_report(&report, &ReportPaths::in_dir(dir))?;
            }
            Ok::<_, evaluation::EvaluationError>(report)
        })
        .map_err(runtime_err)?;
    json_to_py(py, &report)
}

#[pymodule]
fn cogaug_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyPool>()?;
    m.add_class::<PyStandardizer>()?;
    m.add_class::<PyPlsModel>()?;
    m.add_function(wrap_pyfunction!(render_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(styles, m)?)?;
    m.add_function(wrap_pyfunction!(fluency_band, m)?)?;
    m.add_function(wrap_pyfunction!(validate_output, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(compute_deficits, m)?)?;
    m.add_function(wrap_pyfunction!(select_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(select_components, m)?)?;
    m.add_function(wrap_pyfunction!(pca_ridge_fit, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
