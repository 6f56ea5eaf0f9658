//! Python bindings: detection, instability paths, depths, and the
//! simulation generators, using plain lists of lists for matrices.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spectral_mcd as core;
use spectral_mcd::{DataMatrix, FailurePolicy};

fn to_py_err(e: core::Error) -> PyErr {
    match &e {
        core::Error::InvalidData(_) | core::Error::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DataMatrix> {
    DataMatrix::from_rows(&rows).map_err(to_py_err)
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Result of a single (h, q) detection fit.
#[pyclass(frozen)]
struct DetectResult {
    /// 1 = outlier, per row of the input.
    #[pyo3(get)]
    labels: Vec<u8>,
    /// Sorted indices of the selected h-subset.
    #[pyo3(get)]
    subset: Vec<usize>,
    /// Location of the subset in score space.
    #[pyo3(get)]
    mu: Vec<f64>,
    /// Scatter of the subset in score space.
    #[pyo3(get)]
    sigma: Vec<Vec<f64>>,
    /// Column means removed before projection.
    #[pyo3(get)]
    center: Vec<f64>,
    /// p x q loading matrix.
    #[pyo3(get)]
    loadings: Vec<Vec<f64>>,
    #[pyo3(get)]
    singular_values: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
}

/// Run the full best-subset pipeline at a single (h, q).
#[pyfunction]
#[pyo3(signature = (x, h, q, k=None, seed=0))]
fn detect(x: Vec<Vec<f64>>, h: usize, q: usize, k: Option<usize>, seed: u64) -> PyResult<DetectResult> {
    let x = matrix_from_rows(x)?;
    let k = k.unwrap_or_else(|| core::default_k(q));
    let fit = core::spectral_mcd(&x, h, q, k, seed).map_err(to_py_err)?;
    Ok(DetectResult {
        labels: fit.labels.labels().to_vec(),
        subset: fit.subset.indices().to_vec(),
        mu: fit.estimate.mu.as_slice().to_vec(),
        sigma: matrix_to_rows(&fit.estimate.sigma),
        center: fit.model.mu.as_slice().to_vec(),
        loadings: matrix_to_rows(&fit.model.v_q),
        singular_values: fit.model.singular_values.clone(),
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// One cell of an instability path.
#[pyclass(frozen)]
struct PathCell {
    #[pyo3(get)]
    h: usize,
    #[pyo3(get)]
    q: usize,
    #[pyo3(get)]
    s_hat: f64,
    #[pyo3(get)]
    std_err: f64,
    #[pyo3(get)]
    pairs: usize,
}

/// Bootstrap instability grid search result.
#[pyclass(frozen)]
struct PathResult {
    #[pyo3(get)]
    cells: Vec<Py<PathCell>>,
    /// (h, q) with minimal instability.
    #[pyo3(get)]
    argmin: (usize, usize),
}

/// Estimate the instability surface over an (h, q) grid.
#[pyfunction]
#[pyo3(signature = (x, h_fractions, q_grid, pairs=50, k=None, seed=0, skip_failures=false))]
#[allow(clippy::too_many_arguments)]
fn instability_path(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    h_fractions: Vec<f64>,
    q_grid: Vec<usize>,
    pairs: usize,
    k: Option<usize>,
    seed: u64,
    skip_failures: bool,
) -> PyResult<PathResult> {
    let x = matrix_from_rows(x)?;
    let policy = if skip_failures { FailurePolicy::Skip } else { FailurePolicy::Abort };
    let path = core::grid_search(&x, &h_fractions, &q_grid, k, pairs, seed, policy)
        .map_err(to_py_err)?;
    let cells = path
        .cells
        .iter()
        .map(|c| {
            Py::new(
                py,
                PathCell {
                    h: c.h,
                    q: c.q,
                    s_hat: c.s_hat,
                    std_err: c.std_err,
                    pairs: c.distances.len(),
                },
            )
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(PathResult { cells, argmin: path.argmin })
}

/// Approximate projection depths of `query` rows against `reference` rows.
#[pyfunction]
#[pyo3(signature = (query, reference, k=1000, seed=0))]
fn projection_depths(
    query: Vec<Vec<f64>>,
    reference: Vec<Vec<f64>>,
    k: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let query = matrix_from_rows(query)?;
    let reference = matrix_from_rows(reference)?;
    let dirs = core::sample_directions(k, query.p(), seed);
    Ok(core::projection_depths(&query, &reference, &dirs)
        .map_err(to_py_err)?
        .values)
}

/// Depth-ranked baseline with one reweighting pass when feasible.
#[pyfunction]
#[pyo3(signature = (x, h, k=1000, seed=0))]
fn fdb(x: Vec<Vec<f64>>, h: usize, k: usize, seed: u64) -> PyResult<Vec<u8>> {
    let x = matrix_from_rows(x)?;
    Ok(core::fdb(&x, h, k, seed).map_err(to_py_err)?.labels.labels().to_vec())
}

/// Chi-square inverse CDF.
#[pyfunction]
fn chi2_quantile(prob: f64, df: usize) -> f64 {
    core::chi2_quantile(prob, df)
}

/// High-dimensional protocol dataset: (X, truth labels).
#[pyfunction]
#[pyo3(signature = (n, p, eps, l, seed=0))]
fn gen_highdim(n: usize, p: usize, eps: f64, l: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<u8>)> {
    let ds = core::gen_highdim(n, p, eps, l, seed).map_err(to_py_err)?;
    Ok((matrix_to_rows(ds.x.values()), ds.truth.labels().to_vec()))
}

/// Overdetermined protocol dataset: (X, truth labels).
#[pyfunction]
#[pyo3(signature = (n, p, eps, kind, r=5.0, seed=0))]
fn gen_overdetermined(
    n: usize,
    p: usize,
    eps: f64,
    kind: &str,
    r: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<u8>)> {
    let kind: core::OutlierKind = kind.parse().map_err(to_py_err)?;
    let ds = core::gen_overdetermined(n, p, eps, kind, r, seed).map_err(to_py_err)?;
    Ok((matrix_to_rows(ds.x.values()), ds.truth.labels().to_vec()))
}

/// Masking setting dataset: (X, truth labels).
#[pyfunction]
#[pyo3(signature = (id, seed=0))]
fn gen_masking_setting(id: u8, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<u8>)> {
    let ds = core::gen_masking_setting(id, seed).map_err(to_py_err)?;
    Ok((matrix_to_rows(ds.x.values()), ds.truth.labels().to_vec()))
}

#[pymodule]
fn spectralmcd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<DetectResult>()?;
    m.add_class::<PathCell>()?;
    m.add_class::<PathResult>()?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(instability_path, m)?)?;
    m.add_function(wrap_pyfunction!(projection_depths, m)?)?;
    m.add_function(wrap_pyfunction!(fdb, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(gen_highdim, m)?)?;
    m.add_function(wrap_pyfunction!(gen_overdetermined, m)?)?;
    m.add_function(wrap_pyfunction!(gen_masking_setting, m)?)?;
    Ok(())
}
